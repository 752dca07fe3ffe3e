//! Achievable-rate computation for mismatched decoding over a rotated and
//! scaled Gaussian channel.
//!
//! The LM rate — a lower bound on the mismatch capacity — is computed by
//! discretizing the output space and solving a constrained entropic
//! optimal-transport problem: minimize the relative entropy of a coupling
//! against the product of its prescribed marginals, subject to an upper bound
//! on the expected decoding metric. The solver alternates Sinkhorn scaling
//! updates with a Newton root-find on the threshold multiplier. A GMI
//! baseline, a KKT certificate checker, and an independent Dykstra-projection
//! reference solver round out the pipeline.

pub mod channel;
pub mod constellation;
pub mod discretize;
pub mod error;
pub mod gmi;
pub mod sinkhorn;
pub mod verify;

/// Crate version, embedded in report metadata by downstream tools.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use channel::{ChannelSpec, DecoderSpec};
pub use constellation::{Constellation, Scheme};
pub use discretize::{DiscreteProblem, Grid};
pub use error::{Error, Result};
pub use gmi::GmiResult;
pub use sinkhorn::{Residuals, SolveOptions, Solution};
pub use verify::KktReport;
