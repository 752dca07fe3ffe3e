//! Error types shared by all solver and assembly stages.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied parameter is outside its documented domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The truncated output grid captures too little transition mass for one
    /// input point. The grid is too small or the noise too large.
    #[error("truncation error: row {row} captures raw quadrature mass {mass:.6e} < 1 - 1e-6")]
    Truncation { row: usize, mass: f64 },

    /// An iterative routine hit its cap before meeting its tolerance.
    #[error("{what} did not converge within {iterations} iterations")]
    NonConvergence { what: &'static str, iterations: usize },

    /// A scaling-update denominator underflowed to zero while the matching
    /// marginal is positive, so the update is undefined in the standard domain.
    #[error("numerical underflow: {what} sum underflowed to 0 at index {index}")]
    NumericalUnderflow { what: &'static str, index: usize },

    /// The one-dimensional dual objective is still increasing at the end of
    /// the search interval.
    #[error("bracket error: objective still increasing at s_max = {s_max}")]
    Bracket { s_max: f64 },

    /// A coupling entry is more negative than roundoff permits.
    #[error("negative mass: coupling entry ({i}, {j}) = {value:.6e}")]
    NegativeMass { i: usize, j: usize, value: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
