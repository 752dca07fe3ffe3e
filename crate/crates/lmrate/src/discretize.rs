//! Output-space discretization: a uniform square grid over [−B, B]² and the
//! assembly of the finite transport problem (transition matrix, output
//! marginal, metric matrix, threshold) from a constellation, channel, and
//! decoder.

use crate::channel::{decoding_metric, transition_density, ChannelSpec, DecoderSpec};
use crate::constellation::Constellation;
use crate::error::{Error, Result};

/// Maximum probability mass the grid may lose to truncation per input symbol.
const TRUNCATION_TOL: f64 = 1e-6;

/// Uniform N-point square grid over [−B, B]², side √N points per axis.
#[derive(Debug, Clone)]
pub struct Grid {
    pub half_width: f64,
    pub side: usize,
    pub delta: f64,
    /// Row-major: points[a·side + b] = (−B + aΔ, −B + bΔ).
    pub points: Vec<[f64; 2]>,
}

impl Grid {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Builds the grid; `n` must be a perfect square with at least 2 points per axis.
pub fn build_grid(half_width: f64, n: usize) -> Result<Grid> {
    if !(half_width > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "grid half-width must be positive, got {half_width}"
        )));
    }
    let side = (n as f64).sqrt().round() as usize;
    if side * side != n {
        return Err(Error::InvalidArgument(format!(
            "grid size must be a perfect square, got {n}"
        )));
    }
    if side < 2 {
        return Err(Error::InvalidArgument(format!(
            "grid needs at least 2 points per axis, got {n} total"
        )));
    }
    let delta = 2.0 * half_width / (side as f64 - 1.0);
    let mut points = Vec::with_capacity(n);
    for a in 0..side {
        let y0 = -half_width + a as f64 * delta;
        for b in 0..side {
            let y1 = -half_width + b as f64 * delta;
            points.push([y0, y1]);
        }
    }
    Ok(Grid {
        half_width,
        side,
        delta,
        points,
    })
}

/// The discretized problem: everything the solvers need, in dense row-major
/// M×N matrices.
#[derive(Debug, Clone)]
pub struct DiscreteProblem {
    pub m: usize,
    pub n: usize,
    /// Input distribution, length M.
    pub mu: Vec<f64>,
    /// Row-stochastic transition matrix W(y_j | x_i)Δ², renormalized, M×N.
    pub w: Vec<f64>,
    /// Output marginal ν_j = Σ_i μ_i w_ij, length N.
    pub nu: Vec<f64>,
    /// Decoding metric d_ij = ‖y_j − Ĥx_i‖², M×N.
    pub d: Vec<f64>,
    /// Constraint threshold T = Σ_ij μ_i w_ij d_ij.
    pub threshold: f64,
}

/// Assembles the finite problem on the given grid.
///
/// Each transition row is renormalized to sum exactly to one; if the raw grid
/// mass of any row falls below 1 − 1e-6 the grid is considered too narrow and
/// assembly fails rather than silently redistributing tail mass.
pub fn assemble_problem(
    cons: &Constellation,
    ch: &ChannelSpec,
    dec: &DecoderSpec,
    grid: &Grid,
) -> Result<DiscreteProblem> {
    let m = cons.points.len();
    let n = grid.len();
    let cell = grid.delta * grid.delta;

    let mut w = vec![0.0; m * n];
    let mut d = vec![0.0; m * n];
    for (i, &x) in cons.points.iter().enumerate() {
        let row = &mut w[i * n..(i + 1) * n];
        let mut mass = 0.0;
        for (j, &y) in grid.points.iter().enumerate() {
            let p = transition_density(ch, x, y) * cell;
            row[j] = p;
            mass += p;
        }
        if mass < 1.0 - TRUNCATION_TOL {
            return Err(Error::Truncation { row: i, mass });
        }
        for v in row.iter_mut() {
            *v /= mass;
        }
        for (j, &y) in grid.points.iter().enumerate() {
            d[i * n + j] = decoding_metric(dec, x, y);
        }
    }

    let mut nu = vec![0.0; n];
    for i in 0..m {
        let mu_i = cons.priors[i];
        for j in 0..n {
            nu[j] += mu_i * w[i * n + j];
        }
    }

    let mut threshold = 0.0;
    for i in 0..m {
        let mu_i = cons.priors[i];
        for j in 0..n {
            threshold += mu_i * w[i * n + j] * d[i * n + j];
        }
    }

    Ok(DiscreteProblem {
        m,
        n,
        mu: cons.priors.clone(),
        w,
        nu,
        d,
        threshold,
    })
}
