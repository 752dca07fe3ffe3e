//! GMI baseline: the weaker achievable rate from i.i.d. codebooks, computed by
//! maximizing a concave one-dimensional dual expression over s ≥ 0, plus the
//! matched mutual information used as a test oracle.

use crate::channel::{ChannelSpec, DecoderSpec};
use crate::constellation::Constellation;
use crate::discretize::{assemble_problem, DiscreteProblem, Grid};
use crate::error::{Error, Result};

/// Result of the one-dimensional GMI maximization.
#[derive(Debug, Clone)]
pub struct GmiResult {
    pub s_star: f64,
    pub gmi_nats: f64,
    pub gmi_bits: f64,
    /// Number of objective evaluations spent by the search.
    pub evaluations: usize,
}

/// Line-search options for `gmi`.
#[derive(Debug, Clone)]
pub struct GmiSearch {
    pub s_max: f64,
    pub rel_tol: f64,
}

impl Default for GmiSearch {
    fn default() -> Self {
        GmiSearch {
            s_max: 64.0,
            rel_tol: 1e-10,
        }
    }
}

/// Dual objective F(s) = Σ_{i,j} μ_i w_ij [ −s·d_ij − log Σ_k μ_k e^{−s·d_kj} ]
/// in nats, with the inner log-sum computed via max-shift.
pub fn gmi_objective(s: f64, p: &DiscreteProblem) -> f64 {
    let (m, n) = (p.m, p.n);
    let mut total = 0.0;
    for j in 0..n {
        let mut shift = f64::NEG_INFINITY;
        for i in 0..m {
            let e = -s * p.d[i * n + j];
            if e > shift {
                shift = e;
            }
        }
        let mut lse = 0.0;
        for i in 0..m {
            lse += p.mu[i] * (-s * p.d[i * n + j] - shift).exp();
        }
        let log_denominator = shift + lse.ln();
        let mut col = 0.0;
        for i in 0..m {
            col += p.mu[i] * p.w[i * n + j] * (-s * p.d[i * n + j] - log_denominator);
        }
        total += col;
    }
    total
}

/// Maximizes the dual objective over [0, s_max]: a doubling scan brackets the
/// peak, then golden-section refines it (F is concave in s, so the bracketed
/// maximizer is the global one).
pub fn gmi(p: &DiscreteProblem, search: &GmiSearch) -> Result<GmiResult> {
    let mut evaluations = 0;
    let mut eval = |s: f64| {
        evaluations += 1;
        gmi_objective(s, p)
    };

    // doubling scan: walk 0, 1, 2, 4, … until the objective turns over; the
    // peak then lies between the probe before the best one and the turnover
    let fa = eval(0.0);
    let mut lo = 0.0;
    let mut best_probe = 1.0f64.min(search.s_max);
    let mut f_best = eval(best_probe);
    let hi;
    if f_best <= fa {
        hi = best_probe;
        lo = 0.0;
    } else {
        loop {
            if best_probe >= search.s_max {
                return Err(Error::Bracket {
                    s_max: search.s_max,
                });
            }
            let next = (2.0 * best_probe).min(search.s_max);
            let f_next = eval(next);
            if f_next <= f_best {
                hi = next;
                break;
            }
            lo = best_probe;
            best_probe = next;
            f_best = f_next;
        }
    }

    // golden-section on [lo, hi]
    let inv_phi = 0.5 * (5.0f64.sqrt() - 1.0);
    let (mut a, mut c) = (lo, hi);
    let mut x1 = c - inv_phi * (c - a);
    let mut x2 = a + inv_phi * (c - a);
    let mut f1 = eval(x1);
    let mut f2 = eval(x2);
    while c - a > search.rel_tol * (0.5 * (a + c)).max(1.0) {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (c - a);
            f2 = eval(x2);
        } else {
            c = x2;
            x2 = x1;
            f2 = f1;
            x1 = c - inv_phi * (c - a);
            f1 = eval(x1);
        }
    }
    let (mut s_star, mut best) = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
    if best < fa {
        // the supremum includes s = 0, which yields exactly 0
        s_star = 0.0;
        best = fa;
    }
    Ok(GmiResult {
        s_star,
        gmi_nats: best,
        gmi_bits: best / std::f64::consts::LN_2,
        evaluations,
    })
}

/// Mutual information of the discretized matched channel in bits:
/// Σ_{i,j} μ_i w_ij log₂(w_ij / ν_j) on the same renormalized masses as the
/// rate pipeline.
pub fn matched_mutual_information(c: &Constellation, ch: &ChannelSpec, g: &Grid) -> Result<f64> {
    let p = assemble_problem(c, ch, &DecoderSpec::identity(), g)?;
    let mut nats = 0.0;
    for i in 0..p.m {
        for j in 0..p.n {
            let w = p.w[i * p.n + j];
            if w > 0.0 && p.nu[j] > 0.0 {
                nats += p.mu[i] * w * (w / p.nu[j]).ln();
            }
        }
    }
    Ok(nats / std::f64::consts::LN_2)
}
