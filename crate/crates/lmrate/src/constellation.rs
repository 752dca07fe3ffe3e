//! Square QAM input alphabets with uniform priors, normalized so the
//! average symbol power is exactly 1.

use crate::error::{Error, Result};

/// Supported modulation schemes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Qpsk,
    Qam16,
    Qam256,
}

impl Scheme {
    /// Alphabet size M.
    pub fn order(self) -> usize {
        match self {
            Scheme::Qpsk => 4,
            Scheme::Qam16 => 16,
            Scheme::Qam256 => 256,
        }
    }

    /// Parse the scheme names used on the command line.
    pub fn parse(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "qpsk" => Ok(Scheme::Qpsk),
            "qam16" | "16qam" | "16-qam" => Ok(Scheme::Qam16),
            "qam256" | "256qam" | "256-qam" => Ok(Scheme::Qam256),
            other => Err(Error::InvalidArgument(format!(
                "unknown modulation scheme '{other}'"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Qpsk => "qpsk",
            Scheme::Qam16 => "qam16",
            Scheme::Qam256 => "qam256",
        }
    }
}

/// An input alphabet: signal-space points with their prior probabilities.
#[derive(Debug, Clone)]
pub struct Constellation {
    /// Signal points, length M. Ordered row-major over the per-axis level
    /// grid, lowest level first, so indices are reproducible across runs.
    pub points: Vec<[f64; 2]>,
    /// Prior probability of each point, length M. Uniform 1/M.
    pub priors: Vec<f64>,
    pub scheme: Scheme,
}

impl Constellation {
    /// Average symbol power under the priors.
    pub fn power(&self) -> f64 {
        power(self)
    }
}

/// Builds the standard square-grid constellation for `scheme` with uniform
/// priors, scaled by a single scalar so the average power is exactly 1.
pub fn build_constellation(scheme: Scheme) -> Constellation {
    let m = scheme.order();
    let side = (m as f64).sqrt().round() as i64;

    // Per-axis amplitude levels -(side-1), -(side-3), ..., (side-1) before scaling.
    let levels: Vec<f64> = (0..side).map(|k| (2 * k - (side - 1)) as f64).collect();

    // Average power of the unit-level grid; one scalar normalizes it to 1.
    let mean_sq = levels.iter().map(|l| l * l).sum::<f64>() / side as f64;
    let scale = 1.0 / (2.0 * mean_sq).sqrt();

    let mut points = Vec::with_capacity(m);
    for &a in &levels {
        for &b in &levels {
            points.push([a * scale, b * scale]);
        }
    }
    let priors = vec![1.0 / m as f64; m];

    Constellation {
        points,
        priors,
        scheme,
    }
}

/// Average power Σ_i μ_i ‖x_i‖² of an alphabet.
pub fn power(c: &Constellation) -> f64 {
    c.points
        .iter()
        .zip(&c.priors)
        .map(|(x, mu)| mu * (x[0] * x[0] + x[1] * x[1]))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Solves the normalizing scale for a unit-level template directly, as a
    /// check independent of `build_constellation`'s internals.
    fn oracle_scale(levels: &[f64]) -> f64 {
        let m = (levels.len() * levels.len()) as f64;
        let mut total = 0.0;
        for &a in levels {
            for &b in levels {
                total += a * a + b * b;
            }
        }
        // (1/M) Σ s²‖x̂‖² = 1  =>  s = sqrt(M / Σ‖x̂‖²)
        (m / total).sqrt()
    }

    #[test]
    fn qpsk_points_and_scale() {
        let c = build_constellation(Scheme::Qpsk);
        assert_eq!(c.points.len(), 4);
        let s = oracle_scale(&[-1.0, 1.0]);
        assert!((s - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        let expect = 0.5f64.sqrt();
        for p in &c.points {
            assert!((p[0].abs() - expect).abs() < 1e-15);
            assert!((p[1].abs() - expect).abs() < 1e-15);
        }
        // all four sign combinations present
        let signs: Vec<(bool, bool)> = c.points.iter().map(|p| (p[0] > 0.0, p[1] > 0.0)).collect();
        for want in [(false, false), (false, true), (true, false), (true, true)] {
            assert!(signs.contains(&want));
        }
        assert!(c.priors.iter().all(|&mu| mu == 0.25));
    }

    #[test]
    fn qam16_levels_and_bounds() {
        let c = build_constellation(Scheme::Qam16);
        assert_eq!(c.points.len(), 16);
        let s = oracle_scale(&[-3.0, -1.0, 1.0, 3.0]);
        assert!((s - 1.0 / 10f64.sqrt()).abs() < 1e-15);
        let max_coord = c
            .points
            .iter()
            .flat_map(|p| p.iter())
            .fold(0.0f64, |acc, &v| acc.max(v.abs()));
        assert!((max_coord - 3.0 / 10f64.sqrt()).abs() < 1e-12);
        assert!(max_coord <= 1.0);
    }

    #[test]
    fn all_schemes_unit_power_and_normalized_priors() {
        for scheme in [Scheme::Qpsk, Scheme::Qam16, Scheme::Qam256] {
            let c = build_constellation(scheme);
            assert_eq!(c.points.len(), scheme.order());
            assert!((power(&c) - 1.0).abs() < 1e-12, "{scheme:?}");
            let prior_sum: f64 = c.priors.iter().sum();
            assert!((prior_sum - 1.0).abs() < 1e-12);
            assert!(c.priors.iter().all(|&mu| mu > 0.0));
        }
    }

    #[test]
    fn points_distinct_and_negation_symmetric() {
        for scheme in [Scheme::Qpsk, Scheme::Qam16, Scheme::Qam256] {
            let c = build_constellation(scheme);
            for (i, p) in c.points.iter().enumerate() {
                for q in &c.points[i + 1..] {
                    assert!(p[0] != q[0] || p[1] != q[1]);
                }
                let neg = [-p[0], -p[1]];
                assert!(
                    c.points
                        .iter()
                        .any(|q| (q[0] - neg[0]).abs() < 1e-15 && (q[1] - neg[1]).abs() < 1e-15),
                    "no negation partner for {p:?} in {scheme:?}"
                );
            }
        }
    }

    #[test]
    fn qpsk_and_qam16_inside_unit_box() {
        for scheme in [Scheme::Qpsk, Scheme::Qam16] {
            let c = build_constellation(scheme);
            for p in &c.points {
                assert!(p[0].abs() <= 1.0 && p[1].abs() <= 1.0);
            }
        }
    }

    #[test]
    fn power_hand_cases() {
        let single = Constellation {
            points: vec![[0.0, 0.0]],
            priors: vec![1.0],
            scheme: Scheme::Qpsk,
        };
        assert_eq!(power(&single), 0.0);

        let two = Constellation {
            points: vec![[1.0, 0.0], [0.0, 1.0]],
            priors: vec![0.5, 0.5],
            scheme: Scheme::Qpsk,
        };
        assert_eq!(power(&two), 1.0);
    }

    #[test]
    fn point_order_is_row_major_lowest_first() {
        let c = build_constellation(Scheme::Qam16);
        let lo = -3.0 / 10f64.sqrt();
        assert!((c.points[0][0] - lo).abs() < 1e-15);
        assert!((c.points[0][1] - lo).abs() < 1e-15);
        // second point advances the second axis only
        assert!((c.points[1][0] - lo).abs() < 1e-15);
        assert!(c.points[1][1] > c.points[0][1]);
    }
}
