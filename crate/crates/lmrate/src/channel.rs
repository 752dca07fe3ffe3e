//! Rotated/scaled AWGN channel law, the decoder's assumed channel, and the
//! squared-distance decoding metric.
//!
//! The channel is Y = HX + Z with H = diag(η1, η2)·R(θ) and isotropic
//! Gaussian noise of variance σ² per real dimension. The decoder scores
//! candidates with d(x, y) = ‖y − Ĥx‖², where Ĥ is its (possibly wrong)
//! channel estimate.

use crate::error::{Error, Result};

/// The true channel: scaling, rotation, and noise level.
#[derive(Debug, Clone)]
pub struct ChannelSpec {
    pub eta1: f64,
    pub eta2: f64,
    pub theta: f64,
    /// Noise variance per real dimension.
    pub sigma2: f64,
    /// H = diag(η1, η2)·R(θ), fixed at construction.
    pub h: [[f64; 2]; 2],
}

impl ChannelSpec {
    pub fn new(eta1: f64, eta2: f64, theta: f64, sigma2: f64) -> Result<Self> {
        if !(sigma2 > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "noise variance must be positive, got {sigma2}"
            )));
        }
        let h = channel_matrix(eta1, eta2, theta)?;
        Ok(ChannelSpec {
            eta1,
            eta2,
            theta,
            sigma2,
            h,
        })
    }

    /// Channel output mean Hx for input x.
    pub fn apply(&self, x: [f64; 2]) -> [f64; 2] {
        [
            self.h[0][0] * x[0] + self.h[0][1] * x[1],
            self.h[1][0] * x[0] + self.h[1][1] * x[1],
        ]
    }

    /// Transition density W(y|x), an isotropic bivariate Gaussian at Hx.
    pub fn transition_density(&self, x: [f64; 2], y: [f64; 2]) -> f64 {
        transition_density(self, x, y)
    }
}

/// The decoder's assumed channel matrix Ĥ.
#[derive(Debug, Clone)]
pub struct DecoderSpec {
    pub h_hat: [[f64; 2]; 2],
}

impl DecoderSpec {
    /// Decoder that ignores the mismatch entirely (Ĥ = I).
    pub fn identity() -> Self {
        DecoderSpec {
            h_hat: [[1.0, 0.0], [0.0, 1.0]],
        }
    }

    /// Decoder matched to the true channel.
    pub fn matched(ch: &ChannelSpec) -> Self {
        DecoderSpec { h_hat: ch.h }
    }

    pub fn metric(&self, x: [f64; 2], y: [f64; 2]) -> f64 {
        decoding_metric(self, x, y)
    }
}

/// diag(eta1, eta2)·R(theta) with R(θ) = [[cosθ, sinθ], [−sinθ, cosθ]].
pub fn channel_matrix(eta1: f64, eta2: f64, theta: f64) -> Result<[[f64; 2]; 2]> {
    if !(eta1 > 0.0) || !(eta2 > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "scales must be positive, got eta1={eta1}, eta2={eta2}"
        )));
    }
    let (sin, cos) = theta.sin_cos();
    Ok([[eta1 * cos, eta1 * sin], [-eta2 * sin, eta2 * cos]])
}

/// W(y|x) = (2πσ²)^{-1} exp(−‖y − Hx‖² / (2σ²)).
pub fn transition_density(ch: &ChannelSpec, x: [f64; 2], y: [f64; 2]) -> f64 {
    let mean = ch.apply(x);
    let dy0 = y[0] - mean[0];
    let dy1 = y[1] - mean[1];
    let quad = (dy0 * dy0 + dy1 * dy1) / (2.0 * ch.sigma2);
    (-quad).exp() / (2.0 * std::f64::consts::PI * ch.sigma2)
}

/// Noise variance per real dimension from SNR in dB, with SNR = 1/(2σ²).
pub fn sigma_from_snr(snr_db: f64) -> f64 {
    1.0 / (2.0 * 10f64.powf(snr_db / 10.0))
}

/// Decoding metric d(x, y) = ‖y − Ĥx‖².
pub fn decoding_metric(dec: &DecoderSpec, x: [f64; 2], y: [f64; 2]) -> f64 {
    let hx = [
        dec.h_hat[0][0] * x[0] + dec.h_hat[0][1] * x[1],
        dec.h_hat[1][0] * x[0] + dec.h_hat[1][1] * x[1],
    ];
    let d0 = y[0] - hx[0];
    let d1 = y[1] - hx[1];
    d0 * d0 + d1 * d1
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn channel_matrix_identity_and_rotation() {
        let h = channel_matrix(1.0, 1.0, 0.0).unwrap();
        assert_eq!(h, [[1.0, 0.0], [0.0, 1.0]]);

        let h = channel_matrix(1.0, 1.0, PI / 2.0).unwrap();
        assert!((h[0][0]).abs() < 1e-15);
        assert!((h[0][1] - 1.0).abs() < 1e-15);
        assert!((h[1][0] + 1.0).abs() < 1e-15);
        assert!((h[1][1]).abs() < 1e-15);
    }

    #[test]
    fn channel_matrix_mismatch_setting() {
        // (η1, η2, θ) = (1, 0.9, π/18)
        let t = PI / 18.0;
        let h = channel_matrix(1.0, 0.9, t).unwrap();
        assert!((h[0][0] - t.cos()).abs() < 1e-15);
        assert!((h[0][1] - t.sin()).abs() < 1e-15);
        assert!((h[1][0] + 0.9 * t.sin()).abs() < 1e-15);
        assert!((h[1][1] - 0.9 * t.cos()).abs() < 1e-15);
    }

    #[test]
    fn channel_matrix_rejects_nonpositive_scales() {
        assert!(channel_matrix(0.0, 1.0, 0.0).is_err());
        assert!(channel_matrix(1.0, -0.5, 0.0).is_err());
    }

    #[test]
    fn density_peak_and_point_values() {
        let ch = ChannelSpec::new(1.0, 1.0, 0.0, 1.0 / (2.0 * PI)).unwrap();
        let x = [0.3, -0.4];
        let y = ch.apply(x);
        assert!((ch.transition_density(x, y) - 1.0).abs() < 1e-14);

        let ch = ChannelSpec::new(1.0, 1.0, 0.0, 0.5).unwrap();
        let want = (-1.0f64).exp() / PI;
        assert!((ch.transition_density([0.0, 0.0], [1.0, 0.0]) - want).abs() < 1e-15);
    }

    #[test]
    fn density_integrates_to_one() {
        let ch = ChannelSpec::new(1.0, 0.9, PI / 18.0, 0.5).unwrap();
        let x = [0.5, 0.5];
        // fine rectangular quadrature over a wide box
        let half = 8.0;
        let n = 400;
        let dy = 2.0 * half / (n as f64 - 1.0);
        let mut total = 0.0;
        for r in 0..n {
            for s in 0..n {
                let y = [-half + r as f64 * dy, -half + s as f64 * dy];
                total += ch.transition_density(x, y) * dy * dy;
            }
        }
        assert!((total - 1.0).abs() < 1e-6, "mass {total}");
    }

    #[test]
    fn density_symmetric_about_mean() {
        let ch = ChannelSpec::new(1.0, 0.8, PI / 12.0, 0.3).unwrap();
        let x = [0.7, -0.7];
        let mean = ch.apply(x);
        for off in [[0.5, 0.2], [1.1, -0.3], [0.0, 2.0]] {
            let plus = [mean[0] + off[0], mean[1] + off[1]];
            let minus = [mean[0] - off[0], mean[1] - off[1]];
            assert!((ch.transition_density(x, plus) - ch.transition_density(x, minus)).abs() < 1e-16);
        }
    }

    #[test]
    fn snr_conversion() {
        assert!((sigma_from_snr(0.0) - 0.5).abs() < 1e-15);
        assert!((sigma_from_snr(10.0) - 0.05).abs() < 1e-15);
        assert!((sigma_from_snr(3.0103) - 0.25).abs() < 1e-5);
    }

    #[test]
    fn metric_values() {
        let dec = DecoderSpec::identity();
        assert_eq!(dec.metric([0.0, 0.0], [3.0, 4.0]), 25.0);
        assert_eq!(dec.metric([1.5, -2.0], [1.5, -2.0]), 0.0);

        let zero = DecoderSpec {
            h_hat: [[0.0, 0.0], [0.0, 0.0]],
        };
        assert_eq!(zero.metric([9.0, 9.0], [1.0, 1.0]), 2.0);
    }

    #[test]
    fn metric_nonnegative_zero_iff_match() {
        let ch = ChannelSpec::new(1.0, 0.9, PI / 18.0, 0.5).unwrap();
        let dec = DecoderSpec::matched(&ch);
        let x = [0.7, 0.7];
        let hx = ch.apply(x);
        assert_eq!(dec.metric(x, hx), 0.0);
        assert!(dec.metric(x, [hx[0] + 1e-3, hx[1]]) > 0.0);
    }
}
