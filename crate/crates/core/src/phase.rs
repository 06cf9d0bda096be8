//! Phase alignment: fit `V(χ) = V₀·cos(χ − χ₀)` to a sparse visibility scan
//! over the pump phase and pick the pump setting for a wanted Bell state.
//!
//! The model is linear in `A = V₀ cos χ₀`, `B = V₀ sin χ₀`, so the least-squares
//! problem is solved exactly by a 2×2 normal-equation solve.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{analysis, Result};
use crate::polarization::BellLabel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisibilityPoint {
    #[serde(rename = "pump_phase_rad")]
    pub pump_phase: f64,
    pub visibility: f64,
    /// Standard deviation of `visibility`; zero or negative means unknown.
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CosineFit {
    pub v0: f64,
    /// Pump phase of maximum visibility in `[0, 2π)`; meaningless when
    /// `phase_defined` is false.
    pub phi0: f64,
    pub phase_defined: bool,
    /// Covariance of `(v0, phi0)`.
    pub covariance: [[f64; 2]; 2],
    pub residual_rms: f64,
}

impl CosineFit {
    pub fn v0_sigma(&self) -> f64 {
        self.covariance[0][0].sqrt()
    }

    pub fn phi0_sigma(&self) -> f64 {
        self.covariance[1][1].sqrt()
    }

    pub fn evaluate(&self, chi: f64) -> f64 {
        self.v0 * (chi - self.phi0).cos()
    }
}

/// Weighted linear least squares on the `(cos χ, sin χ)` basis.
///
/// Weights are `1/σ²` when every point carries a positive σ; otherwise the
/// fit is unweighted and the covariance is scaled by the residual variance.
pub fn fit_cosine(points: &[VisibilityPoint]) -> Result<CosineFit> {
    if points.len() < 3 {
        return analysis(format!("need at least 3 scan points, got {}", points.len()));
    }
    if points
        .iter()
        .any(|p| !p.pump_phase.is_finite() || !p.visibility.is_finite() || p.visibility.abs() > 1.0)
    {
        return analysis("scan points need finite phases and |visibility| ≤ 1");
    }
    let weighted = points.iter().all(|p| p.sigma > 0.0);
    let weight = |p: &VisibilityPoint| if weighted { 1.0 / (p.sigma * p.sigma) } else { 1.0 };

    let (mut cc, mut cs, mut ss, mut cv, mut sv) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for p in points {
        let w = weight(p);
        let (s, c) = p.pump_phase.sin_cos();
        cc += w * c * c;
        cs += w * c * s;
        ss += w * s * s;
        cv += w * c * p.visibility;
        sv += w * s * p.visibility;
    }
    let det = cc * ss - cs * cs;
    let scale = (cc + ss) * (cc + ss);
    if !(det > 1e-12 * scale) {
        return analysis("degenerate scan: phases are congruent modulo π");
    }
    let a = (ss * cv - cs * sv) / det;
    let b = (cc * sv - cs * cv) / det;

    let rss_weighted: f64 = points
        .iter()
        .map(|p| {
            let (s, c) = p.pump_phase.sin_cos();
            weight(p) * (p.visibility - a * c - b * s).powi(2)
        })
        .sum();
    let residual_rms = (points
        .iter()
        .map(|p| {
            let (s, c) = p.pump_phase.sin_cos();
            (p.visibility - a * c - b * s).powi(2)
        })
        .sum::<f64>()
        / points.len() as f64)
        .sqrt();

    // (XᵀWX)⁻¹, scaled by the residual variance for unweighted fits
    let dof = (points.len() - 2) as f64;
    let k = if weighted {
        1.0
    } else if dof > 0.0 {
        rss_weighted / dof
    } else {
        0.0
    };
    let cov_ab = [[k * ss / det, -k * cs / det], [-k * cs / det, k * cc / det]];

    let v0 = a.hypot(b);
    if v0 <= 1e-15 {
        return Ok(CosineFit {
            v0: 0.0,
            phi0: 0.0,
            phase_defined: false,
            covariance: [[(cov_ab[0][0] + cov_ab[1][1]) / 2.0, 0.0], [0.0, 0.0]],
            residual_rms,
        });
    }
    let phi0 = b.atan2(a).rem_euclid(TAU);
    let phi0 = if phi0 >= TAU { 0.0 } else { phi0 };

    // first-order propagation through (A, B) -> (V₀, χ₀)
    let jac = [[a / v0, b / v0], [-b / (v0 * v0), a / (v0 * v0)]];
    let mut covariance = [[0.0; 2]; 2];
    for (i, row) in covariance.iter_mut().enumerate() {
        for (j, out) in row.iter_mut().enumerate() {
            *out = (0..2)
                .flat_map(|m| (0..2).map(move |n| (m, n)))
                .map(|(m, n)| jac[i][m] * cov_ab[m][n] * jac[j][n])
                .sum();
        }
    }

    Ok(CosineFit {
        v0,
        phi0,
        phase_defined: true,
        covariance,
        residual_rms,
    })
}

/// Pump phase at which the fitted source emits `target`.
///
/// The state phase is `φ = χ − χ₀`, so Ψ⁺ sits at the visibility maximum and
/// Ψ⁻ at the minimum.
pub fn target_setting(fit: &CosineFit, target: BellLabel) -> Result<f64> {
    if !fit.phase_defined || !(fit.v0 > 0.0) {
        return analysis("fitted amplitude is zero; the state phase is unobservable");
    }
    let chi = (fit.phi0 + target.phase()).rem_euclid(TAU);
    Ok(if chi >= TAU { 0.0 } else { chi })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn points(v0: f64, phi0: f64, phases: &[f64]) -> Vec<VisibilityPoint> {
        phases
            .iter()
            .map(|&x| VisibilityPoint {
                pump_phase: x,
                visibility: v0 * (x - phi0).cos(),
                sigma: 0.05,
            })
            .collect()
    }

    #[test]
    fn exact_recovery_from_three_points() {
        let fit = fit_cosine(&points(0.84, 0.0, &[0.3, 1.9, 4.0])).unwrap();
        assert!((fit.v0 - 0.84).abs() < 1e-9);
        let d = fit.phi0.min(TAU - fit.phi0);
        assert!(d < 1e-9);
        assert!(fit.residual_rms < 1e-12);
    }

    #[test]
    fn zero_visibilities_leave_phase_undefined() {
        let fit = fit_cosine(&points(0.0, 0.0, &[0.0, 2.0, 4.0])).unwrap();
        assert_eq!(fit.v0, 0.0);
        assert!(!fit.phase_defined);
        assert!(target_setting(&fit, BellLabel::psi_minus()).is_err());
    }

    #[test]
    fn rejects_degenerate_inputs() {
        assert!(fit_cosine(&points(0.8, 0.0, &[0.0, 1.0])).is_err());
        assert!(fit_cosine(&points(0.8, 0.0, &[0.5, 0.5 + PI, 0.5 + 2.0 * PI])).is_err());
        let mut bad = points(0.8, 0.0, &[0.0, 1.0, 2.0]);
        bad[1].visibility = 1.5;
        assert!(fit_cosine(&bad).is_err());
    }

    #[test]
    fn target_settings() {
        let fit = CosineFit {
            v0: 0.84,
            phi0: 0.0,
            phase_defined: true,
            covariance: [[0.0; 2]; 2],
            residual_rms: 0.0,
        };
        assert!((target_setting(&fit, BellLabel::psi_minus()).unwrap() - PI).abs() < 1e-12);
        let fit = CosineFit { phi0: 1.0, ..fit };
        assert!((target_setting(&fit, BellLabel::psi_plus()).unwrap() - 1.0).abs() < 1e-12);
        let fit = CosineFit { phi0: 4.0, ..fit };
        assert!((target_setting(&fit, BellLabel::psi_minus()).unwrap() - (4.0 + PI - TAU)).abs() < 1e-12);
    }

    #[test]
    fn unweighted_fit_uses_residual_variance() {
        let mut pts = points(0.5, 1.0, &[0.0, 1.0, 2.0, 3.0, 4.0]);
        for p in &mut pts {
            p.sigma = 0.0;
        }
        pts[2].visibility += 0.02;
        let fit = fit_cosine(&pts).unwrap();
        assert!(fit.residual_rms > 0.0);
        assert!(fit.covariance[0][0] > 0.0);
    }
}
