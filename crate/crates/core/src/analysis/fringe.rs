//! Weighted cosine fit of interference fringes.
//!
//! C(Φ_AS) = A·(1 + V·cos(Φ_S − Φ_AS + φ₀)) + B is linear in
//! (m, a, b) as m + a·cos Φ_AS + b·sin Φ_AS, with m = A + B,
//! a = A·V·cos ψ, b = A·V·sin ψ and ψ = Φ_S + φ₀. Only m, the amplitude
//! and ψ are identifiable, so B must be supplied: zero for raw-count
//! visibility or the measured accidentals for a floor-subtracted one.

use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix3, Vector3};

use super::AnalysisError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FringePoint {
    pub phi_as: f64,
    pub counts: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FringeFit {
    pub visibility: f64,
    pub sigma_visibility: f64,
    /// φ₀ in (−π, π].
    pub phase_offset: f64,
    pub sigma_phase: f64,
    /// A in the fit model.
    pub amplitude: f64,
    pub floor: f64,
    pub residuals: Vec<f64>,
    pub chi2: f64,
    pub dof: usize,
}

impl FringeFit {
    pub fn chi2_per_dof(&self) -> f64 {
        self.chi2 / self.dof as f64
    }
}

fn wrap_pi(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(TAU) - PI;
    if y <= -PI {
        y + TAU
    } else {
        y
    }
}

/// Largest empty arc between the phases, radians.
fn largest_gap(phases: &[f64]) -> f64 {
    let mut p: Vec<f64> = phases.iter().map(|x| x.rem_euclid(TAU)).collect();
    p.sort_by(f64::total_cmp);
    let mut gap = p[0] + TAU - p[p.len() - 1];
    for w in p.windows(2) {
        gap = gap.max(w[1] - w[0]);
    }
    gap
}

/// Fits V and φ₀. `floor` fixes B; `None` means B = 0.
///
/// Weights are 1/σ². When every σ is zero the fit uses unit weights and
/// scales the covariance by the residual variance.
pub fn fit_fringe(points: &[FringePoint], phi_s: f64, floor: Option<f64>) -> Result<FringeFit, AnalysisError> {
    if points.len() < 4 {
        return Err(AnalysisError::FitRank(format!("need at least 4 points, got {}", points.len())));
    }
    let phases: Vec<f64> = points.iter().map(|p| p.phi_as).collect();
    if TAU - largest_gap(&phases) <= PI {
        return Err(AnalysisError::FitRank("phase points must span more than π".into()));
    }
    let all_zero = points.iter().all(|p| p.sigma == 0.0);
    if !all_zero && points.iter().any(|p| !(p.sigma > 0.0)) {
        return Err(AnalysisError::Domain("point uncertainties must all be positive or all zero".into()));
    }
    let mut ata = Matrix3::<f64>::zeros();
    let mut atb = Vector3::<f64>::zeros();
    for p in points {
        let w = if all_zero { 1.0 } else { 1.0 / (p.sigma * p.sigma) };
        let x = Vector3::new(1.0, p.phi_as.cos(), p.phi_as.sin());
        ata += w * x * x.transpose();
        atb += w * p.counts * x;
    }
    let inv = ata
        .try_inverse()
        .ok_or_else(|| AnalysisError::FitRank("normal equations are singular".into()))?;
    let beta = inv * atb;
    let (m, a, b) = (beta[0], beta[1], beta[2]);
    let residuals: Vec<f64> = points
        .iter()
        .map(|p| p.counts - (m + a * p.phi_as.cos() + b * p.phi_as.sin()))
        .collect();
    let dof = points.len() - 3;
    let chi2 = if all_zero {
        residuals.iter().map(|r| r * r).sum::<f64>()
    } else {
        points.iter().zip(&residuals).map(|(p, r)| (r / p.sigma).powi(2)).sum()
    };
    let cov = if all_zero { inv * (chi2 / dof as f64) } else { inv };

    let floor = floor.unwrap_or(0.0);
    let amplitude = m - floor;
    if !(amplitude > 0.0) {
        return Err(AnalysisError::Domain(format!("mean level {m} does not exceed the floor {floor}")));
    }
    let amp = a.hypot(b);
    let visibility = amp / amplitude;
    let psi = b.atan2(a);
    let grad_v = if amp > 0.0 {
        Vector3::new(-visibility / amplitude, a / (amp * amplitude), b / (amp * amplitude))
    } else {
        Vector3::zeros()
    };
    let mut var_v = (grad_v.transpose() * cov * grad_v)[0];
    if amp == 0.0 {
        var_v = 0.5 * (cov[(1, 1)] + cov[(2, 2)]) / (amplitude * amplitude);
    }
    let sigma_phase = if amp > 0.0 {
        let g = Vector3::new(0.0, -b / (amp * amp), a / (amp * amp));
        (g.transpose() * cov * g)[0].max(0.0).sqrt()
    } else {
        PI
    };
    Ok(FringeFit {
        visibility,
        sigma_visibility: var_v.max(0.0).sqrt(),
        phase_offset: wrap_pi(psi - phi_s),
        sigma_phase,
        amplitude,
        floor,
        residuals,
        chi2,
        dof,
    })
}
