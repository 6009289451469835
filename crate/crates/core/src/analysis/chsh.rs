//! Correlation coefficients and CHSH from coincidence counts.

use std::f64::consts::{PI, TAU};

use crate::chsh::{ChshAngles, ChshResult, ChshTerm};

use super::histogram::CoincidenceData;
use super::AnalysisError;

/// E = (C(α,β) + C(α+π,β+π) − C(α,β+π) − C(α+π,β)) / ΣC, counts in that
/// order. σ = √((1 − E²)/N) from Poisson propagation through the ratio.
pub fn compute_e(counts: [f64; 4]) -> Result<(f64, f64), AnalysisError> {
    if counts.iter().any(|&c| !(c >= 0.0)) {
        return Err(AnalysisError::Domain("counts must be non-negative".into()));
    }
    let n: f64 = counts.iter().sum();
    if n == 0.0 {
        return Err(AnalysisError::UndefinedE);
    }
    let e = (counts[0] + counts[1] - counts[2] - counts[3]) / n;
    Ok((e, ((1.0 - e * e).max(0.0) / n).sqrt()))
}

/// S from four correlation terms ordered (α,β), (α′,β), (α,β′), (α′,β′).
pub fn compute_s(terms: [ChshTerm; 4]) -> ChshResult {
    ChshResult::from_terms(terms)
}

/// Sixteen runs, one per setting (α or α+π or α′ or α′+π) × (β …).
#[derive(Debug, Clone)]
pub struct ChshDataset {
    pub angles: ChshAngles,
    /// (Φ_S, Φ_AS, data) per setting.
    pub settings: Vec<(f64, f64, CoincidenceData)>,
}

fn same_angle(x: f64, y: f64) -> bool {
    let d = (x - y).rem_euclid(TAU);
    d < 1e-9 || TAU - d < 1e-9
}

impl ChshDataset {
    /// Every (Φ_S, Φ_AS) setting the dataset needs.
    pub fn required_settings(angles: &ChshAngles) -> Vec<(f64, f64)> {
        let mut out = Vec::with_capacity(16);
        for a in [angles.alpha, angles.alpha + PI, angles.alpha_p, angles.alpha_p + PI] {
            for b in [angles.beta, angles.beta + PI, angles.beta_p, angles.beta_p + PI] {
                out.push((a.rem_euclid(TAU), b.rem_euclid(TAU)));
            }
        }
        out
    }

    fn find(&self, a: f64, b: f64) -> Result<&CoincidenceData, AnalysisError> {
        self.settings
            .iter()
            .find(|(x, y, _)| same_angle(*x, a) && same_angle(*y, b))
            .map(|(_, _, d)| d)
            .ok_or_else(|| {
                AnalysisError::Domain(format!(
                    "no run for setting Φ_S={:.1}°, Φ_AS={:.1}°",
                    a.to_degrees(),
                    b.to_degrees()
                ))
            })
    }

    /// The four counts entering E(α, β) in the window [lo, hi).
    pub fn e_counts(&self, alpha: f64, beta: f64, lo_ns: i64, hi_ns: i64) -> Result<[f64; 4], AnalysisError> {
        let c = |a: f64, b: f64| self.find(a, b).map(|d| d.window(lo_ns, hi_ns).0 as f64);
        Ok([c(alpha, beta)?, c(alpha + PI, beta + PI)?, c(alpha, beta + PI)?, c(alpha + PI, beta)?])
    }

    pub fn s_in_window(&self, lo_ns: i64, hi_ns: i64) -> Result<ChshResult, AnalysisError> {
        let mut terms = Vec::with_capacity(4);
        for (alpha, beta) in self.angles.pairs() {
            let (e, sigma) = compute_e(self.e_counts(alpha, beta, lo_ns, hi_ns)?)?;
            terms.push(ChshTerm { alpha, beta, e, sigma });
        }
        Ok(compute_s([terms[0], terms[1], terms[2], terms[3]]))
    }

    pub fn s_centered(&self, center_ns: f64, width_ns: u64) -> Result<ChshResult, AnalysisError> {
        let lo = (center_ns - width_ns as f64 / 2.0).floor() as i64;
        self.s_in_window(lo, lo + width_ns as i64)
    }
}
