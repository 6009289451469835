//! CHSH result types shared by the predictor and the tag analysis.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, SQRT_2};

/// Analyzer phases of a CHSH test, radians. α, α′ belong to the Stokes arm
/// and β, β′ to the anti-Stokes arm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChshAngles {
    pub alpha: f64,
    pub alpha_p: f64,
    pub beta: f64,
    pub beta_p: f64,
}

impl ChshAngles {
    /// α = 0°, α′ = 90°, β = 45°, β′ = 135°.
    pub fn canonical() -> Self {
        Self {
            alpha: 0.0,
            alpha_p: FRAC_PI_2,
            beta: FRAC_PI_4,
            beta_p: 3.0 * FRAC_PI_4,
        }
    }

    /// The four (α, β) pairs in the order S consumes them:
    /// (α,β), (α′,β), (α,β′), (α′,β′).
    pub fn pairs(&self) -> [(f64, f64); 4] {
        [
            (self.alpha, self.beta),
            (self.alpha_p, self.beta),
            (self.alpha, self.beta_p),
            (self.alpha_p, self.beta_p),
        ]
    }
}

/// One correlation E(α, β) with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChshTerm {
    pub alpha: f64,
    pub beta: f64,
    pub e: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChshResult {
    /// Terms in the order (α,β), (α′,β), (α,β′), (α′,β′).
    pub e_values: [ChshTerm; 4],
    pub s: f64,
    pub sigma_s: f64,
    /// (S − 2)/σ_S; infinite when σ_S is zero and S > 2.
    pub significance: f64,
    /// S above the Tsirelson bound 2√2.
    pub unphysical: bool,
}

pub const TSIRELSON: f64 = 2.0 * SQRT_2;

impl ChshResult {
    /// S = E(α,β) + E(α′,β) − E(α,β′) + E(α′,β′).
    pub fn from_terms(e_values: [ChshTerm; 4]) -> Self {
        let [a, b, c, d] = e_values;
        let s = a.e + b.e - c.e + d.e;
        let sigma_s = e_values.iter().map(|t| t.sigma * t.sigma).sum::<f64>().sqrt();
        let significance = if sigma_s > 0.0 {
            (s - 2.0) / sigma_s
        } else if s > 2.0 {
            f64::INFINITY
        } else if s < 2.0 {
            f64::NEG_INFINITY
        } else {
            0.0
        };
        Self {
            e_values,
            s,
            sigma_s,
            significance,
            unphysical: s.abs() > TSIRELSON + 1e-12,
        }
    }
}

/// E(α, β) = V·cos(α − β) for every pair; σ fields are zero.
pub fn chsh_from_visibility(visibility: f64, angles: &ChshAngles) -> ChshResult {
    let terms = angles.pairs().map(|(alpha, beta)| ChshTerm {
        alpha,
        beta,
        e: visibility * (alpha - beta).cos(),
        sigma: 0.0,
    });
    ChshResult::from_terms(terms)
}
