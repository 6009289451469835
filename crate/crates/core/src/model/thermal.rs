//! Thermal pair-number statistics.

use super::ModelError;

/// P(n) for n = 0..=n_max together with the probability mass beyond n_max.
#[derive(Debug, Clone, PartialEq)]
pub struct ThermalDistribution {
    pub probs: Vec<f64>,
    pub truncated_mass: f64,
}

impl ThermalDistribution {
    pub fn mean(&self) -> f64 {
        self.probs.iter().enumerate().map(|(n, p)| n as f64 * p).sum()
    }

    /// E[n(n-1)] over the retained support.
    pub fn second_factorial_moment(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(n, p)| (n as f64) * (n as f64 - 1.0).max(0.0) * p)
            .sum()
    }
}

/// Thermal (Bose-Einstein) distribution P(n) = mean^n / (1+mean)^(n+1),
/// truncated at `n_max`.
pub fn thermal_distribution(mean: f64, n_max: u32) -> Result<ThermalDistribution, ModelError> {
    if !(mean >= 0.0) || !mean.is_finite() {
        return Err(ModelError::Domain(format!("thermal mean must be >= 0, got {mean}")));
    }
    if n_max < 1 {
        return Err(ModelError::Domain("n_max must be >= 1".into()));
    }
    let ratio = mean / (1.0 + mean);
    let mut probs = Vec::with_capacity(n_max as usize + 1);
    let mut p = 1.0 / (1.0 + mean);
    for _ in 0..=n_max {
        probs.push(p);
        p *= ratio;
    }
    // Tail mass is ratio^(n_max+1); computed directly rather than as 1 - sum.
    let truncated_mass = ratio.powi(n_max as i32 + 1);
    Ok(ThermalDistribution { probs, truncated_mass })
}
