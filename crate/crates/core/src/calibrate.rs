//! Fits the two phenomenological knobs to target outcomes.
//!
//! `antistokes_noise_per_us` is bisected so that the predicted g² in the
//! window centred on τ_MC hits a target (analyzers removed), and the mode
//! overlap µ so that the raw central-window visibility hits a target.
//! Both predictions are monotone in their knob.

use thiserror::Error;

use crate::config::{validate_config, BasisOverlap, ExperimentConfig};
use crate::model::predict::{raw_visibility, Predictor};
use crate::model::{ModelError, ModelOptions};

#[derive(Debug, Error)]
pub enum CalibrationError {
    #[error("calibration infeasible: {0}")]
    Infeasible(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

const REL_TOL: f64 = 1e-12;
const MAX_ITER: usize = 300;

fn g2_with_noise(cfg: &ExperimentConfig, noise: f64, opts: &ModelOptions) -> Result<f64, ModelError> {
    let mut c = cfg.without_analyzers();
    c.antistokes_noise_per_us = noise;
    Predictor::new(&c, opts)?
        .window_terms(c.tau_mc.as_ns_f64(), opts.window.as_ns())
        .g2()
}

/// Noise density (per µs) giving `target` g² at the τ_MC window.
pub fn calibrate_noise(cfg: &ExperimentConfig, target: f64, opts: &ModelOptions) -> Result<f64, CalibrationError> {
    let g0 = g2_with_noise(cfg, 0.0, opts)?;
    if (target - g0).abs() <= 1e-9 * g0 {
        return Ok(0.0);
    }
    if target > g0 {
        return Err(CalibrationError::Infeasible(format!(
            "target g2 {target} exceeds the noiseless value {g0:.4}"
        )));
    }
    if !(target > 1.0) {
        return Err(CalibrationError::Infeasible(format!("target g2 {target} must exceed 1")));
    }
    let mut lo = 0.0;
    let mut hi = 1e-6;
    while g2_with_noise(cfg, hi, opts)? > target {
        lo = hi;
        hi *= 2.0;
        if hi > 1e6 {
            return Err(CalibrationError::Infeasible("noise bracket diverged".into()));
        }
    }
    for _ in 0..MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if g2_with_noise(cfg, mid, opts)? > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= REL_TOL * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Overlap µ (applied through `set`) giving raw visibility `target` in the
/// Φ_S basis. µ is capped where the joint path table stays valid.
pub fn calibrate_overlap(
    cfg: &ExperimentConfig,
    phi_s: f64,
    target: f64,
    opts: &ModelOptions,
    set: impl Fn(&mut ExperimentConfig, f64),
) -> Result<f64, CalibrationError> {
    let vis = |mu: f64| -> Result<f64, ModelError> {
        let mut c = cfg.clone();
        set(&mut c, mu);
        Ok(raw_visibility(&c, phi_s, opts)?.0)
    };
    if !(target >= 0.0) {
        return Err(CalibrationError::Infeasible(format!("visibility {target} below 0")));
    }
    let valid = |mu: f64| {
        let mut c = cfg.clone();
        set(&mut c, mu);
        validate_config(&c).is_empty()
    };
    let mut mu_max = 1.0;
    if !valid(mu_max) {
        let (mut a, mut b) = (0.0, 1.0);
        if !valid(0.0) {
            return Err(CalibrationError::Model(ModelError::Config(crate::config::ConfigError::Invalid(
                validate_config(cfg),
            ))));
        }
        for _ in 0..100 {
            let m = 0.5 * (a + b);
            if valid(m) {
                a = m;
            } else {
                b = m;
            }
        }
        mu_max = a;
    }
    let v_max = vis(mu_max)?;
    if target > v_max * (1.0 + 1e-12) {
        return Err(CalibrationError::Infeasible(format!(
            "visibility {target} exceeds the reachable maximum {v_max:.4} at mode_overlap {mu_max:.4}"
        )));
    }
    let (mut lo, mut hi) = (0.0, mu_max);
    for _ in 0..MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if vis(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= REL_TOL {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// What to fit.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CalibrationTargets {
    pub g2: Option<f64>,
    /// Global raw visibility, fitted in the Φ_S = 0 basis.
    pub visibility: Option<f64>,
    /// Per-basis raw visibilities, (Φ_S in degrees, V).
    pub basis_visibilities: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationReport {
    pub config: ExperimentConfig,
    pub antistokes_noise_per_us: Option<f64>,
    pub mode_overlap: Option<f64>,
    pub basis_overlaps: Vec<BasisOverlap>,
}

pub fn calibrate(
    cfg: &ExperimentConfig,
    targets: &CalibrationTargets,
    opts: &ModelOptions,
) -> Result<CalibrationReport, CalibrationError> {
    let mut out = cfg.clone();
    let mut report = CalibrationReport {
        config: cfg.clone(),
        antistokes_noise_per_us: None,
        mode_overlap: None,
        basis_overlaps: Vec::new(),
    };
    if let Some(g) = targets.g2 {
        let noise = calibrate_noise(&out, g, opts)?;
        out.antistokes_noise_per_us = noise;
        report.antistokes_noise_per_us = Some(noise);
    }
    let needs_analyzers = targets.visibility.is_some() || !targets.basis_visibilities.is_empty();
    if needs_analyzers && (out.analyzer_s.is_none() || out.analyzer_as.is_none()) {
        return Err(CalibrationError::Model(ModelError::NoAnalyzers));
    }
    if let Some(v) = targets.visibility {
        // Fit the global value with the basis table out of the way.
        let saved = std::mem::take(&mut out.basis_overlaps);
        let mu = calibrate_overlap(&out, 0.0, v, opts, |c, mu| c.mode_overlap = mu)?;
        out.mode_overlap = mu;
        out.basis_overlaps = saved;
        report.mode_overlap = Some(mu);
    }
    for &(deg, v) in &targets.basis_visibilities {
        let idx = match out.basis_overlaps.iter().position(|b| (b.phi_s_deg - deg).abs() < 1e-9) {
            Some(i) => i,
            None => {
                out.basis_overlaps.push(BasisOverlap { phi_s_deg: deg, mode_overlap: out.mode_overlap });
                out.basis_overlaps.len() - 1
            }
        };
        let mu = calibrate_overlap(&out, deg.to_radians(), v, opts, |c, mu| c.basis_overlaps[idx].mode_overlap = mu)?;
        out.basis_overlaps[idx].mode_overlap = mu;
        report.basis_overlaps.push(out.basis_overlaps[idx].clone());
    }
    report.config = out;
    Ok(report)
}
