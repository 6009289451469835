//! Experiment configuration, validation and the detuning-to-phase map.

use std::f64::consts::TAU;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::units::Nanos;

/// Canonical configuration mirroring the published setup (transparency
/// windows in the filter crystal, no analyzers).
pub const PAPER_DEFAULTS_TOML: &str = include_str!("../../../configs/paper-defaults.toml");
/// Same setup with AFC time-bin analyzers in both arms; one global mode overlap.
pub const PAPER_ANALYZERS_TOML: &str = include_str!("../../../configs/paper-analyzers.toml");
/// Analyzer setup with a per-basis mode overlap table (Φ_S = 0° and 90°).
pub const PAPER_FRINGE_TOML: &str = include_str!("../../../configs/paper-fringe.toml");

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid analyzer: {0}")]
    InvalidAnalyzer(String),
    #[error("failed to read config {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to parse config: {0}")]
    Parse(String),
    #[error("config is invalid:\n{}", format_violations(.0))]
    Invalid(Vec<Violation>),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter().map(|v| format!("  - {v}")).collect::<Vec<_>>().join("\n")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecayForm {
    Gaussian,
    Exponential,
}

/// Decay of the readout efficiency with spin storage time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpinDecoherence {
    pub form: DecayForm,
    pub time_constant: Nanos,
}

impl SpinDecoherence {
    /// Surviving fraction after storing for `storage_ns`.
    pub fn factor(&self, storage_ns: f64) -> f64 {
        let x = storage_ns / self.time_constant.as_ns_f64();
        match self.form {
            DecayForm::Gaussian => (-x * x).exp(),
            DecayForm::Exponential => (-x).exp(),
        }
    }
}

/// Structured background in the anti-Stokes arm (write-pulse echo leakage).
/// `center` and `width` are anti-Stokes arrival times after the read pulse;
/// `rate` is the expected number of detected counts per read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeakagePeak {
    pub center: Nanos,
    pub width: Nanos,
    pub rate: f64,
}

/// Temporal envelope ρ(T_S) across the Stokes modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "shape", rename_all = "lowercase", deny_unknown_fields)]
pub enum Envelope {
    #[default]
    Uniform,
    Exponential { decay: Nanos },
}

/// One AFC time-bin analyzer in the filter crystal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzerSetting {
    /// AFC storage time: separation of the early and late bins.
    pub tau_ifc: Nanos,
    /// Early-bin (transmission) probability.
    pub eta_transmit: f64,
    /// Late-bin (echo) probability.
    pub eta_echo: f64,
    /// Comb tooth spacing in MHz.
    pub comb_spacing: f64,
    /// Comb centre offset in MHz; sets the analyzer phase.
    pub detuning: f64,
}

impl AnalyzerSetting {
    pub fn phase(&self) -> Result<f64, ConfigError> {
        phase_from_detuning(self)
    }

    /// Detuning that produces `phase` radians on this comb.
    pub fn detuning_for_phase(&self, phase: f64) -> f64 {
        phase.rem_euclid(TAU) / TAU * self.comb_spacing
    }

    pub fn loss(&self) -> f64 {
        1.0 - self.eta_transmit - self.eta_echo
    }
}

/// Mode overlap override for one measurement basis, keyed by Φ_S.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisOverlap {
    pub phi_s_deg: f64,
    pub mode_overlap: f64,
}

/// Every physical and protocol parameter of one experiment.
///
/// Durations are written in µs in config files. Probabilities are fractions
/// except `p_s_per_us`, which is in percent per µs as it is quoted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub tau_mc: Nanos,
    pub stokes_window_start: Nanos,
    pub stokes_window_length: Nanos,
    pub write_fwhm: Nanos,
    pub n_temporal_modes: u32,
    pub read_delay: Nanos,
    pub antistokes_gate_length: Nanos,
    /// Genuine Stokes creation probability density, %/µs.
    pub p_s_per_us: f64,
    /// Uncorrelated Stokes-arm background per trial (creation-level).
    pub p_s_background: f64,
    pub readout_efficiency: f64,
    pub spin_decoherence: SpinDecoherence,
    /// Detected anti-Stokes background density per µs of gate.
    pub antistokes_noise_per_us: f64,
    #[serde(default)]
    pub leakage_peaks: Vec<LeakagePeak>,
    pub detector_efficiency_s: f64,
    pub detector_efficiency_as: f64,
    pub transmission_s: f64,
    pub transmission_as: f64,
    #[serde(default)]
    pub analyzer_s: Option<AnalyzerSetting>,
    #[serde(default)]
    pub analyzer_as: Option<AnalyzerSetting>,
    pub mode_overlap: f64,
    #[serde(default)]
    pub basis_overlaps: Vec<BasisOverlap>,
    #[serde(default)]
    pub envelope: Envelope,
    /// Write-pulse repetition rate, kHz.
    pub rep_rate: f64,
    pub trials_per_prep: u32,
    #[serde(default = "default_n_unconditional")]
    pub n_unconditional: u32,
    /// Replace photon pairs by independent thermal singles.
    #[serde(default)]
    pub classical_baseline: bool,
    pub rng_seed: u64,
}

fn default_n_unconditional() -> u32 {
    10
}

/// One broken invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl Violation {
    fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, ConfigError> {
        toml::from_str(s).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn paper_defaults() -> Self {
        Self::from_toml_str(PAPER_DEFAULTS_TOML).expect("shipped paper-defaults parses")
    }

    pub fn paper_with_analyzers() -> Self {
        Self::from_toml_str(PAPER_ANALYZERS_TOML).expect("shipped paper-analyzers parses")
    }

    pub fn paper_fringe() -> Self {
        Self::from_toml_str(PAPER_FRINGE_TOML).expect("shipped paper-fringe parses")
    }

    /// SHA-256 of the canonical TOML serialisation.
    pub fn hash(&self) -> [u8; 32] {
        let digest = Sha256::digest(self.to_toml_string().as_bytes());
        let mut out = [0u8; 32];
        out.copy_from_slice(&digest);
        out
    }

    pub fn hash_hex(&self) -> String {
        hex::encode(self.hash())
    }

    /// Validates and returns the config, or every violation found.
    pub fn validated(self) -> Result<Self, ConfigError> {
        let v = validate_config(&self);
        if v.is_empty() {
            Ok(self)
        } else {
            Err(ConfigError::Invalid(v))
        }
    }

    pub fn stokes_window_end(&self) -> Nanos {
        Nanos(self.stokes_window_start.0 + self.stokes_window_length.0)
    }

    /// Genuine Stokes creation probability per trial (fraction).
    pub fn genuine_stokes_probability(&self) -> f64 {
        self.p_s_per_us / 100.0 * self.stokes_window_length.as_micros()
    }

    pub fn has_analyzers(&self) -> bool {
        self.analyzer_s.is_some() || self.analyzer_as.is_some()
    }

    /// Mode overlap in effect for a Stokes analyzer phase `phi_s` (radians).
    /// Per-basis entries match Φ_S modulo π.
    pub fn overlap_for_basis(&self, phi_s: f64) -> f64 {
        for b in &self.basis_overlaps {
            let d = (phi_s - b.phi_s_deg.to_radians()).rem_euclid(std::f64::consts::PI);
            if d < 1e-6 || std::f64::consts::PI - d < 1e-6 {
                return b.mode_overlap;
            }
        }
        self.mode_overlap
    }

    /// Returns a copy with analyzer phases set by adjusting the comb detunings.
    pub fn with_phases(&self, phi_s: Option<f64>, phi_as: Option<f64>) -> Self {
        let mut cfg = self.clone();
        if let (Some(p), Some(a)) = (phi_s, cfg.analyzer_s.as_mut()) {
            a.detuning = a.detuning_for_phase(p);
        }
        if let (Some(p), Some(a)) = (phi_as, cfg.analyzer_as.as_mut()) {
            a.detuning = a.detuning_for_phase(p);
        }
        cfg
    }

    pub fn without_analyzers(&self) -> Self {
        let mut cfg = self.clone();
        cfg.analyzer_s = None;
        cfg.analyzer_as = None;
        cfg
    }
}

/// Analyzer phase: 2π·detuning/comb_spacing reduced to [0, 2π).
pub fn phase_from_detuning(a: &AnalyzerSetting) -> Result<f64, ConfigError> {
    if !(a.comb_spacing > 0.0) || !a.comb_spacing.is_finite() {
        return Err(ConfigError::InvalidAnalyzer(format!(
            "comb_spacing must be > 0, got {}",
            a.comb_spacing
        )));
    }
    let turns = (a.detuning / a.comb_spacing).rem_euclid(1.0);
    let phase = TAU * turns;
    Ok(if phase >= TAU { 0.0 } else { phase })
}

fn check_prob(out: &mut Vec<Violation>, field: &str, p: f64) {
    if !(0.0..=1.0).contains(&p) {
        out.push(Violation::new(field, format!("probability {p} outside [0,1]")));
    }
}

fn check_positive(out: &mut Vec<Violation>, field: &str, d: Nanos) {
    if d.0 == 0 {
        out.push(Violation::new(field, "duration must be > 0"));
    }
}

fn check_rate(out: &mut Vec<Violation>, field: &str, r: f64) {
    if !(r >= 0.0) || !r.is_finite() {
        out.push(Violation::new(field, format!("rate {r} must be finite and >= 0")));
    }
}

fn check_analyzer(out: &mut Vec<Violation>, name: &str, a: &AnalyzerSetting) {
    check_prob(out, &format!("{name}.eta_transmit"), a.eta_transmit);
    check_prob(out, &format!("{name}.eta_echo"), a.eta_echo);
    if a.eta_transmit + a.eta_echo > 1.0 + 1e-12 {
        out.push(Violation::new(name, "eta_transmit+eta_echo>1"));
    }
    check_positive(out, &format!("{name}.tau_ifc"), a.tau_ifc);
    if !(a.comb_spacing > 0.0) {
        out.push(Violation::new(format!("{name}.comb_spacing"), "comb_spacing must be > 0"));
    }
    if !a.detuning.is_finite() {
        out.push(Violation::new(format!("{name}.detuning"), "detuning must be finite"));
    }
}

/// Lists every invariant the config breaks; empty means valid.
pub fn validate_config(cfg: &ExperimentConfig) -> Vec<Violation> {
    let mut out = Vec::new();
    check_positive(&mut out, "tau_mc", cfg.tau_mc);
    check_positive(&mut out, "stokes_window_start", cfg.stokes_window_start);
    check_positive(&mut out, "stokes_window_length", cfg.stokes_window_length);
    check_positive(&mut out, "write_fwhm", cfg.write_fwhm);
    check_positive(&mut out, "read_delay", cfg.read_delay);
    check_positive(&mut out, "antistokes_gate_length", cfg.antistokes_gate_length);
    check_positive(&mut out, "spin_decoherence.time_constant", cfg.spin_decoherence.time_constant);
    if cfg.n_temporal_modes < 1 {
        out.push(Violation::new("n_temporal_modes", "need at least one temporal mode"));
    }
    if cfg.stokes_window_end() > cfg.tau_mc {
        out.push(Violation::new(
            "stokes_window_length",
            "Stokes gate overlaps memory echo",
        ));
    }
    if cfg.read_delay < cfg.stokes_window_end() {
        out.push(Violation::new("read_delay", "read pulse precedes the end of the Stokes gate"));
    }
    if !(cfg.p_s_per_us >= 0.0) || !cfg.p_s_per_us.is_finite() {
        out.push(Violation::new("p_s_per_us", "creation density must be >= 0"));
    } else {
        check_prob(&mut out, "p_s_per_us", cfg.genuine_stokes_probability());
    }
    check_prob(&mut out, "p_s_background", cfg.p_s_background);
    check_prob(&mut out, "readout_efficiency", cfg.readout_efficiency);
    check_prob(&mut out, "detector_efficiency_s", cfg.detector_efficiency_s);
    check_prob(&mut out, "detector_efficiency_as", cfg.detector_efficiency_as);
    check_prob(&mut out, "transmission_s", cfg.transmission_s);
    check_prob(&mut out, "transmission_as", cfg.transmission_as);
    check_prob(&mut out, "mode_overlap", cfg.mode_overlap);
    check_rate(&mut out, "antistokes_noise_per_us", cfg.antistokes_noise_per_us);
    for (i, b) in cfg.basis_overlaps.iter().enumerate() {
        check_prob(&mut out, &format!("basis_overlaps[{i}].mode_overlap"), b.mode_overlap);
    }
    for (i, l) in cfg.leakage_peaks.iter().enumerate() {
        check_positive(&mut out, &format!("leakage_peaks[{i}].width"), l.width);
        check_rate(&mut out, &format!("leakage_peaks[{i}].rate"), l.rate);
    }
    if let Envelope::Exponential { decay } = cfg.envelope {
        check_positive(&mut out, "envelope.decay", decay);
    }
    if !(cfg.rep_rate > 0.0) || !cfg.rep_rate.is_finite() {
        out.push(Violation::new("rep_rate", "repetition rate must be > 0"));
    }
    if cfg.trials_per_prep < 1 {
        out.push(Violation::new("trials_per_prep", "need at least one trial per preparation"));
    }
    if let Some(a) = &cfg.analyzer_s {
        check_analyzer(&mut out, "analyzer_s", a);
    }
    if let Some(a) = &cfg.analyzer_as {
        check_analyzer(&mut out, "analyzer_as", a);
    }
    if let (Some(s), Some(a)) = (&cfg.analyzer_s, &cfg.analyzer_as) {
        // The interference term is moved out of the loss entries of the joint
        // path table; they must stay non-negative at the largest overlap in use.
        let mu = cfg
            .basis_overlaps
            .iter()
            .map(|b| b.mode_overlap)
            .fold(cfg.mode_overlap, f64::max)
            .clamp(0.0, 1.0);
        let half = mu * (s.eta_transmit * a.eta_echo * s.eta_echo * a.eta_transmit).max(0.0).sqrt();
        let lost = [
            s.eta_transmit * a.loss(),
            s.eta_echo * a.loss(),
            s.loss() * a.eta_transmit,
            s.loss() * a.eta_echo,
        ];
        if lost.iter().any(|&x| x < half - 1e-12) || s.loss() * a.loss() < 2.0 * half - 1e-12 {
            out.push(Violation::new(
                "analyzer_s/analyzer_as",
                "analyzer pair has no valid joint path distribution (too little loss for the interference term)",
            ));
        }
    }
    out
}
