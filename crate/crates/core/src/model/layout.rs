//! The experiment reduced to photon sources: Stokes modes, analyzer paths,
//! readout weights and backgrounds. Shared by the analytic predictor and
//! the Monte Carlo engine so both play exactly the same physics.

use std::f64::consts::PI;

use statrs::function::erf::erf;

use crate::config::{validate_config, ConfigError, DecayForm, Envelope, ExperimentConfig, SpinDecoherence};

use super::kernels::GaussLegendre;

/// FWHM of a Gaussian in units of its standard deviation.
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949;

pub const EARLY: usize = 0;
pub const LATE: usize = 1;
pub const LOST: usize = 2;

/// One temporal Stokes mode.
#[derive(Debug, Clone, PartialEq)]
pub struct PairModePopulation {
    pub mode_index: usize,
    /// Slot centre, µs after the write pulse.
    pub mode_time: f64,
    /// Thermal mean pair number in this mode.
    pub mean_pairs: f64,
    /// Envelope weight; weights sum to one over modes.
    pub weight: f64,
    pub slot_start_ns: f64,
    pub slot_end_ns: f64,
}

impl PairModePopulation {
    pub fn slot_width_ns(&self) -> f64 {
        self.slot_end_ns - self.slot_start_ns
    }
}

/// Joint (Stokes, anti-Stokes) path table over {early, late, lost}.
///
/// Single-photon marginals are exactly the analyzer's (transmit, echo, loss);
/// the interference cross-term sits on the two central entries and is
/// balanced on the loss entries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointPaths {
    pub p: [[f64; 3]; 3],
    /// The cross-term 2µ√(tS·eA·eS·tA)·cos θ carried by the central peak.
    pub cross: f64,
}

impl JointPaths {
    pub fn build(s: [f64; 3], a: [f64; 3], cross: f64) -> Self {
        let mut p = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                p[i][j] = s[i] * a[j];
            }
        }
        let h = 0.5 * cross;
        p[EARLY][LATE] += h;
        p[LATE][EARLY] += h;
        p[EARLY][LOST] -= h;
        p[LATE][LOST] -= h;
        p[LOST][EARLY] -= h;
        p[LOST][LATE] -= h;
        p[LOST][LOST] += cross;
        for row in p.iter_mut() {
            for x in row.iter_mut() {
                // Rounding only; validation guarantees non-negativity.
                if *x < 0.0 && *x > -1e-15 {
                    *x = 0.0;
                }
            }
        }
        Self { p, cross }
    }
}

#[derive(Debug, Clone)]
pub struct Leak {
    pub center_ns: f64,
    pub width_ns: f64,
    pub rate: f64,
}

#[derive(Debug, Clone)]
pub struct PhotonLayout {
    pub modes: Vec<PairModePopulation>,
    /// Mean readout probability r̄ (η_R × decay) over each mode slot.
    pub mean_readout: Vec<f64>,
    /// Quadrature points (t, weight·r(t)/slot_width) per mode slot.
    pub readout_nodes: Vec<Vec<(f64, f64)>>,
    pub eta_s: f64,
    pub eta_as: f64,
    /// Stokes analyzer path probabilities (early, late, lost).
    pub s_paths: [f64; 3],
    pub as_paths: [f64; 3],
    pub s_delay_ns: [f64; 2],
    pub as_delay_ns: [f64; 2],
    pub joint: JointPaths,
    pub phi_s: f64,
    pub phi_as: f64,
    pub overlap: f64,
    pub jitter_sigma_ns: f64,
    pub tau_mc_ns: f64,
    pub read_delay_ns: f64,
    pub readout_efficiency: f64,
    pub decay: SpinDecoherence,
    pub stokes_gate_ns: (f64, f64),
    pub p_s_background: f64,
    pub as_gate_ns: f64,
    pub as_noise_mean: f64,
    pub leaks: Vec<Leak>,
    pub classical: bool,
}

const QUAD_NODES: usize = 16;
const QUAD_PANELS: usize = 4;

impl PhotonLayout {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self, ConfigError> {
        let v = validate_config(cfg);
        if !v.is_empty() {
            return Err(ConfigError::Invalid(v));
        }
        let n = cfg.n_temporal_modes as usize;
        let start = cfg.stokes_window_start.as_ns_f64();
        let slot = cfg.stokes_window_length.as_ns_f64() / n as f64;
        let raw: Vec<f64> = (0..n)
            .map(|m| match cfg.envelope {
                Envelope::Uniform => 1.0,
                Envelope::Exponential { decay } => {
                    let centre = (m as f64 + 0.5) * slot;
                    (-centre / decay.as_ns_f64()).exp()
                }
            })
            .collect();
        let norm: f64 = raw.iter().sum();
        let total = cfg.genuine_stokes_probability();
        let modes: Vec<PairModePopulation> = raw
            .iter()
            .enumerate()
            .map(|(m, w)| {
                let a = start + m as f64 * slot;
                PairModePopulation {
                    mode_index: m,
                    mode_time: (a + 0.5 * slot) / 1000.0,
                    mean_pairs: total * w / norm,
                    weight: w / norm,
                    slot_start_ns: a,
                    slot_end_ns: a + slot,
                }
            })
            .collect();

        let paths = |a: &Option<crate::config::AnalyzerSetting>| match a {
            Some(a) => ([a.eta_transmit, a.eta_echo, a.loss().max(0.0)], [0.0, a.tau_ifc.as_ns_f64()]),
            None => ([1.0, 0.0, 0.0], [0.0, 0.0]),
        };
        let (s_paths, s_delay_ns) = paths(&cfg.analyzer_s);
        let (as_paths, as_delay_ns) = paths(&cfg.analyzer_as);
        let phi_s = match &cfg.analyzer_s {
            Some(a) => a.phase()?,
            None => 0.0,
        };
        let phi_as = match &cfg.analyzer_as {
            Some(a) => a.phase()?,
            None => 0.0,
        };
        let overlap = cfg.overlap_for_basis(phi_s);
        let interferes = match (&cfg.analyzer_s, &cfg.analyzer_as) {
            (Some(s), Some(a)) => s.tau_ifc == a.tau_ifc,
            _ => false,
        };
        let cross = if interferes {
            2.0 * overlap
                * (s_paths[EARLY] * as_paths[LATE] * s_paths[LATE] * as_paths[EARLY]).sqrt()
                * (phi_s - phi_as).cos()
        } else {
            0.0
        };
        let joint = JointPaths::build(s_paths, as_paths, cross);

        let mut layout = Self {
            mean_readout: Vec::new(),
            readout_nodes: Vec::new(),
            eta_s: cfg.transmission_s * cfg.detector_efficiency_s,
            eta_as: cfg.transmission_as * cfg.detector_efficiency_as,
            s_paths,
            as_paths,
            s_delay_ns,
            as_delay_ns,
            joint,
            phi_s,
            phi_as,
            overlap,
            jitter_sigma_ns: cfg.write_fwhm.as_ns_f64() / FWHM_PER_SIGMA,
            tau_mc_ns: cfg.tau_mc.as_ns_f64(),
            read_delay_ns: cfg.read_delay.as_ns_f64(),
            readout_efficiency: cfg.readout_efficiency,
            decay: cfg.spin_decoherence.clone(),
            stokes_gate_ns: (start, cfg.stokes_window_end().as_ns_f64()),
            p_s_background: cfg.p_s_background,
            as_gate_ns: cfg.antistokes_gate_length.as_ns_f64(),
            as_noise_mean: cfg.antistokes_noise_per_us * cfg.antistokes_gate_length.as_micros(),
            leaks: cfg
                .leakage_peaks
                .iter()
                .map(|l| Leak {
                    center_ns: l.center.as_ns_f64(),
                    width_ns: l.width.as_ns_f64(),
                    rate: l.rate,
                })
                .collect(),
            classical: cfg.classical_baseline,
            modes,
        };
        let gl = GaussLegendre::new(QUAD_NODES);
        layout.mean_readout = layout
            .modes
            .iter()
            .map(|m| layout.mean_readout_over(m.slot_start_ns, m.slot_end_ns))
            .collect();
        layout.readout_nodes = layout
            .modes
            .iter()
            .map(|m| {
                let w = m.slot_width_ns();
                gl.points(m.slot_start_ns, m.slot_end_ns, QUAD_PANELS)
                    .into_iter()
                    .map(|(t, q)| (t, q * layout.readout(t) / w))
                    .collect()
            })
            .collect();
        Ok(layout)
    }

    /// Probability that a spin wave from a Stokes emission at `t_s_ns` is
    /// converted to an anti-Stokes photon.
    pub fn readout(&self, t_s_ns: f64) -> f64 {
        self.readout_efficiency * self.decay.factor(self.read_delay_ns - t_s_ns)
    }

    /// Closed-form mean of `readout` over a uniform emission time on [a, b].
    pub fn mean_readout_over(&self, a: f64, b: f64) -> f64 {
        let d = self.read_delay_ns;
        let tc = self.decay.time_constant.as_ns_f64();
        let w = b - a;
        if w <= 0.0 {
            return self.readout(a);
        }
        let integral = match self.decay.form {
            DecayForm::Gaussian => 0.5 * tc * PI.sqrt() * (erf((d - a) / tc) - erf((d - b) / tc)),
            DecayForm::Exponential => tc * ((-(d - b) / tc).exp() - (-(d - a) / tc).exp()),
        };
        self.readout_efficiency * integral / w
    }

    pub fn has_s_analyzer(&self) -> bool {
        self.s_paths[LATE] > 0.0 || self.s_delay_ns[LATE] > 0.0
    }

    pub fn has_as_analyzer(&self) -> bool {
        self.as_paths[LATE] > 0.0 || self.as_delay_ns[LATE] > 0.0
    }

    pub fn s_detect_prob(&self) -> f64 {
        self.eta_s * (self.s_paths[EARLY] + self.s_paths[LATE])
    }

    pub fn as_path_detect(&self) -> f64 {
        self.as_paths[EARLY] + self.as_paths[LATE]
    }

    /// End of the T_S + T_AS axis covering every source.
    pub fn sum_axis_end_ns(&self) -> f64 {
        let s_end = self.stokes_gate_ns.1 + self.s_delay_ns[LATE];
        let mut as_end = self.as_gate_ns + self.as_delay_ns[LATE];
        as_end = as_end.max(self.tau_mc_ns + self.as_delay_ns[LATE] + 4.0 * self.jitter_sigma_ns);
        for l in &self.leaks {
            as_end = as_end.max(l.center_ns + 4.0 * l.width_ns);
        }
        s_end + as_end
    }

    /// Exact probability that a conditional trial records no Stokes tag.
    pub fn prob_no_stokes_tag(&self) -> f64 {
        let q = self.s_detect_prob();
        let pairs: f64 = self.modes.iter().map(|m| 1.0 / (1.0 + m.mean_pairs * q)).product();
        pairs * (1.0 - self.p_s_background * q)
    }

    /// Exact probability that a trial whose read pulse fires unconditionally
    /// records no tag in either channel.
    pub fn prob_no_tag_with_read(&self) -> f64 {
        let qs = self.s_detect_prob();
        let mut prob = 1.0 - self.p_s_background * qs;
        for (m, rbar) in self.modes.iter().zip(&self.mean_readout) {
            let qa = self.eta_as * rbar;
            if self.classical {
                prob /= 1.0 + m.mean_pairs * qs;
                prob /= 1.0 + m.mean_pairs * qa * self.as_path_detect();
            } else {
                // Per pair: probability that neither photon is detected.
                let mut beta = 0.0;
                for i in 0..3 {
                    for j in 0..3 {
                        let ns = if i == LOST { 1.0 } else { 1.0 - self.eta_s };
                        let na = if j == LOST { 1.0 } else { 1.0 - qa };
                        beta += self.joint.p[i][j] * ns * na;
                    }
                }
                prob /= 1.0 + m.mean_pairs * (1.0 - beta);
            }
        }
        prob *= (-self.as_noise_mean).exp();
        for l in &self.leaks {
            prob *= (-l.rate).exp();
        }
        prob
    }
}
