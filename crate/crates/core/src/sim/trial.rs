//! One write (and possibly read) sequence.

use rand_distr::{Distribution, Poisson, StandardNormal};

use crate::config::{ConfigError, ExperimentConfig};
use crate::model::layout::{PhotonLayout, LOST};
use crate::tag::{Channel, TimeTag, TrialKind};

use super::rng::Substream;

/// One photon pair created by the write pulse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairEmission {
    pub mode_index: u32,
    /// Stokes emission time after the write pulse, ns.
    pub t_s_ns: f64,
    /// The Stokes photon produced a tag.
    pub survived_stokes: bool,
}

#[derive(Debug, Clone, Copy)]
struct SpinWave {
    t_s_ns: f64,
    as_path: u8,
}

/// Everything that happened in one trial.
#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub trial_id: u64,
    pub kind: TrialKind,
    pub pair_emissions: Vec<PairEmission>,
    pub spin_waves_stored: u32,
    /// The read pulse fired.
    pub read_fired: bool,
    /// Anti-Stokes tags that came from stored spin waves.
    pub antistokes_signal_tags: u32,
    /// Sorted by (channel, time).
    pub tags: Vec<TimeTag>,
    spin_waves: Vec<SpinWave>,
}

impl TrialOutcome {
    pub fn new() -> Self {
        Self {
            trial_id: 0,
            kind: TrialKind::Conditional,
            pair_emissions: Vec::new(),
            spin_waves_stored: 0,
            read_fired: false,
            antistokes_signal_tags: 0,
            tags: Vec::new(),
            spin_waves: Vec::new(),
        }
    }

    fn reset(&mut self, trial_id: u64, kind: TrialKind) {
        self.trial_id = trial_id;
        self.kind = kind;
        self.pair_emissions.clear();
        self.spin_waves_stored = 0;
        self.read_fired = false;
        self.antistokes_signal_tags = 0;
        self.tags.clear();
        self.spin_waves.clear();
    }

    pub fn has_stokes_tag(&self) -> bool {
        self.tags.iter().any(|t| t.channel == Channel::Stokes)
    }

    pub fn stokes_tags(&self) -> impl Iterator<Item = &TimeTag> {
        self.tags.iter().filter(|t| t.channel == Channel::Stokes)
    }

    pub fn antistokes_tags(&self) -> impl Iterator<Item = &TimeTag> {
        self.tags.iter().filter(|t| t.channel == Channel::AntiStokes)
    }

    fn push_tag(&mut self, channel: Channel, t_ns: f64) {
        self.tags.push(TimeTag {
            trial_id: self.trial_id,
            kind: self.kind,
            channel,
            time_ns: (t_ns + 0.5).floor().max(0.0) as u64,
        });
    }
}

impl Default for TrialOutcome {
    fn default() -> Self {
        Self::new()
    }
}

struct ModeSampler {
    p_zero: f64,
    ln_ratio: f64,
    slot: (f64, f64),
}

impl ModeSampler {
    /// Thermal draw by inverting the geometric CDF.
    #[inline]
    fn draw(&self, rng: &mut Substream) -> u32 {
        let u = rng.uniform();
        if u < self.p_zero {
            return 0;
        }
        ((1.0 - u).ln() / self.ln_ratio).floor().max(1.0) as u32
    }
}

/// Immutable per-configuration sampler; share it freely across threads.
pub struct TrialSampler {
    layout: PhotonLayout,
    seed: u64,
    modes: Vec<ModeSampler>,
    joint_cdf: [f64; 9],
    s_cdf: [f64; 3],
    a_cdf: [f64; 3],
    noise: Option<Poisson<f64>>,
    leaks: Vec<(Poisson<f64>, f64, f64)>,
}

fn cdf3(p: [f64; 3]) -> [f64; 3] {
    [p[0], p[0] + p[1], 1.0]
}

#[inline]
fn pick(cdf: &[f64], u: f64) -> usize {
    cdf.iter().position(|&c| u < c).unwrap_or(cdf.len() - 1)
}

impl TrialSampler {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self, ConfigError> {
        let layout = PhotonLayout::new(cfg)?;
        let modes = layout
            .modes
            .iter()
            .map(|m| {
                let p = m.mean_pairs;
                ModeSampler {
                    p_zero: 1.0 / (1.0 + p),
                    ln_ratio: (p / (1.0 + p)).ln(),
                    slot: (m.slot_start_ns, m.slot_end_ns),
                }
            })
            .collect();
        let mut joint_cdf = [0.0; 9];
        let mut acc = 0.0;
        for (k, c) in joint_cdf.iter_mut().enumerate() {
            acc += layout.joint.p[k / 3][k % 3];
            *c = acc;
        }
        joint_cdf[8] = 1.0;
        let noise = (layout.as_noise_mean > 0.0).then(|| Poisson::new(layout.as_noise_mean).expect("positive mean"));
        let leaks = layout
            .leaks
            .iter()
            .filter(|l| l.rate > 0.0)
            .map(|l| (Poisson::new(l.rate).expect("positive rate"), l.center_ns, l.width_ns))
            .collect();
        Ok(Self {
            s_cdf: cdf3(layout.s_paths),
            a_cdf: cdf3(layout.as_paths),
            seed: cfg.rng_seed,
            layout,
            modes,
            joint_cdf,
            noise,
            leaks,
        })
    }

    pub fn layout(&self) -> &PhotonLayout {
        &self.layout
    }

    pub fn run_trial(&self, trial_id: u64, kind: TrialKind) -> TrialOutcome {
        let mut out = TrialOutcome::new();
        self.run_trial_into(trial_id, kind, &mut out);
        out
    }

    /// Samples one trial into `out`, reusing its buffers.
    pub fn run_trial_into(&self, trial_id: u64, kind: TrialKind, out: &mut TrialOutcome) {
        out.reset(trial_id, kind);
        let mut rng = Substream::new(self.seed, trial_id);
        for (m, ms) in self.modes.iter().enumerate() {
            let n = ms.draw(&mut rng);
            for _ in 0..n {
                let t = rng.uniform_in(ms.slot.0, ms.slot.1);
                self.emit_pair(&mut rng, m as u32, t, out);
            }
        }
        self.finish(&mut rng, out);
    }

    /// Runs a trial whose write pulse creates exactly the given pairs
    /// `(mode_index, T_S in ns)`; every other process is sampled as usual.
    pub fn run_trial_with_pairs(&self, trial_id: u64, kind: TrialKind, pairs: &[(u32, f64)]) -> TrialOutcome {
        let mut out = TrialOutcome::new();
        out.reset(trial_id, kind);
        let mut rng = Substream::new(self.seed, trial_id);
        for &(m, t) in pairs {
            self.emit_pair(&mut rng, m, t, &mut out);
        }
        self.finish(&mut rng, &mut out);
        out
    }

    fn emit_pair(&self, rng: &mut Substream, mode: u32, t_s: f64, out: &mut TrialOutcome) {
        let l = &self.layout;
        let (s_path, as_path) = if l.classical {
            (pick(&self.s_cdf, rng.uniform()), None)
        } else {
            let k = pick(&self.joint_cdf, rng.uniform());
            (k / 3, Some(k % 3))
        };
        let detected = s_path != LOST && rng.uniform() < l.eta_s;
        if detected {
            out.push_tag(Channel::Stokes, t_s + l.s_delay_ns[s_path]);
        }
        out.pair_emissions.push(PairEmission { mode_index: mode, t_s_ns: t_s, survived_stokes: detected });
        if let Some(j) = as_path {
            out.spin_waves.push(SpinWave { t_s_ns: t_s, as_path: j as u8 });
            out.spin_waves_stored += 1;
        }
    }

    fn finish(&self, rng: &mut Substream, out: &mut TrialOutcome) {
        let l = &self.layout;
        if l.classical {
            // Anti-Stokes photons from an independent thermal source with the
            // same statistics as the pairs.
            for ms in &self.modes {
                let n = ms.draw(rng);
                for _ in 0..n {
                    let t = rng.uniform_in(ms.slot.0, ms.slot.1);
                    let j = pick(&self.a_cdf, rng.uniform());
                    out.spin_waves.push(SpinWave { t_s_ns: t, as_path: j as u8 });
                    out.spin_waves_stored += 1;
                }
            }
        }
        if l.p_s_background > 0.0 && rng.uniform() < l.p_s_background {
            let t = rng.uniform_in(l.stokes_gate_ns.0, l.stokes_gate_ns.1);
            let i = pick(&self.s_cdf, rng.uniform());
            if i != LOST && rng.uniform() < l.eta_s {
                out.push_tag(Channel::Stokes, t + l.s_delay_ns[i]);
            }
        }
        let fire = out.kind == TrialKind::Unconditional || !out.tags.is_empty();
        if fire {
            out.read_fired = true;
            for k in 0..out.spin_waves.len() {
                let sw = out.spin_waves[k];
                if rng.uniform() >= l.readout(sw.t_s_ns) {
                    continue;
                }
                let j = sw.as_path as usize;
                if j == LOST || rng.uniform() >= l.eta_as {
                    continue;
                }
                let jitter: f64 = StandardNormal.sample(rng);
                let t = l.tau_mc_ns - sw.t_s_ns + l.as_delay_ns[j] + l.jitter_sigma_ns * jitter;
                out.push_tag(Channel::AntiStokes, t);
                out.antistokes_signal_tags += 1;
            }
            if let Some(noise) = &self.noise {
                let k = noise.sample(rng) as u64;
                for _ in 0..k {
                    let t = rng.uniform_in(0.0, l.as_gate_ns);
                    out.push_tag(Channel::AntiStokes, t);
                }
            }
            for (dist, center, width) in &self.leaks {
                let k = dist.sample(rng) as u64;
                for _ in 0..k {
                    let z: f64 = StandardNormal.sample(rng);
                    out.push_tag(Channel::AntiStokes, center + width * z);
                }
            }
        }
        if out.tags.len() > 1 {
            out.tags.sort_unstable_by_key(|t| (t.channel, t.time_ns));
        }
    }
}
