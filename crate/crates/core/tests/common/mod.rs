//! Oracles and fixtures shared by the integration test targets.
#![allow(dead_code)]

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, TAU};

use afc_dlcz::analysis::{fit_fringe, CoincidenceData, Exposure, FringePoint};
use afc_dlcz::config::{AnalyzerSetting, DecayForm, Envelope, ExperimentConfig, LeakagePeak, SpinDecoherence};
use afc_dlcz::model::predict::Predictor;
use afc_dlcz::model::{thermal_distribution, ModelOptions};
use afc_dlcz::sim::{run_with_sink, RunOptions, Substream};
use afc_dlcz::{BinGrid, Nanos};
use rand_distr::{Distribution, Poisson};

/// Pair-number cutoff of the enumeration oracle.
pub const N_MAX: u32 = 4;
/// A window covering the whole T_S + T_AS axis.
pub const FULL_LO: f64 = -1.0e7;
pub const FULL_HI: f64 = 1.0e8;

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// (observed − expected) in units of √expected.
pub fn pull(observed: f64, expected: f64) -> f64 {
    (observed - expected) / expected.max(1e-12).sqrt()
}

fn mean_readout_simpson(cfg: &ExperimentConfig, a: f64, b: f64) -> f64 {
    let n = 2000;
    let h = (b - a) / n as f64;
    let f = |t: f64| cfg.readout_efficiency * cfg.spin_decoherence.factor(cfg.read_delay.as_ns_f64() - t);
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0 / (b - a)
}

/// Pair populations per mode as (mean, mean readout).
fn modes(cfg: &ExperimentConfig) -> Vec<(f64, f64)> {
    let n = cfg.n_temporal_modes as usize;
    let start = cfg.stokes_window_start.as_ns_f64();
    let slot = cfg.stokes_window_length.as_ns_f64() / n as f64;
    let w: Vec<f64> = (0..n)
        .map(|m| match cfg.envelope {
            Envelope::Uniform => 1.0,
            Envelope::Exponential { decay } => (-(m as f64 + 0.5) * slot / decay.as_ns_f64()).exp(),
        })
        .collect();
    let norm: f64 = w.iter().sum();
    let total = cfg.p_s_per_us / 100.0 * cfg.stokes_window_length.as_micros();
    (0..n)
        .map(|m| {
            let a = start + m as f64 * slot;
            (total * w[m] / norm, mean_readout_simpson(cfg, a, a + slot))
        })
        .collect()
}

fn arm(a: &Option<AnalyzerSetting>) -> (f64, f64, f64) {
    match a {
        Some(a) => (a.eta_transmit, a.eta_echo, a.eta_transmit + a.eta_echo),
        None => (1.0, 0.0, 1.0),
    }
}

/// (E[N_S·N_AS], E[N_S]·E[N_AS]) per conditional trial, by enumerating
/// every per-mode pair-number vector up to `N_MAX`. Over the full axis
/// timing drops out, so these are the full-window coincidences and
/// accidentals.
pub fn brute_force(cfg: &ExperimentConfig) -> (f64, f64) {
    let modes = modes(cfg);
    let eta_s = cfg.transmission_s * cfg.detector_efficiency_s;
    let eta_as = cfg.transmission_as * cfg.detector_efficiency_as;
    let (ts, es, ds) = arm(&cfg.analyzer_s);
    let (ta, ea, da) = arm(&cfg.analyzer_as);
    let interference = match (&cfg.analyzer_s, &cfg.analyzer_as) {
        (Some(s), Some(a)) if s.tau_ifc == a.tau_ifc => {
            let phi_s = s.phase().unwrap();
            let phi_as = a.phase().unwrap();
            2.0 * cfg.overlap_for_basis(phi_s) * (ts * ea * es * ta).sqrt() * (phi_s - phi_as).cos()
        }
        _ => 0.0,
    };
    let s_bg = cfg.p_s_background * eta_s * ds;
    let as_bg = cfg.antistokes_noise_per_us * cfg.antistokes_gate_length.as_micros()
        + cfg.leakage_peaks.iter().map(|l| l.rate).sum::<f64>();

    let dists: Vec<Vec<f64>> = modes.iter().map(|(mu, _)| thermal_distribution(*mu, N_MAX).unwrap().probs).collect();
    let mut ns = vec![0u32; modes.len()];
    let (mut c, mut es_tot, mut eas_tot) = (0.0, 0.0, 0.0);
    loop {
        let p: f64 = ns.iter().zip(&dists).map(|(&n, d)| d[n as usize]).product();
        let mut s_det = Vec::new();
        let mut a_det = Vec::new();
        let mut same = 0.0;
        for (m, &n) in ns.iter().enumerate() {
            let r = modes[m].1;
            for _ in 0..n {
                s_det.push(eta_s * ds);
                a_det.push(eta_as * r * da);
                same += eta_s * eta_as * r * (ds * da + interference);
            }
        }
        let mut cross = 0.0;
        for (i, s) in s_det.iter().enumerate() {
            for (j, a) in a_det.iter().enumerate() {
                if i != j {
                    cross += s * a;
                }
            }
        }
        let pairs_s: f64 = s_det.iter().sum();
        let pairs_a: f64 = a_det.iter().sum();
        c += p * (same + cross + s_bg * pairs_a + pairs_s * as_bg + s_bg * as_bg);
        es_tot += p * (pairs_s + s_bg);
        eas_tot += p * (pairs_a + as_bg);

        let mut k = 0;
        loop {
            if k == ns.len() {
                return (c, es_tot * eas_tot);
            }
            ns[k] += 1;
            if ns[k] <= N_MAX {
                break;
            }
            ns[k] = 0;
            k += 1;
        }
    }
}

/// Relative deviations (coincidences, accidentals) of the model from the
/// enumeration oracle over the full axis.
pub fn oracle_deviation(cfg: &ExperimentConfig) -> (f64, f64) {
    let opts = ModelOptions { n_max: N_MAX, ..Default::default() };
    let t = Predictor::new(cfg, &opts).unwrap().terms(FULL_LO, FULL_HI);
    let (c, a) = brute_force(cfg);
    (rel(t.total(), c), rel(t.accidental, a))
}

pub const RANDOM_DRAWS: usize = 21;

pub fn analyzer(tau_ifc: Nanos, t: f64, e: f64, phase: f64) -> AnalyzerSetting {
    let mut a = AnalyzerSetting { tau_ifc, eta_transmit: t, eta_echo: e, comb_spacing: 0.5, detuning: 0.0 };
    a.detuning = a.detuning_for_phase(phase);
    a
}

/// A configuration from `RANDOM_DRAWS` uniforms in [0, 1). Pair means stay
/// small enough that truncation at `N_MAX` is below 10⁻⁷. The result may
/// fail validation (too little analyzer loss for the interference term).
pub fn random_config(u: &[f64; RANDOM_DRAWS]) -> ExperimentConfig {
    let lerp = |x: f64, a: f64, b: f64| a + x * (b - a);
    let mut cfg = ExperimentConfig::paper_defaults();
    cfg.n_temporal_modes = 1 + (u[0] * 6.0) as u32;
    cfg.p_s_per_us = lerp(u[1], 0.05, 0.75);
    cfg.p_s_background = lerp(u[2], 0.0, 0.02);
    cfg.readout_efficiency = lerp(u[3], 0.01, 0.5);
    cfg.spin_decoherence = SpinDecoherence {
        form: if u[4] < 0.5 { DecayForm::Exponential } else { DecayForm::Gaussian },
        time_constant: Nanos(lerp(u[5], 5000.0, 80000.0).round() as u64),
    };
    cfg.antistokes_noise_per_us = lerp(u[6], 0.0, 0.01);
    cfg.leakage_peaks = if u[7] < 0.5 {
        vec![LeakagePeak { center: Nanos(9500), width: Nanos(600), rate: lerp(u[8], 0.0, 0.002) }]
    } else {
        Vec::new()
    };
    cfg.transmission_s = lerp(u[9], 0.2, 1.0);
    cfg.transmission_as = lerp(u[10], 0.2, 1.0);
    cfg.detector_efficiency_s = lerp(u[11], 0.2, 1.0);
    cfg.detector_efficiency_as = lerp(u[12], 0.2, 1.0);
    if u[13] < 0.5 {
        cfg.envelope = Envelope::Exponential { decay: Nanos(lerp(u[14], 1000.0, 8000.0).round() as u64) };
    }
    cfg.mode_overlap = u[15];
    cfg.basis_overlaps.clear();
    if u[16] < 0.6 {
        let q = |x: f64| lerp(x, 0.1, 0.4);
        let tau = Nanos(2000);
        cfg.analyzer_s = Some(analyzer(tau, q(u[17]), q(u[18]), TAU * u[19]));
        cfg.analyzer_as = Some(analyzer(tau, q(u[18]), q(u[17]), TAU * u[20]));
    }
    cfg
}

/// Default setup with pair and readout rates raised so that 10⁶ trials give
/// thousands of coincidences.
pub fn bright(cfg: &ExperimentConfig) -> ExperimentConfig {
    let mut c = cfg.clone();
    c.p_s_per_us = 1.0;
    c.readout_efficiency = 0.3;
    c.antistokes_noise_per_us = 0.003;
    c
}

pub fn collect(cfg: &ExperimentConfig, n: u64) -> CoincidenceData {
    let k = cfg.n_unconditional;
    run_with_sink(cfg, n, &RunOptions::default(), || CoincidenceData::new(k)).unwrap().0
}

pub fn exposure(cfg: &ExperimentConfig, n: u64) -> Exposure {
    Exposure { n_conditional: n, n_unconditional_per_herald: cfg.n_unconditional, rep_rate_khz: cfg.rep_rate }
}

/// Ten configurations spanning backgrounds, mode structure and analyzers.
pub fn grid_configs() -> Vec<(&'static str, ExperimentConfig)> {
    let base = bright(&ExperimentConfig::paper_defaults());
    let analyzers = bright(&ExperimentConfig::paper_with_analyzers());
    let mut out = vec![("defaults", base.clone())];

    let mut c = base.clone();
    c.p_s_per_us = 0.3;
    out.push(("low pumping", c));

    let mut c = base.clone();
    c.n_temporal_modes = 3;
    c.envelope = Envelope::Exponential { decay: Nanos(3000) };
    out.push(("three modes, exponential envelope", c));

    let mut c = base.clone();
    c.antistokes_noise_per_us = 0.03;
    c.p_s_background = 0.02;
    out.push(("strong backgrounds", c));

    let mut c = base.clone();
    c.leakage_peaks = vec![LeakagePeak { center: Nanos(8000), width: Nanos(400), rate: 0.01 }];
    out.push(("bright leakage", c));

    out.push(("analyzers in phase", analyzers.with_phases(Some(0.0), Some(0.0))));
    out.push(("analyzers out of phase", analyzers.with_phases(Some(0.0), Some(PI))));
    out.push(("analyzers at 90/45 deg", analyzers.with_phases(Some(FRAC_PI_2), Some(FRAC_PI_4))));

    let mut c = analyzers.clone();
    c.analyzer_as.as_mut().unwrap().tau_ifc = Nanos(1500);
    out.push(("mismatched analyzer delays", c));

    let mut c = base.clone();
    c.classical_baseline = true;
    out.push(("classical baseline", c));
    out
}

/// Pulls of every MC observable against the model: herald fraction,
/// singles, every 600 ns bin with at least 25 expected counts (coincidences
/// and raw accidentals) and full-axis totals.
pub fn mc_pulls(cfg: &ExperimentConfig, n_conditional: u64) -> Vec<(String, f64)> {
    let pred = Predictor::new(cfg, &ModelOptions::default()).unwrap();
    let s = pred.singles();
    let d = collect(cfg, n_conditional);
    let n = n_conditional as f64;
    let k = cfg.n_unconditional as f64;
    let mut out = Vec::new();

    let p = s.herald_probability;
    out.push(("herald fraction".into(), (d.n_heralds as f64 - n * p) / (n * p * (1.0 - p)).sqrt()));
    out.push(("Stokes singles".into(), pull(d.stokes_tags as f64, n * s.stokes_per_trial)));
    out.push((
        "anti-Stokes singles".into(),
        pull(d.unconditional_antistokes_tags as f64, d.n_unconditional as f64 * s.antistokes_per_read),
    ));

    let end = pred.layout().sum_axis_end_ns();
    let grid = BinGrid::aligned(600, cfg.tau_mc.as_ns(), end as u64);
    let h = d.histogram(&grid);
    for i in 0..grid.n_bins {
        let (lo, hi) = grid.edges(i);
        let t = pred.terms(lo as f64, hi as f64);
        if n * t.total() >= 25.0 {
            out.push((format!("bin {} ns", grid.center_ns(i)), pull(h.counts[i] as f64, n * t.total())));
        }
        if n * k * t.accidental >= 25.0 {
            out.push((
                format!("accidental bin {} ns", grid.center_ns(i)),
                pull(h.accidental_raw[i] as f64, n * k * t.accidental),
            ));
        }
    }
    let (c_all, acc_all) = d.window(FULL_LO as i64, FULL_HI as i64);
    let full = pred.terms(FULL_LO, FULL_HI);
    out.push(("total coincidences".into(), pull(c_all as f64, n * full.total())));
    out.push(("total accidentals".into(), pull(acc_all as f64, n * k * full.accidental)));
    out
}

fn wrap(x: f64) -> f64 {
    (x + PI).rem_euclid(TAU) - PI
}

/// Outcome of fitting synthetic Poisson fringes over a (V, level) grid.
pub struct FringeCoverage {
    /// Parameter estimates checked (two per fit).
    pub checks: usize,
    /// Estimates more than 2σ from the injected value.
    pub outside: usize,
    /// Largest number outside 2σ in any single grid cell.
    pub worst_cell: usize,
    pub per_cell: usize,
}

impl FringeCoverage {
    pub fn coverage(&self) -> f64 {
        1.0 - self.outside as f64 / self.checks as f64
    }
}

pub fn fringe_coverage(replicates: usize) -> FringeCoverage {
    let mut out = FringeCoverage { checks: 0, outside: 0, worst_cell: 0, per_cell: 2 * replicates };
    let mut seed = 0;
    let phi_s = 0.4;
    let phi0 = -0.25;
    for v in [0.3, 0.6, 0.9] {
        for level in [100.0, 1000.0, 10000.0] {
            let mut cell = 0;
            for _ in 0..replicates {
                seed += 1;
                let mut rng = Substream::new(seed, 0);
                let floor = 0.1 * level;
                let points: Vec<FringePoint> = (0..12)
                    .map(|i| {
                        let phi_as = i as f64 * TAU / 12.0;
                        let mean = level * (1.0 + v * (phi_s - phi_as + phi0).cos()) + floor;
                        let c = Poisson::new(mean).unwrap().sample(&mut rng);
                        FringePoint { phi_as, counts: c, sigma: c.max(1.0).sqrt() }
                    })
                    .collect();
                let fit = fit_fringe(&points, phi_s, Some(floor)).unwrap();
                let miss_v = (fit.visibility - v).abs() >= 2.0 * fit.sigma_visibility;
                let miss_phase = wrap(fit.phase_offset - phi0).abs() >= 2.0 * fit.sigma_phase;
                let miss = usize::from(miss_v) + usize::from(miss_phase);
                out.checks += 2;
                out.outside += miss;
                cell += miss;
            }
            out.worst_cell = out.worst_cell.max(cell);
        }
    }
    out
}
