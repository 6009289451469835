//! Expected coincidences per conditional trial.
//!
//! A coincidence is one (Stokes tag, anti-Stokes tag) pair of the same
//! conditional trial with T_S + T_AS in a window. Its expectation splits
//! into three parts:
//!
//! * accidental: product of the Stokes and anti-Stokes tag densities, which
//!   is exactly what the unconditional trials estimate;
//! * same pair: both photons of one pair, `T_S + T_AS = τ_MC + delays + jitter`;
//! * bunching: photons from two different pairs of the same thermal mode,
//!   weighted by E[n(n−1)] − E[n]².
//!
//! The read pulse of a conditional trial only fires after a Stokes tag, but
//! without a Stokes tag there is nothing to pair with, so the expectation
//! equals that of a trial whose read always fires.

use crate::chsh::{ChshAngles, ChshResult, ChshTerm};
use crate::config::ExperimentConfig;
use crate::grid::BinGrid;

use super::kernels::{prob_gauss_in, prob_uniform_gauss_in, prob_uniform_uniform_in};
use super::layout::{PhotonLayout, EARLY, LATE};
use super::thermal::thermal_distribution;
use super::{ModelError, ModelOptions};

/// Beyond this many standard deviations a Gaussian term is dropped.
const GAUSS_CUT: f64 = 9.0;

/// Expected coincidences in one window, split by origin.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BinTerms {
    /// Same-pair coincidences through the early/early paths.
    pub early_early: f64,
    /// Same-pair early/late plus late/early, including the interference term.
    pub interference: f64,
    pub late_late: f64,
    /// Accidental plus multi-pair bunching.
    pub floor: f64,
    /// Product-of-marginals part of the floor; what unconditional trials measure.
    pub accidental: f64,
}

impl BinTerms {
    pub fn total(&self) -> f64 {
        self.early_early + self.interference + self.late_late + self.floor
    }

    pub fn g2(&self) -> Result<f64, ModelError> {
        if !(self.accidental > 0.0) {
            return Err(ModelError::UndefinedG2(
                "no accidental coincidences expected in the window".into(),
            ));
        }
        Ok(self.total() / self.accidental)
    }
}

struct UniformComp {
    w: f64,
    a: f64,
    b: f64,
}

struct GaussAtom {
    w: f64,
    mu: f64,
}

/// Precomputed sources for one configuration.
pub struct Predictor {
    layout: PhotonLayout,
    m1: Vec<f64>,
    excess: Vec<f64>,
    stokes: Vec<UniformComp>,
    as_atoms: Vec<GaussAtom>,
}

impl Predictor {
    pub fn new(cfg: &ExperimentConfig, opts: &ModelOptions) -> Result<Self, ModelError> {
        let layout = PhotonLayout::new(cfg)?;
        let mut m1 = Vec::new();
        let mut excess = Vec::new();
        for m in &layout.modes {
            let d = thermal_distribution(m.mean_pairs, opts.n_max)?;
            let mean = d.mean();
            m1.push(mean);
            excess.push(d.second_factorial_moment() - mean * mean);
        }
        let mut stokes = Vec::new();
        for (m, mode) in layout.modes.iter().enumerate() {
            for i in [EARLY, LATE] {
                let w = m1[m] * layout.eta_s * layout.s_paths[i];
                if w > 0.0 {
                    let d = layout.s_delay_ns[i];
                    stokes.push(UniformComp { w, a: mode.slot_start_ns + d, b: mode.slot_end_ns + d });
                }
            }
        }
        for i in [EARLY, LATE] {
            let w = layout.p_s_background * layout.eta_s * layout.s_paths[i];
            if w > 0.0 {
                let d = layout.s_delay_ns[i];
                stokes.push(UniformComp {
                    w,
                    a: layout.stokes_gate_ns.0 + d,
                    b: layout.stokes_gate_ns.1 + d,
                });
            }
        }
        let mut as_atoms = Vec::new();
        for (m, nodes) in layout.readout_nodes.iter().enumerate() {
            for j in [EARLY, LATE] {
                let w = m1[m] * layout.eta_as * layout.as_paths[j];
                if w > 0.0 {
                    for &(t, q) in nodes {
                        as_atoms.push(GaussAtom {
                            w: w * q,
                            mu: layout.tau_mc_ns - t + layout.as_delay_ns[j],
                        });
                    }
                }
            }
        }
        Ok(Self { layout, m1, excess, stokes, as_atoms })
    }

    pub fn layout(&self) -> &PhotonLayout {
        &self.layout
    }

    fn uniform_gauss(lo: f64, hi: f64, a: f64, b: f64, mu: f64, sigma: f64) -> f64 {
        let reach = GAUSS_CUT * sigma;
        if a + mu - reach >= hi || b + mu + reach <= lo {
            return 0.0;
        }
        prob_uniform_gauss_in(lo, hi, a, b, mu, sigma)
    }

    /// Product of marginal tag densities over T_S + T_AS ∈ [lo, hi).
    pub fn accidental(&self, lo: f64, hi: f64) -> f64 {
        let l = &self.layout;
        let sig = l.jitter_sigma_ns;
        let mut total = 0.0;
        for s in &self.stokes {
            let mut acc = 0.0;
            for at in &self.as_atoms {
                acc += at.w * Self::uniform_gauss(lo, hi, s.a, s.b, at.mu, sig);
            }
            if l.as_noise_mean > 0.0 {
                acc += l.as_noise_mean * prob_uniform_uniform_in(lo, hi, s.a, s.b, 0.0, l.as_gate_ns);
            }
            for leak in &l.leaks {
                if leak.rate > 0.0 {
                    acc += leak.rate * Self::uniform_gauss(lo, hi, s.a, s.b, leak.center_ns, leak.width_ns);
                }
            }
            total += s.w * acc;
        }
        total
    }

    pub fn terms(&self, lo: f64, hi: f64) -> BinTerms {
        let l = &self.layout;
        let sig = l.jitter_sigma_ns;
        let accidental = self.accidental(lo, hi);
        let mut out = BinTerms { accidental, floor: accidental, ..Default::default() };
        if l.classical {
            return out;
        }
        let eta = l.eta_s * l.eta_as;
        for (m, mode) in l.modes.iter().enumerate() {
            let same = self.m1[m] * eta * l.mean_readout[m];
            for i in [EARLY, LATE] {
                for j in [EARLY, LATE] {
                    let p = l.joint.p[i][j];
                    if p == 0.0 {
                        continue;
                    }
                    let mu = l.tau_mc_ns + l.s_delay_ns[i] + l.as_delay_ns[j];
                    let v = same * p * prob_gauss_in(lo, hi, mu, sig);
                    match (i, j) {
                        (EARLY, EARLY) => out.early_early += v,
                        (LATE, LATE) => out.late_late += v,
                        _ => out.interference += v,
                    }
                }
            }
            let ex = self.excess[m] * eta;
            if ex == 0.0 {
                continue;
            }
            let mut bunch = 0.0;
            for i in [EARLY, LATE] {
                for j in [EARLY, LATE] {
                    let p = l.s_paths[i] * l.as_paths[j];
                    if p == 0.0 {
                        continue;
                    }
                    let a = mode.slot_start_ns + l.s_delay_ns[i];
                    let b = mode.slot_end_ns + l.s_delay_ns[i];
                    for &(t, q) in &l.readout_nodes[m] {
                        let mu = l.tau_mc_ns - t + l.as_delay_ns[j];
                        bunch += p * q * Self::uniform_gauss(lo, hi, a, b, mu, sig);
                    }
                }
            }
            out.floor += ex * bunch;
        }
        out
    }

    /// Window of width `window_ns` centred on `center_ns`, on integer edges.
    pub fn window_terms(&self, center_ns: f64, window_ns: u64) -> BinTerms {
        let lo = (center_ns - window_ns as f64 / 2.0).floor();
        self.terms(lo, lo + window_ns as f64)
    }

    pub fn singles(&self) -> Singles {
        let l = &self.layout;
        let s_det = l.s_paths[EARLY] + l.s_paths[LATE];
        let a_det = l.as_paths[EARLY] + l.as_paths[LATE];
        let stokes_pairs: f64 = self.m1.iter().map(|m| m * l.eta_s * s_det).sum();
        let stokes_background = l.p_s_background * l.eta_s * s_det;
        let as_pairs: f64 = self
            .m1
            .iter()
            .zip(&l.mean_readout)
            .map(|(m, r)| m * l.eta_as * r * a_det)
            .sum();
        let leaks: f64 = l.leaks.iter().map(|x| x.rate).sum();
        Singles {
            stokes_per_trial: stokes_pairs + stokes_background,
            herald_probability: 1.0 - l.prob_no_stokes_tag(),
            antistokes_per_read: as_pairs + l.as_noise_mean + leaks,
            antistokes_signal_per_read: as_pairs,
        }
    }
}

/// Expected single-channel counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Singles {
    /// Expected Stokes tags per conditional trial.
    pub stokes_per_trial: f64,
    /// Probability that a conditional trial records at least one Stokes tag.
    pub herald_probability: f64,
    /// Expected anti-Stokes tags per read pulse without conditioning.
    pub antistokes_per_read: f64,
    pub antistokes_signal_per_read: f64,
}

pub fn predict_singles(cfg: &ExperimentConfig, opts: &ModelOptions) -> Result<Singles, ModelError> {
    Ok(Predictor::new(cfg, opts)?.singles())
}

/// Expected coincidences per conditional trial on a T_S + T_AS grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictedHistogram {
    pub grid: BinGrid,
    pub total: Vec<f64>,
    pub accidental: Vec<f64>,
    pub early_early: Vec<f64>,
    pub interference: Vec<f64>,
    pub late_late: Vec<f64>,
    pub floor: Vec<f64>,
    /// Expected peak positions, ns: τ_MC, plus τ_IFC and 2τ_IFC with analyzers.
    pub peak_centers_ns: Vec<f64>,
}

impl PredictedHistogram {
    /// Index of the largest expected bin within [lo_ns, hi_ns).
    pub fn peak_bin_in(&self, lo_ns: f64, hi_ns: f64) -> Option<usize> {
        (0..self.grid.n_bins)
            .filter(|&i| {
                let c = self.grid.center_ns(i);
                c >= lo_ns && c < hi_ns
            })
            .max_by(|&a, &b| self.total[a].total_cmp(&self.total[b]))
    }
}

/// Histogram on a grid of `bin` with τ_MC at a bin centre, covering every
/// source of coincidences.
pub fn predict_histogram(
    cfg: &ExperimentConfig,
    bin_ns: u64,
    opts: &ModelOptions,
) -> Result<PredictedHistogram, ModelError> {
    if bin_ns == 0 {
        return Err(ModelError::Domain("bin size must be > 0".into()));
    }
    let pred = Predictor::new(cfg, opts)?;
    let l = pred.layout();
    let grid = BinGrid::aligned(bin_ns, cfg.tau_mc.as_ns(), l.sum_axis_end_ns().ceil() as u64);
    let mut h = PredictedHistogram {
        grid,
        total: Vec::with_capacity(grid.n_bins),
        accidental: Vec::with_capacity(grid.n_bins),
        early_early: Vec::with_capacity(grid.n_bins),
        interference: Vec::with_capacity(grid.n_bins),
        late_late: Vec::with_capacity(grid.n_bins),
        floor: Vec::with_capacity(grid.n_bins),
        peak_centers_ns: peak_centers(l),
    };
    for i in 0..grid.n_bins {
        let (lo, hi) = grid.edges(i);
        let t = pred.terms(lo as f64, hi as f64);
        h.total.push(t.total());
        h.accidental.push(t.accidental);
        h.early_early.push(t.early_early);
        h.interference.push(t.interference);
        h.late_late.push(t.late_late);
        h.floor.push(t.floor);
    }
    Ok(h)
}

fn peak_centers(l: &PhotonLayout) -> Vec<f64> {
    let mut c = vec![l.tau_mc_ns];
    let ds = l.s_delay_ns[LATE];
    let da = l.as_delay_ns[LATE];
    if ds > 0.0 || da > 0.0 {
        let mut extra = vec![l.tau_mc_ns + ds, l.tau_mc_ns + da, l.tau_mc_ns + ds + da];
        extra.sort_by(f64::total_cmp);
        extra.dedup();
        c.extend(extra.into_iter().filter(|&x| x != l.tau_mc_ns));
    }
    c
}

/// g² in a window of `bin_ns` centred on τ_MC.
pub fn predict_g2(cfg: &ExperimentConfig, bin_ns: u64) -> Result<f64, ModelError> {
    let opts = ModelOptions { window: crate::units::Nanos(bin_ns), ..Default::default() };
    predict_g2_at(cfg, cfg.tau_mc.as_ns_f64(), &opts)
}

/// g² in a window of `opts.window` centred on `center_ns`.
pub fn predict_g2_at(cfg: &ExperimentConfig, center_ns: f64, opts: &ModelOptions) -> Result<f64, ModelError> {
    if opts.window.as_ns() == 0 {
        return Err(ModelError::Domain("bin size must be > 0".into()));
    }
    let pred = Predictor::new(cfg, opts)?;
    if pred.singles().stokes_per_trial <= 0.0 || pred.singles().antistokes_per_read <= 0.0 {
        return Err(ModelError::UndefinedG2("a singles probability is zero".into()));
    }
    pred.window_terms(center_ns, opts.window.as_ns()).g2()
}

/// Centre of the interfering peak, τ_MC + τ_IFC.
pub fn central_peak_ns(cfg: &ExperimentConfig) -> Result<f64, ModelError> {
    match (&cfg.analyzer_s, &cfg.analyzer_as) {
        (Some(s), _) => Ok((cfg.tau_mc.0 + s.tau_ifc.0) as f64),
        (None, Some(a)) => Ok((cfg.tau_mc.0 + a.tau_ifc.0) as f64),
        (None, None) => Err(ModelError::NoAnalyzers),
    }
}

/// Central-peak window terms with the analyzer phases set to (Φ_S, Φ_AS).
pub fn central_terms(
    cfg: &ExperimentConfig,
    phi_s: f64,
    phi_as: f64,
    opts: &ModelOptions,
) -> Result<BinTerms, ModelError> {
    if cfg.analyzer_s.is_none() || cfg.analyzer_as.is_none() {
        return Err(ModelError::NoAnalyzers);
    }
    let cfg = cfg.with_phases(Some(phi_s), Some(phi_as));
    let center = central_peak_ns(&cfg)?;
    Ok(Predictor::new(&cfg, opts)?.window_terms(center, opts.window.as_ns()))
}

/// Central-peak coincidences versus Φ_AS at fixed Φ_S.
#[derive(Debug, Clone, PartialEq)]
pub struct FringePrediction {
    pub phi_s: f64,
    pub phi_as: Vec<f64>,
    /// Expected coincidences per conditional trial.
    pub expected: Vec<f64>,
    pub accidental: Vec<f64>,
    /// Raw-count visibility (C(θ=0) − C(θ=π)) / (C(θ=0) + C(θ=π)).
    pub visibility: f64,
    /// Mean level A in C(θ) = A(1 + V cos θ).
    pub mean: f64,
}

pub fn predict_fringe(
    cfg: &ExperimentConfig,
    phi_s: f64,
    phi_as_list: &[f64],
    opts: &ModelOptions,
) -> Result<FringePrediction, ModelError> {
    let mut expected = Vec::with_capacity(phi_as_list.len());
    let mut accidental = Vec::with_capacity(phi_as_list.len());
    for &p in phi_as_list {
        let t = central_terms(cfg, phi_s, p, opts)?;
        expected.push(t.total());
        accidental.push(t.accidental);
    }
    let (visibility, mean) = raw_visibility(cfg, phi_s, opts)?;
    Ok(FringePrediction { phi_s, phi_as: phi_as_list.to_vec(), expected, accidental, visibility, mean })
}

/// Raw central-window visibility and mean level in the Φ_S basis.
pub fn raw_visibility(cfg: &ExperimentConfig, phi_s: f64, opts: &ModelOptions) -> Result<(f64, f64), ModelError> {
    let max = central_terms(cfg, phi_s, phi_s, opts)?.total();
    let min = central_terms(cfg, phi_s, phi_s + std::f64::consts::PI, opts)?.total();
    let mean = 0.5 * (max + min);
    if !(mean > 0.0) {
        return Err(ModelError::Domain("no central-peak coincidences expected".into()));
    }
    Ok(((max - min) / (max + min), mean))
}

/// CHSH value from expected central-peak counts at the sixteen settings
/// (α or α+π) × (β or β+π); σ fields are zero.
pub fn predict_chsh(cfg: &ExperimentConfig, angles: &ChshAngles, opts: &ModelOptions) -> Result<ChshResult, ModelError> {
    use std::f64::consts::PI;
    let mut terms = Vec::with_capacity(4);
    for (alpha, beta) in angles.pairs() {
        let c = |a: f64, b: f64| central_terms(cfg, a, b, opts).map(|t| t.total());
        let plus = c(alpha, beta)? + c(alpha + PI, beta + PI)?;
        let minus = c(alpha, beta + PI)? + c(alpha + PI, beta)?;
        terms.push(ChshTerm { alpha, beta, e: (plus - minus) / (plus + minus), sigma: 0.0 });
    }
    Ok(ChshResult::from_terms([terms[0], terms[1], terms[2], terms[3]]))
}
