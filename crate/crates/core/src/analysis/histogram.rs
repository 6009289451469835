//! Coincidences and accidentals from tag streams.
//!
//! Every (Stokes, anti-Stokes) tag pair of a conditional trial is one
//! coincidence at `T_S + T_AS`. Accidentals pair the Stokes tags of each
//! heralding conditional trial with the anti-Stokes tags of each of the
//! unconditional trials that follow it; dividing by the number of those
//! trials puts them on the conditional-trial exposure.

use crate::grid::BinGrid;
use crate::sim::{TrialOutcome, TrialSink};
use crate::tag::{first_disorder, Channel, TimeTag, TrialKind};

use super::AnalysisError;

/// What a tag stream alone cannot tell: trials without tags leave no trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exposure {
    pub n_conditional: u64,
    pub n_unconditional_per_herald: u32,
    /// Write-pulse rate, kHz.
    pub rep_rate_khz: f64,
}

/// Pair sums of one run, kept unbinned so any window or bin size can be
/// evaluated exactly.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CoincidenceData {
    pub n_unconditional_per_herald: u32,
    pub n_conditional: u64,
    pub n_heralds: u64,
    pub n_unconditional: u64,
    /// Stokes tags recorded in conditional trials.
    pub stokes_tags: u64,
    /// Anti-Stokes tags recorded in unconditional trials.
    pub unconditional_antistokes_tags: u64,
    /// T_S + T_AS of every coincidence, ns, in stream order.
    pub coincidence_sums: Vec<u64>,
    /// T_S + T_AS of every accidental pair (not yet divided), ns.
    pub accidental_sums: Vec<u64>,
    herald_stokes: Vec<u64>,
    herald_block: Option<u64>,
}

impl CoincidenceData {
    pub fn new(n_unconditional_per_herald: u32) -> Self {
        Self { n_unconditional_per_herald, ..Default::default() }
    }

    fn block_of(&self, trial_id: u64) -> u64 {
        trial_id / (self.n_unconditional_per_herald as u64 + 1)
    }

    /// Feeds the tags of one trial.
    fn trial(&mut self, trial_id: u64, kind: TrialKind, tags: &[TimeTag]) {
        let stokes = tags.iter().filter(|t| t.channel == Channel::Stokes);
        let antistokes = tags.iter().filter(|t| t.channel == Channel::AntiStokes);
        match kind {
            TrialKind::Conditional => {
                self.herald_stokes.clear();
                self.herald_stokes.extend(stokes.map(|t| t.time_ns));
                if self.herald_stokes.is_empty() {
                    self.herald_block = None;
                    return;
                }
                self.n_heralds += 1;
                self.stokes_tags += self.herald_stokes.len() as u64;
                self.herald_block = Some(self.block_of(trial_id));
                for a in antistokes {
                    for &s in &self.herald_stokes {
                        self.coincidence_sums.push(s + a.time_ns);
                    }
                }
            }
            TrialKind::Unconditional => {
                let mut n = 0;
                let same_block = self.herald_block == Some(self.block_of(trial_id));
                for a in antistokes {
                    n += 1;
                    if same_block {
                        for &s in &self.herald_stokes {
                            self.accidental_sums.push(s + a.time_ns);
                        }
                    }
                }
                self.unconditional_antistokes_tags += n;
            }
        }
    }

    /// Builds the data from an ordered tag stream.
    pub fn from_tags(tags: &[TimeTag], exposure: &Exposure) -> Result<Self, AnalysisError> {
        if let Some(i) = first_disorder(tags) {
            return Err(AnalysisError::Ordering(i));
        }
        let mut d = Self::new(exposure.n_unconditional_per_herald);
        let mut start = 0;
        while start < tags.len() {
            let id = tags[start].trial_id;
            let mut end = start + 1;
            while end < tags.len() && tags[end].trial_id == id {
                end += 1;
            }
            let kind = tags[start].kind;
            if kind == TrialKind::Unconditional && d.herald_block != Some(d.block_of(id)) {
                return Err(AnalysisError::Exposure(format!(
                    "unconditional trial {id} does not follow a heralding conditional trial"
                )));
            }
            d.trial(id, kind, &tags[start..end]);
            start = end;
        }
        if d.n_heralds > exposure.n_conditional {
            return Err(AnalysisError::Exposure(format!(
                "{} heralds but only {} conditional trials declared",
                d.n_heralds, exposure.n_conditional
            )));
        }
        d.n_conditional = exposure.n_conditional;
        d.n_unconditional = d.n_heralds * exposure.n_unconditional_per_herald as u64;
        d.herald_stokes.clear();
        d.herald_block = None;
        Ok(d)
    }

    pub fn total_trials(&self) -> u64 {
        self.n_conditional + self.n_unconditional
    }

    /// Coincidences and raw accidental pairs with T_S + T_AS ∈ [lo, hi).
    pub fn window(&self, lo_ns: i64, hi_ns: i64) -> (u64, u64) {
        let count = |v: &[u64]| v.iter().filter(|&&x| (lo_ns..hi_ns).contains(&(x as i64))).count() as u64;
        (count(&self.coincidence_sums), count(&self.accidental_sums))
    }

    /// Window of width `width_ns` centred on `center_ns`, on integer edges.
    pub fn centered_window(&self, center_ns: f64, width_ns: u64) -> (u64, u64) {
        let lo = (center_ns - width_ns as f64 / 2.0).floor() as i64;
        self.window(lo, lo + width_ns as i64)
    }

    pub fn histogram(&self, grid: &BinGrid) -> CoincidenceHistogram {
        let mut counts = vec![0u64; grid.n_bins];
        let mut acc = vec![0u64; grid.n_bins];
        for &x in &self.coincidence_sums {
            if let Some(i) = grid.bin_of(x) {
                counts[i] += 1;
            }
        }
        for &x in &self.accidental_sums {
            if let Some(i) = grid.bin_of(x) {
                acc[i] += 1;
            }
        }
        let k = self.n_unconditional_per_herald;
        CoincidenceHistogram {
            grid: *grid,
            bin_size_ns: grid.bin_ns,
            axis_origin_us: grid.origin_ns as f64 / 1000.0,
            counts,
            accidental_counts: acc.iter().map(|&a| if k == 0 { 0.0 } else { a as f64 / k as f64 }).collect(),
            accidental_raw: acc,
            n_conditional_trials: self.n_conditional,
            n_unconditional_trials: self.n_unconditional,
            n_unconditional_per_herald: k,
        }
    }
}

impl TrialSink for CoincidenceData {
    fn accept(&mut self, o: &TrialOutcome) {
        match o.kind {
            TrialKind::Conditional => self.n_conditional += 1,
            TrialKind::Unconditional => self.n_unconditional += 1,
        }
        self.trial(o.trial_id, o.kind, &o.tags);
    }

    fn absorb(&mut self, mut later: Self) {
        self.n_conditional += later.n_conditional;
        self.n_heralds += later.n_heralds;
        self.n_unconditional += later.n_unconditional;
        self.stokes_tags += later.stokes_tags;
        self.unconditional_antistokes_tags += later.unconditional_antistokes_tags;
        self.coincidence_sums.append(&mut later.coincidence_sums);
        self.accidental_sums.append(&mut later.accidental_sums);
        self.herald_stokes = later.herald_stokes;
        self.herald_block = later.herald_block;
    }
}

/// Binned coincidences over T_S + T_AS with matching accidentals.
#[derive(Debug, Clone, PartialEq)]
pub struct CoincidenceHistogram {
    pub grid: BinGrid,
    pub bin_size_ns: u64,
    pub axis_origin_us: f64,
    pub counts: Vec<u64>,
    /// Accidental pairs divided by the unconditional trials per herald.
    pub accidental_counts: Vec<f64>,
    pub accidental_raw: Vec<u64>,
    pub n_conditional_trials: u64,
    pub n_unconditional_trials: u64,
    pub n_unconditional_per_herald: u32,
}

impl CoincidenceHistogram {
    pub fn total_counts(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Histogram of an ordered tag stream on `grid`.
pub fn build_histogram(
    tags: &[TimeTag],
    grid: &BinGrid,
    exposure: &Exposure,
) -> Result<CoincidenceHistogram, AnalysisError> {
    Ok(CoincidenceData::from_tags(tags, exposure)?.histogram(grid))
}
