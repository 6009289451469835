//! Statistics rebuilt from tag streams.

use rand::seq::SliceRandom;
use thiserror::Error;

use crate::sim::Substream;
use crate::tag::{Channel, TimeTag, TrialKind};

pub mod chsh;
pub mod fringe;
pub mod g2;
pub mod histogram;
pub mod scan;

pub use chsh::{compute_e, compute_s, ChshDataset};
pub use fringe::{fit_fringe, FringeFit, FringePoint};
pub use g2::{find_peak_bin, g2_estimate, g2_from_counts, garwood_interval, G2Estimate};
pub use histogram::{build_histogram, CoincidenceData, CoincidenceHistogram, Exposure};
pub use scan::{scan_binsize, scan_g2_vs_width, scan_window, ScanPoint, ScanResult, ScanVariable, WidthPoint};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("tag stream out of order at tag {0}")]
    Ordering(usize),
    #[error("exposure mismatch: {0}")]
    Exposure(String),
    #[error("g2 undefined: {0}")]
    UndefinedG2(String),
    #[error("E undefined: all four counts are zero")]
    UndefinedE,
    #[error("fit rank deficient: {0}")]
    FitRank(String),
    #[error("{0}")]
    Domain(String),
}

/// Randomly reassigns whole anti-Stokes tag groups among the read slots of
/// every herald block (the conditional trial and its unconditional
/// followers). Stokes tags stay in place, so any Stokes/anti-Stokes
/// correlation is destroyed while singles are preserved.
pub fn shuffle_antistokes(tags: &[TimeTag], n_unconditional_per_herald: u32, seed: u64) -> Result<Vec<TimeTag>, AnalysisError> {
    if let Some(i) = crate::tag::first_disorder(tags) {
        return Err(AnalysisError::Ordering(i));
    }
    let k = n_unconditional_per_herald as u64 + 1;
    let mut heralds: Vec<u64> = tags
        .iter()
        .filter(|t| t.kind == TrialKind::Conditional && t.channel == Channel::Stokes)
        .map(|t| t.trial_id / k)
        .collect();
    heralds.dedup();
    let slot_count = heralds.len() * k as usize;
    let slot_index = |id: u64| -> Option<usize> {
        let b = heralds.binary_search(&(id / k)).ok()?;
        Some(b * k as usize + (id % k) as usize)
    };
    let mut groups: Vec<Vec<u64>> = vec![Vec::new(); slot_count];
    let mut out = Vec::with_capacity(tags.len());
    for t in tags {
        if t.channel == Channel::AntiStokes {
            match slot_index(t.trial_id) {
                Some(s) => groups[s].push(t.time_ns),
                None => out.push(*t),
            }
        } else {
            out.push(*t);
        }
    }
    let mut rng = Substream::new(seed, u64::MAX);
    groups.shuffle(&mut rng);
    for (s, g) in groups.into_iter().enumerate() {
        let block = heralds[s / k as usize];
        let j = (s % k as usize) as u64;
        let trial_id = block * k + j;
        let kind = if j == 0 { TrialKind::Conditional } else { TrialKind::Unconditional };
        out.extend(g.into_iter().map(|time_ns| TimeTag { trial_id, kind, channel: Channel::AntiStokes, time_ns }));
    }
    out.sort();
    Ok(out)
}
