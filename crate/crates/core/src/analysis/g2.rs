//! Cross-correlation g² from coincidences and accidentals.

use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::histogram::CoincidenceHistogram;
use super::AnalysisError;

/// Counts below this switch the interval to exact Poisson bounds.
pub const SMALL_COUNT: u64 = 10;
/// Central coverage of a ±1σ interval.
pub const ONE_SIGMA: f64 = 0.682_689_492_137_086;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct G2Estimate {
    pub g2: f64,
    /// First-order Poisson propagation through C / (N_acc / k).
    pub sigma: f64,
    /// ±1σ-equivalent interval; exact Poisson bounds when `small_counts`.
    pub lower: f64,
    pub upper: f64,
    pub small_counts: bool,
    pub coincidences: u64,
    /// Accidentals on conditional-trial exposure.
    pub accidentals: f64,
    pub accidental_raw: u64,
}

/// Garwood (exact Poisson) interval for an observed count `n`.
pub fn garwood_interval(n: u64, coverage: f64) -> (f64, f64) {
    let alpha = 1.0 - coverage;
    let lower = if n == 0 {
        0.0
    } else {
        ChiSquared::new(2.0 * n as f64).expect("dof > 0").inverse_cdf(alpha / 2.0) / 2.0
    };
    let upper = ChiSquared::new(2.0 * (n + 1) as f64).expect("dof > 0").inverse_cdf(1.0 - alpha / 2.0) / 2.0;
    (lower, upper)
}

/// g² from `c` coincidences and `acc_raw` accidental pairs collected over
/// `per_herald` unconditional trials per herald.
pub fn g2_from_counts(c: u64, acc_raw: u64, per_herald: u32) -> Result<G2Estimate, AnalysisError> {
    if acc_raw == 0 || per_herald == 0 {
        return Err(AnalysisError::UndefinedG2(
            "no accidental coincidences in the window; use a wider bin".into(),
        ));
    }
    let k = per_herald as f64;
    let accidentals = acc_raw as f64 / k;
    let g2 = c as f64 / accidentals;
    let rel = if c > 0 { (1.0 / c as f64 + 1.0 / acc_raw as f64).sqrt() } else { 0.0 };
    let sigma = if c > 0 {
        g2 * rel
    } else {
        // Nothing to propagate; use the one-count scale.
        1.0 / accidentals
    };
    let small_counts = c < SMALL_COUNT || acc_raw < SMALL_COUNT;
    let (lower, upper) = if small_counts {
        let (cl, ch) = garwood_interval(c, ONE_SIGMA);
        let (al, ah) = garwood_interval(acc_raw, ONE_SIGMA);
        (cl / (ah / k), if al > 0.0 { ch / (al / k) } else { f64::INFINITY })
    } else {
        (g2 - sigma, g2 + sigma)
    };
    Ok(G2Estimate { g2, sigma, lower, upper, small_counts, coincidences: c, accidentals, accidental_raw: acc_raw })
}

/// g² in one histogram bin.
pub fn g2_estimate(hist: &CoincidenceHistogram, peak_bin: usize) -> Result<G2Estimate, AnalysisError> {
    if peak_bin >= hist.counts.len() {
        return Err(AnalysisError::Domain(format!(
            "peak bin {peak_bin} outside histogram of {} bins",
            hist.counts.len()
        )));
    }
    g2_from_counts(hist.counts[peak_bin], hist.accidental_raw[peak_bin], hist.n_unconditional_per_herald)
}

/// Bin with the most coincidences among those whose centre lies in
/// [lo_ns, hi_ns); ties go to the earliest bin.
pub fn find_peak_bin(hist: &CoincidenceHistogram, lo_ns: f64, hi_ns: f64) -> Option<usize> {
    let mut best: Option<usize> = None;
    for i in 0..hist.counts.len() {
        let c = hist.grid.center_ns(i);
        if c < lo_ns || c >= hi_ns {
            continue;
        }
        if best.is_none_or(|b| hist.counts[i] > hist.counts[b]) {
            best = Some(i);
        }
    }
    best
}
