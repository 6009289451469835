//! S and g² as functions of the coincidence window.

use crate::chsh::ChshResult;

use super::chsh::ChshDataset;
use super::g2::{g2_from_counts, G2Estimate};
use super::histogram::CoincidenceData;
use super::AnalysisError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanVariable {
    /// Window centre, µs.
    WindowCenterUs,
    /// Window width, ns.
    BinSizeNs,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanPoint {
    pub x: f64,
    /// `None` when a window holds too few counts for E to be defined.
    pub result: Option<ChshResult>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanResult {
    pub variable: ScanVariable,
    pub points: Vec<ScanPoint>,
    /// Index of the point with the largest S.
    pub best: Option<usize>,
}

fn collect(variable: ScanVariable, xs: &[f64], eval: impl Fn(f64) -> Result<ChshResult, AnalysisError>) -> Result<ScanResult, AnalysisError> {
    if xs.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(AnalysisError::Domain("scan axis must be strictly increasing".into()));
    }
    let mut points = Vec::with_capacity(xs.len());
    for &x in xs {
        let result = match eval(x) {
            Ok(r) => Some(r),
            Err(AnalysisError::UndefinedE) => None,
            Err(e) => return Err(e),
        };
        points.push(ScanPoint { x, result });
    }
    let best = points
        .iter()
        .enumerate()
        .filter_map(|(i, p)| p.result.as_ref().map(|r| (i, r.s)))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i);
    Ok(ScanResult { variable, points, best })
}

/// S for windows of `bin_ns` centred at each of `centers_ns`.
pub fn scan_window(data: &ChshDataset, bin_ns: u64, centers_ns: &[f64]) -> Result<ScanResult, AnalysisError> {
    let xs: Vec<f64> = centers_ns.iter().map(|c| c / 1000.0).collect();
    collect(ScanVariable::WindowCenterUs, &xs, |x| data.s_centered(x * 1000.0, bin_ns))
}

/// S for windows of each size in `sizes_ns` centred at `center_ns`.
pub fn scan_binsize(data: &ChshDataset, center_ns: f64, sizes_ns: &[u64]) -> Result<ScanResult, AnalysisError> {
    let xs: Vec<f64> = sizes_ns.iter().map(|&s| s as f64).collect();
    collect(ScanVariable::BinSizeNs, &xs, |x| data.s_centered(center_ns, x as u64))
}

#[derive(Debug, Clone, PartialEq)]
pub struct WidthPoint {
    pub width_ns: u64,
    /// `None` when the window holds no accidentals.
    pub g2: Option<G2Estimate>,
    pub coincidences_per_hour: f64,
    pub accidentals_per_hour: f64,
}

/// g² and rates for windows of each width centred at `center_ns`. Rates
/// use the laboratory time of the run, total trials / rep rate.
pub fn scan_g2_vs_width(
    data: &CoincidenceData,
    center_ns: f64,
    widths_ns: &[u64],
    rep_rate_khz: f64,
) -> Result<Vec<WidthPoint>, AnalysisError> {
    if widths_ns.windows(2).any(|w| w[1] <= w[0]) {
        return Err(AnalysisError::Domain("widths must be strictly increasing".into()));
    }
    let hours = data.total_trials() as f64 / (rep_rate_khz * 1000.0) / 3600.0;
    if !(hours > 0.0) {
        return Err(AnalysisError::Exposure("run has no trials".into()));
    }
    let k = data.n_unconditional_per_herald;
    Ok(widths_ns
        .iter()
        .map(|&w| {
            let (c, acc) = data.centered_window(center_ns, w);
            WidthPoint {
                width_ns: w,
                g2: g2_from_counts(c, acc, k).ok(),
                coincidences_per_hour: c as f64 / hours,
                accidentals_per_hour: if k == 0 { 0.0 } else { acc as f64 / k as f64 / hours },
            }
        })
        .collect())
}
