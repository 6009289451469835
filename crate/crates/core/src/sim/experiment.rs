//! The full trial sequence: conditional trials, each herald followed by
//! `n_unconditional` accidental trials.
//!
//! Trial ids are slots: conditional trial `c` has id `c·(k+1)` and its
//! unconditional followers have ids `c·(k+1) + 1 ..= c·(k+1) + k`, where
//! `k = n_unconditional`. Ids of followers that never run (no herald) are
//! simply unused. Because every trial draws from its own substream, the
//! sequence can be cut into chunks and evaluated in parallel; chunk
//! results are merged in chunk order.

use rayon::prelude::*;

use crate::config::{ConfigError, ExperimentConfig};
use crate::tag::{TimeTag, TrialKind};

use super::trial::{TrialOutcome, TrialSampler};

/// Consumes trials in experiment order.
pub trait TrialSink: Send + Sized {
    fn accept(&mut self, outcome: &TrialOutcome);
    /// Appends the results of the chunk that follows `self`.
    fn absorb(&mut self, later: Self);
}

/// Trial counts of one run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunCounts {
    pub n_conditional: u64,
    pub n_heralds: u64,
    pub n_unconditional: u64,
}

impl RunCounts {
    pub fn total_trials(&self) -> u64 {
        self.n_conditional + self.n_unconditional
    }

    fn add(&mut self, o: &RunCounts) {
        self.n_conditional += o.n_conditional;
        self.n_heralds += o.n_heralds;
        self.n_unconditional += o.n_unconditional;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
    /// Conditional trials per work unit.
    pub chunk: u64,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { workers: None, chunk: 1 << 16 }
    }
}

pub fn trial_id(conditional_index: u64, slot: u64, n_unconditional: u32) -> u64 {
    conditional_index * (n_unconditional as u64 + 1) + slot
}

fn run_chunk<S: TrialSink>(
    sampler: &TrialSampler,
    n_unc: u32,
    range: std::ops::Range<u64>,
    sink: &mut S,
) -> RunCounts {
    let mut out = TrialOutcome::new();
    let mut counts = RunCounts::default();
    for c in range {
        let base = trial_id(c, 0, n_unc);
        sampler.run_trial_into(base, TrialKind::Conditional, &mut out);
        counts.n_conditional += 1;
        let herald = out.has_stokes_tag();
        sink.accept(&out);
        if herald {
            counts.n_heralds += 1;
            for j in 1..=n_unc as u64 {
                sampler.run_trial_into(base + j, TrialKind::Unconditional, &mut out);
                sink.accept(&out);
            }
            counts.n_unconditional += n_unc as u64;
        }
    }
    counts
}

/// Runs `n_conditional` conditional trials, feeding every trial to a sink
/// made by `make`. Output is independent of the worker count.
pub fn run_with_sink<S, F>(
    cfg: &ExperimentConfig,
    n_conditional: u64,
    opts: &RunOptions,
    make: F,
) -> Result<(S, RunCounts), ConfigError>
where
    S: TrialSink,
    F: Fn() -> S + Sync,
{
    let sampler = TrialSampler::new(cfg)?;
    let n_unc = cfg.n_unconditional;
    let chunk = opts.chunk.max(1);
    let n_chunks = n_conditional.div_ceil(chunk);
    let work = |pool_threads: usize| {
        let mut total = make();
        let mut counts = RunCounts::default();
        let batch = (4 * pool_threads).max(1) as u64;
        let mut first = 0;
        while first < n_chunks {
            let last = (first + batch).min(n_chunks);
            let parts: Vec<(S, RunCounts)> = (first..last)
                .into_par_iter()
                .map(|k| {
                    let lo = k * chunk;
                    let hi = (lo + chunk).min(n_conditional);
                    let mut sink = make();
                    let c = run_chunk(&sampler, n_unc, lo..hi, &mut sink);
                    (sink, c)
                })
                .collect();
            for (s, c) in parts {
                total.absorb(s);
                counts.add(&c);
            }
            first = last;
        }
        (total, counts)
    };
    let result = match opts.workers {
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w.max(1))
                .build()
                .expect("thread pool");
            pool.install(|| work(w.max(1)))
        }
        None => work(rayon::current_num_threads()),
    };
    Ok(result)
}

/// Collects every tag in stream order.
#[derive(Debug, Default)]
pub struct TagCollector {
    pub tags: Vec<TimeTag>,
}

impl TrialSink for TagCollector {
    fn accept(&mut self, o: &TrialOutcome) {
        self.tags.extend_from_slice(&o.tags);
    }

    fn absorb(&mut self, mut later: Self) {
        self.tags.append(&mut later.tags);
    }
}

/// A simulated tag stream with its exposure.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRun {
    pub tags: Vec<TimeTag>,
    pub counts: RunCounts,
    pub n_unconditional_per_herald: u32,
    /// Write-pulse rate, kHz.
    pub rep_rate_khz: f64,
}

impl ExperimentRun {
    /// Laboratory time the same number of write pulses would take, s.
    pub fn experiment_time_s(&self) -> f64 {
        self.counts.total_trials() as f64 / (self.rep_rate_khz * 1000.0)
    }
}

pub fn run_experiment(cfg: &ExperimentConfig, n_conditional: u64) -> Result<ExperimentRun, ConfigError> {
    run_experiment_with(cfg, n_conditional, &RunOptions::default())
}

pub fn run_experiment_with(
    cfg: &ExperimentConfig,
    n_conditional: u64,
    opts: &RunOptions,
) -> Result<ExperimentRun, ConfigError> {
    let (sink, counts) = run_with_sink(cfg, n_conditional, opts, TagCollector::default)?;
    Ok(ExperimentRun {
        tags: sink.tags,
        counts,
        n_unconditional_per_herald: cfg.n_unconditional,
        rep_rate_khz: cfg.rep_rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tag::first_disorder;

    #[test]
    fn no_unconditional_trials_when_disabled() {
        let mut cfg = ExperimentConfig::paper_defaults();
        cfg.n_unconditional = 0;
        let run = run_experiment(&cfg, 20_000).unwrap();
        assert!(run.tags.iter().all(|t| t.kind == TrialKind::Conditional));
        assert_eq!(run.counts.n_unconditional, 0);
    }

    #[test]
    fn stream_is_ordered_and_deterministic() {
        let cfg = ExperimentConfig::paper_with_analyzers();
        let a = run_experiment_with(&cfg, 50_000, &RunOptions { workers: Some(1), chunk: 7_000 }).unwrap();
        let b = run_experiment_with(&cfg, 50_000, &RunOptions { workers: Some(3), chunk: 1_000 }).unwrap();
        assert_eq!(first_disorder(&a.tags), None);
        assert_eq!(a, b);
        assert!(a.counts.n_heralds > 0);
    }
}
