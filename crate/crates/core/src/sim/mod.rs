//! Trial-by-trial Monte Carlo engine.

pub mod experiment;
pub mod rng;
pub mod tagio;
pub mod trial;

pub use experiment::{
    run_experiment, run_experiment_with, run_with_sink, trial_id, ExperimentRun, RunCounts, RunOptions,
    TagCollector, TrialSink,
};
pub use rng::{derive_seed, RngStreamSpec, Substream};
pub use tagio::{read_tags, write_tags, TagFile, TagFormat, TagIoError};
pub use trial::{PairEmission, TrialOutcome, TrialSampler};
