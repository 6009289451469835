//! Prediction, Monte Carlo simulation and tag-stream analysis for
//! AFC-DLCZ time-bin entanglement experiments.
//!
//! A write pulse scatters Stokes photons into a handful of temporal modes,
//! each heralding a spin wave in the memory crystal. The memory rephases
//! after `tau_mc`, so a later read pulse releases the matching anti-Stokes
//! photon with `T_S + T_AS = tau_mc`. Optional AFC analyzers in both arms
//! split each photon into early and late time bins, and the central
//! coincidence peak carries the two-photon interference used for the
//! CHSH test.
//!
//! * [`config`] holds the experiment description and its validation.
//! * [`model`] predicts histograms, g², fringes and CHSH values analytically.
//! * [`sim`] generates tag streams trial by trial.
//! * [`analysis`] rebuilds every statistic from tag streams.
//! * [`calibrate`] fits the noise and mode-overlap knobs to target values.

pub mod analysis;
pub mod calibrate;
pub mod chsh;
pub mod config;
pub mod export;
pub mod grid;
pub mod model;
pub mod sim;
pub mod tag;
pub mod units;

pub use chsh::{ChshAngles, ChshResult, ChshTerm};
pub use config::{validate_config, AnalyzerSetting, ConfigError, ExperimentConfig, Violation};
pub use grid::BinGrid;
pub use tag::{Channel, TimeTag, TrialKind};
pub use units::Nanos;
