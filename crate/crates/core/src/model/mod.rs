//! Analytic emission model.

use thiserror::Error;

use crate::config::ConfigError;
use crate::units::Nanos;

pub mod kernels;
pub mod layout;
pub mod predict;
pub mod stokes;
pub mod thermal;

pub use layout::{PairModePopulation, PhotonLayout};
pub use predict::{
    predict_chsh, predict_fringe, predict_g2, predict_g2_at, predict_histogram, predict_singles,
    BinTerms, FringePrediction, PredictedHistogram, Singles,
};
pub use stokes::stokes_probability;
pub use thermal::{thermal_distribution, ThermalDistribution};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("g2 undefined: {0}")]
    UndefinedG2(String),
    #[error("configuration has no analyzers")]
    NoAnalyzers,
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// Numerical knobs of the predictor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelOptions {
    /// Thermal cutoff used for the pair-number moments.
    pub n_max: u32,
    /// Coincidence window for g², fringes and CHSH.
    pub window: Nanos,
}

impl Default for ModelOptions {
    fn default() -> Self {
        Self { n_max: 8, window: Nanos(600) }
    }
}
