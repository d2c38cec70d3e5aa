//! Configurators: random search and random-forest guided sequential
//! model-based search, both racing challengers against the incumbent on
//! matched `(instance, seed)` runs.

mod acquisition;
mod features;
mod forest;
mod search;
mod session;

use thiserror::Error;

use crate::paramspace::OverConstrained;
use crate::runner::HarnessError;

pub use acquisition::{expected_improvement, select_challengers, select_challengers_excluding, SelectionOptions};
pub use features::{encode_features, FeatureEncoder};
pub use forest::{fit_model, predict, ForestOptions, PerformanceModel, Prediction, RegressionTree, MIN_COST};
pub use search::{random_search, smbo_configure, ConfiguratorResult, SmboOptions};
pub use session::{intensify, SeedLadder, Session};

#[derive(Debug, Error)]
pub enum ConfigureError {
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error("budget exhausted before the default configuration was evaluated")]
    BudgetExhausted,
    #[error("model needs runs of at least two configurations")]
    InsufficientHistory,
    #[error("configuration belongs to a different space than the model")]
    SpaceMismatch,
    #[error("variance must be non-negative, got {0}")]
    NegativeVariance(f64),
    #[error("incumbent has no runs to race against")]
    NoIncumbentRuns,
    #[error(transparent)]
    OverConstrained(#[from] OverConstrained),
}
