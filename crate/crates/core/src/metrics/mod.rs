//! Front quality and prediction quality measures.

mod correlation;
mod hypervolume;

pub use correlation::{average_ranks, kendall_tau, pearson, rmse, spearman};
pub use hypervolume::{
    hypervolume, hypervolume_exact, hypervolume_monte_carlo, HvConfig, Hypervolume, MONTE_CARLO_SAMPLES,
};

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum MetricError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need more values, got {0}")]
    TooShort(usize),
    #[error("all values tied; rank correlation undefined")]
    AllTied,
    #[error("non-finite input")]
    NonFinite,
    #[error("exact hypervolume not available for {0} objectives")]
    UnsupportedArity(usize),
}
