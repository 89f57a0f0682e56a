//! Evolutionary search over genomes: Pareto utilities, an NSGA-II loop for
//! vector objectives and a plain generational GA for scalar fitness.

mod nsga2;
mod pareto;

pub use nsga2::{evolve, evolve_observed, evolve_scalar, Individual, NsgaConfig, ScoredGenome};
pub use pareto::{crowding_distance, dominates, nondominated_sort, pareto_front, rank_and_crowd, ObjectiveVector};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MoeaError {
    #[error("objective arity mismatch: {0} vs {1}")]
    ArityMismatch(usize, usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("objective function returned {got} rows for {expected} genomes")]
    ObjectiveCount { expected: usize, got: usize },
    #[error("non-finite objective value")]
    NonFinite,
}
