//! The outer search loop: initial sampling, surrogate refit, inner
//! evolutionary search on predicted objectives, batch selection, archive
//! upkeep, checkpoints and post-run analysis.

mod analysis;
mod archive;
mod checkpoint;
mod config;
mod mining;
mod search;
mod select;
mod studies;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluation::EvalError;
use crate::metrics::MetricError;
use crate::moea::MoeaError;
use crate::space::{ComplexityVector, SpaceError};
use crate::surrogates::SurrogateError;

pub use analysis::{cumulative_hypervolume, exhaustive_archive, random_search, spearman_matrix};
pub use archive::{Archive, EvaluatedArch};
pub use checkpoint::{checkpoint_from_bytes, checkpoint_to_bytes, load_checkpoint, save_checkpoint};
pub use config::{RunConfig, ScalarizationConfig, SpaceSpec};
pub use mining::{mine_frequencies, transfer_init, GeneDistribution};
pub use search::{IterationReport, Search, SearchState};
pub use select::{scalar_subset_select, subset_select, SelectCandidate};
pub use studies::{
    efficiency_study, mean_sd, summarize_study, surrogate_study, CurvePoint, StudyConfig, StudyRow, StudySample, RANDOM_LABEL,
    SEARCH_LABEL, SWITCH_LABEL,
};

#[derive(Debug, Error)]
pub enum DriverError {
    #[error("invalid run configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Surrogate(#[from] SurrogateError),
    #[error(transparent)]
    Moea(#[from] MoeaError),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("every candidate was already evaluated")]
    EmptyAfterDedup,
    #[error("genome {0} is already in the archive")]
    DuplicateGenome(String),
    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),
    #[error("the archive front is empty")]
    EmptyFront,
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

impl DriverError {
    pub(crate) fn io(path: &std::path::Path, err: impl fmt::Display) -> DriverError {
        DriverError::Io { path: path.display().to_string(), message: err.to_string() }
    }
}

/// A minimized objective. Accuracy is stored negated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    Accuracy,
    Madds,
    Params,
    LatencyCpu,
    LatencyGpu,
}

impl Objective {
    pub fn name(self) -> &'static str {
        match self {
            Objective::Accuracy => "accuracy",
            Objective::Madds => "madds",
            Objective::Params => "params",
            Objective::LatencyCpu => "latency_cpu",
            Objective::LatencyGpu => "latency_gpu",
        }
    }

    /// Value of a complexity objective; accuracy has none.
    pub fn complexity_value(self, c: &ComplexityVector) -> Option<f64> {
        match self {
            Objective::Accuracy => None,
            Objective::Madds => Some(c.madds as f64),
            Objective::Params => Some(c.params as f64),
            Objective::LatencyCpu => Some(c.latency_cpu),
            Objective::LatencyGpu => Some(c.latency_gpu),
        }
    }

    /// Minimization value given an accuracy and complexity.
    pub fn value(self, accuracy: f64, c: &ComplexityVector) -> f64 {
        self.complexity_value(c).unwrap_or(-accuracy)
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Objective {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "accuracy" => Ok(Objective::Accuracy),
            "madds" => Ok(Objective::Madds),
            "params" => Ok(Objective::Params),
            "latency_cpu" => Ok(Objective::LatencyCpu),
            "latency_gpu" => Ok(Objective::LatencyGpu),
            other => Err(format!("unknown objective '{other}'")),
        }
    }
}

/// Minimization vector of an architecture under an objective list.
pub fn objective_vector(objectives: &[Objective], accuracy: f64, c: &ComplexityVector) -> Vec<f64> {
    objectives.iter().map(|o| o.value(accuracy, c)).collect()
}
