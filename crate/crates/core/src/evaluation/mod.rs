//! Evaluators standing in for network training: a closed-form synthetic
//! landscape, lookup tables and an external process speaking JSON lines.

mod external;
pub mod stub;
mod synthetic;
mod tabular;

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::space::{Genome, SpaceError};

pub use external::{ExternalConfig, ExternalEvaluator};
pub use synthetic::{max_raw_score, synthetic_accuracy, SyntheticConfig, SyntheticEvaluator, SyntheticLandscape, Variant};
pub use tabular::{TabularEvaluator, TabularRow, TabularTable};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("evaluator process crashed: {0}")]
    ChildCrashed(String),
    #[error("could not start evaluator process: {0}")]
    Spawn(String),
    #[error("request {0} timed out")]
    Timeout(u64),
    #[error("malformed response line: {0}")]
    MalformedResponse(String),
    #[error("request {id} rejected by evaluator: {message}")]
    Rejected { id: u64, message: String },
    #[error("accuracy {value} for request {id} is outside [0, 1]")]
    InvalidAccuracy { id: u64, value: f64 },
    #[error("no table entry for genome {0}")]
    MissingEntry(String),
    #[error("duplicate table entry for genome {0}")]
    DuplicateKey(String),
    #[error("table error: {0}")]
    Table(String),
    #[error("invalid genome: {0}")]
    InvalidGenome(#[from] SpaceError),
    #[error("scalarization needs positive complexity and target")]
    NonPositiveInput,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRequest {
    pub id: u64,
    pub genome: String,
    pub resolution: u32,
    #[serde(default)]
    pub objectives: Vec<String>,
}

impl EvalRequest {
    pub fn new(id: u64, genome: &Genome) -> EvalRequest {
        EvalRequest {
            id,
            genome: genome.encode_text(),
            resolution: genome.resolution(),
            objectives: vec!["accuracy".to_string()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub id: u64,
    pub accuracy: f64,
    #[serde(default)]
    pub extras: BTreeMap<String, f64>,
    #[serde(default)]
    pub evaluator: String,
    /// Seconds; zero for in-process evaluators.
    #[serde(default)]
    pub wall_time: f64,
}

impl EvalResult {
    pub fn new(id: u64, accuracy: f64, evaluator: &str) -> EvalResult {
        EvalResult { id, accuracy, extras: BTreeMap::new(), evaluator: evaluator.to_string(), wall_time: 0.0 }
    }
}

/// A batch evaluator. Results come back in request order.
pub trait Evaluator: Send {
    fn id(&self) -> &str;
    fn evaluate(&mut self, batch: &[EvalRequest]) -> Result<Vec<EvalResult>, EvalError>;
}

/// Evaluator choice as it appears in run configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EvaluatorSpec {
    Synthetic(SyntheticConfig),
    Tabular { path: PathBuf },
    External(ExternalConfig),
}

impl Default for EvaluatorSpec {
    fn default() -> Self {
        EvaluatorSpec::Synthetic(SyntheticConfig::default())
    }
}

impl EvaluatorSpec {
    pub fn build(&self) -> Result<Box<dyn Evaluator>, EvalError> {
        Ok(match self {
            EvaluatorSpec::Synthetic(cfg) => Box::new(SyntheticEvaluator::new(cfg.clone())),
            EvaluatorSpec::Tabular { path } => Box::new(TabularEvaluator::new(TabularTable::load(path)?)),
            EvaluatorSpec::External(cfg) => Box::new(ExternalEvaluator::new(cfg.clone())),
        })
    }
}

pub const DEFAULT_SCALARIZATION_EXPONENT: f64 = -0.07;

/// `accuracy * (complexity / target)^exponent`, to be maximized.
pub fn scalarize(accuracy: f64, complexity: f64, target: f64, exponent: f64) -> Result<f64, EvalError> {
    if !(complexity > 0.0 && target > 0.0) {
        return Err(EvalError::NonPositiveInput);
    }
    Ok(accuracy * (complexity / target).powf(exponent))
}
