//! Accuracy predictors over genomes and cross-validated model selection.

mod cart;
mod gp;
mod mlp;
mod rbf;
mod switch;

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::space::{GeneRole, Genome, GENOME_LEN};

pub use cart::{fit_cart, CartConfig, CartTree};
pub use gp::{fit_gp, fit_gp_with, GpParams, GP_LENGTH_FACTORS, GP_NOISE_GRID};
pub use mlp::{fit_mlp, MlpConfig, MlpParams};
pub use rbf::{fit_rbf, RbfParams};
pub use switch::{adaptive_switch, CvScore, SwitchOutcome};

pub const MIN_TRAINING_SIZE: usize = 20;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SurrogateError {
    #[error("need at least {MIN_TRAINING_SIZE} training samples, got {0}")]
    TooFewSamples(usize),
    #[error("{0} genomes but {1} targets")]
    LengthMismatch(usize, usize),
    #[error("genome {0} appears more than once")]
    DuplicateInput(String),
    #[error("target {0} is not a finite value in [0, 1]")]
    InvalidTarget(f64),
    #[error("{0} system could not be solved")]
    SingularSystem(ModelKind),
    #[error("every surrogate model failed to fit")]
    AllModelsFailed,
    #[error("invalid surrogate configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "MLP")]
    Mlp,
    #[serde(rename = "CART")]
    Cart,
    #[serde(rename = "RBF")]
    Rbf,
    #[serde(rename = "GP")]
    Gp,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Mlp, ModelKind::Cart, ModelKind::Rbf, ModelKind::Gp];
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Mlp => "MLP",
            ModelKind::Cart => "CART",
            ModelKind::Rbf => "RBF",
            ModelKind::Gp => "GP",
        })
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "MLP" => Ok(ModelKind::Mlp),
            "CART" => Ok(ModelKind::Cart),
            "RBF" => Ok(ModelKind::Rbf),
            "GP" => Ok(ModelKind::Gp),
            _ => Err(format!("unknown model '{s}'")),
        }
    }
}

/// Each gene scaled to [0, 1] by its position's code range; padding maps
/// to 0.
pub fn features(genome: &Genome) -> [f64; GENOME_LEN] {
    let mut x = [0.0; GENOME_LEN];
    for (pos, &code) in genome.genes().iter().enumerate() {
        let role = GeneRole::of(pos);
        x[pos] = if role.is_layer_slot() {
            code as f64 / 3.0
        } else {
            let (lo, hi) = role.code_range();
            (code - lo) as f64 / (hi - lo) as f64
        };
    }
    x
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    genomes: Vec<Genome>,
    features: Vec<[f64; GENOME_LEN]>,
    targets: Vec<f64>,
}

impl TrainingSet {
    pub fn new(genomes: Vec<Genome>, targets: Vec<f64>) -> Result<TrainingSet, SurrogateError> {
        if genomes.len() < MIN_TRAINING_SIZE {
            return Err(SurrogateError::TooFewSamples(genomes.len()));
        }
        TrainingSet::unchecked_size(genomes, targets)
    }

    /// Same checks except the minimum size; used for cross-validation folds.
    pub(crate) fn unchecked_size(genomes: Vec<Genome>, targets: Vec<f64>) -> Result<TrainingSet, SurrogateError> {
        if genomes.len() != targets.len() {
            return Err(SurrogateError::LengthMismatch(genomes.len(), targets.len()));
        }
        if let Some(t) = targets.iter().find(|t| !(t.is_finite() && (0.0..=1.0).contains(*t))) {
            return Err(SurrogateError::InvalidTarget(*t));
        }
        let mut seen = HashSet::with_capacity(genomes.len());
        if let Some(g) = genomes.iter().find(|g| !seen.insert(**g)) {
            return Err(SurrogateError::DuplicateInput(g.encode_text()));
        }
        let features = genomes.iter().map(features).collect();
        Ok(TrainingSet { genomes, features, targets })
    }

    pub fn len(&self) -> usize {
        self.genomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.genomes.is_empty()
    }

    pub fn genomes(&self) -> &[Genome] {
        &self.genomes
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub(crate) fn features(&self) -> &[[f64; GENOME_LEN]] {
        &self.features
    }

    pub(crate) fn subset(&self, idx: &[usize]) -> TrainingSet {
        TrainingSet {
            genomes: idx.iter().map(|&i| self.genomes[i]).collect(),
            features: idx.iter().map(|&i| self.features[i]).collect(),
            targets: idx.iter().map(|&i| self.targets[i]).collect(),
        }
    }

    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for (g, t) in self.genomes.iter().zip(&self.targets) {
            h.update(g.encode_text().as_bytes());
            h.update(t.to_bits().to_le_bytes());
        }
        hex::encode(h.finalize())
    }

    fn constant_target(&self) -> Option<f64> {
        let first = *self.targets.first()?;
        self.targets.iter().all(|&t| t == first).then_some(first)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ModelParams {
    Constant(f64),
    Mlp(MlpParams),
    Cart(CartTree),
    Rbf(RbfParams),
    Gp(GpParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedPredictor {
    pub model: ModelKind,
    /// Set when the targets were constant and a flat predictor was returned.
    pub degenerate: bool,
    pub fingerprint: String,
    pub params: ModelParams,
}

impl FittedPredictor {
    pub(crate) fn new(model: ModelKind, ts: &TrainingSet, params: ModelParams) -> FittedPredictor {
        FittedPredictor { model, degenerate: false, fingerprint: ts.fingerprint(), params }
    }

    pub(crate) fn constant(model: ModelKind, ts: &TrainingSet, value: f64) -> FittedPredictor {
        FittedPredictor { model, degenerate: true, fingerprint: ts.fingerprint(), params: ModelParams::Constant(value) }
    }

    fn raw(&self, x: &[[f64; GENOME_LEN]]) -> Vec<f64> {
        match &self.params {
            ModelParams::Constant(v) => vec![*v; x.len()],
            ModelParams::Mlp(p) => p.predict(x),
            ModelParams::Cart(t) => x.iter().map(|f| t.predict(f)).collect(),
            ModelParams::Rbf(p) => x.iter().map(|f| p.predict(f)).collect(),
            ModelParams::Gp(p) => x.iter().map(|f| p.predict(f)).collect(),
        }
    }

    /// Predicted accuracies, clamped to [0, 1].
    pub fn predict(&self, genomes: &[Genome]) -> Vec<f64> {
        let x: Vec<_> = genomes.iter().map(features).collect();
        self.predict_features(&x)
    }

    pub(crate) fn predict_features(&self, x: &[[f64; GENOME_LEN]]) -> Vec<f64> {
        self.raw(x).into_iter().map(|v| if v.is_finite() { v.clamp(0.0, 1.0) } else { 0.0 }).collect()
    }
}

/// Hyperparameters of the whole predictor family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SurrogateConfig {
    pub models: Vec<ModelKind>,
    pub folds: usize,
    pub mlp: MlpConfig,
    pub cart: CartConfig,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        SurrogateConfig { models: ModelKind::ALL.to_vec(), folds: 10, mlp: MlpConfig::default(), cart: CartConfig::default() }
    }
}

impl SurrogateConfig {
    pub fn validate(&self) -> Result<(), SurrogateError> {
        if self.models.is_empty() {
            return Err(SurrogateError::InvalidConfig("no models selected".into()));
        }
        if self.folds < 2 {
            return Err(SurrogateError::InvalidConfig("need at least two folds".into()));
        }
        self.mlp.validate()
    }
}

/// Fits one model kind with the given settings.
pub fn fit_model(kind: ModelKind, ts: &TrainingSet, cfg: &SurrogateConfig, seed: u64) -> Result<FittedPredictor, SurrogateError> {
    match kind {
        ModelKind::Mlp => fit_mlp(ts, &cfg.mlp, seed),
        ModelKind::Cart => Ok(fit_cart(ts, &cfg.cart)),
        ModelKind::Rbf => fit_rbf(ts),
        ModelKind::Gp => fit_gp(ts),
    }
}
