use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::evaluation::{EvaluatorSpec, DEFAULT_SCALARIZATION_EXPONENT};
use crate::moea::NsgaConfig;
use crate::space::{ComplexityConfig, SearchSpace};
use crate::surrogates::{SurrogateConfig, MIN_TRAINING_SIZE};

use super::{DriverError, Objective};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SpaceSpec {
    #[default]
    Full,
    Reduced,
    Custom(SearchSpace),
}

impl SpaceSpec {
    pub fn space(&self) -> SearchSpace {
        match self {
            SpaceSpec::Full => SearchSpace::full(),
            SpaceSpec::Reduced => SearchSpace::reduced(),
            SpaceSpec::Custom(s) => s.clone(),
        }
    }
}

/// Single-objective mode: maximize `accuracy * (complexity / target)^exponent`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarizationConfig {
    pub objective: Objective,
    pub target: f64,
    #[serde(default = "default_exponent")]
    pub exponent: f64,
}

fn default_exponent() -> f64 {
    DEFAULT_SCALARIZATION_EXPONENT
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    pub initial_samples: usize,
    pub iterations: usize,
    pub batch_size: usize,
    /// Accuracy first, then complexity measures.
    pub objectives: Vec<Objective>,
    pub space: SpaceSpec,
    pub complexity: ComplexityConfig,
    pub evaluator: EvaluatorSpec,
    pub surrogate: SurrogateConfig,
    pub inner: NsgaConfig,
    /// Hypervolume reference offset, as a fraction of each objective's
    /// range over the initial samples.
    pub hv_margin: f64,
    pub scalarization: Option<ScalarizationConfig>,
    /// Gene distribution (JSON) to draw the initial samples from.
    pub transfer_from: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            initial_samples: 100,
            iterations: 30,
            batch_size: 8,
            objectives: vec![Objective::Accuracy, Objective::Madds],
            space: SpaceSpec::Full,
            complexity: ComplexityConfig::default(),
            evaluator: EvaluatorSpec::default(),
            surrogate: SurrogateConfig::default(),
            inner: NsgaConfig::default(),
            hv_margin: 0.1,
            scalarization: None,
            transfer_from: None,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<RunConfig, DriverError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| DriverError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig, DriverError> {
        let text = std::fs::read_to_string(path).map_err(|e| DriverError::io(path, e))?;
        RunConfig::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("run config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    /// Total evaluations of a completed run.
    pub fn budget(&self) -> usize {
        self.initial_samples + self.iterations * self.batch_size
    }

    pub fn validate(&self) -> Result<(), DriverError> {
        let bad = |m: String| Err(DriverError::Config(m));
        if self.initial_samples < MIN_TRAINING_SIZE {
            return bad(format!("initial_samples must be at least {MIN_TRAINING_SIZE}"));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if self.objectives.first() != Some(&Objective::Accuracy) {
            return bad("the first objective must be accuracy".into());
        }
        if self.objectives[1..].contains(&Objective::Accuracy) {
            return bad("accuracy may only appear once".into());
        }
        let unique: HashSet<_> = self.objectives.iter().collect();
        if unique.len() != self.objectives.len() {
            return bad("duplicate objectives".into());
        }
        match &self.scalarization {
            None if self.objectives.len() < 2 => return bad("need at least one complexity objective".into()),
            Some(s) if s.objective == Objective::Accuracy => {
                return bad("scalarization needs a complexity objective".into())
            }
            Some(s) if !(s.target > 0.0) => return bad("scalarization target must be positive".into()),
            _ => {}
        }
        if !(self.hv_margin >= 0.0) {
            return bad("hv_margin must be non-negative".into());
        }
        self.inner.validate()?;
        self.surrogate.validate()?;
        let space = self.space.space();
        space.validate()?;
        self.complexity.backbone.validate()?;
        if (self.budget() as u128) > space.cardinality() {
            return bad(format!("budget {} exceeds the {} genomes in the space", self.budget(), space.cardinality()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.budget(), 340);
    }

    #[test]
    fn toml_round_trip_and_hash() {
        let text = "seed = 3\niterations = 2\nspace = \"reduced\"\nobjectives = [\"accuracy\", \"params\"]\n\n[evaluator]\nkind = \"synthetic\"\nvariant = \"deceptive\"\n";
        let cfg = RunConfig::from_toml(text).unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.space, SpaceSpec::Reduced);
        assert_eq!(cfg.objectives, vec![Objective::Accuracy, Objective::Params]);
        let back = RunConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
        assert_ne!(RunConfig::default().hash(), cfg.hash());
    }

    #[test]
    fn invalid_settings_are_rejected() {
        let cases = [
            RunConfig { initial_samples: 10, ..RunConfig::default() },
            RunConfig { batch_size: 0, ..RunConfig::default() },
            RunConfig { objectives: vec![Objective::Madds, Objective::Accuracy], ..RunConfig::default() },
            RunConfig { objectives: vec![Objective::Accuracy], ..RunConfig::default() },
            RunConfig { objectives: vec![Objective::Accuracy, Objective::Madds, Objective::Madds], ..RunConfig::default() },
            RunConfig {
                scalarization: Some(ScalarizationConfig { objective: Objective::Madds, target: 0.0, exponent: -0.07 }),
                ..RunConfig::default()
            },
            RunConfig {
                space: SpaceSpec::Custom(SearchSpace { resolutions: vec![0], ..SearchSpace::reduced() }),
                initial_samples: 7000,
                iterations: 1,
                ..RunConfig::default()
            },
        ];
        for cfg in cases {
            assert!(matches!(cfg.validate(), Err(DriverError::Config(_)) | Err(DriverError::Space(_))), "{cfg:?}");
        }
        let scalar = RunConfig {
            objectives: vec![Objective::Accuracy],
            scalarization: Some(ScalarizationConfig { objective: Objective::Madds, target: 3e8, exponent: -0.07 }),
            ..RunConfig::default()
        };
        scalar.validate().unwrap();
    }
}
