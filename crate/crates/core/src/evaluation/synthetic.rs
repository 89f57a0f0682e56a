//! Closed-form accuracy landscape over genomes, used in place of training.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::rng::{fnv1a, stream};
use crate::space::{Genome, MAX_DEPTH, NUM_BLOCKS};

use super::{EvalError, EvalRequest, EvalResult, Evaluator};

const KERNEL_SCORE: [f64; 3] = [0.20, 0.50, 0.60];
const EXPANSION_SCORE: [f64; 3] = [0.30, 0.55, 0.80];
const BLOCK_WEIGHT: [f64; NUM_BLOCKS] = [1.0, 1.1, 1.2, 1.3, 1.4];
const DEPTH_DECAY: f64 = 0.9;
const RUGGED_AMPLITUDE: f64 = 0.03;
const DECEPTIVE_PENALTY: f64 = 0.05;

/// Layer pairs (l-1, l) per block times 9x9 code combinations.
const RUGGED_PAIRS: usize = NUM_BLOCKS * (MAX_DEPTH - 1);
const RUGGED_TABLE_LEN: usize = RUGGED_PAIRS * 81;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    #[default]
    Smooth,
    Rugged,
    Deceptive,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Smooth => "smooth",
            Variant::Rugged => "rugged",
            Variant::Deceptive => "deceptive",
        })
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "smooth" => Ok(Variant::Smooth),
            "rugged" => Ok(Variant::Rugged),
            "deceptive" => Ok(Variant::Deceptive),
            other => Err(format!("unknown landscape variant '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub variant: Variant,
    /// Standard deviation of the per-genome Gaussian noise.
    pub noise_sigma: f64,
    pub noise_seed: u64,
    /// Seeds the interaction table of the rugged variant.
    pub landscape_seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig { variant: Variant::Smooth, noise_sigma: 0.0, noise_seed: 0, landscape_seed: 0 }
    }
}

fn layer_score(genome: &Genome, block: usize, slot: usize) -> f64 {
    let k = genome.kernel_code(block, slot) as usize;
    let e = genome.expansion_code(block, slot) as usize;
    KERNEL_SCORE[k - 1] + EXPANSION_SCORE[e - 1]
}

fn raw_score(genome: &Genome) -> f64 {
    let mut z = 0.5 * (genome.resolution() as f64 - 192.0) / 64.0;
    for (b, weight) in BLOCK_WEIGHT.iter().enumerate() {
        let mut decay = 1.0;
        for slot in 0..genome.depth(b) {
            z += weight * decay * layer_score(genome, b, slot);
            decay *= DEPTH_DECAY;
        }
    }
    z
}

/// Value of the smooth landscape before normalization at the maximal genome.
pub fn max_raw_score() -> f64 {
    raw_score(&Genome::maximal())
}

#[derive(Debug, Clone)]
pub struct SyntheticLandscape {
    cfg: SyntheticConfig,
    z_max: f64,
    rugged: Vec<f64>,
}

impl SyntheticLandscape {
    pub fn new(cfg: SyntheticConfig) -> SyntheticLandscape {
        let mut rng = stream(cfg.landscape_seed, "rugged-table", 0);
        let rugged = (0..RUGGED_TABLE_LEN)
            .map(|_| rng.random_range(-RUGGED_AMPLITUDE..=RUGGED_AMPLITUDE))
            .collect();
        SyntheticLandscape { cfg, z_max: max_raw_score(), rugged }
    }

    pub fn config(&self) -> &SyntheticConfig {
        &self.cfg
    }

    fn interaction(&self, genome: &Genome) -> f64 {
        let mut total = 0.0;
        for b in 0..NUM_BLOCKS {
            for slot in 1..genome.depth(b) {
                let code = |s: usize| {
                    (genome.kernel_code(b, s) as usize - 1) * 3 + genome.expansion_code(b, s) as usize - 1
                };
                let pair = b * (MAX_DEPTH - 1) + slot - 1;
                total += self.rugged[pair * 81 + code(slot - 1) * 9 + code(slot)];
            }
        }
        total
    }

    fn deceptive_blocks(genome: &Genome) -> usize {
        (0..NUM_BLOCKS)
            .filter(|&b| (0..genome.depth(b)).all(|s| genome.kernel_code(b, s) == 3 && genome.expansion_code(b, s) == 3))
            .count()
    }

    fn noise(&self, genome: &Genome) -> f64 {
        if self.cfg.noise_sigma <= 0.0 {
            return 0.0;
        }
        let mut rng = stream(self.cfg.noise_seed, "synthetic-noise", fnv1a(genome.encode_text().as_bytes()));
        Normal::new(0.0, self.cfg.noise_sigma).map(|n| n.sample(&mut rng)).unwrap_or(0.0)
    }

    pub fn accuracy(&self, genome: &Genome) -> f64 {
        let mut acc = raw_score(genome) / self.z_max;
        match self.cfg.variant {
            Variant::Smooth => {}
            Variant::Rugged => acc += self.interaction(genome),
            Variant::Deceptive => acc -= DECEPTIVE_PENALTY * Self::deceptive_blocks(genome) as f64,
        }
        (acc + self.noise(genome)).clamp(0.0, 1.0)
    }
}

/// One-off evaluation; builds the landscape on every call.
pub fn synthetic_accuracy(genome: &Genome, variant: Variant, noise_sigma: f64, noise_seed: u64) -> f64 {
    SyntheticLandscape::new(SyntheticConfig { variant, noise_sigma, noise_seed, landscape_seed: 0 }).accuracy(genome)
}

#[derive(Debug, Clone)]
pub struct SyntheticEvaluator {
    landscape: SyntheticLandscape,
    id: String,
}

impl SyntheticEvaluator {
    pub fn new(cfg: SyntheticConfig) -> SyntheticEvaluator {
        let id = format!("synthetic-{}", cfg.variant);
        SyntheticEvaluator { landscape: SyntheticLandscape::new(cfg), id }
    }

    pub fn landscape(&self) -> &SyntheticLandscape {
        &self.landscape
    }
}

impl Evaluator for SyntheticEvaluator {
    fn id(&self) -> &str {
        &self.id
    }

    fn evaluate(&mut self, batch: &[EvalRequest]) -> Result<Vec<EvalResult>, EvalError> {
        batch
            .iter()
            .map(|req| {
                let genome = Genome::decode_text(&req.genome)?;
                Ok(EvalResult::new(req.id, self.landscape.accuracy(&genome), &self.id))
            })
            .collect()
    }
}
