//! Repeatable experiments: surrogate rank quality versus training size,
//! and hypervolume growth of the surrogate-assisted search versus random
//! sampling.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::evaluation::Evaluator;
use crate::metrics::{kendall_tau, spearman, HvConfig};
use crate::rng::{derive_seed, stream};
use crate::space::{ComplexityConfig, Genome, SearchSpace};
use crate::surrogates::{adaptive_switch, fit_model, FittedPredictor, SurrogateConfig, TrainingSet};

use super::analysis::{cumulative_hypervolume, evaluate_genomes, random_search};
use super::{DriverError, Search};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    /// Distinct genomes sampled and evaluated once.
    pub pool: usize,
    pub sizes: Vec<usize>,
    pub trials: usize,
    /// Held-out genomes per trial; `None` uses the rest of the pool.
    pub test_size: Option<usize>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig { pool: 2000, sizes: vec![100, 200, 300, 400, 500], trials: 10, test_size: None }
    }
}

/// One fitted model on one trial. `model` is a model name or "AS" for the
/// cross-validated switch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySample {
    pub model: String,
    pub size: usize,
    pub trial: usize,
    pub tau: f64,
    pub spearman: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub model: String,
    pub size: usize,
    pub trials: usize,
    pub tau_mean: f64,
    pub tau_sd: f64,
    pub spearman_mean: f64,
    pub spearman_sd: f64,
}

pub const SWITCH_LABEL: &str = "AS";

pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn distinct_sample(space: &SearchSpace, n: usize, seed: u64, label: &str) -> Vec<Genome> {
    let mut rng = stream(seed, label, 0);
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let g = space.sample_uniform(&mut rng);
        if seen.insert(g) {
            out.push(g);
        }
    }
    out
}

/// Held-out Kendall tau and Spearman of every model and of the switch, per
/// training size and trial. Undefined correlations count as 0.
pub fn surrogate_study(
    space: &SearchSpace,
    evaluator: &mut dyn Evaluator,
    surrogate: &SurrogateConfig,
    study: &StudyConfig,
    seed: u64,
) -> Result<Vec<StudySample>, DriverError> {
    let largest = study.sizes.iter().copied().max().unwrap_or(0);
    let needed = largest + study.test_size.unwrap_or(1);
    if study.pool < needed || (study.pool as u128) > space.cardinality() {
        return Err(DriverError::Config(format!("pool of {} cannot cover training size {largest} plus a test set", study.pool)));
    }
    let pool = distinct_sample(space, study.pool, seed, "surrogate-study-pool");
    let evaluated = evaluate_genomes(evaluator, &pool, 0, 0, &ComplexityConfig::default())?;
    let targets: Vec<f64> = evaluated.iter().map(|a| a.accuracy).collect();

    let mut samples = Vec::new();
    for &size in &study.sizes {
        for trial in 0..study.trials {
            let mut idx: Vec<usize> = (0..pool.len()).collect();
            idx.shuffle(&mut stream(seed, "surrogate-study-split", (size * 1000 + trial) as u64));
            let (train, rest) = idx.split_at(size);
            let test = &rest[..study.test_size.unwrap_or(rest.len()).min(rest.len())];
            let ts = TrainingSet::new(
                train.iter().map(|&i| pool[i]).collect(),
                train.iter().map(|&i| targets[i]).collect(),
            )?;
            let test_genomes: Vec<Genome> = test.iter().map(|&i| pool[i]).collect();
            let truth: Vec<f64> = test.iter().map(|&i| targets[i]).collect();
            let fit_seed = derive_seed(seed, "surrogate-study-fit", (size * 1000 + trial) as u64);

            let mut record = |model: String, p: &FittedPredictor| {
                let pred = p.predict(&test_genomes);
                samples.push(StudySample {
                    model,
                    size,
                    trial,
                    tau: kendall_tau(&pred, &truth).unwrap_or(0.0),
                    spearman: spearman(&pred, &truth).unwrap_or(0.0),
                });
            };
            for &kind in &surrogate.models {
                let p = fit_model(kind, &ts, surrogate, fit_seed)?;
                record(kind.to_string(), &p);
            }
            let outcome = adaptive_switch(&ts, surrogate, fit_seed)?;
            record(SWITCH_LABEL.to_string(), &outcome.predictor);
        }
    }
    Ok(samples)
}

/// Mean and standard deviation per (model, size), models in the order
/// they first appear.
pub fn summarize_study(samples: &[StudySample]) -> Vec<StudyRow> {
    let mut keys: Vec<(String, usize)> = Vec::new();
    for s in samples {
        let k = (s.model.clone(), s.size);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.sort_by_key(|(_, size)| *size);
    keys.into_iter()
        .map(|(model, size)| {
            let group: Vec<&StudySample> = samples.iter().filter(|s| s.model == model && s.size == size).collect();
            let (tau_mean, tau_sd) = mean_sd(&group.iter().map(|s| s.tau).collect::<Vec<_>>());
            let (spearman_mean, spearman_sd) = mean_sd(&group.iter().map(|s| s.spearman).collect::<Vec<_>>());
            StudyRow { model, size, trials: group.len(), tau_mean, tau_sd, spearman_mean, spearman_sd }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub method: String,
    pub seed: u64,
    pub evaluations: usize,
    pub hypervolume: f64,
}

pub const SEARCH_LABEL: &str = "surrogate";
pub const RANDOM_LABEL: &str = "random";

/// Runs the configured search and equal-budget random sampling for every
/// seed, recording the hypervolume after the initial sample and after each
/// batch under the shared reference `hv`.
pub fn efficiency_study(
    base: &super::RunConfig,
    seeds: &[u64],
    hv: &HvConfig,
) -> Result<Vec<CurvePoint>, DriverError> {
    let counts: Vec<usize> =
        (0..=base.iterations).map(|k| base.initial_samples + k * base.batch_size).collect();
    let space = base.space.space();
    let mut out = Vec::new();
    for &seed in seeds {
        let cfg = super::RunConfig { seed, ..base.clone() };
        let mut search = Search::new(cfg.clone())?;
        search.run()?;
        let archive = &search.state().archive;
        let curve = cumulative_hypervolume(archive, &cfg.objectives, hv, &counts)?;
        out.extend(counts.iter().zip(curve).map(|(&evaluations, hypervolume)| CurvePoint {
            method: SEARCH_LABEL.into(),
            seed,
            evaluations,
            hypervolume,
        }));

        let mut evaluator = cfg.evaluator.build()?;
        let random = random_search(
            &space,
            &cfg.complexity,
            evaluator.as_mut(),
            cfg.initial_samples,
            cfg.batch_size,
            archive.len(),
            derive_seed(seed, "efficiency-random", 0),
        )?;
        let curve = cumulative_hypervolume(&random, &cfg.objectives, hv, &counts)?;
        out.extend(counts.iter().zip(curve).map(|(&evaluations, hypervolume)| CurvePoint {
            method: RANDOM_LABEL.into(),
            seed,
            evaluations,
            hypervolume,
        }));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::{SyntheticConfig, SyntheticEvaluator};
    use crate::surrogates::MlpConfig;

    #[test]
    fn mean_sd_matches_hand_values() {
        let (m, s) = mean_sd(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn study_has_one_row_per_model_and_size() {
        let space = SearchSpace::full();
        let mut ev = SyntheticEvaluator::new(SyntheticConfig::default());
        let cfg = SurrogateConfig { mlp: MlpConfig { epochs: 20, ..MlpConfig::default() }, folds: 3, ..SurrogateConfig::default() };
        let study = StudyConfig { pool: 120, sizes: vec![40, 60], trials: 2, test_size: Some(40) };
        let samples = surrogate_study(&space, &mut ev, &cfg, &study, 0).unwrap();
        assert_eq!(samples.len(), 5 * 2 * 2);
        let rows = summarize_study(&samples);
        assert_eq!(rows.len(), 10);
        assert!(rows.iter().all(|r| r.trials == 2));
        assert_eq!(rows[4].model, SWITCH_LABEL);
    }
}
