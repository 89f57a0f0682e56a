//! Model selection by k-fold cross-validated rank correlation.

use std::cmp::Ordering;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::metrics::{kendall_tau, rmse, MetricError};
use crate::rng::{derive_seed, stream};

use super::{fit_model, FittedPredictor, ModelKind, SurrogateConfig, SurrogateError, TrainingSet, MIN_TRAINING_SIZE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvScore {
    pub model: ModelKind,
    /// Mean held-out Kendall tau over folds; a fold with constant values
    /// counts as 0.
    pub tau: f64,
    pub rmse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwitchOutcome {
    /// Winner refit on the whole training set.
    pub predictor: FittedPredictor,
    /// One entry per model that fit on every fold, in configuration order.
    pub scores: Vec<CvScore>,
    pub failures: Vec<(ModelKind, SurrogateError)>,
}

impl SwitchOutcome {
    pub fn winner_score(&self) -> &CvScore {
        self.scores.iter().find(|s| s.model == self.predictor.model).expect("winner was scored")
    }
}

/// Fold index of each sample: a seeded shuffle dealt round robin.
pub(crate) fn fold_assignment(n: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream(seed, "cv-folds", 0));
    let mut fold = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        fold[i] = pos % folds;
    }
    fold
}

fn model_seed(seed: u64, fold: Option<usize>) -> u64 {
    match fold {
        Some(f) => derive_seed(seed, "cv-fit", f as u64),
        None => derive_seed(seed, "refit", 0),
    }
}

/// Best first: higher tau, then lower RMSE, then the fixed model order.
fn ranking(a: &CvScore, b: &CvScore) -> Ordering {
    b.tau
        .partial_cmp(&a.tau)
        .unwrap_or(Ordering::Equal)
        .then(a.rmse.partial_cmp(&b.rmse).unwrap_or(Ordering::Equal))
        .then(a.model.cmp(&b.model))
}

pub fn adaptive_switch(ts: &TrainingSet, cfg: &SurrogateConfig, seed: u64) -> Result<SwitchOutcome, SurrogateError> {
    cfg.validate()?;
    if ts.len() < MIN_TRAINING_SIZE {
        return Err(SurrogateError::TooFewSamples(ts.len()));
    }
    let folds = cfg.folds.min(ts.len());
    let assignment = fold_assignment(ts.len(), folds, seed);
    let splits: Vec<(TrainingSet, TrainingSet)> = (0..folds)
        .map(|f| {
            let train: Vec<usize> = (0..ts.len()).filter(|&i| assignment[i] != f).collect();
            let test: Vec<usize> = (0..ts.len()).filter(|&i| assignment[i] == f).collect();
            (ts.subset(&train), ts.subset(&test))
        })
        .collect();

    let jobs: Vec<(ModelKind, usize)> = cfg.models.iter().flat_map(|&m| (0..folds).map(move |f| (m, f))).collect();
    let outcomes: Vec<Result<(f64, f64), SurrogateError>> = jobs
        .par_iter()
        .map(|&(model, f)| {
            let (train, test) = &splits[f];
            let p = fit_model(model, train, cfg, model_seed(seed, Some(f)))?;
            let pred = p.predict_features(test.features());
            let tau = match kendall_tau(&pred, test.targets()) {
                Ok(t) => t,
                Err(MetricError::AllTied) | Err(MetricError::TooShort(_)) => 0.0,
                Err(e) => unreachable!("held-out predictions are finite: {e}"),
            };
            let err = rmse(&pred, test.targets()).expect("non-empty fold");
            Ok((tau, err))
        })
        .collect();

    let mut scores = Vec::new();
    let mut failures = Vec::new();
    for (k, &model) in cfg.models.iter().enumerate() {
        let per_fold = &outcomes[k * folds..(k + 1) * folds];
        if let Some(Err(e)) = per_fold.iter().find(|r| r.is_err()) {
            failures.push((model, e.clone()));
            continue;
        }
        let (tau, err) = per_fold
            .iter()
            .map(|r| *r.as_ref().expect("checked"))
            .fold((0.0, 0.0), |(a, b), (t, e)| (a + t, b + e));
        scores.push(CvScore { model, tau: tau / folds as f64, rmse: err / folds as f64 });
    }

    let mut ranked = scores.clone();
    ranked.sort_by(ranking);
    for candidate in &ranked {
        match fit_model(candidate.model, ts, cfg, model_seed(seed, None)) {
            Ok(predictor) => return Ok(SwitchOutcome { predictor, scores, failures }),
            Err(e) => failures.push((candidate.model, e)),
        }
    }
    Err(SurrogateError::AllModelsFailed)
}
