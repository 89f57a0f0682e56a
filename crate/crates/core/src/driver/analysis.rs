//! Baselines and post-run measurements.

use std::collections::HashSet;

use crate::evaluation::{EvalError, EvalRequest, Evaluator};
use crate::metrics::{hypervolume, spearman, HvConfig};
use crate::moea::pareto_front;
use crate::rng::stream;
use crate::space::{ComplexityConfig, Genome, SearchSpace};

use super::{Archive, DriverError, EvaluatedArch, Objective};

/// Evaluates `genomes` in one batch with consecutive request ids starting
/// at `first_id`.
pub(crate) fn evaluate_genomes(
    evaluator: &mut dyn Evaluator,
    genomes: &[Genome],
    first_id: u64,
    iteration: usize,
    complexity: &ComplexityConfig,
) -> Result<Vec<EvaluatedArch>, DriverError> {
    if genomes.is_empty() {
        return Ok(Vec::new());
    }
    let requests: Vec<EvalRequest> =
        genomes.iter().enumerate().map(|(i, g)| EvalRequest::new(first_id + i as u64, g)).collect();
    let results = evaluator.evaluate(&requests)?;
    if results.len() != requests.len() {
        return Err(EvalError::MalformedResponse(format!("{} results for {} requests", results.len(), requests.len())).into());
    }
    let mut out = Vec::with_capacity(genomes.len());
    for ((req, res), g) in requests.iter().zip(results).zip(genomes) {
        if res.id != req.id {
            return Err(EvalError::MalformedResponse(format!("expected id {}, got {}", req.id, res.id)).into());
        }
        if !(0.0..=1.0).contains(&res.accuracy) {
            return Err(EvalError::InvalidAccuracy { id: res.id, value: res.accuracy }.into());
        }
        out.push(EvaluatedArch {
            genome: *g,
            accuracy: res.accuracy,
            complexity: complexity.complexity(g),
            iteration,
            evaluator: res.evaluator,
            extras: res.extras,
        });
    }
    Ok(out)
}

/// Hypervolume of the front of each archive prefix of length `counts[i]`.
pub fn cumulative_hypervolume(
    archive: &Archive,
    objectives: &[Objective],
    cfg: &HvConfig,
    counts: &[usize],
) -> Result<Vec<f64>, DriverError> {
    let points = archive.objectives(objectives);
    counts
        .iter()
        .map(|&n| {
            let prefix = &points[..n.min(points.len())];
            let front: Vec<Vec<f64>> = pareto_front(prefix)?.into_iter().map(|i| prefix[i].clone()).collect();
            Ok(hypervolume(&front, cfg)?.value)
        })
        .collect()
}

/// Every genome of `space`, evaluated in batches of 1024.
pub fn exhaustive_archive(
    space: &SearchSpace,
    complexity: &ComplexityConfig,
    evaluator: &mut dyn Evaluator,
    cap: u128,
) -> Result<Archive, DriverError> {
    let all: Vec<Genome> = space.enumerate(cap)?.collect();
    let mut archive = Archive::new();
    for (i, chunk) in all.chunks(1024).enumerate() {
        for a in evaluate_genomes(evaluator, chunk, (i * 1024) as u64, 0, complexity)? {
            archive.insert(a)?;
        }
    }
    Ok(archive)
}

/// `initial` distinct uniform samples followed by batches of `batch`, up to
/// `budget` evaluations. Iteration numbers follow the surrogate-assisted
/// run's layout so the two archives compare prefix by prefix.
pub fn random_search(
    space: &SearchSpace,
    complexity: &ComplexityConfig,
    evaluator: &mut dyn Evaluator,
    initial: usize,
    batch: usize,
    budget: usize,
    seed: u64,
) -> Result<Archive, DriverError> {
    if (budget as u128) > space.cardinality() || batch == 0 {
        return Err(DriverError::Config(format!("cannot draw {budget} distinct genomes in batches of {batch}")));
    }
    let mut rng = stream(seed, "random-search", 0);
    let mut seen = HashSet::new();
    let mut genomes = Vec::with_capacity(budget);
    while genomes.len() < budget {
        let g = space.sample_uniform(&mut rng);
        if seen.insert(g) {
            genomes.push(g);
        }
    }
    let mut archive = Archive::new();
    let head = initial.min(budget);
    let mut batches = vec![(0usize, &genomes[..head])];
    batches.extend(genomes[head..].chunks(batch).enumerate().map(|(i, c)| (i + 1, c)));
    let mut next_id = 0u64;
    for (iteration, chunk) in batches {
        for a in evaluate_genomes(evaluator, chunk, next_id, iteration, complexity)? {
            archive.insert(a)?;
        }
        next_id += chunk.len() as u64;
    }
    Ok(archive)
}

/// Spearman correlation between every pair of archive columns (accuracy
/// and the four complexity measures). Undefined entries are NaN.
pub fn spearman_matrix(archive: &Archive) -> (Vec<&'static str>, Vec<Vec<f64>>) {
    let cols = [Objective::Accuracy, Objective::Madds, Objective::Params, Objective::LatencyCpu, Objective::LatencyGpu];
    let data: Vec<Vec<f64>> = cols
        .iter()
        .map(|o| {
            archive
                .iter()
                .map(|a| match o.complexity_value(&a.complexity) {
                    Some(v) => v,
                    None => a.accuracy,
                })
                .collect()
        })
        .collect();
    let m = data
        .iter()
        .map(|x| data.iter().map(|y| spearman(x, y).unwrap_or(f64::NAN)).collect())
        .collect();
    (cols.iter().map(|o| o.name()).collect(), m)
}
