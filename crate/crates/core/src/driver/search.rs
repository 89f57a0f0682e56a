use std::collections::HashSet;
use std::fmt::Write as _;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::evaluation::{scalarize, Evaluator};
use crate::metrics::{hypervolume, rmse, spearman, HvConfig};
use crate::moea::{evolve_observed, evolve_scalar, nondominated_sort};
use crate::rng::{derive_seed, stream};
use crate::space::{Genome, SearchSpace};
use crate::surrogates::{adaptive_switch, CvScore, FittedPredictor, ModelKind, TrainingSet};

use super::analysis::evaluate_genomes;
use super::mining::{transfer_init, GeneDistribution};
use super::select::{scalar_subset_select, subset_select, SelectCandidate};
use super::{objective_vector, Archive, DriverError, EvaluatedArch, RunConfig};

/// One row of the per-iteration metrics log. Iteration 0 is the initial
/// sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationReport {
    pub iteration: usize,
    pub evaluations: usize,
    /// Archive front under the frozen reference (vector mode).
    pub hypervolume: Option<f64>,
    /// Best true scalarized value in the archive (scalar mode).
    pub best_scalarized: Option<f64>,
    pub surrogate: Option<ModelKind>,
    pub cv_tau: Option<f64>,
    pub cv_rmse: Option<f64>,
    /// Agreement between predictions and true values of the new batch.
    pub batch_spearman: Option<f64>,
    pub batch_rmse: Option<f64>,
    pub cv_scores: Vec<CvScore>,
    /// Set when every inner candidate had already been evaluated.
    pub skipped: bool,
}

impl IterationReport {
    fn initial(evaluations: usize) -> IterationReport {
        IterationReport {
            iteration: 0,
            evaluations,
            hypervolume: None,
            best_scalarized: None,
            surrogate: None,
            cv_tau: None,
            cv_rmse: None,
            batch_spearman: None,
            batch_rmse: None,
            cv_scores: Vec::new(),
            skipped: false,
        }
    }
}

/// Everything needed to continue a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchState {
    pub config: RunConfig,
    pub archive: Archive,
    pub initialized: bool,
    pub completed_iterations: usize,
    pub next_request_id: u64,
    pub hv_config: Option<HvConfig>,
    pub reports: Vec<IterationReport>,
    pub predictor: Option<FittedPredictor>,
}

impl SearchState {
    pub fn new(config: RunConfig) -> SearchState {
        SearchState {
            config,
            archive: Archive::new(),
            initialized: false,
            completed_iterations: 0,
            next_request_id: 0,
            hv_config: None,
            reports: Vec::new(),
            predictor: None,
        }
    }

    pub fn is_finished(&self) -> bool {
        self.initialized && self.completed_iterations >= self.config.iterations
    }

    /// Scalarized value of an evaluated architecture (scalar mode only).
    pub fn scalarized(&self, arch: &EvaluatedArch) -> Option<f64> {
        let s = self.config.scalarization.as_ref()?;
        let c = s.objective.complexity_value(&arch.complexity)?;
        scalarize(arch.accuracy, c, s.target, s.exponent).ok()
    }

    /// Archive front in vector mode; the single best architecture in scalar
    /// mode.
    pub fn result(&self) -> Vec<&EvaluatedArch> {
        if self.config.scalarization.is_some() {
            return self.best_scalarized().into_iter().collect();
        }
        self.archive.front(&self.config.objectives)
    }

    pub fn best_scalarized(&self) -> Option<&EvaluatedArch> {
        let mut best: Option<(&EvaluatedArch, f64)> = None;
        for a in self.archive.iter() {
            let v = self.scalarized(a)?;
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((a, v));
            }
        }
        best.map(|(a, _)| a)
    }

    pub fn metrics_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut out = format!("# config_hash: {}\n", self.config.hash());
        out.push_str("iteration,evaluations,hypervolume,best_scalarized,surrogate,cv_tau,cv_rmse,batch_spearman,batch_rmse,skipped\n");
        for r in &self.reports {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                r.iteration,
                r.evaluations,
                opt(r.hypervolume),
                opt(r.best_scalarized),
                r.surrogate.map(|m| m.to_string()).unwrap_or_default(),
                opt(r.cv_tau),
                opt(r.cv_rmse),
                opt(r.batch_spearman),
                opt(r.batch_rmse),
                r.skipped
            );
        }
        out
    }

    /// Cross-validation scores of every model at every iteration.
    pub fn surrogate_csv(&self) -> String {
        let mut out = format!("# config_hash: {}\n", self.config.hash());
        out.push_str("iteration,model,cv_tau,cv_rmse,selected\n");
        for r in &self.reports {
            for s in &r.cv_scores {
                let _ = writeln!(out, "{},{},{},{},{}", r.iteration, s.model, s.tau, s.rmse, Some(s.model) == r.surrogate);
            }
        }
        out
    }
}

pub struct Search {
    state: SearchState,
    space: SearchSpace,
    evaluator: Box<dyn Evaluator>,
    initial: Option<Vec<Genome>>,
}

impl Search {
    pub fn new(config: RunConfig) -> Result<Search, DriverError> {
        let evaluator = config.evaluator.build()?;
        Search::with_evaluator(config, evaluator)
    }

    pub fn with_evaluator(config: RunConfig, evaluator: Box<dyn Evaluator>) -> Result<Search, DriverError> {
        Search::from_state(SearchState::new(config), evaluator)
    }

    /// Continues from a saved state.
    pub fn from_state(state: SearchState, evaluator: Box<dyn Evaluator>) -> Result<Search, DriverError> {
        state.config.validate()?;
        let space = state.config.space.space();
        Ok(Search { state, space, evaluator, initial: None })
    }

    /// Genomes to start from instead of uniform samples; topped up with
    /// uniform samples if fewer than the configured count are distinct.
    pub fn with_initial_genomes(mut self, genomes: Vec<Genome>) -> Search {
        self.initial = Some(genomes);
        self
    }

    pub fn state(&self) -> &SearchState {
        &self.state
    }

    pub fn into_state(self) -> SearchState {
        self.state
    }

    pub fn is_finished(&self) -> bool {
        self.state.is_finished()
    }

    pub fn run(&mut self) -> Result<(), DriverError> {
        while !self.is_finished() {
            self.step()?;
        }
        Ok(())
    }

    /// Runs until `iterations` iterations are complete (or the run ends).
    pub fn run_until(&mut self, iterations: usize) -> Result<(), DriverError> {
        while !self.is_finished() && !(self.state.initialized && self.state.completed_iterations >= iterations) {
            self.step()?;
        }
        Ok(())
    }

    /// Initial sampling, or one iteration.
    pub fn step(&mut self) -> Result<(), DriverError> {
        if !self.state.initialized {
            return self.initialize();
        }
        if self.is_finished() {
            return Ok(());
        }
        self.iterate()
    }

    fn evaluate(&mut self, genomes: &[Genome], iteration: usize) -> Result<(), DriverError> {
        let first = self.state.next_request_id;
        let archs =
            evaluate_genomes(self.evaluator.as_mut(), genomes, first, iteration, &self.state.config.complexity)?;
        for a in archs {
            self.state.archive.insert(a)?;
        }
        self.state.next_request_id = first + genomes.len() as u64;
        Ok(())
    }

    fn initial_genomes(&mut self) -> Result<Vec<Genome>, DriverError> {
        let cfg = &self.state.config;
        let n = cfg.initial_samples;
        let proposed = match (&self.initial, &cfg.transfer_from) {
            (Some(g), _) => g.clone(),
            (None, Some(path)) => {
                let dist = GeneDistribution::load(path)?.smoothed(1.0);
                transfer_init(&dist, &self.space, n, derive_seed(cfg.seed, "transfer", 0))
            }
            (None, None) => Vec::new(),
        };
        let mut seen = HashSet::new();
        let mut out = Vec::with_capacity(n);
        for g in proposed {
            let g = self.space.repair(g.genes())?;
            if out.len() < n && seen.insert(g) {
                out.push(g);
            }
        }
        let mut rng = stream(cfg.seed, "initial", 0);
        while out.len() < n {
            let g = self.space.sample_uniform(&mut rng);
            if seen.insert(g) {
                out.push(g);
            }
        }
        Ok(out)
    }

    fn initialize(&mut self) -> Result<(), DriverError> {
        let genomes = self.initial_genomes()?;
        self.evaluate(&genomes, 0)?;
        let cfg = &self.state.config;
        let mut report = IterationReport::initial(self.state.archive.len());
        if cfg.scalarization.is_none() {
            let mut hv = HvConfig::from_points(&self.state.archive.objectives(&cfg.objectives), cfg.hv_margin)?;
            hv.mc_seed = cfg.seed;
            self.state.hv_config = Some(hv);
        }
        self.state.initialized = true;
        self.fill_quality(&mut report)?;
        log::info!("initial sample: {} evaluations", report.evaluations);
        self.state.reports.push(report);
        Ok(())
    }

    fn fill_quality(&self, report: &mut IterationReport) -> Result<(), DriverError> {
        let cfg = &self.state.config;
        if let Some(hv) = &self.state.hv_config {
            let front: Vec<Vec<f64>> =
                self.state.archive.front(&cfg.objectives).iter().map(|a| a.objectives(&cfg.objectives)).collect();
            report.hypervolume = Some(hypervolume(&front, hv)?.value);
        }
        report.best_scalarized = self.state.best_scalarized().and_then(|a| self.state.scalarized(a));
        Ok(())
    }

    fn iterate(&mut self) -> Result<(), DriverError> {
        let t = self.state.completed_iterations + 1;
        let seed = self.state.config.seed;
        let ts = TrainingSet::new(self.state.archive.genomes(), self.state.archive.accuracies())?;
        let outcome = adaptive_switch(&ts, &self.state.config.surrogate, derive_seed(seed, "switch", t as u64))?;
        let predictor = outcome.predictor.clone();

        let proposal = if self.state.config.scalarization.is_some() {
            self.propose_scalar(&predictor, t)
        } else {
            self.propose(&predictor, t)
        };
        let mut report = IterationReport {
            iteration: t,
            evaluations: self.state.archive.len(),
            surrogate: Some(predictor.model),
            cv_tau: Some(outcome.winner_score().tau),
            cv_rmse: Some(outcome.winner_score().rmse),
            cv_scores: outcome.scores.clone(),
            ..IterationReport::initial(0)
        };
        match proposal {
            Ok(chosen) => {
                let predicted = predictor.predict(&chosen);
                self.evaluate(&chosen, t)?;
                let truth: Vec<f64> =
                    chosen.iter().map(|g| self.state.archive.get(g).expect("just inserted").accuracy).collect();
                report.batch_spearman = spearman(&predicted, &truth).ok();
                report.batch_rmse = rmse(&predicted, &truth).ok();
                report.evaluations = self.state.archive.len();
            }
            Err(DriverError::EmptyAfterDedup) => {
                log::warn!("iteration {t}: no unevaluated candidates; skipping");
                report.skipped = true;
            }
            Err(e) => return Err(e),
        }
        self.fill_quality(&mut report)?;
        log::info!(
            "iteration {t}: {} evaluations, surrogate {}, cv tau {:.3}, hv {:?}",
            report.evaluations,
            predictor.model,
            outcome.winner_score().tau,
            report.hypervolume
        );
        self.state.reports.push(report);
        self.state.predictor = Some(predictor);
        self.state.completed_iterations = t;
        Ok(())
    }

    fn propose(&self, predictor: &FittedPredictor, t: usize) -> Result<Vec<Genome>, DriverError> {
        let cfg = &self.state.config;
        let objectives = &cfg.objectives;
        let complexity = &cfg.complexity;
        let front = self.state.archive.front(objectives);
        let seeds: Vec<Genome> = front.iter().map(|a| a.genome).filter(|g| self.space.contains(g)).collect();
        let objective_fn = |gs: &[Genome]| -> Result<Vec<Vec<f64>>, DriverError> {
            let pred = predictor.predict(gs);
            Ok(gs.iter().zip(pred).map(|(g, p)| objective_vector(objectives, p, &complexity.complexity(g))).collect())
        };
        // every unevaluated genome the inner search kept at any generation
        let mut pool: IndexMap<Genome, Vec<f64>> = IndexMap::new();
        let archive = &self.state.archive;
        evolve_observed(
            &cfg.inner,
            &self.space,
            &seeds,
            objective_fn,
            derive_seed(cfg.seed, "inner", t as u64),
            |_, pop| {
                for ind in pop {
                    if !archive.contains(&ind.genome) && !pool.contains_key(&ind.genome) {
                        pool.insert(ind.genome, ind.objectives.clone());
                    }
                }
            },
        )?;
        let pooled: Vec<(&Genome, &Vec<f64>)> = pool.iter().collect();
        let points: Vec<Vec<f64>> = pooled.iter().map(|(_, o)| (*o).clone()).collect();
        let mut candidates = Vec::new();
        if !points.is_empty() {
            for front in nondominated_sort(&points)? {
                candidates.extend(front.into_iter().map(|i| SelectCandidate {
                    genome: *pooled[i].0,
                    predicted: -pooled[i].1[0],
                    complexity: pooled[i].1[1..].to_vec(),
                }));
                if candidates.len() >= cfg.batch_size {
                    break;
                }
            }
        }
        let front_points: Vec<Vec<f64>> = front.iter().map(|a| a.objectives(objectives)[1..].to_vec()).collect();
        let picks = subset_select(&candidates, &front_points, cfg.batch_size)?;
        Ok(picks.into_iter().map(|i| candidates[i].genome).collect())
    }

    fn propose_scalar(&self, predictor: &FittedPredictor, t: usize) -> Result<Vec<Genome>, DriverError> {
        let cfg = &self.state.config;
        let sc = cfg.scalarization.as_ref().expect("scalar mode");
        let complexity = &cfg.complexity;
        let value = |g: &Genome, acc: f64| -> Result<f64, DriverError> {
            let c = sc.objective.complexity_value(&complexity.complexity(g)).expect("complexity objective");
            Ok(scalarize(acc, c, sc.target, sc.exponent)?)
        };

        let mut ranked: Vec<(&EvaluatedArch, f64)> =
            self.state.archive.iter().filter_map(|a| Some((a, self.state.scalarized(a)?))).collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
        let seeds: Vec<Genome> = ranked
            .iter()
            .map(|(a, _)| a.genome)
            .filter(|g| self.space.contains(g))
            .take(cfg.inner.pop_size)
            .collect();
        let fitness = |gs: &[Genome]| -> Result<Vec<f64>, DriverError> {
            gs.iter().zip(predictor.predict(gs)).map(|(g, p)| value(g, p)).collect()
        };
        let pop = evolve_scalar(&cfg.inner, &self.space, &seeds, fitness, derive_seed(cfg.seed, "inner", t as u64))?;
        let candidates: Vec<(Genome, f64)> = pop
            .iter()
            .filter(|s| !self.state.archive.contains(&s.genome))
            .map(|s| (s.genome, s.fitness))
            .collect();
        let reference: Vec<Genome> = ranked.first().map(|(a, _)| a.genome).into_iter().collect();
        let picks = scalar_subset_select(&candidates, &reference, cfg.batch_size)?;
        Ok(picks.into_iter().map(|i| candidates[i].0).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::driver::{Objective, ScalarizationConfig, SpaceSpec};
    use crate::moea::NsgaConfig;
    use crate::surrogates::{MlpConfig, SurrogateConfig};

    pub(crate) fn small_config(seed: u64) -> RunConfig {
        RunConfig {
            seed,
            initial_samples: 24,
            iterations: 3,
            batch_size: 4,
            space: SpaceSpec::Reduced,
            inner: NsgaConfig { pop_size: 20, generations: 10, ..NsgaConfig::default() },
            surrogate: SurrogateConfig { mlp: MlpConfig { epochs: 40, ..MlpConfig::default() }, ..SurrogateConfig::default() },
            ..RunConfig::default()
        }
    }

    #[test]
    fn zero_iterations_keep_only_initial_sample() {
        let cfg = RunConfig { iterations: 0, ..small_config(1) };
        let mut s = Search::new(cfg).unwrap();
        s.run().unwrap();
        let st = s.state();
        assert_eq!(st.archive.len(), 24);
        assert!(st.archive.iter().all(|a| a.iteration == 0));
        assert_eq!(st.reports.len(), 1);
    }

    #[test]
    fn run_grows_archive_by_batches() {
        let mut s = Search::new(small_config(2)).unwrap();
        s.run().unwrap();
        let st = s.state();
        assert_eq!(st.archive.len(), 24 + 3 * 4);
        assert_eq!(st.reports.len(), 4);
        let hv: Vec<f64> = st.reports.iter().map(|r| r.hypervolume.unwrap()).collect();
        assert!(hv.windows(2).all(|w| w[1] >= w[0]));
        for r in &st.reports[1..] {
            assert!(r.surrogate.is_some() && r.cv_scores.len() == 4);
        }
        assert!(st.result().iter().all(|a| st.archive.contains(&a.genome)));
        assert_eq!(st.metrics_csv().lines().count(), 2 + 4);
    }

    #[test]
    fn same_config_same_archive() {
        let mut a = Search::new(small_config(3)).unwrap();
        let mut b = Search::new(small_config(3)).unwrap();
        a.run().unwrap();
        b.run().unwrap();
        assert_eq!(a.state(), b.state());
    }

    #[test]
    fn scalar_mode_tracks_best_value() {
        let cfg = RunConfig {
            objectives: vec![Objective::Accuracy],
            scalarization: Some(ScalarizationConfig { objective: Objective::Madds, target: 2e8, exponent: -0.07 }),
            ..small_config(4)
        };
        let mut s = Search::new(cfg).unwrap();
        s.run().unwrap();
        let st = s.state();
        assert_eq!(st.archive.len(), 36);
        let best: Vec<f64> = st.reports.iter().map(|r| r.best_scalarized.unwrap()).collect();
        assert!(best.windows(2).all(|w| w[1] >= w[0]));
        assert!(st.reports.iter().all(|r| r.hypervolume.is_none()));
        assert_eq!(st.result().len(), 1);
    }
}
