use std::cmp::Ordering;
use std::collections::HashSet;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::rng::stream;
use crate::space::{Genome, SearchSpace, GENOME_LEN};

use super::pareto::{crowding_distance, nondominated_sort, rank_and_crowd, ObjectiveVector};
use super::MoeaError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NsgaConfig {
    pub pop_size: usize,
    pub generations: usize,
    pub crossover_prob: f64,
    pub swap_prob: f64,
    /// Per-gene reset probability; `None` means one over the genome length.
    pub mutation_prob: Option<f64>,
}

impl Default for NsgaConfig {
    fn default() -> Self {
        NsgaConfig { pop_size: 100, generations: 100, crossover_prob: 0.9, swap_prob: 0.5, mutation_prob: None }
    }
}

impl NsgaConfig {
    pub fn validate(&self) -> Result<(), MoeaError> {
        if self.pop_size < 8 || self.pop_size % 2 != 0 {
            return Err(MoeaError::InvalidConfig(format!(
                "pop_size must be even and at least 8, got {}",
                self.pop_size
            )));
        }
        let probs = [self.crossover_prob, self.swap_prob, self.mutation()];
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(MoeaError::InvalidConfig("probabilities must lie in [0, 1]".into()));
        }
        Ok(())
    }

    fn mutation(&self) -> f64 {
        self.mutation_prob.unwrap_or(1.0 / GENOME_LEN as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub genome: Genome,
    pub objectives: ObjectiveVector,
    pub rank: usize,
    pub crowding: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredGenome {
    pub genome: Genome,
    pub fitness: f64,
}

struct Variation<'a> {
    space: &'a SearchSpace,
    cfg: &'a NsgaConfig,
    rng: ChaCha8Rng,
}

impl Variation<'_> {
    fn mutate(&mut self, genes: &mut [u8; GENOME_LEN]) {
        let p = self.cfg.mutation();
        for (pos, gene) in genes.iter_mut().enumerate() {
            if self.rng.random::<f64>() < p {
                let codes = self.space.legal_codes(pos);
                *gene = codes[self.rng.random_range(0..codes.len())];
            }
        }
    }

    fn offspring(&mut self, a: &Genome, b: &Genome) -> [Genome; 2] {
        let mut x = *a.genes();
        let mut y = *b.genes();
        if self.rng.random::<f64>() < self.cfg.crossover_prob {
            for pos in 0..GENOME_LEN {
                if self.rng.random::<f64>() < self.cfg.swap_prob {
                    std::mem::swap(&mut x[pos], &mut y[pos]);
                }
            }
        }
        self.mutate(&mut x);
        self.mutate(&mut y);
        [
            self.space.repair(&x).expect("variation keeps genes in range"),
            self.space.repair(&y).expect("variation keeps genes in range"),
        ]
    }

    /// Initial members: repaired seeds first, then uniform samples, no
    /// duplicates unless the space runs out.
    fn initial(&mut self, seeds: &[Genome]) -> Vec<Genome> {
        let n = self.cfg.pop_size;
        let mut seen = HashSet::new();
        let mut pop = Vec::with_capacity(n);
        for g in seeds {
            if pop.len() == n {
                break;
            }
            let g = self.space.repair(g.genes()).expect("canonical genome repairs");
            if seen.insert(g) {
                pop.push(g);
            }
        }
        let mut attempts = 0;
        while pop.len() < n {
            let g = self.space.sample_uniform(&mut self.rng);
            attempts += 1;
            if seen.insert(g) || attempts > 50 * n {
                pop.push(g);
            }
        }
        pop
    }

    /// `count` children from parents picked by `pick`, avoiding genomes in
    /// `taken` while that remains feasible.
    fn children(
        &mut self,
        parents: &[Genome],
        count: usize,
        taken: &mut HashSet<Genome>,
        mut pick: impl FnMut(&mut ChaCha8Rng) -> usize,
    ) -> Vec<Genome> {
        let mut out = Vec::with_capacity(count);
        let mut attempts = 0;
        while out.len() < count {
            let a = pick(&mut self.rng);
            let b = pick(&mut self.rng);
            for child in self.offspring(&parents[a], &parents[b]) {
                attempts += 1;
                if out.len() < count && (taken.insert(child) || attempts > 50 * count) {
                    out.push(child);
                }
            }
        }
        out
    }
}

fn evaluate<F, E>(objective_fn: &mut F, genomes: &[Genome]) -> Result<Vec<ObjectiveVector>, E>
where
    F: FnMut(&[Genome]) -> Result<Vec<ObjectiveVector>, E>,
    E: From<MoeaError>,
{
    let objs = objective_fn(genomes)?;
    if objs.len() != genomes.len() {
        return Err(MoeaError::ObjectiveCount { expected: genomes.len(), got: objs.len() }.into());
    }
    if objs.iter().flatten().any(|v| !v.is_finite()) {
        return Err(MoeaError::NonFinite.into());
    }
    Ok(objs)
}

fn assemble(genomes: Vec<Genome>, objectives: Vec<ObjectiveVector>) -> Result<Vec<Individual>, MoeaError> {
    let (rank, crowd) = rank_and_crowd(&objectives)?;
    Ok(genomes
        .into_iter()
        .zip(objectives)
        .zip(rank.into_iter().zip(crowd))
        .map(|((genome, objectives), (rank, crowding))| Individual { genome, objectives, rank, crowding })
        .collect())
}

fn crowded_better(a: &Individual, b: &Individual) -> bool {
    a.rank < b.rank || (a.rank == b.rank && a.crowding > b.crowding)
}

/// Indices of the `n` survivors of `objs`: whole fronts in order, the
/// splitting front truncated by descending crowding distance.
fn environmental_selection(objs: &[ObjectiveVector], n: usize) -> Result<Vec<usize>, MoeaError> {
    let mut keep = Vec::with_capacity(n);
    for front in nondominated_sort(objs)? {
        if keep.len() + front.len() <= n {
            keep.extend(front);
            continue;
        }
        let pts: Vec<ObjectiveVector> = front.iter().map(|&i| objs[i].clone()).collect();
        let dist = crowding_distance(&pts);
        let mut order: Vec<usize> = (0..front.len()).collect();
        order.sort_by(|&a, &b| dist[b].partial_cmp(&dist[a]).unwrap_or(Ordering::Equal));
        keep.extend(order.into_iter().take(n - keep.len()).map(|k| front[k]));
        break;
    }
    Ok(keep)
}

/// NSGA-II minimizing the vectors returned by `objective_fn`, which receives
/// whole batches of genomes. Returns the final population with ranks and
/// crowding computed within it.
pub fn evolve<F, E>(
    cfg: &NsgaConfig,
    space: &SearchSpace,
    initial: &[Genome],
    objective_fn: F,
    seed: u64,
) -> Result<Vec<Individual>, E>
where
    F: FnMut(&[Genome]) -> Result<Vec<ObjectiveVector>, E>,
    E: From<MoeaError>,
{
    evolve_observed(cfg, space, initial, objective_fn, seed, |_, _| {})
}

/// [`evolve`] with a callback receiving the population after initialization
/// (generation 0) and after each generation.
pub fn evolve_observed<F, E, O>(
    cfg: &NsgaConfig,
    space: &SearchSpace,
    initial: &[Genome],
    mut objective_fn: F,
    seed: u64,
    mut observer: O,
) -> Result<Vec<Individual>, E>
where
    F: FnMut(&[Genome]) -> Result<Vec<ObjectiveVector>, E>,
    E: From<MoeaError>,
    O: FnMut(usize, &[Individual]),
{
    cfg.validate()?;
    let mut var = Variation { space, cfg, rng: stream(seed, "nsga2", 0) };
    let genomes = var.initial(initial);
    let objs = evaluate(&mut objective_fn, &genomes)?;
    let mut pop = assemble(genomes, objs)?;
    observer(0, &pop);

    for generation in 1..=cfg.generations {
        let parents: Vec<Genome> = pop.iter().map(|ind| ind.genome).collect();
        let mut taken: HashSet<Genome> = parents.iter().copied().collect();
        let n = pop.len();
        let children = var.children(&parents, cfg.pop_size, &mut taken, |rng| {
            let i = rng.random_range(0..n);
            let j = rng.random_range(0..n);
            if crowded_better(&pop[j], &pop[i]) {
                j
            } else {
                i
            }
        });
        let child_objs = evaluate(&mut objective_fn, &children)?;

        let mut genomes = parents;
        genomes.extend(children);
        let mut objs: Vec<ObjectiveVector> = pop.into_iter().map(|ind| ind.objectives).collect();
        objs.extend(child_objs);
        let keep = environmental_selection(&objs, cfg.pop_size)?;
        let genomes = keep.iter().map(|&i| genomes[i]).collect();
        let objs = keep.iter().map(|&i| std::mem::take(&mut objs[i])).collect();
        pop = assemble(genomes, objs)?;
        observer(generation, &pop);
    }
    Ok(pop)
}

/// Generational GA maximizing a scalar fitness with the same variation
/// operators; parents by binary tournament, survivors by truncation over
/// parents and children. Returns the final population, best first.
pub fn evolve_scalar<F, E>(
    cfg: &NsgaConfig,
    space: &SearchSpace,
    initial: &[Genome],
    mut fitness_fn: F,
    seed: u64,
) -> Result<Vec<ScoredGenome>, E>
where
    F: FnMut(&[Genome]) -> Result<Vec<f64>, E>,
    E: From<MoeaError>,
{
    cfg.validate()?;
    let mut score = |genomes: &[Genome]| -> Result<Vec<f64>, E> {
        let f = fitness_fn(genomes)?;
        if f.len() != genomes.len() {
            return Err(MoeaError::ObjectiveCount { expected: genomes.len(), got: f.len() }.into());
        }
        if f.iter().any(|v| !v.is_finite()) {
            return Err(MoeaError::NonFinite.into());
        }
        Ok(f)
    };
    let by_fitness = |pop: &mut Vec<ScoredGenome>| {
        pop.sort_by(|a, b| b.fitness.partial_cmp(&a.fitness).unwrap_or(Ordering::Equal));
    };

    let mut var = Variation { space, cfg, rng: stream(seed, "scalar-ga", 0) };
    let genomes = var.initial(initial);
    let fit = score(&genomes)?;
    let mut pop: Vec<ScoredGenome> =
        genomes.into_iter().zip(fit).map(|(genome, fitness)| ScoredGenome { genome, fitness }).collect();
    by_fitness(&mut pop);

    for _ in 0..cfg.generations {
        let parents: Vec<Genome> = pop.iter().map(|s| s.genome).collect();
        let mut taken: HashSet<Genome> = parents.iter().copied().collect();
        let n = pop.len();
        // pop is sorted best first, so the lower index wins a tournament
        let children = var.children(&parents, cfg.pop_size, &mut taken, |rng| {
            rng.random_range(0..n).min(rng.random_range(0..n))
        });
        let fit = score(&children)?;
        pop.extend(children.into_iter().zip(fit).map(|(genome, fitness)| ScoredGenome { genome, fitness }));
        by_fitness(&mut pop);
        pop.truncate(cfg.pop_size);
    }
    Ok(pop)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::ComplexityConfig;
    use proptest::prelude::*;

    fn toy_objectives(genomes: &[Genome]) -> Result<Vec<ObjectiveVector>, MoeaError> {
        let cc = ComplexityConfig::default();
        Ok(genomes
            .iter()
            .map(|g| {
                let c = cc.complexity(g);
                let score: f64 = g.genes().iter().map(|&v| v as f64).sum::<f64>() + g.resolution_code() as f64;
                vec![-score, c.madds as f64]
            })
            .collect())
    }

    fn small_cfg(generations: usize) -> NsgaConfig {
        NsgaConfig { pop_size: 20, generations, ..NsgaConfig::default() }
    }

    #[test]
    fn rejects_bad_population_sizes() {
        let space = SearchSpace::reduced();
        for pop_size in [6, 21] {
            let cfg = NsgaConfig { pop_size, ..NsgaConfig::default() };
            let err = evolve(&cfg, &space, &[], toy_objectives, 0).unwrap_err();
            assert!(matches!(err, MoeaError::InvalidConfig(_)));
        }
    }

    #[test]
    fn zero_generations_returns_initial_population() {
        let space = SearchSpace::reduced();
        let seeds = vec![Genome::minimal()];
        let pop = evolve(&small_cfg(0), &space, &seeds, toy_objectives, 3).unwrap();
        assert_eq!(pop.len(), 20);
        assert_eq!(pop[0].genome, space.repair(Genome::minimal().genes()).unwrap());
        let objs = toy_objectives(&pop.iter().map(|i| i.genome).collect::<Vec<_>>()).unwrap();
        for (ind, o) in pop.iter().zip(objs) {
            assert_eq!(ind.objectives, o);
        }
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let space = SearchSpace::reduced();
        let a = evolve(&small_cfg(10), &space, &[], toy_objectives, 11).unwrap();
        let b = evolve(&small_cfg(10), &space, &[], toy_objectives, 11).unwrap();
        let c = evolve(&small_cfg(10), &space, &[], toy_objectives, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn offspring_stay_canonical_and_inside_space() {
        let space = SearchSpace::reduced();
        evolve_observed(&small_cfg(15), &space, &[], toy_objectives, 5, |_, pop| {
            for ind in pop {
                assert!(space.contains(&ind.genome));
                assert_eq!(Genome::from_genes(ind.genome.genes()).unwrap(), ind.genome);
            }
        })
        .unwrap();
    }

    #[test]
    fn objective_row_count_is_checked() {
        let space = SearchSpace::reduced();
        let err = evolve(&small_cfg(1), &space, &[], |g: &[Genome]| Ok::<_, MoeaError>(vec![vec![0.0, 0.0]; g.len() - 1]), 0)
            .unwrap_err();
        assert_eq!(err, MoeaError::ObjectiveCount { expected: 20, got: 19 });
    }

    #[test]
    fn scalar_ga_improves_and_sorts() {
        let space = SearchSpace::reduced();
        let fitness = |gs: &[Genome]| -> Result<Vec<f64>, MoeaError> {
            Ok(gs.iter().map(|g| g.genes().iter().map(|&v| v as f64).sum()).collect())
        };
        let start = evolve_scalar(&small_cfg(0), &space, &[], fitness, 2).unwrap();
        let end = evolve_scalar(&small_cfg(30), &space, &[], fitness, 2).unwrap();
        assert!(end.windows(2).all(|w| w[0].fitness >= w[1].fitness));
        assert!(end[0].fitness >= start[0].fitness);
        let best = space.enumerate(u128::MAX).unwrap().map(|g| fitness(&[g]).unwrap()[0]).fold(0.0, f64::max);
        assert_eq!(end[0].fitness, best);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn best_per_objective_never_lost(seed in 0u64..10_000) {
            let space = SearchSpace::reduced();
            let mut best: Option<Vec<f64>> = None;
            let mut ok = true;
            evolve_observed(&small_cfg(12), &space, &[], toy_objectives, seed, |_, pop| {
                let cur: Vec<f64> = (0..2)
                    .map(|j| pop.iter().map(|i| i.objectives[j]).fold(f64::INFINITY, f64::min))
                    .collect();
                if let Some(prev) = &best {
                    ok &= cur.iter().zip(prev).all(|(c, p)| c <= p);
                }
                best = Some(cur);
            }).unwrap();
            prop_assert!(ok);
        }
    }
}
