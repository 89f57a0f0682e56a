//! Per-gene choice frequencies of good architectures, and sampling new
//! initial populations from them.

use std::collections::HashSet;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::stream;
use crate::space::{GeneRole, Genome, SearchSpace, GENOME_LEN};

use super::DriverError;

/// One categorical distribution per gene position. Layer slots that can be
/// inactive carry the code 0 as an "absent" category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneDistribution {
    pub codes: Vec<Vec<u8>>,
    pub probs: Vec<Vec<f64>>,
    /// Number of genomes the frequencies were counted from.
    pub samples: usize,
}

fn categories(space: &SearchSpace, pos: usize) -> Vec<u8> {
    let mut codes = Vec::new();
    if let GeneRole::Kernel { block, slot } | GeneRole::Expansion { block, slot } = GeneRole::of(pos) {
        if space.blocks[block].depths.iter().any(|&d| (d as usize) <= slot) {
            codes.push(0);
        }
    }
    codes.extend_from_slice(space.legal_codes(pos));
    codes
}

/// Empirical code frequencies over `genomes` (no smoothing).
pub fn mine_frequencies(genomes: &[Genome], space: &SearchSpace) -> Result<GeneDistribution, DriverError> {
    if genomes.is_empty() {
        return Err(DriverError::EmptyFront);
    }
    let n = genomes.len() as f64;
    let mut codes = Vec::with_capacity(GENOME_LEN);
    let mut probs = Vec::with_capacity(GENOME_LEN);
    for pos in 0..GENOME_LEN {
        let cats = categories(space, pos);
        let row: Vec<f64> =
            cats.iter().map(|&c| genomes.iter().filter(|g| g.genes()[pos] == c).count() as f64 / n).collect();
        codes.push(cats);
        probs.push(row);
    }
    Ok(GeneDistribution { codes, probs, samples: genomes.len() })
}

impl GeneDistribution {
    /// Laplace smoothing: `(count + alpha) / (samples + alpha * categories)`.
    pub fn smoothed(&self, alpha: f64) -> GeneDistribution {
        let n = self.samples as f64;
        let probs = self
            .probs
            .iter()
            .map(|row| {
                let denom = n + alpha * row.len() as f64;
                row.iter().map(|p| (p * n + alpha) / denom).collect()
            })
            .collect();
        GeneDistribution { codes: self.codes.clone(), probs, samples: self.samples }
    }

    pub fn load(path: &Path) -> Result<GeneDistribution, DriverError> {
        let text = std::fs::read_to_string(path).map_err(|e| DriverError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| DriverError::io(path, e))
    }

    pub fn save(&self, path: &Path) -> Result<(), DriverError> {
        let text = serde_json::to_string_pretty(self).expect("distribution serializes");
        std::fs::write(path, text).map_err(|e| DriverError::io(path, e))
    }

    /// Frequency matrix as CSV: one row per gene position, one column per
    /// code 0..=16 (blank where the code is not a category).
    pub fn to_csv(&self) -> String {
        let width = self.codes.iter().flatten().copied().max().unwrap_or(0) as usize + 1;
        let mut out = String::from("position,role");
        for c in 0..width {
            out.push_str(&format!(",code_{c}"));
        }
        out.push('\n');
        for (pos, (codes, probs)) in self.codes.iter().zip(&self.probs).enumerate() {
            let role = match GeneRole::of(pos) {
                GeneRole::Resolution => "resolution".to_string(),
                GeneRole::Depth { block } => format!("depth_b{block}"),
                GeneRole::Kernel { block, slot } => format!("kernel_b{block}_l{slot}"),
                GeneRole::Expansion { block, slot } => format!("expansion_b{block}_l{slot}"),
            };
            out.push_str(&format!("{pos},{role}"));
            for c in 0..width {
                match codes.iter().position(|&k| k as usize == c) {
                    Some(i) => out.push_str(&format!(",{}", probs[i])),
                    None => out.push(','),
                }
            }
            out.push('\n');
        }
        out
    }
}

fn draw<R: Rng>(rng: &mut R, codes: &[u8], probs: &[f64]) -> u8 {
    let total: f64 = probs.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (c, p) in codes.iter().zip(probs) {
        if u < *p {
            return *c;
        }
        u -= p;
    }
    *codes.last().expect("non-empty category set")
}

/// `n` genomes drawn position by position from `dist` and repaired into
/// `space`. A duplicate is redrawn up to 100 times, then accepted.
pub fn transfer_init(dist: &GeneDistribution, space: &SearchSpace, n: usize, seed: u64) -> Vec<Genome> {
    let mut rng = stream(seed, "transfer-init", 0);
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let mut attempts = 0;
        loop {
            let mut genes = [0u8; GENOME_LEN];
            for pos in 0..GENOME_LEN {
                genes[pos] = draw(&mut rng, &dist.codes[pos], &dist.probs[pos]);
            }
            let g = space.repair(&genes).expect("drawn codes are in range");
            attempts += 1;
            if seen.insert(g) || attempts >= 100 {
                out.push(g);
                break;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_genome_gives_point_mass() {
        let space = SearchSpace::full();
        let g = Genome::maximal();
        let d = mine_frequencies(&[g], &space).unwrap();
        for pos in 0..GENOME_LEN {
            let i = d.codes[pos].iter().position(|&c| c == g.genes()[pos]).unwrap();
            assert_eq!(d.probs[pos][i], 1.0);
        }
        let copies = transfer_init(&d, &space, 10, 0);
        assert_eq!(copies.len(), 10);
        assert!(copies.iter().all(|c| *c == g));
    }

    #[test]
    fn rows_sum_to_one_before_and_after_smoothing() {
        let space = SearchSpace::reduced();
        let mut rng = stream(1, "mine", 0);
        let gs: Vec<Genome> = (0..50).map(|_| space.sample_uniform(&mut rng)).collect();
        let d = mine_frequencies(&gs, &space).unwrap();
        for dist in [d.clone(), d.smoothed(1.0)] {
            for row in &dist.probs {
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }
        // illegal codes are never categories
        for pos in 0..GENOME_LEN {
            for c in &d.codes[pos] {
                assert!(*c == 0 || space.legal_codes(pos).contains(c));
            }
        }
    }

    #[test]
    fn uniform_front_gives_near_uniform_rows() {
        let space = SearchSpace::full();
        let mut rng = stream(2, "mine-uniform", 0);
        let gs: Vec<Genome> = (0..20_000).map(|_| space.sample_uniform(&mut rng)).collect();
        let d = mine_frequencies(&gs, &space).unwrap();
        // resolution and depth genes are drawn uniformly
        for p in &d.probs[0] {
            assert!((p - 1.0 / 17.0).abs() < 0.01);
        }
        for p in &d.probs[1] {
            assert!((p - 1.0 / 3.0).abs() < 0.015);
        }
    }

    #[test]
    fn sampled_genomes_are_canonical_members() {
        let space = SearchSpace::reduced();
        let mut rng = stream(3, "mine-sample", 0);
        let gs: Vec<Genome> = (0..30).map(|_| space.sample_uniform(&mut rng)).collect();
        let d = mine_frequencies(&gs, &space).unwrap().smoothed(1.0);
        let out = transfer_init(&d, &space, 200, 5);
        assert!(out.iter().all(|g| space.contains(g) && Genome::from_genes(g.genes()).is_ok()));
        let unique: HashSet<_> = out.iter().collect();
        assert_eq!(unique.len(), 200);
        assert_eq!(out, transfer_init(&d, &space, 200, 5));
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(matches!(mine_frequencies(&[], &SearchSpace::full()), Err(DriverError::EmptyFront)));
    }
}
