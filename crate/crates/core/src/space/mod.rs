//! The searchable CNN design space: encoding, restrictions, sampling and
//! analytic complexity.

mod complexity;
mod genome;

pub use complexity::{BackboneSpec, ComplexityConfig, ComplexityVector, LatencyCoefficients, LatencyTable};
pub use genome::{
    depth_position, expansion_position, kernel_position, GeneRole, Genome, EXPANSION_RATIOS,
    GENES_PER_BLOCK, GENOME_LEN, KERNEL_SIZES, MAX_DEPTH, MAX_RESOLUTION_CODE, MIN_DEPTH, NUM_BLOCKS,
};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default cap on how many genomes `enumerate` is willing to stream.
pub const DEFAULT_ENUMERATION_CAP: u128 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SpaceError {
    #[error("gene at position {position} has out-of-range value {value}")]
    OutOfRangeGene { position: usize, value: u8 },
    #[error("genome has {0} genes, expected {GENOME_LEN}")]
    Length(usize),
    #[error("genome violates zero padding at position {0}")]
    NonCanonical(usize),
    #[error("cannot parse genome at token {index}: {reason}")]
    Parse { index: usize, reason: String },
    #[error("restricted space holds {cardinality} genomes, above the cap of {cap}")]
    SpaceTooLarge { cardinality: u128, cap: u128 },
    #[error("invalid space restriction: {0}")]
    InvalidRestriction(String),
}

/// Choice sets for one layer slot (codes, not sizes).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotChoices {
    pub kernels: Vec<u8>,
    pub expansions: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockChoices {
    pub depths: Vec<u8>,
    pub slots: Vec<SlotChoices>,
}

impl BlockChoices {
    /// Same kernel/expansion choices in every slot.
    pub fn uniform(depths: &[u8], kernels: &[u8], expansions: &[u8]) -> BlockChoices {
        BlockChoices {
            depths: depths.to_vec(),
            slots: vec![
                SlotChoices { kernels: kernels.to_vec(), expansions: expansions.to_vec() };
                MAX_DEPTH
            ],
        }
    }

    fn configurations(&self) -> u128 {
        self.depths
            .iter()
            .map(|&d| {
                self.slots[..d as usize]
                    .iter()
                    .map(|s| (s.kernels.len() * s.expansions.len()) as u128)
                    .product::<u128>()
            })
            .sum()
    }
}

/// A (possibly restricted) search space given by per-position choice sets.
///
/// The unrestricted space is [`SearchSpace::full`]. Layer-slot choice sets
/// list active codes only; padding zeros are implied by the depth gene.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub resolutions: Vec<u8>,
    pub blocks: Vec<BlockChoices>,
}

impl Default for SearchSpace {
    fn default() -> Self {
        SearchSpace::full()
    }
}

impl SearchSpace {
    pub fn full() -> SearchSpace {
        SearchSpace {
            resolutions: (0..=MAX_RESOLUTION_CODE).collect(),
            blocks: vec![BlockChoices::uniform(&[2, 3, 4], &[1, 2, 3], &[1, 2, 3]); NUM_BLOCKS],
        }
    }

    /// The enumerable 12,800-genome space used for exhaustive reference
    /// fronts: the last two blocks vary with depth {2,3}, kernels {3,5} and
    /// expansions {3,4}; the first three blocks are pinned to two (k=3, e=3)
    /// layers; resolution is 192 or 256.
    pub fn reduced() -> SearchSpace {
        let fixed = BlockChoices::uniform(&[2], &[1], &[1]);
        let varied = BlockChoices::uniform(&[2, 3], &[1, 2], &[1, 2]);
        SearchSpace {
            resolutions: vec![0, MAX_RESOLUTION_CODE],
            blocks: vec![fixed.clone(), fixed.clone(), fixed, varied.clone(), varied],
        }
    }

    pub fn validate(&self) -> Result<(), SpaceError> {
        let bad = |msg: String| Err(SpaceError::InvalidRestriction(msg));
        if self.blocks.len() != NUM_BLOCKS {
            return bad(format!("expected {NUM_BLOCKS} blocks, got {}", self.blocks.len()));
        }
        check_set("resolution", &self.resolutions, 0, MAX_RESOLUTION_CODE)?;
        for (b, block) in self.blocks.iter().enumerate() {
            check_set(&format!("block {b} depth"), &block.depths, MIN_DEPTH, MAX_DEPTH as u8)?;
            if block.slots.len() != MAX_DEPTH {
                return bad(format!("block {b} must list {MAX_DEPTH} slots"));
            }
            for (s, slot) in block.slots.iter().enumerate() {
                check_set(&format!("block {b} slot {s} kernel"), &slot.kernels, 1, 3)?;
                check_set(&format!("block {b} slot {s} expansion"), &slot.expansions, 1, 3)?;
            }
        }
        Ok(())
    }

    /// Legal codes at a gene position. Layer slots exclude the padding zero.
    pub fn legal_codes(&self, position: usize) -> &[u8] {
        match GeneRole::of(position) {
            GeneRole::Resolution => &self.resolutions,
            GeneRole::Depth { block } => &self.blocks[block].depths,
            GeneRole::Kernel { block, slot } => &self.blocks[block].slots[slot].kernels,
            GeneRole::Expansion { block, slot } => &self.blocks[block].slots[slot].expansions,
        }
    }

    /// Number of canonical genomes, saturating at `u128::MAX`.
    pub fn cardinality(&self) -> u128 {
        self.blocks
            .iter()
            .fold(self.resolutions.len() as u128, |acc, b| acc.saturating_mul(b.configurations()))
    }

    pub fn contains(&self, genome: &Genome) -> bool {
        (0..GENOME_LEN).all(|pos| {
            let code = genome.genes()[pos];
            match GeneRole::of(pos) {
                GeneRole::Kernel { block, slot } | GeneRole::Expansion { block, slot }
                    if slot >= genome.depth(block) =>
                {
                    code == 0
                }
                _ => self.legal_codes(pos).contains(&code),
            }
        })
    }

    /// Draws resolution, each depth and each active layer code uniformly
    /// from its legal set.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Genome {
        let mut genes = [0u8; GENOME_LEN];
        genes[0] = pick(rng, &self.resolutions);
        for (b, block) in self.blocks.iter().enumerate() {
            let depth = pick(rng, &block.depths);
            genes[depth_position(b)] = depth;
            for slot in 0..depth as usize {
                genes[kernel_position(b, slot)] = pick(rng, &block.slots[slot].kernels);
                genes[expansion_position(b, slot)] = pick(rng, &block.slots[slot].expansions);
            }
        }
        Genome::from_genes(&genes).expect("sampled genome is canonical")
    }

    /// Maps an in-range raw string onto the nearest canonical member of this
    /// space: depths and resolution snap to the closest legal code, padding
    /// is re-derived, and active slots snap to their closest legal code (zero
    /// becomes the smallest legal code).
    pub fn repair(&self, raw: &[u8]) -> Result<Genome, SpaceError> {
        let mut genes = *Genome::canonicalize(raw)?.genes();
        genes[0] = snap(genes[0], &self.resolutions);
        for b in 0..NUM_BLOCKS {
            let dp = depth_position(b);
            genes[dp] = snap(genes[dp], &self.blocks[b].depths);
        }
        let mut genes = *Genome::canonicalize(&genes)?.genes();
        for b in 0..NUM_BLOCKS {
            let depth = genes[depth_position(b)] as usize;
            for slot in 0..depth {
                let choices = &self.blocks[b].slots[slot];
                let kp = kernel_position(b, slot);
                let ep = expansion_position(b, slot);
                genes[kp] = snap(genes[kp], &choices.kernels);
                genes[ep] = snap(genes[ep], &choices.expansions);
            }
        }
        Genome::from_genes(&genes)
    }

    /// Streams every canonical genome of the space exactly once, in
    /// lexicographic order of (resolution, block configurations).
    pub fn enumerate(&self, cap: u128) -> Result<Enumeration, SpaceError> {
        self.validate()?;
        let cardinality = self.cardinality();
        if cardinality > cap {
            return Err(SpaceError::SpaceTooLarge { cardinality, cap });
        }
        let block_configs: Vec<Vec<Vec<(usize, u8)>>> = self
            .blocks
            .iter()
            .enumerate()
            .map(|(b, block)| block_configurations(b, block))
            .collect();
        let mut radices = vec![self.resolutions.len()];
        radices.extend(block_configs.iter().map(Vec::len));
        Ok(Enumeration {
            resolutions: self.resolutions.clone(),
            block_configs,
            counter: vec![0; radices.len()],
            radices,
            done: cardinality == 0,
        })
    }
}

fn check_set(what: &str, set: &[u8], lo: u8, hi: u8) -> Result<(), SpaceError> {
    if set.is_empty() {
        return Err(SpaceError::InvalidRestriction(format!("{what}: empty choice set")));
    }
    if let Some(v) = set.iter().find(|&&v| v < lo || v > hi) {
        return Err(SpaceError::InvalidRestriction(format!("{what}: code {v} outside [{lo}, {hi}]")));
    }
    let mut sorted = set.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != set.len() {
        return Err(SpaceError::InvalidRestriction(format!("{what}: duplicate codes")));
    }
    Ok(())
}

fn pick<R: Rng + ?Sized>(rng: &mut R, set: &[u8]) -> u8 {
    set[rng.random_range(0..set.len())]
}

/// Closest legal code; ties go to the smaller code.
fn snap(value: u8, legal: &[u8]) -> u8 {
    *legal
        .iter()
        .min_by_key(|&&c| ((c as i16 - value as i16).abs(), c))
        .expect("non-empty choice set")
}

/// All gene assignments of one block as (position, code) lists.
fn block_configurations(b: usize, block: &BlockChoices) -> Vec<Vec<(usize, u8)>> {
    let mut out = Vec::new();
    let mut depths = block.depths.clone();
    depths.sort_unstable();
    for &depth in &depths {
        let mut partial: Vec<Vec<(usize, u8)>> = vec![vec![(depth_position(b), depth)]];
        for slot in 0..depth as usize {
            let choices = &block.slots[slot];
            let mut next = Vec::with_capacity(partial.len() * choices.kernels.len() * choices.expansions.len());
            for prefix in &partial {
                for &k in &choices.kernels {
                    for &e in &choices.expansions {
                        let mut cfg = prefix.clone();
                        cfg.push((kernel_position(b, slot), k));
                        cfg.push((expansion_position(b, slot), e));
                        next.push(cfg);
                    }
                }
            }
            partial = next;
        }
        out.extend(partial);
    }
    out
}

/// Iterator returned by [`SearchSpace::enumerate`].
pub struct Enumeration {
    resolutions: Vec<u8>,
    block_configs: Vec<Vec<Vec<(usize, u8)>>>,
    radices: Vec<usize>,
    counter: Vec<usize>,
    done: bool,
}

impl Iterator for Enumeration {
    type Item = Genome;

    fn next(&mut self) -> Option<Genome> {
        if self.done {
            return None;
        }
        let mut genes = [0u8; GENOME_LEN];
        genes[0] = self.resolutions[self.counter[0]];
        for (b, configs) in self.block_configs.iter().enumerate() {
            for &(pos, code) in &configs[self.counter[b + 1]] {
                genes[pos] = code;
            }
        }
        // odometer, last digit fastest
        let mut digit = self.counter.len();
        loop {
            if digit == 0 {
                self.done = true;
                break;
            }
            digit -= 1;
            self.counter[digit] += 1;
            if self.counter[digit] < self.radices[digit] {
                break;
            }
            self.counter[digit] = 0;
        }
        Some(Genome::from_genes(&genes).expect("enumerated genome is canonical"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use std::collections::HashSet;

    #[test]
    fn reduced_space_has_12800_members() {
        // Independent count: per varied block, sum over depth d of (2*2)^d.
        let per_block: u128 = [2u32, 3].iter().map(|&d| 4u128.pow(d)).sum();
        assert_eq!(per_block, 80);
        let expected = 2 * per_block * per_block;
        assert_eq!(expected, 12_800);
        let space = SearchSpace::reduced();
        assert_eq!(space.cardinality(), expected);
        let all: Vec<Genome> = space.enumerate(DEFAULT_ENUMERATION_CAP).unwrap().collect();
        assert_eq!(all.len() as u128, expected);
        let unique: HashSet<_> = all.iter().collect();
        assert_eq!(unique.len(), all.len());
        assert!(all.iter().all(|g| space.contains(g)));
    }

    #[test]
    fn single_choice_space_has_one_genome() {
        let space = SearchSpace {
            resolutions: vec![3],
            blocks: vec![BlockChoices::uniform(&[3], &[2], &[3]); NUM_BLOCKS],
        };
        let all: Vec<Genome> = space.enumerate(DEFAULT_ENUMERATION_CAP).unwrap().collect();
        assert_eq!(all.len(), 1);
        assert_eq!(all[0].depth(4), 3);
        assert_eq!(all[0].kernel_code(4, 2), 2);
        assert_eq!(all[0].kernel_code(4, 3), 0);
    }

    #[test]
    fn full_space_is_too_large_to_enumerate() {
        // log10(17 * (9^2 + 9^3 + 9^4)^5) ~ 20.6, far above the 10^6 cap.
        let per_block = 81.0f64 + 729.0 + 6561.0;
        let log10 = 17f64.log10() + 5.0 * per_block.log10();
        assert!(log10 > 20.0 && log10 < 21.0);
        let space = SearchSpace::full();
        let card = space.cardinality();
        assert!(((card as f64).log10() - log10).abs() < 1e-9);
        assert!(matches!(
            space.enumerate(DEFAULT_ENUMERATION_CAP),
            Err(SpaceError::SpaceTooLarge { .. })
        ));
    }

    #[test]
    fn uniform_depth_frequencies() {
        // Chi-square on 10,000 draws per block, 2 dof, 0.999 quantile = 13.82.
        let space = SearchSpace::full();
        let mut rng = stream(7, "depth-freq", 0);
        let mut counts = [[0usize; 3]; NUM_BLOCKS];
        let n = 10_000;
        for _ in 0..n {
            let g = space.sample_uniform(&mut rng);
            for (b, row) in counts.iter_mut().enumerate() {
                row[g.depth(b) - 2] += 1;
            }
        }
        let expected = n as f64 / 3.0;
        for row in counts {
            let chi2: f64 = row.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
            assert!(chi2 < 13.82, "chi2 = {chi2}, counts {row:?}");
            for c in row {
                let freq = c as f64 / n as f64;
                assert!((freq - 1.0 / 3.0).abs() < 0.02);
            }
        }
    }

    #[test]
    fn sampling_is_deterministic_and_canonical() {
        let space = SearchSpace::full();
        let a: Vec<Genome> = {
            let mut rng = stream(42, "s", 0);
            (0..50).map(|_| space.sample_uniform(&mut rng)).collect()
        };
        let b: Vec<Genome> = {
            let mut rng = stream(42, "s", 0);
            (0..50).map(|_| space.sample_uniform(&mut rng)).collect()
        };
        assert_eq!(a, b);
        for g in &a {
            assert_eq!(Genome::canonicalize(g.genes()).unwrap(), *g);
        }
    }

    #[test]
    fn repair_lands_inside_restricted_space() {
        let space = SearchSpace::reduced();
        let mut rng = stream(3, "repair", 0);
        let full = SearchSpace::full();
        for _ in 0..500 {
            let g = full.sample_uniform(&mut rng);
            let r = space.repair(g.genes()).unwrap();
            assert!(space.contains(&r), "{r}");
        }
        let inside = space.sample_uniform(&mut rng);
        assert_eq!(space.repair(inside.genes()).unwrap(), inside);
    }

    #[test]
    fn invalid_restrictions_are_reported() {
        let mut space = SearchSpace::reduced();
        space.resolutions.clear();
        assert!(matches!(space.validate(), Err(SpaceError::InvalidRestriction(_))));
        let mut space = SearchSpace::reduced();
        space.blocks[0].depths = vec![5];
        assert!(space.validate().is_err());
    }
}
