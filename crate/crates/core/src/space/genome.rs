//! Fixed-length integer encoding of one architecture.
//!
//! Layout (46 genes):
//!
//! ```text
//! [res] [d1 k1 e1 k2 e2 k3 e3 k4 e4] ... [d5 k1 e1 ... k4 e4]
//! ```
//!
//! `res` indexes the input resolution (`192 + 4 * res` pixels). Every block
//! carries its depth gene followed by four (kernel, expansion) slots. Slots at
//! or past the block depth are zero padded.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::SpaceError;

pub const NUM_BLOCKS: usize = 5;
pub const MAX_DEPTH: usize = 4;
pub const MIN_DEPTH: u8 = 2;
pub const GENES_PER_BLOCK: usize = 1 + 2 * MAX_DEPTH;
pub const GENOME_LEN: usize = 1 + NUM_BLOCKS * GENES_PER_BLOCK;

pub const MAX_RESOLUTION_CODE: u8 = 16;
pub const BASE_RESOLUTION: u32 = 192;
pub const RESOLUTION_STEP: u32 = 4;

pub const KERNEL_SIZES: [u32; 3] = [3, 5, 7];
pub const EXPANSION_RATIOS: [u32; 3] = [3, 4, 6];

/// What a gene position encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GeneRole {
    Resolution,
    Depth { block: usize },
    Kernel { block: usize, slot: usize },
    Expansion { block: usize, slot: usize },
}

impl GeneRole {
    pub fn of(position: usize) -> GeneRole {
        assert!(position < GENOME_LEN, "gene position {position} out of bounds");
        if position == 0 {
            return GeneRole::Resolution;
        }
        let block = (position - 1) / GENES_PER_BLOCK;
        let offset = (position - 1) % GENES_PER_BLOCK;
        if offset == 0 {
            GeneRole::Depth { block }
        } else {
            let slot = (offset - 1) / 2;
            if (offset - 1) % 2 == 0 {
                GeneRole::Kernel { block, slot }
            } else {
                GeneRole::Expansion { block, slot }
            }
        }
    }

    /// Inclusive code range of the position, counting padding zeros as legal.
    pub fn code_range(self) -> (u8, u8) {
        match self {
            GeneRole::Resolution => (0, MAX_RESOLUTION_CODE),
            GeneRole::Depth { .. } => (MIN_DEPTH, MAX_DEPTH as u8),
            GeneRole::Kernel { .. } | GeneRole::Expansion { .. } => (0, 3),
        }
    }

    pub fn is_layer_slot(self) -> bool {
        matches!(self, GeneRole::Kernel { .. } | GeneRole::Expansion { .. })
    }
}

pub fn depth_position(block: usize) -> usize {
    1 + block * GENES_PER_BLOCK
}

pub fn kernel_position(block: usize, slot: usize) -> usize {
    depth_position(block) + 1 + 2 * slot
}

pub fn expansion_position(block: usize, slot: usize) -> usize {
    kernel_position(block, slot) + 1
}

/// A canonical architecture encoding.
///
/// Construct through [`Genome::canonicalize`], [`Genome::from_genes`] or text
/// decoding; all of them guarantee the padding invariant.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Genome([u8; GENOME_LEN]);

impl Genome {
    /// Repairs a raw gene string into canonical form.
    ///
    /// Slots past the block depth are zeroed, active slots holding a zero get
    /// code 1. Genes outside their code range are rejected.
    pub fn canonicalize(raw: &[u8]) -> Result<Genome, SpaceError> {
        if raw.len() != GENOME_LEN {
            return Err(SpaceError::Length(raw.len()));
        }
        check_ranges(raw)?;
        let mut genes = [0u8; GENOME_LEN];
        genes.copy_from_slice(raw);
        for block in 0..NUM_BLOCKS {
            let depth = genes[depth_position(block)] as usize;
            for slot in 0..MAX_DEPTH {
                for pos in [kernel_position(block, slot), expansion_position(block, slot)] {
                    if slot >= depth {
                        genes[pos] = 0;
                    } else if genes[pos] == 0 {
                        genes[pos] = 1;
                    }
                }
            }
        }
        Ok(Genome(genes))
    }

    /// Accepts only strings that already satisfy every invariant.
    pub fn from_genes(raw: &[u8]) -> Result<Genome, SpaceError> {
        let canonical = Genome::canonicalize(raw)?;
        if let Some(position) = raw.iter().zip(canonical.0.iter()).position(|(a, b)| a != b) {
            return Err(SpaceError::NonCanonical(position));
        }
        Ok(canonical)
    }

    /// The largest architecture of the full space: deepest blocks, k=7, e=6,
    /// highest resolution.
    pub fn maximal() -> Genome {
        let mut genes = [3u8; GENOME_LEN];
        genes[0] = MAX_RESOLUTION_CODE;
        for block in 0..NUM_BLOCKS {
            genes[depth_position(block)] = MAX_DEPTH as u8;
        }
        Genome(genes)
    }

    /// The smallest architecture of the full space.
    pub fn minimal() -> Genome {
        let mut genes = [0u8; GENOME_LEN];
        for block in 0..NUM_BLOCKS {
            genes[depth_position(block)] = MIN_DEPTH;
        }
        Genome::canonicalize(&genes).expect("minimal genome is in range")
    }

    pub fn genes(&self) -> &[u8; GENOME_LEN] {
        &self.0
    }

    pub fn resolution_code(&self) -> u8 {
        self.0[0]
    }

    pub fn resolution(&self) -> u32 {
        BASE_RESOLUTION + RESOLUTION_STEP * self.0[0] as u32
    }

    pub fn depth(&self, block: usize) -> usize {
        self.0[depth_position(block)] as usize
    }

    pub fn kernel_code(&self, block: usize, slot: usize) -> u8 {
        self.0[kernel_position(block, slot)]
    }

    pub fn expansion_code(&self, block: usize, slot: usize) -> u8 {
        self.0[expansion_position(block, slot)]
    }

    /// Kernel size of an active layer.
    pub fn kernel_size(&self, block: usize, slot: usize) -> u32 {
        KERNEL_SIZES[self.kernel_code(block, slot) as usize - 1]
    }

    /// Expansion ratio of an active layer.
    pub fn expansion_ratio(&self, block: usize, slot: usize) -> u32 {
        EXPANSION_RATIOS[self.expansion_code(block, slot) as usize - 1]
    }

    /// Total number of active searchable layers.
    pub fn active_layers(&self) -> usize {
        (0..NUM_BLOCKS).map(|b| self.depth(b)).sum()
    }

    pub fn hamming(&self, other: &Genome) -> usize {
        self.0.iter().zip(other.0.iter()).filter(|(a, b)| a != b).count()
    }

    /// Canonical text form: the 46 integers joined by `-`.
    pub fn encode_text(&self) -> String {
        self.to_string()
    }

    pub fn decode_text(text: &str) -> Result<Genome, SpaceError> {
        let mut genes = Vec::with_capacity(GENOME_LEN);
        for (index, token) in text.trim().split('-').enumerate() {
            if index >= GENOME_LEN {
                return Err(SpaceError::Parse {
                    index,
                    reason: format!("expected {GENOME_LEN} fields"),
                });
            }
            let value: u8 = token.parse().map_err(|_| SpaceError::Parse {
                index,
                reason: format!("not a gene value: {token:?}"),
            })?;
            genes.push(value);
        }
        if genes.len() != GENOME_LEN {
            return Err(SpaceError::Parse {
                index: genes.len(),
                reason: format!("expected {GENOME_LEN} fields, found {}", genes.len()),
            });
        }
        Genome::from_genes(&genes)
    }
}

fn check_ranges(raw: &[u8]) -> Result<(), SpaceError> {
    for (position, &value) in raw.iter().enumerate() {
        let (lo, hi) = GeneRole::of(position).code_range();
        if value < lo || value > hi {
            return Err(SpaceError::OutOfRangeGene { position, value });
        }
    }
    Ok(())
}

impl fmt::Display for Genome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, g) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("-")?;
            }
            write!(f, "{g}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Genome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Genome({self})")
    }
}

impl FromStr for Genome {
    type Err = SpaceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Genome::decode_text(s)
    }
}

impl Serialize for Genome {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.encode_text())
    }
}

impl<'de> Deserialize<'de> for Genome {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        Genome::decode_text(&text).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_covers_46_positions() {
        assert_eq!(GENOME_LEN, 46);
        assert_eq!(GeneRole::of(0), GeneRole::Resolution);
        assert_eq!(GeneRole::of(1), GeneRole::Depth { block: 0 });
        assert_eq!(GeneRole::of(2), GeneRole::Kernel { block: 0, slot: 0 });
        assert_eq!(GeneRole::of(3), GeneRole::Expansion { block: 0, slot: 0 });
        assert_eq!(GeneRole::of(9), GeneRole::Expansion { block: 0, slot: 3 });
        assert_eq!(GeneRole::of(10), GeneRole::Depth { block: 1 });
        assert_eq!(GeneRole::of(45), GeneRole::Expansion { block: 4, slot: 3 });
        assert_eq!(expansion_position(4, 3), 45);
    }

    #[test]
    fn canonical_genome_is_unchanged() {
        let g = Genome::maximal();
        assert_eq!(Genome::canonicalize(g.genes()).unwrap(), g);
        let m = Genome::minimal();
        assert_eq!(Genome::canonicalize(m.genes()).unwrap(), m);
    }

    #[test]
    fn slots_past_depth_are_zeroed() {
        let mut raw = *Genome::maximal().genes();
        raw[depth_position(2)] = 2;
        let g = Genome::canonicalize(&raw).unwrap();
        assert_eq!(g.depth(2), 2);
        assert_eq!(g.kernel_code(2, 2), 0);
        assert_eq!(g.expansion_code(2, 3), 0);
        assert_eq!(g.kernel_code(2, 1), 3);
    }

    #[test]
    fn zero_in_active_slot_becomes_one() {
        let mut raw = *Genome::minimal().genes();
        raw[kernel_position(0, 1)] = 0;
        let g = Genome::canonicalize(&raw).unwrap();
        assert_eq!(g.kernel_code(0, 1), 1);
    }

    #[test]
    fn out_of_range_genes_are_rejected() {
        let mut raw = *Genome::minimal().genes();
        raw[depth_position(1)] = 5;
        assert_eq!(
            Genome::canonicalize(&raw),
            Err(SpaceError::OutOfRangeGene { position: 10, value: 5 })
        );
        let mut raw = *Genome::minimal().genes();
        raw[0] = 17;
        assert!(matches!(
            Genome::canonicalize(&raw),
            Err(SpaceError::OutOfRangeGene { position: 0, .. })
        ));
        let mut raw = *Genome::minimal().genes();
        raw[depth_position(0)] = 1;
        assert!(Genome::canonicalize(&raw).is_err());
    }

    #[test]
    fn text_form_rejects_malformed_input() {
        let g = Genome::maximal();
        let text = g.encode_text();
        assert_eq!(text.split('-').count(), 46);
        assert_eq!(Genome::decode_text(&text).unwrap(), g);

        let short: Vec<&str> = text.split('-').take(45).collect();
        assert!(matches!(
            Genome::decode_text(&short.join("-")),
            Err(SpaceError::Parse { index: 45, .. })
        ));
        let mut tokens: Vec<&str> = text.split('-').collect();
        tokens[1] = "x";
        assert!(matches!(Genome::decode_text(&tokens.join("-")), Err(SpaceError::Parse { index: 1, .. })));
        let long = format!("{text}-0");
        assert!(matches!(Genome::decode_text(&long), Err(SpaceError::Parse { index: 46, .. })));
    }

    #[test]
    fn decode_rejects_non_canonical_padding() {
        let mut raw = *Genome::minimal().genes();
        raw[kernel_position(0, 3)] = 2;
        let text: Vec<String> = raw.iter().map(|g| g.to_string()).collect();
        assert_eq!(
            Genome::decode_text(&text.join("-")),
            Err(SpaceError::NonCanonical(kernel_position(0, 3)))
        );
    }
}
