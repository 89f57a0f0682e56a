//! Closed-form complexity of a genome on a fixed backbone.
//!
//! Every searchable layer is an inverted bottleneck: a 1x1 expansion at the
//! input feature-map size, a k x k depthwise convolution and a 1x1
//! projection at the output size. Only the first layer of a block may
//! downsample. Latencies are proxies, affine in MAdds plus a per-layer cost.

use serde::{Deserialize, Serialize};

use super::genome::{Genome, NUM_BLOCKS};
use super::SpaceError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BackboneSpec {
    pub stem_channels: u64,
    pub block_channels: [u64; NUM_BLOCKS],
    /// Whether the first layer of each block uses stride 2.
    pub block_strides: [bool; NUM_BLOCKS],
    pub head_channels: u64,
    pub num_classes: u64,
}

impl BackboneSpec {
    pub const INPUT_CHANNELS: u64 = 3;
    pub const STEM_KERNEL: u64 = 3;
    pub const STEM_STRIDE: u64 = 2;

    pub fn validate(&self) -> Result<(), SpaceError> {
        let positive = self.stem_channels > 0
            && self.block_channels.iter().all(|&c| c > 0)
            && self.head_channels > 0
            && self.num_classes > 0;
        if positive {
            Ok(())
        } else {
            Err(SpaceError::InvalidRestriction("backbone channel counts must be positive".into()))
        }
    }
}

impl Default for BackboneSpec {
    fn default() -> Self {
        BackboneSpec {
            stem_channels: 16,
            block_channels: [24, 40, 80, 112, 160],
            block_strides: [true, true, true, false, true],
            head_channels: 1280,
            num_classes: 1000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencyCoefficients {
    pub ms_per_madd: f64,
    pub ms_per_layer: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LatencyTable {
    pub cpu: LatencyCoefficients,
    pub gpu: LatencyCoefficients,
}

impl Default for LatencyTable {
    fn default() -> Self {
        LatencyTable {
            cpu: LatencyCoefficients { ms_per_madd: 3.0e-8, ms_per_layer: 0.12 },
            gpu: LatencyCoefficients { ms_per_madd: 1.1e-7, ms_per_layer: 0.9 },
        }
    }
}

/// Backbone plus latency table, the unit loaded from a config file.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ComplexityConfig {
    pub backbone: BackboneSpec,
    pub latency: LatencyTable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexityVector {
    pub madds: u64,
    pub params: u64,
    pub latency_cpu: f64,
    pub latency_gpu: f64,
}

fn ceil_div(a: u64, b: u64) -> u64 {
    a.div_ceil(b)
}

impl ComplexityConfig {
    pub fn from_toml(text: &str) -> Result<ComplexityConfig, toml::de::Error> {
        toml::from_str(text)
    }

    /// Complexity of a raw gene string; rejects strings whose padding is
    /// not canonical.
    pub fn complexity_of_genes(&self, raw: &[u8]) -> Result<ComplexityVector, SpaceError> {
        Ok(self.complexity(&Genome::from_genes(raw)?))
    }

    /// Multiply-adds, parameters and the two latency proxies of a genome.
    pub fn complexity(&self, genome: &Genome) -> ComplexityVector {
        let bb = &self.backbone;
        let res = genome.resolution() as u64;

        let mut h = ceil_div(res, BackboneSpec::STEM_STRIDE);
        let stem_params = BackboneSpec::INPUT_CHANNELS * bb.stem_channels * BackboneSpec::STEM_KERNEL.pow(2);
        let mut madds = h * h * stem_params;
        let mut params = stem_params;

        let mut c_in = bb.stem_channels;
        for b in 0..NUM_BLOCKS {
            let c_out = bb.block_channels[b];
            for slot in 0..genome.depth(b) {
                let stride = if slot == 0 && bb.block_strides[b] { 2 } else { 1 };
                let h_out = ceil_div(h, stride);
                let mid = c_in * genome.expansion_ratio(b, slot) as u64;
                let k2 = (genome.kernel_size(b, slot) as u64).pow(2);
                let expand = c_in * mid;
                let depthwise = mid * k2;
                let project = mid * c_out;
                madds += h * h * expand + h_out * h_out * (depthwise + project);
                params += expand + depthwise + project;
                h = h_out;
                c_in = c_out;
            }
        }

        let head = c_in * bb.head_channels;
        madds += h * h * head;
        params += head;
        let classifier = bb.head_channels * bb.num_classes;
        madds += classifier;
        params += classifier + bb.num_classes;

        let layers = genome.active_layers() as f64;
        let lat = |c: &LatencyCoefficients| c.ms_per_madd * madds as f64 + c.ms_per_layer * layers;
        ComplexityVector {
            madds,
            params,
            latency_cpu: lat(&self.latency.cpu),
            latency_gpu: lat(&self.latency.gpu),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use crate::space::{depth_position, expansion_position, kernel_position, SearchSpace, MAX_DEPTH};

    fn cfg() -> ComplexityConfig {
        ComplexityConfig::default()
    }

    #[test]
    fn minimal_genome_matches_layer_table_fixture() {
        // Per-layer sums produced by a standalone spreadsheet-style script
        // (stem, 10 bottleneck layers, head, classifier) at 192 px.
        const MADDS: u64 = 86_494_016;
        const PARAMS: u64 = 1_943_528;
        let c = cfg().complexity(&Genome::minimal());
        assert_eq!(c.madds, MADDS);
        assert_eq!(c.params, PARAMS);
        assert!((c.latency_cpu - (3.0e-8 * MADDS as f64 + 0.12 * 10.0)).abs() < 1e-12);
    }

    #[test]
    fn resolution_scaling_law() {
        let classifier = 1280 * 1000;
        let mut raw = *Genome::maximal().genes();
        raw[0] = 16;
        let big = Genome::from_genes(&raw).unwrap();
        raw[0] = 0;
        let small = Genome::from_genes(&raw).unwrap();
        let mb = cfg().complexity(&big).madds - classifier;
        let ms = cfg().complexity(&small).madds - classifier;
        // (256/192)^2 = 16/9, exact since both sizes are multiples of 32.
        assert_eq!(mb * 9, ms * 16);
        assert_eq!(cfg().complexity(&big).params, cfg().complexity(&small).params);
    }

    #[test]
    fn complexity_is_strictly_monotone_in_every_gene() {
        let space = SearchSpace::full();
        let c = cfg();
        let mut rng = stream(11, "mono", 0);
        for _ in 0..200 {
            let g = space.sample_uniform(&mut rng);
            let base = c.complexity(&g);
            let bump = |pos: usize| {
                let mut raw = *g.genes();
                raw[pos] += 1;
                let h = Genome::canonicalize(&raw).unwrap();
                let next = c.complexity(&h);
                (next, h)
            };
            if g.resolution_code() < 16 {
                let (n, _) = bump(0);
                assert!(n.madds > base.madds);
                assert!(n.latency_cpu > base.latency_cpu);
            }
            for b in 0..NUM_BLOCKS {
                if g.depth(b) < MAX_DEPTH {
                    let (n, _) = bump(depth_position(b));
                    assert!(n.madds > base.madds && n.params > base.params);
                    assert!(n.latency_gpu > base.latency_gpu);
                }
                for slot in 0..g.depth(b) {
                    for pos in [kernel_position(b, slot), expansion_position(b, slot)] {
                        if g.genes()[pos] < 3 {
                            let (n, _) = bump(pos);
                            assert!(n.madds > base.madds, "pos {pos}");
                            assert!(n.params > base.params, "pos {pos}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn default_backbone_lands_in_hundreds_of_millions() {
        let c = cfg();
        let max = c.complexity(&Genome::maximal());
        assert!(max.madds > 100_000_000 && max.madds < 3_000_000_000, "{}", max.madds);
    }

    #[test]
    fn raw_strings_with_bad_padding_are_rejected() {
        let mut raw = *Genome::minimal().genes();
        raw[kernel_position(1, 2)] = 1;
        assert_eq!(cfg().complexity_of_genes(&raw), Err(SpaceError::NonCanonical(kernel_position(1, 2))));
        assert!(cfg().complexity_of_genes(Genome::minimal().genes()).is_ok());
    }

    #[test]
    fn loads_from_toml() {
        let text = r#"
            [backbone]
            stem_channels = 32
            [latency.cpu]
            ms_per_madd = 1e-8
            ms_per_layer = 0.5
        "#;
        let c = ComplexityConfig::from_toml(text).unwrap();
        assert_eq!(c.backbone.stem_channels, 32);
        assert_eq!(c.backbone.head_channels, 1280);
        assert_eq!(c.latency.cpu.ms_per_layer, 0.5);
        assert_eq!(c.latency.gpu, LatencyTable::default().gpu);
    }
}
