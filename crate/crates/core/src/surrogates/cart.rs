//! Regression tree grown by greedy variance reduction.

use serde::{Deserialize, Serialize};

use crate::space::GENOME_LEN;

use super::{FittedPredictor, ModelKind, ModelParams, TrainingSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CartConfig {
    pub max_depth: usize,
    /// Nodes with fewer samples than this are not split.
    pub min_split: usize,
}

impl Default for CartConfig {
    fn default() -> Self {
        CartConfig { max_depth: 12, min_split: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf { value: f64 },
    Split { gene: usize, threshold: f64, left: usize, right: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CartTree {
    /// Root at index 0.
    pub nodes: Vec<Node>,
}

impl CartTree {
    pub fn predict(&self, x: &[f64; GENOME_LEN]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { value } => return value,
                Node::Split { gene, threshold, left, right } => at = if x[gene] <= threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

const MIN_GAIN: f64 = 1e-12;

struct Builder<'a> {
    x: &'a [[f64; GENOME_LEN]],
    y: &'a [f64],
    cfg: &'a CartConfig,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn sse(&self, idx: &[usize]) -> (f64, f64) {
        let n = idx.len() as f64;
        let mean = idx.iter().map(|&i| self.y[i]).sum::<f64>() / n;
        (mean, idx.iter().map(|&i| (self.y[i] - mean).powi(2)).sum())
    }

    /// Best (gene, threshold, gain); scanning genes and thresholds in
    /// ascending order and requiring strict improvement keeps the lowest.
    fn best_split(&self, idx: &[usize], parent_sse: f64) -> Option<(usize, f64, f64)> {
        let mut best: Option<(usize, f64, f64)> = None;
        let mut order = idx.to_vec();
        let total: f64 = idx.iter().map(|&i| self.y[i]).sum();
        let total_sq: f64 = idx.iter().map(|&i| self.y[i] * self.y[i]).sum();
        let n = idx.len() as f64;
        for gene in 0..GENOME_LEN {
            order.sort_by(|&a, &b| self.x[a][gene].total_cmp(&self.x[b][gene]));
            let (mut s, mut sq) = (0.0, 0.0);
            for k in 0..order.len() - 1 {
                let yi = self.y[order[k]];
                s += yi;
                sq += yi * yi;
                let here = self.x[order[k]][gene];
                let next = self.x[order[k + 1]][gene];
                if here == next {
                    continue;
                }
                let nl = (k + 1) as f64;
                let nr = n - nl;
                let sse_l = sq - s * s / nl;
                let sse_r = (total_sq - sq) - (total - s).powi(2) / nr;
                let gain = parent_sse - sse_l - sse_r;
                if gain > MIN_GAIN && best.is_none_or(|(_, _, g)| gain > g + MIN_GAIN) {
                    best = Some((gene, 0.5 * (here + next), gain));
                }
            }
        }
        best
    }

    fn grow(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let (mean, sse) = self.sse(&idx);
        let at = self.nodes.len();
        self.nodes.push(Node::Leaf { value: mean });
        if depth >= self.cfg.max_depth || idx.len() < self.cfg.min_split {
            return at;
        }
        let Some((gene, threshold, _)) = self.best_split(&idx, sse) else { return at };
        let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.x[i][gene] <= threshold);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[at] = Node::Split { gene, threshold, left, right };
        at
    }
}

pub fn fit_cart(ts: &TrainingSet, cfg: &CartConfig) -> FittedPredictor {
    if let Some(v) = ts.constant_target() {
        return FittedPredictor::constant(ModelKind::Cart, ts, v);
    }
    let mut b = Builder { x: ts.features(), y: ts.targets(), cfg, nodes: Vec::new() };
    b.grow((0..ts.len()).collect(), 0);
    FittedPredictor::new(ModelKind::Cart, ts, ModelParams::Cart(CartTree { nodes: b.nodes }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{kendall_tau, rmse};
    use crate::space::Genome;
    use crate::surrogates::testutil::{landscape_sample, split_set};

    fn std_dev(v: &[f64]) -> f64 {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt()
    }

    #[test]
    fn training_error_below_target_spread() {
        let (ts, _, _) = split_set(200, 0, 2);
        let p = fit_cart(&ts, &CartConfig::default());
        let e = rmse(&p.predict(ts.genomes()), ts.targets()).unwrap();
        assert!(e <= std_dev(ts.targets()), "{e}");
    }

    #[test]
    fn single_gene_split_recovers_means() {
        let (g, _) = landscape_sample(40, crate::evaluation::Variant::Smooth, 5);
        // target depends only on whether resolution code exceeds 8
        let y: Vec<f64> = g.iter().map(|x| if x.resolution_code() > 8 { 0.8 } else { 0.3 }).collect();
        let ts = TrainingSet::new(g.clone(), y.clone()).unwrap();
        let p = fit_cart(&ts, &CartConfig::default());
        let ModelParams::Cart(tree) = &p.params else { panic!() };
        assert_eq!(tree.depth(), 1);
        assert!(matches!(tree.nodes[0], Node::Split { gene: 0, .. }));
        for (a, b) in p.predict(&g).iter().zip(&y) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn ties_prefer_lowest_gene() {
        // genes 0 and 1 (resolution and first depth) split the data identically
        let mut genomes = Vec::new();
        let mut y = Vec::new();
        for i in 0..24u8 {
            let mut genes = *Genome::minimal().genes();
            let high = i % 2 == 0;
            genes[0] = if high { 16 } else { 0 };
            genes[1] = if high { 3 } else { 2 };
            genes[2] = 1;
            genes[3] = 1;
            if high {
                genes[6] = 1;
                genes[7] = 1;
            }
            // distinct genomes through the last block's first layers
            genes[38] = 1 + i % 3;
            genes[39] = 1 + (i / 3) % 3;
            genes[40] = 1 + (i / 9) % 3;
            genomes.push(Genome::canonicalize(&genes).unwrap());
            y.push(if high { 0.9 } else { 0.1 });
        }
        let ts = TrainingSet::new(genomes, y).unwrap();
        let p = fit_cart(&ts, &CartConfig::default());
        let ModelParams::Cart(tree) = &p.params else { panic!() };
        assert!(matches!(tree.nodes[0], Node::Split { gene: 0, .. }), "{:?}", tree.nodes[0]);
    }

    #[test]
    fn depth_cap_respected_and_deterministic() {
        let (ts, test_g, test_y) = split_set(300, 100, 8);
        let cfg = CartConfig { max_depth: 3, ..CartConfig::default() };
        let p = fit_cart(&ts, &cfg);
        let ModelParams::Cart(tree) = &p.params else { panic!() };
        assert!(tree.depth() <= 3);
        let full = fit_cart(&ts, &CartConfig::default());
        assert_eq!(full, fit_cart(&ts, &CartConfig::default()));
        assert!(kendall_tau(&full.predict(&test_g), &test_y).unwrap() > 0.4);
    }
}
