//! Fully connected regressor with ReLU hidden layers and a logistic output,
//! trained full batch with Adam on squared error. Single precision.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::stream;
use crate::space::GENOME_LEN;

use super::{FittedPredictor, ModelKind, ModelParams, SurrogateError, TrainingSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpConfig {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub learning_rate: f32,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig { hidden: vec![64, 64], epochs: 300, learning_rate: 0.01 }
    }
}

impl MlpConfig {
    pub fn validate(&self) -> Result<(), SurrogateError> {
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(SurrogateError::InvalidConfig("MLP needs non-empty hidden layers".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(SurrogateError::InvalidConfig("MLP learning rate must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major `inputs x outputs`.
    pub weights: Vec<f32>,
    pub bias: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub layers: Vec<Layer>,
}

struct Dense {
    w: DMatrix<f32>,
    b: DVector<f32>,
}

impl Dense {
    fn forward(&self, x: &DMatrix<f32>) -> DMatrix<f32> {
        let mut z = x * &self.w;
        for (j, mut col) in z.column_iter_mut().enumerate() {
            col.add_scalar_mut(self.b[j]);
        }
        z
    }

    fn to_layer(&self) -> Layer {
        let (inputs, outputs) = self.w.shape();
        let weights = (0..inputs).flat_map(|i| (0..outputs).map(move |j| (i, j))).map(|(i, j)| self.w[(i, j)]).collect();
        Layer { inputs, outputs, weights, bias: self.b.iter().copied().collect() }
    }

    fn from_layer(l: &Layer) -> Dense {
        Dense { w: DMatrix::from_row_slice(l.inputs, l.outputs, &l.weights), b: DVector::from_column_slice(&l.bias) }
    }
}

fn sigmoid(v: f32) -> f32 {
    1.0 / (1.0 + (-v).exp())
}

fn relu_in_place(m: &mut DMatrix<f32>) {
    m.apply(|v| *v = v.max(0.0));
}

fn design_matrix(x: &[[f64; GENOME_LEN]]) -> DMatrix<f32> {
    DMatrix::from_fn(x.len(), GENOME_LEN, |i, j| x[i][j] as f32)
}

struct Adam {
    m: Vec<f32>,
    v: Vec<f32>,
    t: i32,
}

impl Adam {
    const BETA1: f32 = 0.9;
    const BETA2: f32 = 0.999;
    const EPS: f32 = 1e-8;

    fn new(len: usize) -> Adam {
        Adam { m: vec![0.0; len], v: vec![0.0; len], t: 0 }
    }

    /// Updates `params` in place; `offset` locates them in the moment buffers.
    fn step(&mut self, params: &mut [f32], grads: &[f32], offset: usize, lr: f32) {
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            let m = &mut self.m[offset + k];
            let v = &mut self.v[offset + k];
            *m = Self::BETA1 * *m + (1.0 - Self::BETA1) * g;
            *v = Self::BETA2 * *v + (1.0 - Self::BETA2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + Self::EPS);
        }
    }
}

pub fn fit_mlp(ts: &TrainingSet, cfg: &MlpConfig, seed: u64) -> Result<FittedPredictor, SurrogateError> {
    cfg.validate()?;
    if let Some(v) = ts.constant_target() {
        return Ok(FittedPredictor::constant(ModelKind::Mlp, ts, v));
    }
    let x = design_matrix(ts.features());
    let y = DVector::from_iterator(ts.len(), ts.targets().iter().map(|&t| t as f32));
    let n = ts.len() as f32;

    let mut rng = stream(seed, "mlp-init", 0);
    let mut widths = vec![GENOME_LEN];
    widths.extend(&cfg.hidden);
    widths.push(1);
    let mut net: Vec<Dense> = widths
        .windows(2)
        .map(|w| {
            let limit = (6.0 / (w[0] + w[1]) as f32).sqrt();
            Dense {
                w: DMatrix::from_fn(w[0], w[1], |_, _| rng.random_range(-limit..limit)),
                b: DVector::zeros(w[1]),
            }
        })
        .collect();
    let total: usize = net.iter().map(|d| d.w.len() + d.b.len()).sum();
    let mut adam = Adam::new(total);

    let depth = net.len();
    for _ in 0..cfg.epochs {
        // forward, keeping pre-activations of hidden layers and their outputs
        let mut acts: Vec<DMatrix<f32>> = Vec::with_capacity(depth);
        let mut pre: Vec<DMatrix<f32>> = Vec::with_capacity(depth - 1);
        let mut h = x.clone();
        for (l, layer) in net.iter().enumerate() {
            let z = layer.forward(&h);
            acts.push(h);
            if l + 1 < depth {
                let mut a = z.clone();
                relu_in_place(&mut a);
                pre.push(z);
                h = a;
            } else {
                h = z;
            }
        }
        let p = h.map(sigmoid);
        let mut delta = DMatrix::from_fn(ts.len(), 1, |i, _| 2.0 * (p[i] - y[i]) * p[i] * (1.0 - p[i]) / n);

        adam.t += 1;
        let mut offset = total;
        for l in (0..depth).rev() {
            let gw = acts[l].tr_mul(&delta);
            let gb: Vec<f32> = delta.column_iter().map(|c| c.sum()).collect();
            let next_delta = if l > 0 {
                let mut d = &delta * net[l].w.transpose();
                d.zip_apply(&pre[l - 1], |g, z| {
                    if z <= 0.0 {
                        *g = 0.0
                    }
                });
                Some(d)
            } else {
                None
            };
            let layer = &mut net[l];
            offset -= layer.w.len() + layer.b.len();
            adam.step(layer.w.as_mut_slice(), gw.as_slice(), offset, cfg.learning_rate);
            adam.step(layer.b.as_mut_slice(), &gb, offset + layer.w.len(), cfg.learning_rate);
            if let Some(d) = next_delta {
                delta = d;
            }
        }
    }

    let params = MlpParams { layers: net.iter().map(Dense::to_layer).collect() };
    Ok(FittedPredictor::new(ModelKind::Mlp, ts, ModelParams::Mlp(params)))
}

impl MlpParams {
    pub fn predict(&self, x: &[[f64; GENOME_LEN]]) -> Vec<f64> {
        if x.is_empty() {
            return Vec::new();
        }
        let net: Vec<Dense> = self.layers.iter().map(Dense::from_layer).collect();
        let mut h = design_matrix(x);
        for (l, layer) in net.iter().enumerate() {
            h = layer.forward(&h);
            if l + 1 < net.len() {
                relu_in_place(&mut h);
            }
        }
        h.column(0).iter().map(|&v| sigmoid(v) as f64).collect()
    }
}
