//! Gaussian process regression with a squared-exponential kernel; length
//! scale and noise picked from a small grid by marginal likelihood.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::space::GENOME_LEN;

use super::rbf::sq_dist;
use super::{FittedPredictor, ModelKind, ModelParams, SurrogateError, TrainingSet};

/// Length scales are these multiples of the square root of the input
/// dimension.
pub const GP_LENGTH_FACTORS: [f64; 4] = [0.5, 1.0, 2.0, 4.0];
pub const GP_NOISE_GRID: [f64; 2] = [1e-4, 1e-2];
const JITTERS: [f64; 6] = [0.0, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GpParams {
    pub length_scale: f64,
    pub noise: f64,
    pub log_marginal_likelihood: f64,
    pub inputs: Vec<Vec<f64>>,
    /// K^-1 y on standardized targets.
    pub alpha: Vec<f64>,
    pub target_mean: f64,
    pub target_scale: f64,
}

impl GpParams {
    pub fn predict(&self, x: &[f64; GENOME_LEN]) -> f64 {
        let inv = -0.5 / (self.length_scale * self.length_scale);
        let z: f64 = self.inputs.iter().zip(&self.alpha).map(|(xi, a)| a * (inv * sq_dist(xi, x)).exp()).sum();
        self.target_mean + self.target_scale * z
    }
}

fn factor(d2: &DMatrix<f64>, length_scale: f64, noise: f64) -> Option<Cholesky<f64, Dyn>> {
    let inv = -0.5 / (length_scale * length_scale);
    let base = d2.map(|d| (inv * d).exp());
    for jitter in JITTERS {
        let mut k = base.clone();
        for i in 0..k.nrows() {
            k[(i, i)] += noise + jitter;
        }
        if let Some(c) = k.cholesky() {
            return Some(c);
        }
    }
    None
}

/// Fits with fixed hyperparameters.
pub fn fit_gp_with(ts: &TrainingSet, length_scale: f64, noise: f64) -> Result<FittedPredictor, SurrogateError> {
    if let Some(v) = ts.constant_target() {
        return Ok(FittedPredictor::constant(ModelKind::Gp, ts, v));
    }
    let (d2, y, mean, scale) = prepare(ts);
    let params = solve(ts, &d2, &y, mean, scale, length_scale, noise).ok_or(SurrogateError::SingularSystem(ModelKind::Gp))?;
    Ok(FittedPredictor::new(ModelKind::Gp, ts, ModelParams::Gp(params)))
}

fn prepare(ts: &TrainingSet) -> (DMatrix<f64>, DVector<f64>, f64, f64) {
    let x = ts.features();
    let n = x.len();
    let mut d2 = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let d = sq_dist(&x[i], &x[j]);
            d2[(i, j)] = d;
            d2[(j, i)] = d;
        }
    }
    let t = ts.targets();
    let mean = t.iter().sum::<f64>() / n as f64;
    let var = t.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    let scale = if var > 0.0 { var.sqrt() } else { 1.0 };
    let y = DVector::from_iterator(n, t.iter().map(|v| (v - mean) / scale));
    (d2, y, mean, scale)
}

fn solve(
    ts: &TrainingSet,
    d2: &DMatrix<f64>,
    y: &DVector<f64>,
    mean: f64,
    scale: f64,
    length_scale: f64,
    noise: f64,
) -> Option<GpParams> {
    let chol = factor(d2, length_scale, noise)?;
    let alpha = chol.solve(y);
    let n = y.len() as f64;
    let log_det: f64 = chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum();
    let lml = -0.5 * y.dot(&alpha) - log_det - 0.5 * n * (2.0 * std::f64::consts::PI).ln();
    if !lml.is_finite() {
        return None;
    }
    Some(GpParams {
        length_scale,
        noise,
        log_marginal_likelihood: lml,
        inputs: ts.features().iter().map(|f| f.to_vec()).collect(),
        alpha: alpha.iter().copied().collect(),
        target_mean: mean,
        target_scale: scale,
    })
}

/// Grid search over [`GP_LENGTH_FACTORS`] x [`GP_NOISE_GRID`]; the first
/// grid point wins ties.
pub fn fit_gp(ts: &TrainingSet) -> Result<FittedPredictor, SurrogateError> {
    if let Some(v) = ts.constant_target() {
        return Ok(FittedPredictor::constant(ModelKind::Gp, ts, v));
    }
    let (d2, y, mean, scale) = prepare(ts);
    let root_d = (GENOME_LEN as f64).sqrt();
    let mut best: Option<GpParams> = None;
    for factor in GP_LENGTH_FACTORS {
        for noise in GP_NOISE_GRID {
            let Some(p) = solve(ts, &d2, &y, mean, scale, factor * root_d, noise) else { continue };
            if best.as_ref().is_none_or(|b| p.log_marginal_likelihood > b.log_marginal_likelihood) {
                best = Some(p);
            }
        }
    }
    let best = best.ok_or(SurrogateError::SingularSystem(ModelKind::Gp))?;
    Ok(FittedPredictor::new(ModelKind::Gp, ts, ModelParams::Gp(best)))
}
