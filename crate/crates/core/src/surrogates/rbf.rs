//! Multiquadric radial basis interpolation.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::space::GENOME_LEN;

use super::{FittedPredictor, ModelKind, ModelParams, SurrogateError, TrainingSet};

const JITTER: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbfParams {
    pub centers: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub shape: f64,
    pub offset: f64,
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

impl RbfParams {
    pub fn predict(&self, x: &[f64; GENOME_LEN]) -> f64 {
        let c2 = self.shape * self.shape;
        self.offset
            + self.centers.iter().zip(&self.weights).map(|(c, w)| w * (sq_dist(c, x) + c2).sqrt()).sum::<f64>()
    }
}

pub fn fit_rbf(ts: &TrainingSet) -> Result<FittedPredictor, SurrogateError> {
    if let Some(v) = ts.constant_target() {
        return Ok(FittedPredictor::constant(ModelKind::Rbf, ts, v));
    }
    let x = ts.features();
    let n = x.len();
    let mut d2 = DMatrix::zeros(n, n);
    let mut pairwise = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let d = sq_dist(&x[i], &x[j]);
            d2[(i, j)] = d;
            d2[(j, i)] = d;
            pairwise.push(d.sqrt());
        }
    }
    let shape = match median(pairwise) {
        c if c > 0.0 => c,
        _ => 1.0,
    };
    let c2 = shape * shape;
    let mut phi = d2.map(|d| (d + c2).sqrt());
    for i in 0..n {
        phi[(i, i)] += JITTER;
    }
    let offset = ts.targets().iter().sum::<f64>() / n as f64;
    let rhs = DVector::from_iterator(n, ts.targets().iter().map(|t| t - offset));
    let weights = phi.lu().solve(&rhs).ok_or(SurrogateError::SingularSystem(ModelKind::Rbf))?;
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(SurrogateError::SingularSystem(ModelKind::Rbf));
    }
    let params = RbfParams {
        centers: x.iter().map(|f| f.to_vec()).collect(),
        weights: weights.iter().copied().collect(),
        shape,
        offset,
    };
    Ok(FittedPredictor::new(ModelKind::Rbf, ts, ModelParams::Rbf(params)))
}
