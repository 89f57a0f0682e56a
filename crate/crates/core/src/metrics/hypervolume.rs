//! Hypervolume of a point set with respect to a reference point, in a
//! normalized objective space (minimization).
//!
//! Two and three objectives are computed exactly (sweep and slicing); more
//! objectives fall back to a seeded Monte Carlo estimate.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::stream;

use super::MetricError;

pub const MONTE_CARLO_SAMPLES: usize = 1_000_000;

/// Normalization bounds plus the reference point, all in raw objective
/// units. Points are mapped to `(x - lower) / (upper - lower)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HvConfig {
    pub reference: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    #[serde(default)]
    pub mc_seed: u64,
}

impl HvConfig {
    /// Identity normalization.
    pub fn raw(reference: Vec<f64>) -> HvConfig {
        let m = reference.len();
        HvConfig { reference, lower: vec![0.0; m], upper: vec![1.0; m], mc_seed: 0 }
    }

    /// Bounds from the componentwise extremes of `points`; the reference sits
    /// `margin` ranges past the worst value (1 + margin once normalized).
    pub fn from_points(points: &[Vec<f64>], margin: f64) -> Result<HvConfig, MetricError> {
        let first = points.first().ok_or(MetricError::TooShort(0))?;
        let m = first.len();
        let mut lower = vec![f64::INFINITY; m];
        let mut upper = vec![f64::NEG_INFINITY; m];
        for p in points {
            if p.len() != m {
                return Err(MetricError::LengthMismatch(m, p.len()));
            }
            for j in 0..m {
                if !p[j].is_finite() {
                    return Err(MetricError::NonFinite);
                }
                lower[j] = lower[j].min(p[j]);
                upper[j] = upper[j].max(p[j]);
            }
        }
        for j in 0..m {
            if upper[j] <= lower[j] {
                upper[j] = lower[j] + 1.0;
            }
        }
        let reference = (0..m).map(|j| upper[j] + margin * (upper[j] - lower[j])).collect();
        Ok(HvConfig { reference, lower, upper, mc_seed: 0 })
    }

    pub fn arity(&self) -> usize {
        self.reference.len()
    }

    pub fn normalize(&self, p: &[f64]) -> Vec<f64> {
        p.iter()
            .enumerate()
            .map(|(j, v)| (v - self.lower[j]) / (self.upper[j] - self.lower[j]))
            .collect()
    }

    fn normalized_reference(&self) -> Vec<f64> {
        self.normalize(&self.reference)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hypervolume {
    pub value: f64,
    /// Zero for exact computations.
    pub std_error: f64,
}

/// Normalizes, drops points that do not strictly beat the reference in
/// every objective.
fn prepare(points: &[Vec<f64>], cfg: &HvConfig) -> Result<(Vec<Vec<f64>>, Vec<f64>), MetricError> {
    let m = cfg.arity();
    let reference = cfg.normalized_reference();
    let mut kept = Vec::with_capacity(points.len());
    for p in points {
        if p.len() != m {
            return Err(MetricError::LengthMismatch(m, p.len()));
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(MetricError::NonFinite);
        }
        let q = cfg.normalize(p);
        if q.iter().zip(&reference).all(|(a, r)| a < r) {
            kept.push(q);
        }
    }
    Ok((kept, reference))
}

/// Exact for two and three objectives, Monte Carlo otherwise.
pub fn hypervolume(points: &[Vec<f64>], cfg: &HvConfig) -> Result<Hypervolume, MetricError> {
    match cfg.arity() {
        0 | 1 => Err(MetricError::TooShort(cfg.arity())),
        2 | 3 => Ok(Hypervolume { value: hypervolume_exact(points, cfg)?, std_error: 0.0 }),
        _ => hypervolume_monte_carlo(points, cfg, MONTE_CARLO_SAMPLES),
    }
}

pub fn hypervolume_exact(points: &[Vec<f64>], cfg: &HvConfig) -> Result<f64, MetricError> {
    let (pts, reference) = prepare(points, cfg)?;
    match reference.len() {
        2 => Ok(sweep_2d(pts.iter().map(|p| (p[0], p[1])).collect(), reference[0], reference[1])),
        3 => Ok(slice_3d(pts, &reference)),
        m => Err(MetricError::UnsupportedArity(m)),
    }
}

fn sweep_2d(mut pts: Vec<(f64, f64)>, rx: f64, ry: f64) -> f64 {
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut area = 0.0;
    let mut ceiling = ry;
    for (x, y) in pts {
        if y < ceiling {
            area += (rx - x) * (ceiling - y);
            ceiling = y;
        }
    }
    area
}

fn slice_3d(mut pts: Vec<Vec<f64>>, reference: &[f64]) -> f64 {
    pts.sort_by(|a, b| a[2].total_cmp(&b[2]));
    let mut volume = 0.0;
    let mut active: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
    for i in 0..pts.len() {
        active.push((pts[i][0], pts[i][1]));
        let top = if i + 1 < pts.len() { pts[i + 1][2] } else { reference[2] };
        let depth = top - pts[i][2];
        if depth > 0.0 {
            volume += depth * sweep_2d(active.clone(), reference[0], reference[1]);
        }
    }
    volume
}

/// Uniform sampling of the box spanned by the componentwise best point and
/// the reference; reports the binomial standard error.
pub fn hypervolume_monte_carlo(
    points: &[Vec<f64>],
    cfg: &HvConfig,
    samples: usize,
) -> Result<Hypervolume, MetricError> {
    let (pts, reference) = prepare(points, cfg)?;
    if pts.is_empty() {
        return Ok(Hypervolume { value: 0.0, std_error: 0.0 });
    }
    let m = reference.len();
    let ideal: Vec<f64> = (0..m).map(|j| pts.iter().map(|p| p[j]).fold(f64::INFINITY, f64::min)).collect();
    let box_volume: f64 = (0..m).map(|j| reference[j] - ideal[j]).product();
    let mut rng = stream(cfg.mc_seed, "hypervolume-mc", 0);
    let mut sample = vec![0.0; m];
    let mut hits = 0usize;
    for _ in 0..samples {
        for j in 0..m {
            sample[j] = ideal[j] + rng.random::<f64>() * (reference[j] - ideal[j]);
        }
        if pts.iter().any(|p| p.iter().zip(&sample).all(|(a, s)| a <= s)) {
            hits += 1;
        }
    }
    let frac = hits as f64 / samples as f64;
    Ok(Hypervolume {
        value: box_volume * frac,
        std_error: box_volume * (frac * (1.0 - frac) / samples as f64).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn unit_box() {
        let cfg = HvConfig::raw(vec![1.0, 1.0]);
        assert_eq!(hypervolume(&[vec![0.0, 0.0]], &cfg).unwrap().value, 1.0);
    }

    #[test]
    fn two_point_staircase() {
        // 0.5 + 0.5 - 0.25 by inclusion-exclusion
        let cfg = HvConfig::raw(vec![1.0, 1.0]);
        let hv = hypervolume(&[vec![0.0, 0.5], vec![0.5, 0.0]], &cfg).unwrap().value;
        assert!((hv - 0.75).abs() < 1e-12);
    }

    #[test]
    fn empty_and_clipped_inputs_give_zero() {
        let cfg = HvConfig::raw(vec![1.0, 1.0]);
        assert_eq!(hypervolume(&[], &cfg).unwrap().value, 0.0);
        assert_eq!(hypervolume(&[vec![1.5, 0.0], vec![0.2, 1.0]], &cfg).unwrap().value, 0.0);
    }

    #[test]
    fn three_d_boxes() {
        let cfg = HvConfig::raw(vec![1.0, 1.0, 1.0]);
        let hv = hypervolume(&[vec![0.5, 0.5, 0.5]], &cfg).unwrap().value;
        assert!((hv - 0.125).abs() < 1e-15);
        // two boxes sharing a corner region: 0.5 + 0.5 - 0.25
        let hv = hypervolume(&[vec![0.0, 0.5, 0.0], vec![0.5, 0.0, 0.0]], &cfg).unwrap().value;
        assert!((hv - 0.75).abs() < 1e-12);
    }

    #[test]
    fn normalization_maps_bounds_to_unit_square() {
        let pts = vec![vec![10.0, -3.0], vec![20.0, -1.0]];
        let cfg = HvConfig::from_points(&pts, 0.1).unwrap();
        assert_eq!(cfg.normalize(&[10.0, -1.0]), vec![0.0, 1.0]);
        assert!((cfg.normalize(&cfg.reference)[0] - 1.1).abs() < 1e-12);
        // (20, -1) maps to (1, 1) and is dominated by (0, 0): 1.1 * 1.1
        let hv = hypervolume(&pts, &cfg).unwrap().value;
        assert!((hv - 1.21).abs() < 1e-12, "{hv}");
    }

    #[test]
    fn monte_carlo_close_to_exact_on_staircase() {
        let cfg = HvConfig::raw(vec![1.0, 1.0]);
        let pts = [vec![0.0, 0.5], vec![0.5, 0.0]];
        let mc = hypervolume_monte_carlo(&pts, &cfg, 200_000).unwrap();
        assert!((mc.value - 0.75).abs() < 4.0 * mc.std_error);
    }

    #[test]
    fn four_objectives_use_monte_carlo() {
        let cfg = HvConfig::raw(vec![1.0; 4]);
        let hv = hypervolume(&[vec![0.5; 4]], &cfg).unwrap();
        // the sampling box equals the dominated box here
        assert_eq!(hv.value, 0.0625);
        assert_eq!(hv.std_error, 0.0);
    }

    proptest! {
        #[test]
        fn adding_points_never_decreases_volume(
            pts in proptest::collection::vec(proptest::collection::vec(0.0f64..1.2, 3), 1..30),
            extra in proptest::collection::vec(0.0f64..1.2, 3),
        ) {
            let cfg = HvConfig::raw(vec![1.0, 1.0, 1.0]);
            let base = hypervolume_exact(&pts, &cfg).unwrap();
            let mut more = pts.clone();
            more.push(extra);
            prop_assert!(hypervolume_exact(&more, &cfg).unwrap() >= base - 1e-12);

            let cfg2 = HvConfig::raw(vec![1.0, 1.0]);
            let flat: Vec<Vec<f64>> = pts.iter().map(|p| p[..2].to_vec()).collect();
            let base2 = hypervolume_exact(&flat, &cfg2).unwrap();
            let mut more2 = flat.clone();
            more2.push(more.last().unwrap()[..2].to_vec());
            prop_assert!(hypervolume_exact(&more2, &cfg2).unwrap() >= base2 - 1e-12);
        }
    }
}
