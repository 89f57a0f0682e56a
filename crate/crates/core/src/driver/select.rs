//! Choosing which inner-search candidates get a true evaluation.

use std::cmp::Ordering;

use crate::space::Genome;

use super::DriverError;

#[derive(Debug, Clone, PartialEq)]
pub struct SelectCandidate {
    pub genome: Genome,
    pub predicted: f64,
    /// Complexity coordinates (all objectives after accuracy).
    pub complexity: Vec<f64>,
}

fn argmax(values: impl Iterator<Item = f64>) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.enumerate() {
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i)
}

/// Highest predicted accuracy first, then repeatedly the candidate farthest
/// (max-min Euclidean distance in min-max normalized complexity space) from
/// everything chosen so far and from `front`. Returns candidate indices.
pub fn subset_select(candidates: &[SelectCandidate], front: &[Vec<f64>], b: usize) -> Result<Vec<usize>, DriverError> {
    if candidates.is_empty() {
        return Err(DriverError::EmptyAfterDedup);
    }
    let m = candidates[0].complexity.len();
    let mut lo = vec![f64::INFINITY; m];
    let mut hi = vec![f64::NEG_INFINITY; m];
    for p in candidates.iter().map(|c| &c.complexity).chain(front) {
        for j in 0..m {
            lo[j] = lo[j].min(p[j]);
            hi[j] = hi[j].max(p[j]);
        }
    }
    let norm = |p: &[f64]| -> Vec<f64> {
        (0..m).map(|j| if hi[j] > lo[j] { (p[j] - lo[j]) / (hi[j] - lo[j]) } else { 0.0 }).collect()
    };
    let points: Vec<Vec<f64>> = candidates.iter().map(|c| norm(&c.complexity)).collect();
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();

    let first = argmax(candidates.iter().map(|c| c.predicted)).expect("non-empty");
    let mut chosen = vec![first];
    let mut nearest: Vec<f64> = points
        .iter()
        .map(|p| front.iter().map(|f| dist(p, &norm(f))).fold(f64::INFINITY, f64::min))
        .collect();
    while chosen.len() < b.min(candidates.len()) {
        let last = &points[*chosen.last().expect("non-empty")];
        for (i, p) in points.iter().enumerate() {
            nearest[i] = nearest[i].min(dist(p, last));
        }
        let pick = argmax((0..candidates.len()).map(|i| if chosen.contains(&i) { f64::NEG_INFINITY } else { nearest[i] }))
            .expect("non-empty");
        chosen.push(pick);
    }
    Ok(chosen)
}

/// Top `b - 1` predicted values, then the remaining candidate with the
/// largest minimum Hamming distance to the picks and to `reference`.
pub fn scalar_subset_select(
    candidates: &[(Genome, f64)],
    reference: &[Genome],
    b: usize,
) -> Result<Vec<usize>, DriverError> {
    if candidates.is_empty() {
        return Err(DriverError::EmptyAfterDedup);
    }
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&x, &y| candidates[y].1.partial_cmp(&candidates[x].1).unwrap_or(Ordering::Equal));
    let b = b.min(candidates.len());
    let mut chosen: Vec<usize> = order.iter().copied().take(b.saturating_sub(1).max(1)).collect();
    if chosen.len() < b {
        let min_gap = |i: usize| {
            chosen
                .iter()
                .map(|&c| &candidates[c].0)
                .chain(reference)
                .map(|g| candidates[i].0.hamming(g))
                .min()
                .unwrap_or(usize::MAX)
        };
        let pick = order
            .iter()
            .copied()
            .filter(|i| !chosen.contains(i))
            .max_by(|&x, &y| min_gap(x).cmp(&min_gap(y)).then(y.cmp(&x)))
            .expect("a candidate remains");
        chosen.push(pick);
    }
    Ok(chosen)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cand(predicted: f64, complexity: f64) -> SelectCandidate {
        SelectCandidate { genome: Genome::minimal(), predicted, complexity: vec![complexity] }
    }

    #[test]
    fn single_pick_is_accuracy_argmax() {
        let c = [cand(0.2, 1.0), cand(0.7, 5.0), cand(0.5, 9.0)];
        assert_eq!(subset_select(&c, &[], 1).unwrap(), vec![1]);
    }

    #[test]
    fn sparse_region_rule_hand_case() {
        // argmax at 100; from {100, 105} the gaps are 110 -> 5, 500 -> 395
        let c = [cand(0.9, 100.0), cand(0.5, 110.0), cand(0.4, 500.0)];
        assert_eq!(subset_select(&c, &[vec![105.0]], 2).unwrap(), vec![0, 2]);
        assert_eq!(subset_select(&c, &[vec![105.0]], 5).unwrap(), vec![0, 2, 1]);
    }

    #[test]
    fn empty_candidates() {
        assert!(matches!(subset_select(&[], &[], 3), Err(DriverError::EmptyAfterDedup)));
        assert!(matches!(scalar_subset_select(&[], &[], 3), Err(DriverError::EmptyAfterDedup)));
    }

    #[test]
    fn scalar_selection_adds_one_distant_pick() {
        let base = Genome::minimal();
        let mut far = *Genome::maximal().genes();
        far[0] = 0;
        let far = Genome::from_genes(&far).unwrap();
        let mut near = *base.genes();
        near[0] = 1;
        let near = Genome::from_genes(&near).unwrap();
        let mut near2 = *base.genes();
        near2[0] = 2;
        let near2 = Genome::from_genes(&near2).unwrap();
        let c = [(near, 0.9), (near2, 0.8), (far, 0.1), (base, 0.7)];
        assert_eq!(scalar_subset_select(&c, &[base], 2).unwrap(), vec![0, 2]);
        assert_eq!(scalar_subset_select(&c, &[base], 1).unwrap(), vec![0]);
        assert_eq!(scalar_subset_select(&c, &[base], 3).unwrap(), vec![0, 1, 2]);
    }
}
