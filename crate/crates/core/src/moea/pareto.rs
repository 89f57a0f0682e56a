//! Pareto dominance, non-dominated sorting and crowding distance
//! (minimization throughout).

use std::cmp::Ordering;

use super::MoeaError;

pub type ObjectiveVector = Vec<f64>;

/// `a` is no worse than `b` everywhere and strictly better somewhere.
pub fn dominates(a: &[f64], b: &[f64]) -> Result<bool, MoeaError> {
    if a.len() != b.len() {
        return Err(MoeaError::ArityMismatch(a.len(), b.len()));
    }
    Ok(dominates_unchecked(a, b))
}

pub(crate) fn dominates_unchecked(a: &[f64], b: &[f64]) -> bool {
    let mut strictly = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        if x < y {
            strictly = true;
        }
    }
    strictly
}

/// Fast non-dominated sort. Returns fronts as lists of indices into
/// `points`, best front first; indices inside a front are ascending.
pub fn nondominated_sort(points: &[ObjectiveVector]) -> Result<Vec<Vec<usize>>, MoeaError> {
    let n = points.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let m = points[0].len();
    if let Some(p) = points.iter().find(|p| p.len() != m) {
        return Err(MoeaError::ArityMismatch(m, p.len()));
    }
    let mut dominated_by_me: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut domination_count = vec![0usize; n];
    for i in 0..n {
        for j in i + 1..n {
            if dominates_unchecked(&points[i], &points[j]) {
                dominated_by_me[i].push(j);
                domination_count[j] += 1;
            } else if dominates_unchecked(&points[j], &points[i]) {
                dominated_by_me[j].push(i);
                domination_count[i] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| domination_count[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominated_by_me[i] {
                domination_count[j] -= 1;
                if domination_count[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(current);
        current = next;
    }
    Ok(fronts)
}

/// Indices of the non-dominated members of `points`.
pub fn pareto_front(points: &[ObjectiveVector]) -> Result<Vec<usize>, MoeaError> {
    Ok(nondominated_sort(points)?.into_iter().next().unwrap_or_default())
}

/// Crowding distance of each member of one front.
///
/// Exact duplicates share the distance of their first occurrence's slot:
/// the first copy takes part in the sweep, later copies get 0. Boundary
/// points of every objective get `+inf`; objectives with zero range add 0.
pub fn crowding_distance(front: &[ObjectiveVector]) -> Vec<f64> {
    let n = front.len();
    let mut distance = vec![0.0; n];
    if n == 0 {
        return distance;
    }
    let mut unique: Vec<usize> = Vec::with_capacity(n);
    for i in 0..n {
        if !unique.iter().any(|&u| front[u] == front[i]) {
            unique.push(i);
        }
    }
    if unique.len() <= 2 {
        for &u in &unique {
            distance[u] = f64::INFINITY;
        }
        return distance;
    }
    let m = front[0].len();
    let mut order = unique.clone();
    for j in 0..m {
        order.sort_by(|&a, &b| front[a][j].partial_cmp(&front[b][j]).unwrap_or(Ordering::Equal));
        let lo = front[order[0]][j];
        let hi = front[order[order.len() - 1]][j];
        distance[order[0]] = f64::INFINITY;
        distance[order[order.len() - 1]] = f64::INFINITY;
        let range = hi - lo;
        if range <= 0.0 {
            continue;
        }
        for w in 1..order.len() - 1 {
            let gap = front[order[w + 1]][j] - front[order[w - 1]][j];
            distance[order[w]] += gap / range;
        }
    }
    distance
}

/// Rank and crowding for every point of a population.
pub fn rank_and_crowd(points: &[ObjectiveVector]) -> Result<(Vec<usize>, Vec<f64>), MoeaError> {
    let fronts = nondominated_sort(points)?;
    let mut rank = vec![0; points.len()];
    let mut crowd = vec![0.0; points.len()];
    for (r, front) in fronts.iter().enumerate() {
        let objs: Vec<ObjectiveVector> = front.iter().map(|&i| points[i].clone()).collect();
        for (k, d) in front.iter().zip(crowding_distance(&objs)) {
            rank[*k] = r;
            crowd[*k] = d;
        }
    }
    Ok((rank, crowd))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use rand::Rng;

    /// Front index as the length of the longest dominating chain, computed
    /// from the full dominance matrix.
    fn brute_force_ranks(points: &[ObjectiveVector]) -> Vec<usize> {
        let n = points.len();
        let mut order: Vec<usize> = (0..n).collect();
        // a dominator always has a strictly smaller coordinate sum
        order.sort_by(|&a, &b| {
            let sa: f64 = points[a].iter().sum();
            let sb: f64 = points[b].iter().sum();
            sa.partial_cmp(&sb).unwrap()
        });
        let mut rank = vec![0usize; n];
        for (pos, &i) in order.iter().enumerate() {
            for &j in &order[..pos] {
                let j_dom_i = points[j].iter().zip(&points[i]).all(|(a, b)| a <= b)
                    && points[j].iter().zip(&points[i]).any(|(a, b)| a < b);
                if j_dom_i {
                    rank[i] = rank[i].max(rank[j] + 1);
                }
            }
        }
        rank
    }

    #[test]
    fn dominance_cases() {
        assert!(dominates(&[1.0, 1.0], &[2.0, 2.0]).unwrap());
        assert!(!dominates(&[1.0, 2.0], &[2.0, 1.0]).unwrap());
        assert!(!dominates(&[2.0, 1.0], &[1.0, 2.0]).unwrap());
        assert!(!dominates(&[1.0, 1.0], &[1.0, 1.0]).unwrap());
        assert_eq!(dominates(&[1.0], &[1.0, 2.0]), Err(MoeaError::ArityMismatch(1, 2)));
    }

    #[test]
    fn identical_points_form_one_front() {
        let pts = vec![vec![0.3, 0.3]; 7];
        assert_eq!(nondominated_sort(&pts).unwrap(), vec![(0..7).collect::<Vec<_>>()]);
    }

    #[test]
    fn chain_gives_singleton_fronts() {
        let pts: Vec<ObjectiveVector> = (0..6).map(|i| vec![i as f64, i as f64, 2.0 * i as f64]).collect();
        let fronts = nondominated_sort(&pts).unwrap();
        assert_eq!(fronts.len(), 6);
        for (k, f) in fronts.iter().enumerate() {
            assert_eq!(f, &vec![k]);
        }
    }

    #[test]
    fn sort_matches_brute_force_on_random_points() {
        let mut rng = stream(1, "nds", 0);
        let pts: Vec<ObjectiveVector> =
            (0..1000).map(|_| (0..3).map(|_| rng.random_range(0..20) as f64).collect()).collect();
        let fronts = nondominated_sort(&pts).unwrap();
        let oracle = brute_force_ranks(&pts);
        let mut seen = 0;
        for (r, f) in fronts.iter().enumerate() {
            for &i in f {
                assert_eq!(oracle[i], r);
                seen += 1;
            }
        }
        assert_eq!(seen, pts.len());
    }

    #[test]
    fn sort_matches_brute_force_across_arities() {
        let mut rng = stream(2, "nds-arity", 0);
        for (k, &m) in [2usize, 3, 5].iter().cycle().take(12).enumerate() {
            let n = if k < 3 { 2000 } else { rng.random_range(1..400) };
            let levels = rng.random_range(3..50);
            let pts: Vec<ObjectiveVector> =
                (0..n).map(|_| (0..m).map(|_| rng.random_range(0..levels) as f64).collect()).collect();
            let oracle = brute_force_ranks(&pts);
            for (r, f) in nondominated_sort(&pts).unwrap().iter().enumerate() {
                assert!(f.iter().all(|&i| oracle[i] == r), "m={m} n={n}");
            }
        }
    }

    #[test]
    fn crowding_two_points_are_infinite() {
        let d = crowding_distance(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        assert!(d.iter().all(|v| v.is_infinite()));
    }

    #[test]
    fn crowding_collinear_middle_is_two() {
        let d = crowding_distance(&[vec![0.0, 2.0], vec![1.0, 1.0], vec![2.0, 0.0]]);
        assert!(d[0].is_infinite() && d[2].is_infinite());
        assert!((d[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn crowding_duplicate_gets_zero() {
        let d = crowding_distance(&[vec![0.0, 3.0], vec![1.0, 2.0], vec![1.0, 2.0], vec![3.0, 0.0]]);
        assert_eq!(d[2], 0.0);
        assert!(d[1] > 0.0 && d[1].is_finite());
    }

    #[test]
    fn zero_range_objective_adds_nothing() {
        let d = crowding_distance(&[vec![0.0, 5.0], vec![1.0, 5.0], vec![3.0, 5.0], vec![4.0, 5.0]]);
        // objective 0 sweep: (3-0)/4 and (4-1)/4; objective 1 has zero range
        // but still marks its own boundary points
        assert!((d[1] - 0.75).abs() < 1e-15 || d[1].is_infinite());
        assert!(d.iter().all(|v| *v >= 0.0));
    }
}
