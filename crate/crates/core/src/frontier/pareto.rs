use std::cmp::Ordering;

use super::sweep::RegionPoint;

/// Indices of the points not dominated under `(x, y)`, sorted by increasing `x`.
/// Of several points with identical objectives only the first is kept.
pub fn pareto_indices(objectives: &[(f64, f64)]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..objectives.len()).collect();
    order.sort_by(|&a, &b| {
        let (xa, ya) = objectives[a];
        let (xb, yb) = objectives[b];
        xb.total_cmp(&xa).then(yb.total_cmp(&ya)).then(a.cmp(&b))
    });
    let mut best_y = f64::NEG_INFINITY;
    let mut keep = Vec::new();
    for i in order {
        let y = objectives[i].1;
        if y.total_cmp(&best_y) == Ordering::Greater {
            best_y = y;
            keep.push(i);
        }
    }
    keep.reverse();
    keep
}

/// Maximal points under `key`, sorted by the first objective.
pub fn pareto_frontier_by<T: Clone>(items: &[T], key: impl Fn(&T) -> (f64, f64)) -> Vec<T> {
    let objectives: Vec<(f64, f64)> = items.iter().map(key).collect();
    pareto_indices(&objectives)
        .into_iter()
        .map(|i| items[i].clone())
        .collect()
}

/// Achievable `(R, B)` trade-off curve.
pub fn pareto_frontier(points: &[RegionPoint]) -> Vec<RegionPoint> {
    pareto_frontier_by(points, |p| (p.rate, p.b_ach))
}

/// Converse `(R, B)` trade-off curve.
pub fn converse_frontier(points: &[RegionPoint]) -> Vec<RegionPoint> {
    pareto_frontier_by(points, |p| (p.rate, p.b_conv))
}
