//! Dominance, non-dominated sorting, crowding distance and 2-D hypervolume.
//! Both objectives are minimised.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::placement::ObjectivePoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dominance {
    /// `u <= v` in both objectives, strictly in at least one.
    Strong,
    /// `u == v`.
    WeakEqual,
    None,
}

pub fn dominates(u: &ObjectivePoint, v: &ObjectivePoint) -> Dominance {
    if u.f1 == v.f1 && u.f2 == v.f2 {
        Dominance::WeakEqual
    } else if u.f1 <= v.f1 && u.f2 <= v.f2 {
        Dominance::Strong
    } else {
        Dominance::None
    }
}

pub fn strongly_dominates(u: &ObjectivePoint, v: &ObjectivePoint) -> bool {
    dominates(u, v) == Dominance::Strong
}

/// Indices of the input points, one list per front, rank 0 first.
pub type Front = Vec<usize>;

/// Fast non-dominated sort. Each front lists indices in ascending order.
pub fn non_dominated_sort(points: &[ObjectivePoint]) -> Vec<Front> {
    let n = points.len();
    let mut dominated_by = vec![0usize; n];
    let mut dominating: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in i + 1..n {
            if strongly_dominates(&points[i], &points[j]) {
                dominating[i].push(j);
                dominated_by[j] += 1;
            } else if strongly_dominates(&points[j], &points[i]) {
                dominating[j].push(i);
                dominated_by[i] += 1;
            }
        }
    }

    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| dominated_by[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominating[i] {
                dominated_by[j] -= 1;
                if dominated_by[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(std::mem::replace(&mut current, next));
    }
    fronts
}

/// Crowding distance of each point within one front.
///
/// Extremes in either objective get infinity, interior points the sum of
/// normalised neighbour gaps. Exact duplicates share one slot: the first
/// occurrence carries the distance and later copies get 0, so copies of an
/// extreme point cannot crowd out the interior of the front. A front of one
/// repeated point is all boundary and gets infinity throughout.
pub fn crowding_distance(front: &[ObjectivePoint]) -> Vec<f64> {
    let n = front.len();
    // representative index for each point
    let mut rep = vec![0usize; n];
    let mut reps: Vec<usize> = Vec::new();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| cmp_point(&front[a], &front[b]).then(a.cmp(&b)));
    for (k, &i) in order.iter().enumerate() {
        if k > 0 && cmp_point(&front[order[k - 1]], &front[i]) == Ordering::Equal {
            rep[i] = rep[order[k - 1]];
        } else {
            rep[i] = i;
            reps.push(i);
        }
    }

    let mut dist = vec![0.0f64; n];
    if reps.len() == 1 {
        dist.iter_mut().for_each(|d| *d = f64::INFINITY);
        return dist;
    }
    if reps.len() == 2 {
        for &i in &reps {
            dist[i] = f64::INFINITY;
        }
        return dist;
    }

    for objective in [0usize, 1] {
        let value = |i: usize| if objective == 0 { front[i].f1 } else { front[i].f2 };
        let mut sorted = reps.clone();
        sorted.sort_by(|&a, &b| {
            value(a)
                .total_cmp(&value(b))
                .then_with(|| cmp_point(&front[a], &front[b]))
                .then(a.cmp(&b))
        });
        let lo = value(sorted[0]);
        let hi = value(sorted[sorted.len() - 1]);
        let range = hi - lo;
        if range == 0.0 {
            for &i in &sorted {
                dist[i] = f64::INFINITY;
            }
            continue;
        }
        dist[sorted[0]] = f64::INFINITY;
        dist[sorted[sorted.len() - 1]] = f64::INFINITY;
        for w in sorted.windows(3) {
            dist[w[1]] += (value(w[2]) - value(w[0])) / range;
        }
    }

    for i in 0..n {
        if rep[i] != i {
            dist[i] = 0.0;
        }
    }
    dist
}

fn cmp_point(a: &ObjectivePoint, b: &ObjectivePoint) -> Ordering {
    a.f1.total_cmp(&b.f1).then(a.f2.total_cmp(&b.f2))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferencePoint {
    pub r1: f64,
    pub r2: f64,
}

impl ReferencePoint {
    pub fn new(r1: f64, r2: f64) -> Self {
        ReferencePoint { r1, r2 }
    }

    /// True when `p` lies in the box bounded by the reference point.
    pub fn bounds(&self, p: &ObjectivePoint) -> bool {
        p.f1 <= self.r1 && p.f2 <= self.r2
    }
}

/// Area dominated by `points` and bounded by `reference`.
///
/// Points are swept in increasing `f1`; each one adds the strip between its
/// `f2` and the lowest `f2` seen so far. Dominated points add nothing, so
/// the input need not be a clean front.
pub fn hypervolume_2d(points: &[ObjectivePoint], reference: ReferencePoint) -> Result<f64> {
    if let Some(p) = points.iter().find(|p| !reference.bounds(p)) {
        return Err(Error::Validation(format!(
            "point ({}, {}) exceeds reference point ({}, {})",
            p.f1, p.f2, reference.r1, reference.r2
        )));
    }
    let mut sorted: Vec<&ObjectivePoint> = points.iter().collect();
    sorted.sort_by(|a, b| cmp_point(a, b));
    let mut area = 0.0;
    let mut ceiling = reference.r2;
    for p in sorted {
        if p.f2 < ceiling {
            area += (reference.r1 - p.f1) * (ceiling - p.f2);
            ceiling = p.f2;
        }
    }
    Ok(area)
}

/// Rounding grid used to decide when two objective points coincide.
pub const POINT_RESOLUTION: f64 = 1e-9;

fn point_key(p: &ObjectivePoint) -> (i128, i128) {
    let q = |x: f64| (x / POINT_RESOLUTION).round() as i128;
    (q(p.f1), q(p.f2))
}

/// Distinct points after rounding to [`POINT_RESOLUTION`], sorted by `f1`
/// then `f2`. The first point seen for each key is kept.
pub fn distinct_points(points: impl IntoIterator<Item = ObjectivePoint>) -> Vec<ObjectivePoint> {
    let mut seen = std::collections::BTreeMap::new();
    for p in points {
        seen.entry(point_key(&p)).or_insert(p);
    }
    seen.into_values().collect()
}

/// Whether two points coincide at [`POINT_RESOLUTION`].
pub fn same_point(a: &ObjectivePoint, b: &ObjectivePoint) -> bool {
    point_key(a) == point_key(b)
}
