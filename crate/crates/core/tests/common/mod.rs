#![allow(dead_code)]

use aquaplace_core::network::{Edge, Node};
use aquaplace_core::{simulate_plug_flow, EventTensor, Network, ObjectivePoint, Placement, TimeGrid};

pub fn line_net() -> Network {
    Network::new(
        ["A", "B", "C", "D"].iter().map(|id| Node::junction(id)).collect(),
        vec![
            Edge::new("A", "B", 3600.0),
            Edge::new("B", "C", 3600.0),
            Edge::new("C", "D", 3600.0),
        ],
        None,
        None,
    )
    .unwrap()
}

pub fn line_tensor() -> EventTensor {
    simulate_plug_flow(&line_net(), TimeGrid::default(), 100.0, 0.0).unwrap()
}

/// Mean and population standard deviation of detection times, computed
/// straight from the tensor cells without building a placement matrix.
pub fn straight_line_objectives(tensor: &EventTensor, s: &Placement, tau: f64, penalty: f64) -> ObjectivePoint {
    let grid = tensor.grid();
    let times: Vec<f64> = (0..tensor.num_events())
        .map(|a| {
            for t in 1..=grid.steps() {
                for l in 0..tensor.num_locations() {
                    if s.bit(l) && tensor.get(l, t, a) >= tau {
                        return t as f64 * grid.delta_t();
                    }
                }
            }
            penalty
        })
        .collect();
    let n = times.len() as f64;
    let mean = times.iter().sum::<f64>() / n;
    let var = times.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / n;
    ObjectivePoint::new(mean, var.sqrt())
}

/// Rank of each point by repeatedly peeling off the points no remaining
/// point dominates.
pub fn brute_force_ranks(points: &[ObjectivePoint]) -> Vec<usize> {
    let dominated = |u: &ObjectivePoint, v: &ObjectivePoint| {
        u.f1 <= v.f1 && u.f2 <= v.f2 && (u.f1 < v.f1 || u.f2 < v.f2)
    };
    let mut rank = vec![usize::MAX; points.len()];
    let mut level = 0;
    while rank.contains(&usize::MAX) {
        let layer: Vec<usize> = (0..points.len())
            .filter(|&i| rank[i] == usize::MAX)
            .filter(|&i| {
                !(0..points.len()).any(|j| rank[j] == usize::MAX && dominated(&points[j], &points[i]))
            })
            .collect();
        for i in layer {
            rank[i] = level;
        }
        level += 1;
    }
    rank
}

pub fn relative_eq(a: f64, b: f64, rel: f64) -> bool {
    a == b || (a - b).abs() <= rel * a.abs().max(b.abs())
}
