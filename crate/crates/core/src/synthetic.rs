//! Seeded random networks for benchmarks and tests.

use rand::Rng;

use crate::engine::rng_from_seed;
use crate::error::{Error, Result};
use crate::network::{Edge, Network, Node, NodeKind};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub junctions: usize,
    /// Pipes beyond the spanning tree. Every pipe becomes two directed edges.
    pub extra_pipes: usize,
    /// Travel time range in seconds, `[lo, hi)`.
    pub travel_time: (f64, f64),
    /// Adds a reservoir `R` feeding junction `J0`; it is neither a sensor
    /// location nor an event source.
    pub reservoir: bool,
}

impl SyntheticSpec {
    pub fn new(junctions: usize) -> Self {
        SyntheticSpec {
            junctions,
            extra_pipes: junctions / 4,
            travel_time: (900.0, 3.0 * 3600.0),
            reservoir: false,
        }
    }
}

/// Random connected network: a random spanning tree over the junctions
/// plus `extra_pipes` chords.
pub fn random_network(spec: &SyntheticSpec, seed: u64) -> Result<Network> {
    let n = spec.junctions;
    if n == 0 {
        return Err(Error::Validation("need at least one junction".into()));
    }
    let (lo, hi) = spec.travel_time;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::Validation(format!("bad travel time range [{lo}, {hi})")));
    }
    let max_chords = n * (n - 1) / 2 - (n - 1);
    if spec.extra_pipes > max_chords {
        return Err(Error::Validation(format!("at most {max_chords} extra pipes fit")));
    }

    let mut rng = rng_from_seed(seed);
    let name = |i: usize| format!("J{i}");
    let mut nodes: Vec<Node> = (0..n).map(|i| Node::junction(&name(i))).collect();
    let mut edges = Vec::new();
    let mut linked = std::collections::HashSet::new();
    let pipe = |a: usize, b: usize, rng: &mut rand_chacha::ChaCha8Rng, edges: &mut Vec<Edge>| {
        let tt = rng.random_range(lo..hi);
        edges.push(Edge::new(&name(a), &name(b), tt));
        edges.push(Edge::new(&name(b), &name(a), tt));
    };

    for i in 1..n {
        let j = rng.random_range(0..i);
        linked.insert((j, i));
        pipe(j, i, &mut rng, &mut edges);
    }
    let mut added = 0;
    while added < spec.extra_pipes {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        let key = (a.min(b), a.max(b));
        if a != b && linked.insert(key) {
            pipe(key.0, key.1, &mut rng, &mut edges);
            added += 1;
        }
    }

    if spec.reservoir {
        nodes.insert(
            0,
            Node {
                id: "R".into(),
                kind: NodeKind::Reservoir,
            },
        );
        edges.push(Edge::new("R", &name(0), rng.random_range(lo..hi)));
    }
    Network::new(nodes, edges, None, None)
}
