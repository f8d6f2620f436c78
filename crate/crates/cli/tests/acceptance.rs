//! Acceptance criteria 1-9. Runs as a plain binary so every criterion prints
//! one PASS/FAIL line regardless of output capture; exits non-zero if any fail.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use aquaplace_core::engine::rng_from_seed;
use aquaplace_core::indicators::{frobenius, kappa, kappa_hamming, DistanceSpace};
use aquaplace_core::network::{Edge, Node};
use aquaplace_core::oracle::{exhaustive_pareto, DEFAULT_CAP};
use aquaplace_core::pareto::{hypervolume_2d, non_dominated_sort, same_point, strongly_dominates, ReferencePoint};
use aquaplace_core::placement::{count_feasible, objectives, placement_matrix};
use aquaplace_core::synthetic::{random_network, SyntheticSpec};
use aquaplace_core::{
    run, simulate_plug_flow, EngineConfig, EvalSettings, EventTensor, Network, NodeId, ObjectivePoint, Placement,
    TimeGrid,
};
use rand::Rng;

// pinned tolerances
const OBJECTIVE_REL_TOL: f64 = 1e-9;
const MONTE_CARLO_REL_TOL: f64 = 0.01;
const MONTE_CARLO_SAMPLES: usize = 1_000_000;
const RECOVERY_SHARE: f64 = 0.8;
const RECOVERY_SEEDS_NEEDED: usize = 15;
const CONTAINMENT_BUDGET: Duration = Duration::from_secs(60);
const INFEASIBLE_PHASE_BUDGET: Duration = Duration::from_secs(600);
const KAPPA_RATIO: f64 = 2.0;

const TAU: f64 = 50.0;
/// Per-second decay for random instances: a sensor sees about one to three pipes.
const DECAY: f64 = 1.5e-4;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn line_net() -> Network {
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

fn plug_flow(net: &Network, decay: f64) -> EventTensor {
    simulate_plug_flow(net, TimeGrid::default(), 100.0, decay).unwrap()
}

/// Random instance for seed `seed`: 8 to 12 junctions, budget 2 to 4.
fn small_instance(seed: u64) -> (Network, EventTensor, usize) {
    let mut rng = rng_from_seed(1000 + seed);
    let n = rng.random_range(8..=12);
    let p = rng.random_range(2..=4);
    let net = random_network(&SyntheticSpec::new(n), seed).unwrap();
    let tensor = plug_flow(&net, DECAY);
    (net, tensor, p)
}

fn criterion_1() -> Outcome {
    let c = count_feasible(11, 4).unwrap();
    outcome(c == 561, format!("count_feasible(11, 4) = {c}"))
}

struct Instance {
    frontier_size: usize,
    recovered: usize,
    violations: usize,
    hv_ok: bool,
}

fn containment(net: &Network, tensor: &EventTensor, config: &EngineConfig) -> Instance {
    let res = run(net, tensor, config).unwrap();
    let reference = config.reference_for(tensor);
    let truth = exhaustive_pareto(tensor, &config.eval_settings(), config.budget, reference, DEFAULT_CAP).unwrap();
    let violations = res
        .frontier
        .iter()
        .filter(|p| !truth.pareto_frontier.iter().any(|q| same_point(p, q) || strongly_dominates(q, p)))
        .count();
    let recovered = truth
        .pareto_frontier
        .iter()
        .filter(|q| res.frontier.iter().any(|p| same_point(p, q)))
        .count();
    let hv = hypervolume_2d(&res.frontier, reference).unwrap();
    Instance {
        frontier_size: truth.pareto_frontier.len(),
        recovered,
        violations,
        hv_ok: hv <= truth.hypervolume * (1.0 + 1e-12),
    }
}

fn criteria_2_and_3() -> (Outcome, Outcome) {
    let started = Instant::now();
    let mut violations = 0;
    let mut hv_failures = 0;
    let mut good_seeds = 0;
    let mut shares = Vec::new();

    let line = line_net();
    let line_tensor = plug_flow(&line, 0.0);
    for config in [
        EngineConfig { population_size: 8, max_generations: 50, ..EngineConfig::new(2, TAU) },
        EngineConfig { population_size: 40, max_generations: 100, ..EngineConfig::new(2, TAU) },
    ] {
        let r = containment(&line, &line_tensor, &config);
        violations += r.violations;
        hv_failures += usize::from(!r.hv_ok);
    }

    for seed in 0..20 {
        let (net, tensor, p) = small_instance(seed);
        let config = EngineConfig {
            population_size: 40,
            max_generations: 100,
            seed,
            ..EngineConfig::new(p, TAU)
        };
        let r = containment(&net, &tensor, &config);
        violations += r.violations;
        hv_failures += usize::from(!r.hv_ok);
        let share = r.recovered as f64 / r.frontier_size as f64;
        shares.push(format!("{}/{}", r.recovered, r.frontier_size));
        if share >= RECOVERY_SHARE {
            good_seeds += 1;
        }
    }
    let elapsed = started.elapsed();
    let c2 = outcome(
        violations == 0 && hv_failures == 0 && elapsed < CONTAINMENT_BUDGET,
        format!(
            "{violations} frontier violations, {hv_failures} hypervolume excesses, {:.1}s",
            elapsed.as_secs_f64()
        ),
    );
    let c3 = outcome(
        good_seeds >= RECOVERY_SEEDS_NEEDED,
        format!("{good_seeds}/20 seeds recover >= 80% of the true frontier [{}]", shares.join(" ")),
    );
    (c2, c3)
}

/// Mean and population standard deviation of first detection times, read
/// directly off the tensor cells.
fn straight_line(tensor: &EventTensor, s: &Placement, tau: f64, weights: &[f64]) -> ObjectivePoint {
    let grid = tensor.grid();
    let penalty = (grid.steps() + 1) as f64 * grid.delta_t();
    let times: Vec<f64> = (0..tensor.num_events())
        .map(|a| {
            (1..=grid.steps())
                .find(|&t| s.selected().any(|l| tensor.get(l, t, a) >= tau))
                .map_or(penalty, |t| t as f64 * grid.delta_t())
        })
        .collect();
    let f1: f64 = times.iter().zip(weights).map(|(t, w)| w * t).sum();
    let var: f64 = times.iter().zip(weights).map(|(t, w)| w * (t - f1) * (t - f1)).sum();
    ObjectivePoint::new(f1, var.sqrt())
}

fn criterion_4() -> Outcome {
    let line = plug_flow(&line_net(), 0.0);
    let b = Placement::from_indices(4, &[1]).unwrap();
    let at_b = objectives(&line, &b, &EvalSettings::new(TAU)).unwrap();
    let exact = at_b.f1 == 46800.0 && at_b.f2 == 43200.0;

    let net = random_network(&SyntheticSpec::new(14), 77).unwrap();
    let mut rng = rng_from_seed(4);
    let raw: Vec<f64> = (0..14).map(|_| rng.random_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
    let tensor = plug_flow(&net, 2e-5).with_weights(weights.clone()).unwrap();
    let rel = |a: f64, b: f64| (a - b).abs() <= OBJECTIVE_REL_TOL * a.abs().max(b.abs()).max(1.0);
    let mut mismatches = 0;
    for _ in 0..200 {
        let bits: Vec<bool> = loop {
            let bits: Vec<bool> = (0..14).map(|_| rng.random_bool(0.3)).collect();
            if bits.iter().any(|&b| b) {
                break bits;
            }
        };
        let s = Placement::new(bits);
        let got = objectives(&tensor, &s, &EvalSettings::new(TAU)).unwrap();
        let want = straight_line(&tensor, &s, TAU, &weights);
        if !(rel(got.f1, want.f1) && rel(got.f2, want.f2)) {
            mismatches += 1;
        }
    }
    outcome(
        exact && mismatches == 0,
        format!("sensor at B gives ({}, {}); {mismatches}/200 mismatches", at_b.f1, at_b.f2),
    )
}

/// Fronts by repeated peeling: a point joins the current front when no
/// remaining point dominates it.
fn peel(points: &[ObjectivePoint]) -> Vec<Vec<usize>> {
    let mut left: Vec<usize> = (0..points.len()).collect();
    let mut fronts = Vec::new();
    while !left.is_empty() {
        let front: Vec<usize> = left
            .iter()
            .copied()
            .filter(|&i| {
                !left.iter().any(|&j| {
                    let (u, v) = (points[j], points[i]);
                    u.f1 <= v.f1 && u.f2 <= v.f2 && (u.f1 < v.f1 || u.f2 < v.f2)
                })
            })
            .collect();
        left.retain(|i| !front.contains(i));
        fronts.push(front);
    }
    fronts
}

fn criterion_5() -> Outcome {
    let mut rng = rng_from_seed(5);
    let mut sort_failures = 0;
    for _ in 0..100 {
        let n = rng.random_range(1..=200);
        let points: Vec<ObjectivePoint> = (0..n)
            .map(|_| ObjectivePoint::new(rng.random_range(0..30) as f64, rng.random_range(0..30) as f64))
            .collect();
        if non_dominated_sort(&points) != peel(&points) {
            sort_failures += 1;
        }
    }

    let r = ReferencePoint::new(4.0, 4.0);
    let small = [(1.0, 3.0), (2.0, 2.0), (3.0, 1.0)].map(|(a, b)| ObjectivePoint::new(a, b));
    let exact = hypervolume_2d(&small, r).unwrap();

    let front: Vec<ObjectivePoint> = (0..15)
        .map(|_| ObjectivePoint::new(rng.random_range(0.0..10.0), rng.random_range(0.0..10.0)))
        .collect();
    let reference = ReferencePoint::new(10.0, 10.0);
    let hv = hypervolume_2d(&front, reference).unwrap();
    let hits = (0..MONTE_CARLO_SAMPLES)
        .filter(|_| {
            let (x, y) = (rng.random_range(0.0..10.0), rng.random_range(0.0..10.0));
            front.iter().any(|p| p.f1 <= x && p.f2 <= y)
        })
        .count();
    let mc = 100.0 * hits as f64 / MONTE_CARLO_SAMPLES as f64;
    let mc_ok = (mc - hv).abs() <= MONTE_CARLO_REL_TOL * hv;
    outcome(
        sort_failures == 0 && exact == 6.0 && mc_ok,
        format!("{sort_failures}/100 sort mismatches; example HV {exact}; sweep {hv:.4} vs Monte Carlo {mc:.4}"),
    )
}

/// Eight plug-flow signals, each copied to five candidate locations. Genomes
/// that differ only in which copy they use share a placement matrix.
fn duplicated_fixture(copies: usize) -> (Network, EventTensor) {
    let base = random_network(&SyntheticSpec::new(8), 11).unwrap();
    let source = plug_flow(&base, DECAY);
    let events: Vec<NodeId> = source.events().to_vec();
    let mut locations = Vec::new();
    let mut values = Vec::new();
    for l in 0..source.num_locations() {
        for c in 0..copies {
            locations.push(NodeId::new(format!("{}_{c}", source.locations()[l])));
            values.extend_from_slice(source.sensor_matrix(l).unwrap().as_slice());
        }
    }
    let mut nodes: Vec<Node> = events.iter().map(|e| Node::junction(e.as_str())).collect();
    nodes.extend(locations.iter().map(|l| Node::junction(l.as_str())));
    let edges = locations
        .iter()
        .enumerate()
        .map(|(i, l)| Edge::new(events[i % events.len()].as_str(), l.as_str(), 60.0))
        .collect();
    let net = Network::new(nodes, edges, Some(locations.clone()), Some(events.clone())).unwrap();
    let tensor = EventTensor::from_parts(source.grid(), locations, events, values, None).unwrap();
    (net, tensor)
}

fn criterion_6() -> Outcome {
    let mut rng = rng_from_seed(6);
    let mut out_of_range = 0;
    let mut clone_failures = 0;
    for _ in 0..1000 {
        let mu = rng.random_range(2..=20);
        let len = rng.random_range(1..=30);
        let pop: Vec<Placement> = (0..mu)
            .map(|_| Placement::new((0..len).map(|_| rng.random_bool(0.5)).collect()))
            .collect();
        let refs: Vec<&Placement> = pop.iter().collect();
        let k = kappa_hamming(&refs).unwrap().value;
        if !(0.0..=1.0).contains(&k) {
            out_of_range += 1;
        }
        let clones = vec![refs[0]; mu];
        if kappa_hamming(&clones).unwrap().value != 0.0 {
            clone_failures += 1;
        }
    }
    // Frobenius Kappa over random placement matrices of the line fixture
    let line = plug_flow(&line_net(), 0.0);
    for _ in 0..200 {
        let mu = rng.random_range(2..=8);
        let mats: Vec<_> = (0..mu)
            .map(|_| {
                let s = Placement::new((0..4).map(|i| i == 0 || rng.random_bool(0.5)).collect());
                placement_matrix(&line, &s).unwrap()
            })
            .collect();
        let k = kappa(&mats, |a, b| frobenius(a, b).unwrap(), 1000.0, DistanceSpace::Frobenius)
            .unwrap()
            .value;
        if !(0.0..=1.0).contains(&k) {
            out_of_range += 1;
        }
    }

    let hand: Vec<Placement> = ["00", "01", "11"].iter().map(|s| s.parse().unwrap()).collect();
    let hand_value = kappa_hamming(&hand.iter().collect::<Vec<_>>()).unwrap().value;

    let (net, tensor) = duplicated_fixture(5);
    let config = EngineConfig {
        population_size: 40,
        max_generations: 100,
        seed: 6,
        ..EngineConfig::new(2, TAU)
    };
    let trace = run(&net, &tensor, &config).unwrap().trace;
    let (first, last) = (&trace[0], &trace[trace.len() - 1]);
    let kh = (first.kappa_hamming.value, last.kappa_hamming.value);
    let kf = last.kappa_frobenius.value;
    let phenomenon = kh.1 < kh.0 && kf >= KAPPA_RATIO * kh.1;

    outcome(
        out_of_range == 0 && clone_failures == 0 && hand_value == 2.0 / 3.0 && phenomenon,
        format!(
            "{out_of_range} out of range, {clone_failures} clone failures, hand example {hand_value}; \
             Kappa-Hamming {:.4} -> {:.4}, final Kappa-Frobenius {kf:.4}",
            kh.0, kh.1
        ),
    )
}

fn criterion_7() -> Outcome {
    let spec = SyntheticSpec {
        reservoir: true,
        ..SyntheticSpec::new(332)
    };
    let net = random_network(&spec, 2024).unwrap();
    let tensor = plug_flow(&net, 1e-5);
    let base = EngineConfig {
        population_size: 40,
        ..EngineConfig::new(25, TAU)
    };

    let mut feasible_at_start = 0;
    for seed in 0..10 {
        let trace = run(&net, &tensor, &EngineConfig { max_generations: 0, seed, ..base.clone() })
            .unwrap()
            .trace;
        feasible_at_start += trace[0].feasible_count;
    }

    let started = Instant::now();
    let trace = run(&net, &tensor, &EngineConfig { max_generations: 500, seed: 0, ..base }).unwrap().trace;
    let elapsed = started.elapsed();
    let onset = trace.iter().position(|r| r.feasible_count > 0);
    let hv_phase_ok = trace.iter().all(|r| r.hypervolume.is_some() == (r.feasible_count > 0))
        && onset.is_none_or(|g| trace[g..].iter().all(|r| r.hypervolume.is_some()));
    let monotone = trace.windows(2).all(|w| w[1].min_violation <= w[0].min_violation);

    outcome(
        feasible_at_start == 0
            && hv_phase_ok
            && monotone
            && trace.len() == 500
            && elapsed < INFEASIBLE_PHASE_BUDGET,
        format!(
            "{feasible_at_start} feasible at generation 0 over 10 seeds; first feasible generation {}; \
             {} generations in {:.1}s",
            onset.map_or("none".to_string(), |g| g.to_string()),
            trace.len(),
            elapsed.as_secs_f64()
        ),
    )
}

fn optimize(dir: &Path, threads: &str, out: &str) -> (Vec<u8>, Vec<u8>) {
    let out = dir.join(out);
    let status = Command::new(env!("CARGO_BIN_EXE_aquaplace"))
        .args(["--threads", threads, "optimize", "--network"])
        .arg(dir.join("network.json"))
        .arg("--tensor")
        .arg(dir.join("tensor.csv"))
        .arg("--config")
        .arg(dir.join("config.json"))
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success(), "optimize failed");
    (
        std::fs::read(out.join("pareto.csv")).unwrap(),
        std::fs::read(out.join("indicators.csv")).unwrap(),
    )
}

fn criterion_8() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let net = random_network(&SyntheticSpec::new(30), 8).unwrap();
    net.write(dir.path().join("network.json")).unwrap();
    plug_flow(&net, 1e-5).write_csv_file(dir.path().join("tensor.csv")).unwrap();
    std::fs::write(
        dir.path().join("config.json"),
        r#"{"population_size": 24, "max_generations": 60, "budget": 5, "threshold": 50, "seed": 8,
            "termination": ["max_generations", {"kappa_hamming": 0.01}]}"#,
    )
    .unwrap();
    let a = optimize(dir.path(), "1", "a");
    let b = optimize(dir.path(), "8", "b");
    let c = optimize(dir.path(), "8", "c");
    outcome(
        a == b && b == c,
        format!("pareto.csv {} bytes, indicators.csv {} bytes", a.0.len(), a.1.len()),
    )
}

fn criterion_9() -> Outcome {
    let (_, tensor) = duplicated_fixture(2);
    let res = exhaustive_pareto(
        &tensor,
        &EvalSettings::new(TAU),
        2,
        ReferencePoint::new(1e6, 1e6),
        DEFAULT_CAP,
    )
    .unwrap();
    outcome(
        res.pareto_set.len() > res.pareto_frontier.len(),
        format!(
            "{} placements map to {} frontier points",
            res.pareto_set.len(),
            res.pareto_frontier.len()
        ),
    )
}

fn main() {
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut report = |n: usize, name: &'static str, o: Outcome| {
        println!(
            "criterion {n} [{}] {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        results.push((n, name, o));
    };
    report(1, "feasible count", criterion_1());
    let (c2, c3) = criteria_2_and_3();
    report(2, "oracle containment", c2);
    report(3, "near-optimal convergence", c3);
    report(4, "objective correctness", criterion_4());
    report(5, "pareto machinery", criterion_5());
    report(6, "kappa properties", criterion_6());
    report(7, "infeasible phase", criterion_7());
    report(8, "determinism across threads", criterion_8());
    report(9, "many-to-one mapping", criterion_9());

    let failed: Vec<usize> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    if failed.is_empty() {
        println!("acceptance: all {} criteria passed", results.len());
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
