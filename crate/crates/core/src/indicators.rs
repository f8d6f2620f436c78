//! Population diagnostics in the search space (genomes, Hamming distance)
//! and in the information space (placement matrices, Frobenius distance).

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::engine::Individual;
use crate::error::{Error, Result};
use crate::pareto::{hypervolume_2d, non_dominated_sort, ReferencePoint};
use crate::placement::{ObjectivePoint, Placement, PlacementMatrix};

pub fn hamming(a: &Placement, b: &Placement) -> Result<usize> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(a.bits().iter().zip(b.bits()).filter(|(x, y)| x != y).count())
}

/// Frobenius norm of `h - other`, taken over every cell.
pub fn frobenius(h: &PlacementMatrix, other: &PlacementMatrix) -> Result<f64> {
    if h.grid() != other.grid() || h.num_events() != other.num_events() {
        return Err(Error::ShapeMismatch(format!(
            "placement matrices differ: {}x{} vs {}x{}",
            h.grid().rows(),
            h.num_events(),
            other.grid().rows(),
            other.num_events()
        )));
    }
    Ok(h
        .as_slice()
        .iter()
        .zip(other.as_slice())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceSpace {
    Hamming,
    Frobenius,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaValue {
    pub value: f64,
    pub space: DistanceSpace,
}

impl KappaValue {
    /// Kappa termination test.
    pub fn satisfied(&self, epsilon: f64) -> bool {
        self.value <= epsilon
    }
}

/// Distances of every unordered pair `(i, j)`, `i < j`, in row-major order.
/// Computed in parallel; the output order does not depend on scheduling.
pub fn pairwise_distances<T, F>(items: &[T], dist: F) -> Vec<f64>
where
    T: Sync,
    F: Fn(&T, &T) -> f64 + Sync,
{
    (0..items.len())
        .into_par_iter()
        .flat_map_iter(|i| {
            let dist = &dist;
            (i + 1..items.len()).map(move |j| dist(&items[i], &items[j]))
        })
        .collect()
}

/// Mean normalised pairwise distance over `k_max = (mu^2 - mu) / 2` pairs.
/// Each normalised distance is clamped to 1. Summation runs sequentially in
/// pair order so the value is reproducible.
pub fn kappa_from_distances(
    distances: &[f64],
    population: usize,
    normalizer: f64,
    space: DistanceSpace,
) -> Result<KappaValue> {
    if population < 2 {
        return Err(Error::Validation(format!("kappa needs at least 2 individuals, got {population}")));
    }
    if !(normalizer.is_finite() && normalizer > 0.0) {
        return Err(Error::Validation(format!("kappa normalizer must be > 0, got {normalizer}")));
    }
    let k_max = (population * population - population) / 2;
    if distances.len() != k_max {
        return Err(Error::LengthMismatch {
            left: distances.len(),
            right: k_max,
        });
    }
    let sum: f64 = distances.iter().map(|d| (d / normalizer).min(1.0)).sum();
    Ok(KappaValue {
        value: (sum / k_max as f64).clamp(0.0, 1.0),
        space,
    })
}

pub fn kappa<T, F>(items: &[T], dist: F, normalizer: f64, space: DistanceSpace) -> Result<KappaValue>
where
    T: Sync,
    F: Fn(&T, &T) -> f64 + Sync,
{
    if items.len() < 2 {
        return Err(Error::Validation(format!("kappa needs at least 2 individuals, got {}", items.len())));
    }
    kappa_from_distances(&pairwise_distances(items, dist), items.len(), normalizer, space)
}

/// Kappa over genomes, normalised by the genome length.
pub fn kappa_hamming(genomes: &[&Placement]) -> Result<KappaValue> {
    let len = genomes.first().map_or(0, |g| g.len());
    if genomes.iter().any(|g| g.len() != len) {
        return Err(Error::Validation("genomes of different lengths".into()));
    }
    kappa(
        genomes,
        |a, b| hamming(a, b).expect("equal lengths") as f64,
        len as f64,
        DistanceSpace::Hamming,
    )
}

/// Largest pairwise Frobenius distance seen so far in a run. Only grows, so
/// Kappa-Frobenius values stay comparable across generations.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FrobeniusScale {
    max: f64,
}

impl FrobeniusScale {
    pub fn value(&self) -> f64 {
        self.max
    }

    /// Folds `distances` into the scale, then computes Kappa against it.
    pub fn kappa(&mut self, distances: &[f64], population: usize) -> Result<KappaValue> {
        if let Some(m) = distances.iter().copied().reduce(f64::max) {
            self.max = self.max.max(m);
        }
        if self.max == 0.0 {
            if population < 2 {
                return Err(Error::Validation("kappa needs at least 2 individuals".into()));
            }
            return Ok(KappaValue {
                value: 0.0,
                space: DistanceSpace::Frobenius,
            });
        }
        kappa_from_distances(distances, population, self.max, DistanceSpace::Frobenius)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinMax {
    pub min: f64,
    pub max: f64,
}

impl MinMax {
    fn of(values: impl Iterator<Item = f64>) -> Option<Self> {
        values.fold(None, |acc, v| {
            Some(match acc {
                None => MinMax { min: v, max: v },
                Some(m) => MinMax {
                    min: m.min.min(v),
                    max: m.max.max(v),
                },
            })
        })
    }
}

/// Diagnostics for one generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub generation: usize,
    /// Missing while the population has no feasible individual.
    pub hypervolume: Option<f64>,
    /// Feasible individuals whose objectives are non-dominated among the feasible ones.
    pub pareto_count: usize,
    pub feasible_count: usize,
    pub f1_minmax_feasible: Option<MinMax>,
    pub f1_minmax_infeasible: Option<MinMax>,
    pub f2_minmax_feasible: Option<MinMax>,
    pub f2_minmax_infeasible: Option<MinMax>,
    pub kappa_hamming: KappaValue,
    pub kappa_frobenius: KappaValue,
    pub min_violation: f64,
}

/// Builds the record for an evaluated population. Every individual must
/// carry objectives and a placement matrix.
pub fn record_generation(
    generation: usize,
    population: &[Individual],
    reference: ReferencePoint,
    scale: &mut FrobeniusScale,
) -> Result<GenerationRecord> {
    let objectives = population
        .iter()
        .map(|ind| ind.objectives.ok_or_else(|| Error::Validation("unevaluated individual".into())))
        .collect::<Result<Vec<ObjectivePoint>>>()?;
    let matrices = population
        .iter()
        .map(|ind| ind.matrix.as_deref().ok_or_else(|| Error::Validation("missing placement matrix".into())))
        .collect::<Result<Vec<&PlacementMatrix>>>()?;

    let feasible: Vec<ObjectivePoint> = population
        .iter()
        .zip(&objectives)
        .filter(|(ind, _)| ind.is_feasible())
        .map(|(_, p)| *p)
        .collect();
    let infeasible: Vec<ObjectivePoint> = population
        .iter()
        .zip(&objectives)
        .filter(|(ind, _)| !ind.is_feasible())
        .map(|(_, p)| *p)
        .collect();

    let (hypervolume, pareto_count) = if feasible.is_empty() {
        (None, 0)
    } else {
        let front: Vec<ObjectivePoint> = non_dominated_sort(&feasible)
            .first()
            .map(|f| f.iter().map(|&i| feasible[i]).collect())
            .unwrap_or_default();
        // points beyond the reference box enclose no area
        let inside: Vec<ObjectivePoint> = front.iter().copied().filter(|p| reference.bounds(p)).collect();
        (Some(hypervolume_2d(&inside, reference)?), front.len())
    };

    let genomes: Vec<&Placement> = population.iter().map(|ind| &ind.genome).collect();
    let kappa_hamming = kappa_hamming(&genomes)?;
    let frob = pairwise_distances(&matrices, |a, b| frobenius(a, b).expect("matrices share a shape"));
    let kappa_frobenius = scale.kappa(&frob, population.len())?;

    Ok(GenerationRecord {
        generation,
        hypervolume,
        pareto_count,
        feasible_count: feasible.len(),
        f1_minmax_feasible: MinMax::of(feasible.iter().map(|p| p.f1)),
        f1_minmax_infeasible: MinMax::of(infeasible.iter().map(|p| p.f1)),
        f2_minmax_feasible: MinMax::of(feasible.iter().map(|p| p.f2)),
        f2_minmax_infeasible: MinMax::of(infeasible.iter().map(|p| p.f2)),
        kappa_hamming,
        kappa_frobenius,
        min_violation: population.iter().map(|i| i.violation).fold(f64::INFINITY, f64::min),
    })
}

pub const TRACE_HEADER: [&str; 14] = [
    "generation",
    "hypervolume",
    "pareto_count",
    "feasible_count",
    "f1_min_feas",
    "f1_max_feas",
    "f1_min_infeas",
    "f1_max_infeas",
    "f2_min_feas",
    "f2_max_feas",
    "f2_min_infeas",
    "f2_max_infeas",
    "kappa_hamming",
    "kappa_frobenius",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_trace_csv<W: Write>(records: &[GenerationRecord], writer: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    let err = |e: csv::Error| Error::Parse(format!("csv: {e}"));
    out.write_record(TRACE_HEADER).map_err(err)?;
    for r in records {
        out.write_record([
            r.generation.to_string(),
            opt(r.hypervolume),
            r.pareto_count.to_string(),
            r.feasible_count.to_string(),
            opt(r.f1_minmax_feasible.map(|m| m.min)),
            opt(r.f1_minmax_feasible.map(|m| m.max)),
            opt(r.f1_minmax_infeasible.map(|m| m.min)),
            opt(r.f1_minmax_infeasible.map(|m| m.max)),
            opt(r.f2_minmax_feasible.map(|m| m.min)),
            opt(r.f2_minmax_feasible.map(|m| m.max)),
            opt(r.f2_minmax_infeasible.map(|m| m.min)),
            opt(r.f2_minmax_infeasible.map(|m| m.max)),
            r.kappa_hamming.value.to_string(),
            r.kappa_frobenius.value.to_string(),
        ])
        .map_err(err)?;
    }
    out.flush().map_err(|e| Error::Parse(e.to_string()))
}
