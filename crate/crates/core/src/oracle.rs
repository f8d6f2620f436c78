//! Exhaustive search over every feasible placement of a small instance.
//!
//! Gives the true Pareto set and frontier against which the engine is
//! checked, and the pairwise search-space vs information-space analysis:
//! Hamming distance between genomes, Frobenius distance between placement
//! matrices, and the objective gaps of every pair.

use std::io::Write;

use itertools::Itertools;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::events::EventTensor;
use crate::indicators::{frobenius, hamming};
use crate::pareto::{distinct_points, hypervolume_2d, strongly_dominates, ReferencePoint};
use crate::placement::{
    count_feasible, evaluate, EvalSettings, ObjectivePoint, PenaltyPolicy, Placement, PlacementMatrix,
};

pub const DEFAULT_CAP: u128 = 10_000_000;

const CHUNK: usize = 4096;

/// Every placement with 1..=p sensors, by size and then in lexicographic
/// combination order.
pub fn enumerate_feasible(n: usize, p: usize, cap: u128) -> Result<impl Iterator<Item = Placement>> {
    let count = count_feasible(n, p)?;
    if count > cap {
        return Err(Error::CapExceeded { count, cap });
    }
    Ok((1..=p).flat_map(move |k| {
        (0..n)
            .combinations(k)
            .map(move |idx| Placement::from_indices(n, &idx).expect("combination indices below n"))
    }))
}

#[derive(Debug, Clone)]
pub struct ExhaustiveResult {
    /// Every feasible placement whose point no other feasible point strongly
    /// dominates, in enumeration order.
    pub pareto_set: Vec<(Placement, ObjectivePoint)>,
    /// Distinct points of the Pareto set, sorted by `f1`.
    pub pareto_frontier: Vec<ObjectivePoint>,
    pub hypervolume: f64,
    pub reference: ReferencePoint,
    pub total_feasible: u128,
    /// Placements dropped because the penalty policy rejects undetected events.
    pub rejected: usize,
}

/// Evaluated feasible placement; `None` when the penalty policy rejects it.
fn evaluate_one(
    tensor: &EventTensor,
    settings: &EvalSettings,
    s: &Placement,
) -> Result<Option<(PlacementMatrix, ObjectivePoint)>> {
    let (h, eval) = evaluate(tensor, s, settings)?;
    if settings.penalty == PenaltyPolicy::Reject && eval.undetected > 0 {
        return Ok(None);
    }
    if !eval.point.is_finite() {
        return Err(Error::NonFinite(s.to_string()));
    }
    Ok(Some((h, eval.point)))
}

fn merge_into(archive: &mut Vec<(Placement, ObjectivePoint)>, s: Placement, point: ObjectivePoint) {
    if archive.iter().any(|(_, q)| strongly_dominates(q, &point)) {
        return;
    }
    archive.retain(|(_, q)| !strongly_dominates(&point, q));
    archive.push((s, point));
}

pub fn exhaustive_pareto(
    tensor: &EventTensor,
    settings: &EvalSettings,
    budget: usize,
    reference: ReferencePoint,
    cap: u128,
) -> Result<ExhaustiveResult> {
    settings.validate(tensor.grid())?;
    let n = tensor.num_locations();
    let total_feasible = count_feasible(n, budget)?;
    let mut archive: Vec<(Placement, ObjectivePoint)> = Vec::new();
    let mut rejected = 0;

    for chunk in &enumerate_feasible(n, budget, cap)?.chunks(CHUNK) {
        let chunk: Vec<Placement> = chunk.collect();
        let evaluated = chunk
            .par_iter()
            .map(|s| evaluate_one(tensor, settings, s).map(|r| r.map(|(_, p)| p)))
            .collect::<Result<Vec<_>>>()?;
        for (s, point) in chunk.into_iter().zip(evaluated) {
            match point {
                Some(point) => merge_into(&mut archive, s, point),
                None => rejected += 1,
            }
        }
    }

    let pareto_frontier = distinct_points(archive.iter().map(|(_, p)| *p));
    let inside: Vec<ObjectivePoint> = pareto_frontier.iter().copied().filter(|p| reference.bounds(p)).collect();
    let hypervolume = hypervolume_2d(&inside, reference)?;
    Ok(ExhaustiveResult {
        pareto_set: archive,
        pareto_frontier,
        hypervolume,
        reference,
        total_feasible,
        rejected,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairRecord {
    pub hamming: usize,
    pub frobenius: f64,
    pub df1: f64,
    pub df2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinKind {
    Hamming,
    Frobenius,
}

impl BinKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            BinKind::Hamming => "hamming",
            BinKind::Frobenius => "frobenius",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Some(MeanStd { mean, std: var.sqrt() })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinSummary {
    pub kind: BinKind,
    /// Hamming distance, or Frobenius bin index.
    pub key: usize,
    pub count: usize,
    pub frobenius: Option<MeanStd>,
    pub df1: Option<MeanStd>,
    pub df2: Option<MeanStd>,
}

#[derive(Debug, Clone)]
pub struct PairwiseAnalysis {
    pub records: Vec<PairRecord>,
    /// Upper end of the observed Frobenius range; bins split `[0, max]`.
    pub frobenius_max: f64,
    pub bin_width: f64,
    /// Hamming rows first (ascending distance), then every Frobenius bin.
    pub summary: Vec<BinSummary>,
}

/// One record per unordered pair of evaluated feasible placements plus the
/// binned summary. `cap` bounds the number of pairs.
pub fn pairwise_analysis(
    tensor: &EventTensor,
    settings: &EvalSettings,
    budget: usize,
    bins: usize,
    cap: u128,
) -> Result<PairwiseAnalysis> {
    if bins == 0 {
        return Err(Error::Validation("number of bins must be at least 1".into()));
    }
    settings.validate(tensor.grid())?;
    let n = tensor.num_locations();
    let feasible = count_feasible(n, budget)?;
    let pairs = feasible * feasible.saturating_sub(1) / 2;
    if pairs > cap {
        return Err(Error::CapExceeded { count: pairs, cap });
    }

    let placements: Vec<Placement> = enumerate_feasible(n, budget, u128::MAX)?.collect();
    let evaluated: Vec<(Placement, PlacementMatrix, ObjectivePoint)> = placements
        .into_par_iter()
        .map(|s| evaluate_one(tensor, settings, &s).map(|r| r.map(|(h, p)| (s, h, p))))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();

    let records: Vec<PairRecord> = (0..evaluated.len())
        .into_par_iter()
        .flat_map_iter(|i| {
            let evaluated = &evaluated;
            (i + 1..evaluated.len()).map(move |j| {
                let (sa, ha, pa) = &evaluated[i];
                let (sb, hb, pb) = &evaluated[j];
                PairRecord {
                    hamming: hamming(sa, sb).expect("equal genome lengths"),
                    frobenius: frobenius(ha, hb).expect("equal matrix shapes"),
                    df1: (pa.f1 - pb.f1).abs(),
                    df2: (pa.f2 - pb.f2).abs(),
                }
            })
        })
        .collect();

    let frobenius_max = records.iter().map(|r| r.frobenius).fold(0.0, f64::max);
    let bin_width = frobenius_max / bins as f64;
    let summary = summarize(&records, bins, bin_width, frobenius_max);
    Ok(PairwiseAnalysis {
        records,
        frobenius_max,
        bin_width,
        summary,
    })
}

fn frobenius_bin(value: f64, bins: usize, width: f64) -> usize {
    if width == 0.0 {
        0
    } else {
        ((value / width) as usize).min(bins - 1)
    }
}

fn summarize(records: &[PairRecord], bins: usize, width: f64, max: f64) -> Vec<BinSummary> {
    let group = |kind: BinKind, key: usize, members: &[&PairRecord]| {
        let col = |f: fn(&PairRecord) -> f64| members.iter().map(|r| f(r)).collect::<Vec<_>>();
        BinSummary {
            kind,
            key,
            count: members.len(),
            frobenius: MeanStd::of(&col(|r| r.frobenius)),
            df1: MeanStd::of(&col(|r| r.df1)),
            df2: MeanStd::of(&col(|r| r.df2)),
        }
    };

    let max_hamming = records.iter().map(|r| r.hamming).max();
    let mut by_hamming: Vec<Vec<&PairRecord>> = vec![Vec::new(); max_hamming.map_or(0, |m| m + 1)];
    let mut by_frob: Vec<Vec<&PairRecord>> = vec![Vec::new(); bins];
    for r in records {
        by_hamming[r.hamming].push(r);
        by_frob[frobenius_bin(r.frobenius, bins, width)].push(r);
    }
    debug_assert!(records.iter().all(|r| r.frobenius <= max));

    by_hamming
        .iter()
        .enumerate()
        .filter(|(_, m)| !m.is_empty())
        .map(|(h, m)| group(BinKind::Hamming, h, m))
        .chain(by_frob.iter().enumerate().map(|(b, m)| group(BinKind::Frobenius, b, m)))
        .collect()
}

pub fn write_pairs_csv<W: Write>(records: &[PairRecord], writer: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    let err = |e: csv::Error| Error::Parse(format!("csv: {e}"));
    out.write_record(["hamming", "frobenius", "df1", "df2"]).map_err(err)?;
    for r in records {
        out.write_record([
            r.hamming.to_string(),
            r.frobenius.to_string(),
            r.df1.to_string(),
            r.df2.to_string(),
        ])
        .map_err(err)?;
    }
    out.flush().map_err(|e| Error::Parse(e.to_string()))
}

pub fn write_summary_csv<W: Write>(summary: &[BinSummary], writer: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(writer);
    let err = |e: csv::Error| Error::Parse(format!("csv: {e}"));
    out.write_record([
        "bin_kind",
        "bin_key",
        "count",
        "frobenius_mean",
        "frobenius_std",
        "df1_mean",
        "df1_std",
        "df2_mean",
        "df2_std",
    ])
    .map_err(err)?;
    let ms = |m: Option<MeanStd>| match m {
        Some(m) => [m.mean.to_string(), m.std.to_string()],
        None => [String::new(), String::new()],
    };
    for b in summary {
        let [fm, fs] = ms(b.frobenius);
        let [am, as_] = ms(b.df1);
        let [bm, bs] = ms(b.df2);
        out.write_record([
            b.kind.as_str().to_string(),
            b.key.to_string(),
            b.count.to_string(),
            fm,
            fs,
            am,
            as_,
            bm,
            bs,
        ])
        .map_err(err)?;
    }
    out.flush().map_err(|e| Error::Parse(e.to_string()))
}
