//! NSGA-II over binary placement genomes.
//!
//! Feasibility follows constraint domination: feasible individuals are
//! ranked by non-dominated sorting and crowding distance, infeasible ones by
//! their violation. Objective evaluation runs in parallel; selection,
//! variation and survival consume the seeded RNG in a fixed sequential order
//! so runs are reproducible regardless of thread count.

use std::cmp::Ordering;
use std::fmt;
use std::sync::Arc;

use log::{debug, info};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::EventTensor;
use crate::indicators::{record_generation, FrobeniusScale, GenerationRecord};
use crate::network::Network;
use crate::pareto::{crowding_distance, distinct_points, non_dominated_sort, ReferencePoint};
use crate::placement::{
    evaluate, violation, EvalSettings, ObjectivePoint, PenaltyPolicy, Placement, PlacementMatrix,
};

#[derive(Debug, Clone)]
pub struct Individual {
    pub genome: Placement,
    pub objectives: Option<ObjectivePoint>,
    pub violation: f64,
    /// Events the placement misses; counts towards `violation` under
    /// [`PenaltyPolicy::Reject`].
    pub undetected: usize,
    pub rank: Option<usize>,
    pub crowding: Option<f64>,
    pub matrix: Option<Arc<PlacementMatrix>>,
}

impl Individual {
    pub fn new(genome: Placement) -> Self {
        Individual {
            genome,
            objectives: None,
            violation: 0.0,
            undetected: 0,
            rank: None,
            crowding: None,
            matrix: None,
        }
    }

    pub fn is_evaluated(&self) -> bool {
        self.objectives.is_some()
    }

    pub fn is_feasible(&self) -> bool {
        self.violation == 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrossoverKind {
    #[default]
    TwoPoint,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    /// Every bit is an independent fair coin.
    #[default]
    Uniform,
    /// Between 1 and `budget` distinct random locations.
    BudgetAware,
}

/// Stopping rules, combined with OR.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    MaxGenerations,
    KappaHamming(f64),
    KappaFrobenius(f64),
    /// No hypervolume improvement for this many consecutive generations.
    HypervolumeStagnant(usize),
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Termination::MaxGenerations => write!(f, "max_generations"),
            Termination::KappaHamming(e) => write!(f, "kappa_hamming <= {e}"),
            Termination::KappaFrobenius(e) => write!(f, "kappa_frobenius <= {e}"),
            Termination::HypervolumeStagnant(g) => write!(f, "hypervolume stagnant for {g} generations"),
        }
    }
}

fn default_population() -> usize {
    40
}
fn default_generations() -> usize {
    100
}
fn default_crossover_rate() -> f64 {
    0.9
}
fn default_termination() -> Vec<Termination> {
    vec![Termination::MaxGenerations]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineConfig {
    #[serde(default = "default_population")]
    pub population_size: usize,
    /// Generation 0 is the initial population; the run records at most
    /// `max(max_generations, 1)` generations.
    #[serde(default = "default_generations")]
    pub max_generations: usize,
    /// Maximum number of sensors `p`.
    pub budget: usize,
    /// Detection threshold on concentration.
    pub threshold: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub crossover: CrossoverKind,
    #[serde(default = "default_crossover_rate")]
    pub crossover_rate: f64,
    /// Per-bit flip probability; `None` means `1 / |L|`.
    #[serde(default)]
    pub mutation_rate: Option<f64>,
    #[serde(default = "default_termination")]
    pub termination: Vec<Termination>,
    #[serde(default)]
    pub penalty: PenaltyPolicy,
    /// `None` means `(penalty + dt, penalty + dt)`.
    #[serde(default)]
    pub reference_point: Option<ReferencePoint>,
    #[serde(default)]
    pub include_t0: bool,
    #[serde(default)]
    pub sampling: Sampling,
}

impl EngineConfig {
    pub fn new(budget: usize, threshold: f64) -> Self {
        EngineConfig {
            population_size: default_population(),
            max_generations: default_generations(),
            budget,
            threshold,
            seed: 0,
            crossover: CrossoverKind::default(),
            crossover_rate: default_crossover_rate(),
            mutation_rate: None,
            termination: default_termination(),
            penalty: PenaltyPolicy::default(),
            reference_point: None,
            include_t0: false,
            sampling: Sampling::default(),
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let mu = self.population_size;
        if mu < 4 || !mu.is_multiple_of(2) {
            return Err(Error::Config(format!("population_size must be even and >= 4, got {mu}")));
        }
        if self.budget < 1 {
            return Err(Error::Config("budget must be at least 1".into()));
        }
        if !(self.threshold.is_finite() && self.threshold > 0.0) {
            return Err(Error::Config(format!("threshold must be > 0, got {}", self.threshold)));
        }
        let rates = [Some(self.crossover_rate), self.mutation_rate];
        if let Some(r) = rates.into_iter().flatten().find(|r| !(0.0..=1.0).contains(r)) {
            return Err(Error::Config(format!("rate {r} outside [0, 1]")));
        }
        for t in &self.termination {
            match *t {
                Termination::KappaHamming(e) | Termination::KappaFrobenius(e) if !(e.is_finite() && e > 0.0) => {
                    return Err(Error::Config(format!("kappa epsilon must be > 0, got {e}")));
                }
                Termination::HypervolumeStagnant(0) => {
                    return Err(Error::Config("hypervolume stagnation window must be >= 1".into()));
                }
                _ => {}
            }
        }
        if let Some(r) = self.reference_point {
            if !(r.r1.is_finite() && r.r2.is_finite()) {
                return Err(Error::Config("reference point must be finite".into()));
            }
        }
        Ok(())
    }

    pub fn eval_settings(&self) -> EvalSettings {
        EvalSettings {
            threshold: self.threshold,
            penalty: self.penalty,
            include_t0: self.include_t0,
        }
    }

    pub fn mutation_rate_for(&self, len: usize) -> f64 {
        self.mutation_rate.unwrap_or(1.0 / len as f64)
    }

    pub fn reference_for(&self, tensor: &EventTensor) -> ReferencePoint {
        self.reference_point
            .unwrap_or_else(|| default_reference(self.penalty, tensor))
    }
}

/// `(penalty + dt, penalty + dt)`, fixed for the whole run.
pub fn default_reference(penalty: PenaltyPolicy, tensor: &EventTensor) -> ReferencePoint {
    let grid = tensor.grid();
    let r = penalty.seconds(grid) + grid.delta_t();
    ReferencePoint::new(r, r)
}

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random initial genomes, unevaluated.
pub fn initialize<R: Rng>(config: &EngineConfig, len: usize, rng: &mut R) -> Result<Vec<Individual>> {
    config.validate()?;
    if len == 0 {
        return Err(Error::Config("no candidate locations".into()));
    }
    Ok((0..config.population_size)
        .map(|_| {
            let genome = match config.sampling {
                Sampling::Uniform => Placement::new((0..len).map(|_| rng.random_bool(0.5)).collect()),
                Sampling::BudgetAware => {
                    let k = rng.random_range(1..=config.budget.min(len));
                    let picks = rand::seq::index::sample(rng, len, k).into_vec();
                    Placement::from_indices(len, &picks).expect("indices below len")
                }
            };
            Individual::new(genome)
        })
        .collect())
}

/// Evaluates objectives, violation and placement matrix of every
/// unevaluated individual. The empty genome gets `(penalty, 0)` and a zero
/// matrix.
pub fn evaluate_population(
    tensor: &EventTensor,
    settings: &EvalSettings,
    budget: usize,
    population: &mut [Individual],
) -> Result<()> {
    population
        .par_iter_mut()
        .filter(|ind| !ind.is_evaluated())
        .try_for_each(|ind| {
            let base = violation(&ind.genome, budget);
            if ind.genome.count() == 0 {
                ind.objectives = Some(ObjectivePoint::new(settings.penalty.seconds(tensor.grid()), 0.0));
                ind.matrix = Some(Arc::new(PlacementMatrix::zeros(tensor.grid(), tensor.num_events())));
                ind.violation = base;
                ind.undetected = tensor.num_events();
                return Ok(());
            }
            let (h, eval) = evaluate(tensor, &ind.genome, settings)?;
            if !eval.point.is_finite() {
                return Err(Error::NonFinite(ind.genome.to_string()));
            }
            ind.objectives = Some(eval.point);
            ind.matrix = Some(Arc::new(h));
            ind.undetected = eval.undetected;
            ind.violation = base
                + match settings.penalty {
                    PenaltyPolicy::Reject => eval.undetected as f64,
                    _ => 0.0,
                };
            Ok(())
        })
}

/// Ranks and crowding distances among the feasible individuals; infeasible
/// ones get `None` for both.
pub fn assign_rank_and_crowding(population: &mut [Individual]) {
    let feasible: Vec<usize> = (0..population.len())
        .filter(|&i| population[i].is_feasible())
        .collect();
    for ind in population.iter_mut() {
        ind.rank = None;
        ind.crowding = None;
    }
    let points: Vec<ObjectivePoint> = feasible
        .iter()
        .map(|&i| population[i].objectives.expect("evaluated"))
        .collect();
    for (rank, front) in non_dominated_sort(&points).into_iter().enumerate() {
        let front_points: Vec<ObjectivePoint> = front.iter().map(|&k| points[k]).collect();
        let crowding = crowding_distance(&front_points);
        for (&k, d) in front.iter().zip(crowding) {
            let ind = &mut population[feasible[k]];
            ind.rank = Some(rank);
            ind.crowding = Some(d);
        }
    }
}

/// Constraint-domination preference between two evaluated individuals.
pub fn constrained_better<'a>(a: &'a Individual, b: &'a Individual) -> Result<&'a Individual> {
    if !a.is_evaluated() || !b.is_evaluated() {
        return Err(Error::Validation("cannot compare unevaluated individuals".into()));
    }
    Ok(match compare(a, b)? {
        Ordering::Greater => b,
        _ => a,
    })
}

/// `Less` means `a` is preferred.
fn compare(a: &Individual, b: &Individual) -> Result<Ordering> {
    Ok(match (a.is_feasible(), b.is_feasible()) {
        (true, false) => Ordering::Less,
        (false, true) => Ordering::Greater,
        (false, false) => a.violation.total_cmp(&b.violation),
        (true, true) => {
            let unranked = || Error::Validation("feasible individual has no rank".into());
            let (ra, rb) = (a.rank.ok_or_else(unranked)?, b.rank.ok_or_else(unranked)?);
            let (ca, cb) = (a.crowding.unwrap_or(0.0), b.crowding.unwrap_or(0.0));
            ra.cmp(&rb).then(cb.total_cmp(&ca))
        }
    })
}

fn tournament<'a, R: Rng>(parents: &'a [Individual], rng: &mut R) -> Result<&'a Individual> {
    let i = rng.random_range(0..parents.len());
    let j = rng.random_range(0..parents.len());
    constrained_better(&parents[i], &parents[j])
}

/// Swaps the segment `[cuts.0, cuts.1)` between two parents.
pub fn two_point_crossover(a: &Placement, b: &Placement, cuts: (usize, usize)) -> (Placement, Placement) {
    let (lo, hi) = cuts;
    let mut x = a.clone();
    let mut y = b.clone();
    for i in lo..hi {
        x.set(i, b.bit(i));
        y.set(i, a.bit(i));
    }
    (x, y)
}

fn uniform_crossover<R: Rng>(a: &Placement, b: &Placement, rng: &mut R) -> (Placement, Placement) {
    let mut x = a.clone();
    let mut y = b.clone();
    for i in 0..a.len() {
        if rng.random_bool(0.5) {
            x.set(i, b.bit(i));
            y.set(i, a.bit(i));
        }
    }
    (x, y)
}

fn mutate<R: Rng>(genome: &mut Placement, rate: f64, rng: &mut R) {
    for i in 0..genome.len() {
        if rng.random_bool(rate) {
            genome.flip(i);
        }
    }
}

/// Binary tournament, crossover and bit-flip mutation; returns `mu`
/// unevaluated children.
pub fn make_offspring<R: Rng>(parents: &[Individual], config: &EngineConfig, rng: &mut R) -> Result<Vec<Individual>> {
    let mu = config.population_size;
    let len = parents.first().map_or(0, |p| p.genome.len());
    let rate = config.mutation_rate_for(len);
    let mut children = Vec::with_capacity(mu);
    while children.len() < mu {
        let a = &tournament(parents, rng)?.genome;
        let b = &tournament(parents, rng)?.genome;
        let (mut x, mut y) = if rng.random_bool(config.crossover_rate) {
            match config.crossover {
                CrossoverKind::TwoPoint => {
                    let picks = rand::seq::index::sample(rng, len + 1, 2);
                    let (c1, c2) = (picks.index(0), picks.index(1));
                    two_point_crossover(a, b, (c1.min(c2), c1.max(c2)))
                }
                CrossoverKind::Uniform => uniform_crossover(a, b, rng),
            }
        } else {
            (a.clone(), b.clone())
        };
        mutate(&mut x, rate, rng);
        mutate(&mut y, rate, rng);
        children.push(Individual::new(x));
        if children.len() < mu {
            children.push(Individual::new(y));
        }
    }
    Ok(children)
}

/// Elitist survival of `mu` out of the merged pool: feasible individuals by
/// rank then descending crowding, then infeasible ones by ascending violation.
pub fn survive(mut pool: Vec<Individual>, mu: usize) -> Result<Vec<Individual>> {
    if pool.iter().any(|ind| !ind.is_evaluated()) {
        return Err(Error::Validation("survival needs an evaluated pool".into()));
    }
    assign_rank_and_crowding(&mut pool);
    let mut order: Vec<usize> = (0..pool.len()).collect();
    let mut err = None;
    order.sort_by(|&i, &j| {
        compare(&pool[i], &pool[j]).unwrap_or_else(|e| {
            err = Some(e);
            Ordering::Equal
        })
    });
    if let Some(e) = err {
        return Err(e);
    }
    let keep: std::collections::HashSet<usize> = order.into_iter().take(mu).collect();
    let mut next: Vec<Individual> = pool
        .into_iter()
        .enumerate()
        .filter(|(i, _)| keep.contains(i))
        .map(|(_, ind)| ind)
        .collect();
    assign_rank_and_crowding(&mut next);
    Ok(next)
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub population: Vec<Individual>,
    /// Distinct feasible rank-0 genomes of the final population, ordered by
    /// objectives then bitstring.
    pub pareto_set: Vec<(Placement, ObjectivePoint)>,
    /// Distinct objective points of `pareto_set`, ordered by `f1`.
    pub frontier: Vec<ObjectivePoint>,
    pub trace: Vec<GenerationRecord>,
    pub termination: Termination,
}

/// Runs NSGA-II until the first termination rule fires. Generation 0 is the
/// evaluated initial population and is always recorded.
pub fn run(net: &Network, tensor: &EventTensor, config: &EngineConfig) -> Result<RunResult> {
    config.validate()?;
    if tensor.locations() != net.sensor_locations() || tensor.events() != net.event_sources() {
        return Err(Error::ShapeMismatch("tensor orderings do not match the network".into()));
    }
    let settings = config.eval_settings();
    settings.validate(tensor.grid())?;
    let reference = config.reference_for(tensor);
    let len = tensor.num_locations();
    let limit = config.max_generations.max(1);

    let mut rng = rng_from_seed(config.seed);
    let mut population = initialize(config, len, &mut rng)?;
    evaluate_population(tensor, &settings, config.budget, &mut population)?;
    assign_rank_and_crowding(&mut population);

    let mut scale = FrobeniusScale::default();
    let mut trace = Vec::new();
    let mut best_hv: Option<f64> = None;
    let mut stagnant = 0usize;
    let mut generation = 0usize;

    let termination = loop {
        let record = record_generation(generation, &population, reference, &mut scale)?;
        if let Some(hv) = record.hypervolume {
            if best_hv.is_none_or(|b| hv > b) {
                best_hv = Some(hv);
                stagnant = 0;
            } else {
                stagnant += 1;
            }
        }
        debug!(
            "generation {generation}: feasible {} pareto {} hv {:?} kappa_h {:.4} kappa_f {:.4}",
            record.feasible_count,
            record.pareto_count,
            record.hypervolume,
            record.kappa_hamming.value,
            record.kappa_frobenius.value
        );

        let at_limit = generation + 1 >= limit;
        let fired = config.termination.iter().copied().find(|t| match *t {
            Termination::MaxGenerations => at_limit,
            Termination::KappaHamming(e) => record.kappa_hamming.satisfied(e),
            Termination::KappaFrobenius(e) => record.kappa_frobenius.satisfied(e),
            Termination::HypervolumeStagnant(g) => stagnant >= g,
        });
        trace.push(record);
        if let Some(t) = fired {
            break t;
        }
        if at_limit {
            break Termination::MaxGenerations;
        }

        let mut children = make_offspring(&population, config, &mut rng)?;
        evaluate_population(tensor, &settings, config.budget, &mut children)?;
        population.extend(children);
        population = survive(population, config.population_size)?;
        generation += 1;
    };
    info!("run stopped after {} generation(s): {termination}", trace.len());

    let mut pareto_set: Vec<(Placement, ObjectivePoint)> = population
        .iter()
        .filter(|ind| ind.rank == Some(0))
        .map(|ind| (ind.genome.clone(), ind.objectives.expect("evaluated")))
        .collect();
    pareto_set.sort_by(|(ga, pa), (gb, pb)| {
        pa.f1
            .total_cmp(&pb.f1)
            .then(pa.f2.total_cmp(&pb.f2))
            .then_with(|| ga.to_string().cmp(&gb.to_string()))
    });
    pareto_set.dedup_by(|a, b| a.0 == b.0);
    let frontier = distinct_points(pareto_set.iter().map(|(_, p)| *p));

    Ok(RunResult {
        population,
        pareto_set,
        frontier,
        trace,
        termination,
    })
}
