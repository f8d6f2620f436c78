//! Sensor placements, their placement matrices and the two objectives.
//!
//! A placement `s` selects a subset of candidate locations. Its placement
//! matrix holds, for every time step and event, the largest concentration
//! seen by any selected sensor. Minimum detection times are read off that
//! matrix and summarised by their weighted mean (`f1`) and weighted
//! population standard deviation (`f2`).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::events::{EventTensor, TimeGrid};

/// Binary genome over the ordered candidate locations.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Placement {
    bits: Vec<bool>,
}

impl Placement {
    pub fn new(bits: Vec<bool>) -> Self {
        Placement { bits }
    }

    pub fn empty(len: usize) -> Self {
        Placement { bits: vec![false; len] }
    }

    pub fn from_indices(len: usize, selected: &[usize]) -> Result<Self> {
        let mut bits = vec![false; len];
        for &i in selected {
            if i >= len {
                return Err(Error::OutOfRange { index: i, len });
            }
            bits[i] = true;
        }
        Ok(Placement { bits })
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn bit(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn set(&mut self, i: usize, value: bool) {
        self.bits[i] = value;
    }

    pub fn flip(&mut self, i: usize) {
        self.bits[i] = !self.bits[i];
    }

    /// Number of deployed sensors.
    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn selected(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter().enumerate().filter(|(_, b)| **b).map(|(i, _)| i)
    }
}

impl fmt::Display for Placement {
    /// Bitstring with the leftmost character for the first location.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for Placement {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::Parse(format!("invalid placement character '{other}'"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Placement::new)
    }
}

/// `(K + 1) x |A|` element-wise maximum over the selected sensor matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct PlacementMatrix {
    grid: TimeGrid,
    events: usize,
    values: Vec<f64>,
}

impl PlacementMatrix {
    pub fn from_rows(grid: TimeGrid, rows: &[Vec<f64>]) -> Result<Self> {
        if rows.len() != grid.rows() {
            return Err(Error::ShapeMismatch(format!(
                "expected {} rows, got {}",
                grid.rows(),
                rows.len()
            )));
        }
        let events = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != events) {
            return Err(Error::ShapeMismatch("ragged rows".into()));
        }
        Ok(PlacementMatrix {
            grid,
            events,
            values: rows.concat(),
        })
    }

    pub fn zeros(grid: TimeGrid, events: usize) -> Self {
        PlacementMatrix {
            grid,
            events,
            values: vec![0.0; grid.rows() * events],
        }
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn num_events(&self) -> usize {
        self.events
    }

    pub fn get(&self, t: usize, event: usize) -> f64 {
        self.values[t * self.events + event]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }
}

pub fn placement_matrix(tensor: &EventTensor, s: &Placement) -> Result<PlacementMatrix> {
    if s.len() != tensor.num_locations() {
        return Err(Error::LengthMismatch {
            left: s.len(),
            right: tensor.num_locations(),
        });
    }
    let mut selected = s.selected();
    let first = selected.next().ok_or(Error::EmptyPlacement)?;
    let mut values = tensor.slab(first).to_vec();
    for l in selected {
        for (h, &c) in values.iter_mut().zip(tensor.slab(l)) {
            if c > *h {
                *h = c;
            }
        }
    }
    Ok(PlacementMatrix {
        grid: tensor.grid(),
        events: tensor.num_events(),
        values,
    })
}

/// Like [`placement_matrix`] but maps the empty placement to the zero matrix.
pub fn placement_matrix_or_zero(tensor: &EventTensor, s: &Placement) -> Result<PlacementMatrix> {
    match placement_matrix(tensor, s) {
        Err(Error::EmptyPlacement) => Ok(PlacementMatrix::zeros(tensor.grid(), tensor.num_events())),
        other => other,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Detection {
    /// First step index at which the threshold is reached.
    Detected(usize),
    Undetected,
}

/// First step `t` in `1..=K` with `h[t][a] >= threshold`.
pub fn detect(h: &PlacementMatrix, event: usize, threshold: f64) -> Result<Detection> {
    detect_from(h, event, threshold, 1)
}

/// Same as [`detect`], scanning rows `first_row..=K`.
pub fn detect_from(h: &PlacementMatrix, event: usize, threshold: f64, first_row: usize) -> Result<Detection> {
    if !(threshold.is_finite() && threshold > 0.0) {
        return Err(Error::Validation(format!("detection threshold must be > 0, got {threshold}")));
    }
    if event >= h.events {
        return Err(Error::OutOfRange {
            index: event,
            len: h.events,
        });
    }
    Ok((first_row..h.grid.rows())
        .find(|&t| h.get(t, event) >= threshold)
        .map_or(Detection::Undetected, Detection::Detected))
}

/// How undetected events enter the objectives.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyPolicy {
    /// One step past the horizon, `(K + 1) * dt` seconds.
    #[default]
    Horizon,
    /// A fixed detection time in seconds, at least `K * dt`.
    FixedSeconds(f64),
    /// Any undetected event makes the placement infeasible.
    Reject,
}

impl PenaltyPolicy {
    /// Detection time charged to undetected events. `Reject` reports the
    /// horizon penalty so infeasible individuals still have objectives.
    pub fn seconds(&self, grid: TimeGrid) -> f64 {
        match *self {
            PenaltyPolicy::FixedSeconds(s) => s,
            PenaltyPolicy::Horizon | PenaltyPolicy::Reject => grid.rows() as f64 * grid.delta_t(),
        }
    }

    pub fn validate(&self, grid: TimeGrid) -> Result<()> {
        if let PenaltyPolicy::FixedSeconds(s) = *self {
            if !(s.is_finite() && s >= grid.t_max()) {
                return Err(Error::Config(format!(
                    "fixed penalty {s} s must be finite and at least the horizon {} s",
                    grid.t_max()
                )));
            }
        }
        Ok(())
    }
}

/// Threshold, penalty policy and detection window shared by every evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalSettings {
    pub threshold: f64,
    pub penalty: PenaltyPolicy,
    /// Count signals at t = 0 as detection time zero.
    pub include_t0: bool,
}

impl EvalSettings {
    pub fn new(threshold: f64) -> Self {
        EvalSettings {
            threshold,
            penalty: PenaltyPolicy::Horizon,
            include_t0: false,
        }
    }

    pub fn with_penalty(mut self, penalty: PenaltyPolicy) -> Self {
        self.penalty = penalty;
        self
    }

    pub fn validate(&self, grid: TimeGrid) -> Result<()> {
        if !(self.threshold.is_finite() && self.threshold > 0.0) {
            return Err(Error::Config(format!("threshold must be > 0, got {}", self.threshold)));
        }
        self.penalty.validate(grid)
    }

    fn first_row(&self) -> usize {
        usize::from(!self.include_t0)
    }
}

/// `(f1, f2)` in seconds: weighted mean and standard deviation of detection times.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectivePoint {
    pub f1: f64,
    pub f2: f64,
}

impl ObjectivePoint {
    pub fn new(f1: f64, f2: f64) -> Self {
        ObjectivePoint { f1, f2 }
    }

    pub fn is_finite(&self) -> bool {
        self.f1.is_finite() && self.f2.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub point: ObjectivePoint,
    pub undetected: usize,
}

/// Per-event detection times in seconds, penalty applied.
pub fn detection_times(h: &PlacementMatrix, settings: &EvalSettings) -> Result<(Vec<f64>, usize)> {
    let dt = h.grid.delta_t();
    let penalty = settings.penalty.seconds(h.grid);
    let mut undetected = 0;
    let times = (0..h.events)
        .map(|a| {
            Ok(match detect_from(h, a, settings.threshold, settings.first_row())? {
                Detection::Detected(t) => t as f64 * dt,
                Detection::Undetected => {
                    undetected += 1;
                    penalty
                }
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((times, undetected))
}

pub fn evaluate_matrix(h: &PlacementMatrix, weights: &[f64], settings: &EvalSettings) -> Result<Evaluation> {
    if weights.len() != h.events {
        return Err(Error::LengthMismatch {
            left: weights.len(),
            right: h.events,
        });
    }
    let (times, undetected) = detection_times(h, settings)?;
    let f1: f64 = weights.iter().zip(&times).map(|(w, t)| w * t).sum();
    let var: f64 = weights
        .iter()
        .zip(&times)
        .map(|(w, t)| w * (t - f1) * (t - f1))
        .sum();
    Ok(Evaluation {
        point: ObjectivePoint::new(f1, var.max(0.0).sqrt()),
        undetected,
    })
}

/// Builds the placement matrix and evaluates it. Under
/// [`PenaltyPolicy::Reject`] the returned point uses the horizon penalty and
/// `undetected` reports how many events were missed.
pub fn evaluate(tensor: &EventTensor, s: &Placement, settings: &EvalSettings) -> Result<(PlacementMatrix, Evaluation)> {
    let h = placement_matrix(tensor, s)?;
    let eval = evaluate_matrix(&h, tensor.weights(), settings)?;
    Ok((h, eval))
}

pub fn objectives(tensor: &EventTensor, s: &Placement, settings: &EvalSettings) -> Result<ObjectivePoint> {
    settings.validate(tensor.grid())?;
    let (_, eval) = evaluate(tensor, s, settings)?;
    if settings.penalty == PenaltyPolicy::Reject && eval.undetected > 0 {
        return Err(Error::Undetected {
            undetected: eval.undetected,
        });
    }
    Ok(eval.point)
}

/// Budget excess plus one for the empty placement; zero iff `1 <= |s| <= p`.
pub fn violation(s: &Placement, budget: usize) -> f64 {
    let n = s.count();
    let excess = n.saturating_sub(budget) as f64;
    excess + if n == 0 { 1.0 } else { 0.0 }
}

/// Number of placements with between 1 and `p` sensors out of `n` locations.
pub fn count_feasible(n: usize, p: usize) -> Result<u128> {
    if p < 1 || p > n {
        return Err(Error::Validation(format!("budget p = {p} must satisfy 1 <= p <= {n}")));
    }
    let mut total: u128 = 0;
    let mut binom: u128 = 1;
    for k in 1..=p {
        // C(n, k) = C(n, k - 1) * (n - k + 1) / k; dividing out the common
        // factor first keeps intermediates no larger than the result
        let g = gcd(binom, k as u128);
        let factor = (n - k + 1) as u128 / (k as u128 / g);
        binom = (binom / g)
            .checked_mul(factor)
            .ok_or_else(|| Error::Validation("feasible count overflows".into()))?;
        total = total
            .checked_add(binom)
            .ok_or_else(|| Error::Validation("feasible count overflows".into()))?;
    }
    Ok(total)
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}
