//! Risk-aware sensor placement on water-style networks.
//!
//! Placements are binary genomes over candidate locations. Each placement
//! maps to a placement matrix (element-wise maximum of the selected sensor
//! matrices), from which the mean and standard deviation of the minimum
//! detection time over all contamination events are computed. NSGA-II
//! searches the bi-objective trade-off; an exhaustive oracle solves small
//! instances exactly; Kappa indicators track population homogeneity in both
//! the genome space and the placement-matrix space.

pub mod engine;
pub mod error;
pub mod events;
pub mod indicators;
pub mod network;
pub mod oracle;
pub mod pareto;
pub mod placement;
pub mod synthetic;

pub use engine::{run, EngineConfig, Individual, RunResult, Termination};
pub use error::{Error, Result};
pub use events::{simulate_plug_flow, EventTensor, SensorMatrix, TimeGrid};
pub use network::{parse_network, Network, NodeId};
pub use placement::{EvalSettings, ObjectivePoint, PenaltyPolicy, Placement, PlacementMatrix};
