//! Concentration data for every (location, time step, event) triple.
//!
//! An [`EventTensor`] is either simulated with the built-in plug-flow model
//! or ingested from a sparse CSV export produced by an external hydraulic
//! simulator. Slices at a fixed location are [`SensorMatrix`] views.

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use petgraph::algo::dijkstra;
use petgraph::graph::{DiGraph, NodeIndex};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{Network, NodeId};

const WEIGHT_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    delta_t: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(delta_t: f64, steps: usize) -> Result<Self> {
        if !(delta_t.is_finite() && delta_t > 0.0) {
            return Err(Error::Validation(format!("time step must be positive, got {delta_t}")));
        }
        if steps == 0 {
            return Err(Error::Validation("number of steps K must be at least 1".into()));
        }
        Ok(TimeGrid { delta_t, steps })
    }

    /// Seconds per step.
    pub fn delta_t(&self) -> f64 {
        self.delta_t
    }

    /// K; the grid has K + 1 rows, t = 0..=K.
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn rows(&self) -> usize {
        self.steps + 1
    }

    pub fn t_max(&self) -> f64 {
        self.steps as f64 * self.delta_t
    }
}

impl Default for TimeGrid {
    /// One-hour steps over a 24 hour horizon.
    fn default() -> Self {
        TimeGrid {
            delta_t: 3600.0,
            steps: 24,
        }
    }
}

/// Dense concentration tensor laid out as `[location][t][event]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EventTensor {
    grid: TimeGrid,
    locations: Vec<NodeId>,
    events: Vec<NodeId>,
    values: Vec<f64>,
    weights: Vec<f64>,
}

impl EventTensor {
    /// Builds a tensor from a flat `[location][t][event]` buffer. `weights`
    /// defaults to uniform.
    pub fn from_parts(
        grid: TimeGrid,
        locations: Vec<NodeId>,
        events: Vec<NodeId>,
        values: Vec<f64>,
        weights: Option<Vec<f64>>,
    ) -> Result<Self> {
        if locations.is_empty() || events.is_empty() {
            return Err(Error::Validation("tensor needs at least one location and one event".into()));
        }
        let expected = locations.len() * grid.rows() * events.len();
        if values.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "expected {expected} concentration cells, got {}",
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Validation(format!("invalid concentration {bad}")));
        }
        let weights = match weights {
            Some(w) => {
                validate_weights(&w, events.len())?;
                w
            }
            None => uniform_weights(events.len()),
        };
        Ok(EventTensor {
            grid,
            locations,
            events,
            values,
            weights,
        })
    }

    pub fn zeros(grid: TimeGrid, locations: Vec<NodeId>, events: Vec<NodeId>) -> Result<Self> {
        let n = locations.len() * grid.rows() * events.len();
        EventTensor::from_parts(grid, locations, events, vec![0.0; n], None)
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn locations(&self) -> &[NodeId] {
        &self.locations
    }

    pub fn events(&self) -> &[NodeId] {
        &self.events
    }

    pub fn num_locations(&self) -> usize {
        self.locations.len()
    }

    pub fn num_events(&self) -> usize {
        self.events.len()
    }

    /// Event probabilities, one per event, summing to one.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        validate_weights(&weights, self.events.len())?;
        self.weights = weights;
        Ok(self)
    }

    pub fn get(&self, location: usize, t: usize, event: usize) -> f64 {
        self.values[self.offset(location, t, event)]
    }

    fn offset(&self, location: usize, t: usize, event: usize) -> usize {
        (location * self.grid.rows() + t) * self.events.len() + event
    }

    fn slab_len(&self) -> usize {
        self.grid.rows() * self.events.len()
    }

    /// Raw `[t][event]` slab of one location.
    pub(crate) fn slab(&self, location: usize) -> &[f64] {
        let n = self.slab_len();
        &self.values[location * n..(location + 1) * n]
    }

    pub fn sensor_matrix(&self, location: usize) -> Result<SensorMatrix<'_>> {
        if location >= self.locations.len() {
            return Err(Error::OutOfRange {
                index: location,
                len: self.locations.len(),
            });
        }
        Ok(SensorMatrix {
            grid: self.grid,
            events: self.events.len(),
            values: self.slab(location),
        })
    }

    /// Writes one `location,event,t,concentration` row per nonzero cell.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(["location", "event", "t", "concentration"])
            .map_err(csv_error)?;
        for (l, loc) in self.locations.iter().enumerate() {
            for t in 0..self.grid.rows() {
                for (a, ev) in self.events.iter().enumerate() {
                    let c = self.get(l, t, a);
                    if c != 0.0 {
                        out.write_record([loc.as_str(), ev.as_str(), &t.to_string(), &c.to_string()])
                            .map_err(csv_error)?;
                    }
                }
            }
        }
        out.flush().map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn write_csv_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    pub fn write_weights_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(["event", "weight"]).map_err(csv_error)?;
        for (ev, w) in self.events.iter().zip(&self.weights) {
            out.write_record([ev.as_str(), &w.to_string()]).map_err(csv_error)?;
        }
        out.flush().map_err(|e| Error::Parse(e.to_string()))
    }
}

/// Read-only `(K + 1) x |A|` view of one location's concentrations.
#[derive(Debug, Clone, Copy)]
pub struct SensorMatrix<'a> {
    grid: TimeGrid,
    events: usize,
    values: &'a [f64],
}

impl<'a> SensorMatrix<'a> {
    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn num_events(&self) -> usize {
        self.events
    }

    pub fn get(&self, t: usize, event: usize) -> f64 {
        self.values[t * self.events + event]
    }

    pub fn column(&self, event: usize) -> Vec<f64> {
        (0..self.grid.rows()).map(|t| self.get(t, event)).collect()
    }

    pub fn as_slice(&self) -> &'a [f64] {
        self.values
    }
}

fn uniform_weights(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

fn validate_weights(weights: &[f64], events: usize) -> Result<()> {
    if weights.len() != events {
        return Err(Error::LengthMismatch {
            left: weights.len(),
            right: events,
        });
    }
    if let Some(bad) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
        return Err(Error::Validation(format!("invalid event weight {bad}")));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(Error::Validation(format!("event weights sum to {sum}, expected 1")));
    }
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    Error::Parse(format!("csv: {e}"))
}

/// Shortest-travel-time plug flow: every event injects `c0` at its source at
/// t = 0, the pulse reaches each node after the shortest directed travel
/// time, decays by `exp(-decay * travel)` and then persists to the horizon.
pub fn simulate_plug_flow(net: &Network, grid: TimeGrid, c0: f64, decay: f64) -> Result<EventTensor> {
    if !(c0.is_finite() && c0 >= 0.0) {
        return Err(Error::Validation(format!("injected concentration must be >= 0, got {c0}")));
    }
    if !(decay.is_finite() && decay >= 0.0) {
        return Err(Error::Validation(format!("decay rate must be >= 0, got {decay}")));
    }

    let mut graph = DiGraph::<(), f64>::with_capacity(net.nodes().len(), net.edges().len());
    let idx: Vec<NodeIndex> = net.nodes().iter().map(|_| graph.add_node(())).collect();
    for edge in net.edges() {
        if !(edge.travel_time.is_finite() && edge.travel_time > 0.0) {
            return Err(Error::Validation(format!(
                "edge {} -> {} lacks a positive travel time",
                edge.from, edge.to
            )));
        }
        let from = net.node_position(&edge.from).expect("validated network");
        let to = net.node_position(&edge.to).expect("validated network");
        graph.add_edge(idx[from], idx[to], edge.travel_time);
    }

    let location_nodes: Vec<NodeIndex> = net
        .sensor_locations()
        .iter()
        .map(|id| idx[net.node_position(id).expect("validated network")])
        .collect();

    // arrival[a][l]: travel time from event source a to location l
    let arrival: Vec<Vec<Option<f64>>> = net
        .event_sources()
        .par_iter()
        .map(|src| {
            let start = idx[net.node_position(src).expect("validated network")];
            let dist = dijkstra(&graph, start, None, |e| *e.weight());
            location_nodes.iter().map(|n| dist.get(n).copied()).collect()
        })
        .collect();

    let events = net.event_sources().len();
    let rows = grid.rows();
    let mut values = vec![0.0; net.sensor_locations().len() * rows * events];
    for (a, per_location) in arrival.iter().enumerate() {
        for (l, travel) in per_location.iter().enumerate() {
            let Some(travel) = *travel else { continue };
            let level = c0 * (-decay * travel).exp();
            for t in 0..rows {
                if t as f64 * grid.delta_t() >= travel {
                    values[(l * rows + t) * events + a] = level;
                }
            }
        }
    }

    EventTensor::from_parts(
        grid,
        net.sensor_locations().to_vec(),
        net.event_sources().to_vec(),
        values,
        None,
    )
}

#[derive(Debug, Deserialize)]
struct TensorRow {
    location: String,
    event: String,
    t: usize,
    concentration: f64,
}

#[derive(Debug, Deserialize)]
struct WeightRow {
    event: String,
    weight: f64,
}

/// Reads a sparse tensor CSV; cells not listed are zero.
pub fn read_event_tensor<R: Read>(reader: R, net: &Network, grid: TimeGrid) -> Result<EventTensor> {
    let mut tensor = EventTensor::zeros(
        grid,
        net.sensor_locations().to_vec(),
        net.event_sources().to_vec(),
    )?;
    let mut seen = HashSet::new();
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(csv_error)?.clone();
    if headers.iter().collect::<Vec<_>>() != ["location", "event", "t", "concentration"] {
        return Err(Error::Parse(format!(
            "tensor header must be location,event,t,concentration, got {}",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    for row in rdr.deserialize::<TensorRow>() {
        let row = row.map_err(csv_error)?;
        let l = net.index_of_location(&NodeId::new(row.location))?;
        let a = net.index_of_event(&NodeId::new(row.event))?;
        if row.t > grid.steps() {
            return Err(Error::Validation(format!("step {} beyond K = {}", row.t, grid.steps())));
        }
        if !(row.concentration.is_finite() && row.concentration >= 0.0) {
            return Err(Error::Validation(format!("invalid concentration {}", row.concentration)));
        }
        if !seen.insert((l, row.t, a)) {
            return Err(Error::Parse(format!("duplicate cell ({l}, {}, {a})", row.t)));
        }
        let off = tensor.offset(l, row.t, a);
        tensor.values[off] = row.concentration;
    }
    Ok(tensor)
}

/// Reads an `event,weight` CSV; every event source must be listed once.
pub fn read_event_weights<R: Read>(reader: R, net: &Network) -> Result<Vec<f64>> {
    let n = net.event_sources().len();
    let mut weights = vec![f64::NAN; n];
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    for row in rdr.deserialize::<WeightRow>() {
        let row = row.map_err(csv_error)?;
        let a = net.index_of_event(&NodeId::new(row.event.clone()))?;
        if !weights[a].is_nan() {
            return Err(Error::Parse(format!("duplicate weight for event '{}'", row.event)));
        }
        weights[a] = row.weight;
    }
    if let Some(a) = weights.iter().position(|w| w.is_nan()) {
        return Err(Error::Validation(format!(
            "no weight given for event '{}'",
            net.event_sources()[a]
        )));
    }
    validate_weights(&weights, n)?;
    Ok(weights)
}

pub fn load_event_tensor(
    path: impl AsRef<Path>,
    net: &Network,
    grid: TimeGrid,
    weights_path: Option<&Path>,
) -> Result<EventTensor> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let tensor = read_event_tensor(std::io::BufReader::new(file), net, grid)?;
    match weights_path {
        Some(wp) => {
            let file = std::fs::File::open(wp).map_err(|e| Error::io(wp, e))?;
            let weights = read_event_weights(std::io::BufReader::new(file), net)?;
            tensor.with_weights(weights)
        }
        None => Ok(tensor),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Edge, Node};

    pub(crate) fn line_net() -> Network {
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

    fn line_tensor() -> EventTensor {
        simulate_plug_flow(&line_net(), TimeGrid::default(), 100.0, 0.0).unwrap()
    }

    #[test]
    fn grid_rules() {
        let g = TimeGrid::default();
        assert_eq!(g.steps(), 24);
        assert_eq!(g.delta_t(), 3600.0);
        assert_eq!(g.t_max(), 86400.0);
        assert!(TimeGrid::new(0.0, 3).is_err());
        assert!(TimeGrid::new(1.0, 0).is_err());
    }

    #[test]
    fn plug_flow_two_hops() {
        let tensor = line_tensor();
        // C is location 2, A is event 0
        for t in 0..=24 {
            let want = if t >= 2 { 100.0 } else { 0.0 };
            assert_eq!(tensor.get(2, t, 0), want, "t = {t}");
        }
    }

    #[test]
    fn plug_flow_injection_and_unreachable() {
        let tensor = line_tensor();
        for a in 0..4 {
            assert_eq!(tensor.get(a, 0, a), 100.0);
        }
        // nothing flows upstream from D to A
        assert!((0..=24).all(|t| tensor.get(0, t, 3) == 0.0));
        assert_eq!(tensor.weights(), &[0.25; 4]);
    }

    #[test]
    fn plug_flow_decay() {
        let tensor = simulate_plug_flow(&line_net(), TimeGrid::default(), 100.0, 1e-4).unwrap();
        let expected = 100.0 * (-1e-4f64 * 7200.0).exp();
        assert_eq!(tensor.get(2, 5, 0), expected);
        assert!(simulate_plug_flow(&line_net(), TimeGrid::default(), 100.0, -1.0).is_err());
    }

    #[test]
    fn sensor_matrix_slices() {
        let tensor = line_tensor();
        let s = tensor.sensor_matrix(1).unwrap();
        let mut want = vec![100.0; 25];
        want[0] = 0.0;
        assert_eq!(s.column(0), want);
        assert!(matches!(tensor.sensor_matrix(4), Err(Error::OutOfRange { .. })));

        let zeros = EventTensor::zeros(TimeGrid::default(), vec!["A".into()], vec!["A".into()]).unwrap();
        assert!(zeros.sensor_matrix(0).unwrap().as_slice().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn csv_defaults_missing_cells() {
        let csv = "location,event,t,concentration\nB,A,1,100\nB,A,2,100\n";
        let t = read_event_tensor(csv.as_bytes(), &line_net(), TimeGrid::default()).unwrap();
        assert_eq!(t.get(1, 1, 0), 100.0);
        assert_eq!(t.get(1, 0, 0), 0.0);

        let empty = "location,event,t,concentration\n";
        let t = read_event_tensor(empty.as_bytes(), &line_net(), TimeGrid::default()).unwrap();
        assert!(t.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn csv_rejects_bad_rows() {
        let net = line_net();
        let g = TimeGrid::default();
        for body in [
            "B,A,1,-1",
            "Z,A,1,1",
            "B,Z,1,1",
            "B,A,25,1",
            "B,A,x,1",
            "B,A,1,1\nB,A,1,2",
        ] {
            let csv = format!("location,event,t,concentration\n{body}\n");
            assert!(read_event_tensor(csv.as_bytes(), &net, g).is_err(), "{body}");
        }
        assert!(read_event_tensor("a,b,c,d\n".as_bytes(), &net, g).is_err());
    }

    #[test]
    fn weights_csv() {
        let net = line_net();
        let w = read_event_weights("event,weight\nA,0.5\nB,0.25\nC,0.125\nD,0.125\n".as_bytes(), &net).unwrap();
        assert_eq!(w, vec![0.5, 0.25, 0.125, 0.125]);
        assert!(read_event_weights("event,weight\nA,0.5\nB,0.5\n".as_bytes(), &net).is_err());
        assert!(read_event_weights("event,weight\nA,1\nB,0.5\nC,0\nD,-0.5\n".as_bytes(), &net).is_err());
    }
}
