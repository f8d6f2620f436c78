//! Network graph: nodes, directed edges with travel times, and the ordered
//! candidate sensor locations and contamination sources.
//!
//! The ordering of `sensor_locations` fixes the genome bit index of every
//! location, and the ordering of `event_sources` fixes the column index of
//! every event in the tensors built on top of the network.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(String);

impl NodeId {
    pub fn new(id: impl Into<String>) -> Self {
        NodeId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for NodeId {
    fn from(s: &str) -> Self {
        NodeId(s.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Junction,
    Tank,
    Reservoir,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub kind: NodeKind,
}

impl Node {
    pub fn junction(id: &str) -> Self {
        Node {
            id: id.into(),
            kind: NodeKind::Junction,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub from: NodeId,
    pub to: NodeId,
    /// Plug-flow travel time in seconds.
    #[serde(rename = "travel_time_s")]
    pub travel_time: f64,
}

impl Edge {
    pub fn new(from: &str, to: &str, travel_time: f64) -> Self {
        Edge {
            from: from.into(),
            to: to.into(),
            travel_time,
        }
    }
}

/// On-disk layout of a network file.
#[derive(Debug, Serialize, Deserialize)]
struct NetworkFile {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sensor_locations: Option<Vec<NodeId>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    event_sources: Option<Vec<NodeId>>,
}

/// A validated, immutable network.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    sensor_locations: Vec<NodeId>,
    event_sources: Vec<NodeId>,
    node_index: HashMap<NodeId, usize>,
    location_index: HashMap<NodeId, usize>,
    event_index: HashMap<NodeId, usize>,
}

impl Network {
    /// Builds and validates a network. Missing `sensor_locations` default to
    /// every junction in node order; missing `event_sources` default to the
    /// sensor locations.
    pub fn new(
        nodes: Vec<Node>,
        edges: Vec<Edge>,
        sensor_locations: Option<Vec<NodeId>>,
        event_sources: Option<Vec<NodeId>>,
    ) -> Result<Self> {
        let mut node_index = HashMap::with_capacity(nodes.len());
        for (i, node) in nodes.iter().enumerate() {
            if node.id.as_str().is_empty() {
                return Err(Error::Validation("empty node id".into()));
            }
            if node_index.insert(node.id.clone(), i).is_some() {
                return Err(Error::Validation(format!("duplicate node id '{}'", node.id)));
            }
        }

        for edge in &edges {
            for end in [&edge.from, &edge.to] {
                if !node_index.contains_key(end) {
                    return Err(Error::Validation(format!(
                        "edge {} -> {} references unknown node '{}'",
                        edge.from, edge.to, end
                    )));
                }
            }
            if edge.from == edge.to {
                return Err(Error::Validation(format!("self-loop edge on '{}'", edge.from)));
            }
            if !(edge.travel_time.is_finite() && edge.travel_time > 0.0) {
                return Err(Error::Validation(format!(
                    "edge {} -> {} has non-positive travel time {}",
                    edge.from, edge.to, edge.travel_time
                )));
            }
        }

        let sensor_locations = sensor_locations.unwrap_or_else(|| {
            nodes
                .iter()
                .filter(|n| n.kind == NodeKind::Junction)
                .map(|n| n.id.clone())
                .collect()
        });
        let event_sources = event_sources.unwrap_or_else(|| sensor_locations.clone());

        let location_index = index_subset("sensor_locations", &sensor_locations, &node_index)?;
        let event_index = index_subset("event_sources", &event_sources, &node_index)?;

        Ok(Network {
            nodes,
            edges,
            sensor_locations,
            event_sources,
            node_index,
            location_index,
            event_index,
        })
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: NetworkFile =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("network: {e}")))?;
        Network::new(file.nodes, file.edges, file.sensor_locations, file.event_sources)
    }

    /// Serializes with explicit location and source lists so the orderings
    /// survive a round trip.
    pub fn to_json_string(&self) -> String {
        let file = NetworkFile {
            nodes: self.nodes.clone(),
            edges: self.edges.clone(),
            sensor_locations: Some(self.sensor_locations.clone()),
            event_sources: Some(self.event_sources.clone()),
        };
        serde_json::to_string_pretty(&file).expect("network serialization cannot fail")
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json_string()).map_err(|e| Error::io(path, e))
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn sensor_locations(&self) -> &[NodeId] {
        &self.sensor_locations
    }

    pub fn event_sources(&self) -> &[NodeId] {
        &self.event_sources
    }

    pub fn node_position(&self, id: &NodeId) -> Option<usize> {
        self.node_index.get(id).copied()
    }

    /// Genome bit index of a candidate sensor location.
    pub fn index_of_location(&self, id: &NodeId) -> Result<usize> {
        self.location_index
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownLocation(id.to_string()))
    }

    /// Tensor column index of a contamination source.
    pub fn index_of_event(&self, id: &NodeId) -> Result<usize> {
        self.event_index
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownEvent(id.to_string()))
    }
}

pub fn parse_network(path: impl AsRef<Path>) -> Result<Network> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Network::from_json_str(&text)
}

fn index_subset(
    what: &str,
    ids: &[NodeId],
    nodes: &HashMap<NodeId, usize>,
) -> Result<HashMap<NodeId, usize>> {
    if ids.is_empty() {
        return Err(Error::Validation(format!("{what} is empty")));
    }
    let mut seen = HashSet::with_capacity(ids.len());
    let mut index = HashMap::with_capacity(ids.len());
    for (i, id) in ids.iter().enumerate() {
        if !nodes.contains_key(id) {
            return Err(Error::Validation(format!("{what} references unknown node '{id}'")));
        }
        if !seen.insert(id) {
            return Err(Error::Validation(format!("{what} lists '{id}' twice")));
        }
        index.insert(id.clone(), i);
    }
    Ok(index)
}
