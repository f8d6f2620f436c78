#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use aquaplace_core::network::{Edge, Node};
use aquaplace_core::synthetic::{random_network, SyntheticSpec};
use aquaplace_core::{simulate_plug_flow, Network, TimeGrid};

pub fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_aquaplace"))
}

pub fn aquaplace(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

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

pub fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Writes `net` plus its plug-flow tensor into `dir`; returns both paths.
pub fn write_instance(dir: &Path, net: &Network, decay: f64) -> (PathBuf, PathBuf) {
    let network = dir.join("network.json");
    let tensor = dir.join("tensor.csv");
    net.write(&network).unwrap();
    simulate_plug_flow(net, TimeGrid::default(), 100.0, decay)
        .unwrap()
        .write_csv_file(&tensor)
        .unwrap();
    (network, tensor)
}

/// Eleven junctions, as in the small benchmark network.
pub fn eleven_node_instance(dir: &Path) -> (PathBuf, PathBuf) {
    let net = random_network(&SyntheticSpec::new(11), 2).unwrap();
    write_instance(dir, &net, 1e-5)
}

pub fn lines(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path).unwrap().lines().map(str::to_owned).collect()
}
