//! Command implementations behind the `aquaplace` binary.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use aquaplace_core::events::{read_event_tensor, read_event_weights};
use aquaplace_core::indicators::write_trace_csv;
use aquaplace_core::oracle::{exhaustive_pareto, pairwise_analysis, write_pairs_csv, write_summary_csv, DEFAULT_CAP};
use aquaplace_core::pareto::ReferencePoint;
use aquaplace_core::{
    run, simulate_plug_flow, EngineConfig, EvalSettings, EventTensor, Network, ObjectivePoint, PenaltyPolicy,
    Placement, TimeGrid,
};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] aquaplace_core::Error),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid arguments: {0}")]
    Usage(String),
}

impl CliError {
    /// 0 ok, 1 I/O or runtime, 2 validation, 3 enumeration cap.
    pub fn exit_code(&self) -> i32 {
        use aquaplace_core::Error as E;
        match self {
            CliError::Io { .. } => 1,
            CliError::Usage(_) => 2,
            CliError::Core(e) => match e {
                E::Io { .. } | E::NonFinite(_) => 1,
                E::CapExceeded { .. } => 3,
                _ => 2,
            },
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "aquaplace", version, about = "Bi-objective sensor placement for contamination detection")]
pub struct Cli {
    /// Worker threads for parallel evaluation. Outputs do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the plug-flow simulator and write the event tensor CSV.
    Simulate(SimulateArgs),
    /// Run NSGA-II and write pareto.csv, indicators.csv and manifest.json.
    Optimize(OptimizeArgs),
    /// Enumerate every feasible placement and write the true Pareto set.
    Exhaustive(ExhaustiveArgs),
    /// Pairwise genome vs placement-matrix distances over all feasible placements.
    Analyze(AnalyzeArgs),
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    /// Time step in seconds.
    #[arg(long, default_value_t = 3600.0)]
    pub dt: f64,
    /// Number of steps K; the grid has K + 1 rows.
    #[arg(long, default_value_t = 24)]
    pub steps: usize,
}

impl GridArgs {
    fn grid(&self) -> CliResult<TimeGrid> {
        Ok(TimeGrid::new(self.dt, self.steps)?)
    }
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    #[arg(long)]
    pub network: PathBuf,
    #[arg(long)]
    pub tensor: PathBuf,
    /// Optional `event,weight` CSV; uniform weights otherwise.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    #[command(flatten)]
    pub grid: GridArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub network: PathBuf,
    /// Output tensor CSV path.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Injected concentration.
    #[arg(long, default_value_t = 100.0, allow_negative_numbers = true)]
    pub c0: f64,
    /// First-order decay rate per second.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub decay: f64,
}

#[derive(Debug, Clone, Args)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Engine configuration JSON.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the seed in the configuration.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Detection threshold.
    #[arg(long)]
    pub tau: f64,
    /// Sensor budget.
    #[arg(long)]
    pub p: usize,
    /// Refuse to enumerate more than this many placements (or pairs).
    #[arg(long, default_value_t = DEFAULT_CAP)]
    pub cap: u128,
    /// Penalty for undetected events in seconds; one step past the horizon by default.
    #[arg(long)]
    pub penalty: Option<f64>,
    #[arg(long)]
    pub include_t0: bool,
    #[arg(long)]
    pub out: PathBuf,
}

impl OracleArgs {
    fn settings(&self) -> EvalSettings {
        let mut s = EvalSettings::new(self.tau);
        if let Some(v) = self.penalty {
            s.penalty = PenaltyPolicy::FixedSeconds(v);
        }
        s.include_t0 = self.include_t0;
        s
    }
}

#[derive(Debug, Clone, Args)]
pub struct ExhaustiveArgs {
    #[command(flatten)]
    pub oracle: OracleArgs,
    /// Reference point as `r1,r2` in seconds.
    #[arg(long, value_parser = parse_reference)]
    pub reference: Option<ReferencePoint>,
}

#[derive(Debug, Clone, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub oracle: OracleArgs,
    /// Number of equal-width Frobenius bins.
    #[arg(long, default_value_t = 8)]
    pub bins: usize,
}

fn parse_reference(s: &str) -> Result<ReferencePoint, String> {
    let (a, b) = s.split_once(',').ok_or("expected r1,r2")?;
    let num = |x: &str| x.trim().parse::<f64>().map_err(|e| e.to_string());
    Ok(ReferencePoint::new(num(a)?, num(b)?))
}

pub fn run_cli(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        // fails only if a pool already exists, which is harmless
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match cli.command {
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Optimize(a) => cmd_optimize(&a).map(|_| ()),
        Command::Exhaustive(a) => {
            let summary = cmd_exhaustive(&a)?;
            println!("{}", to_json(&summary)?);
            Ok(())
        }
        Command::Analyze(a) => cmd_analyze(&a),
    }
}

fn read_bytes(path: &Path) -> CliResult<Vec<u8>> {
    std::fs::read(path).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.to_owned(),
            source,
        })?;
    }
    std::fs::write(path, bytes).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })
}

fn to_json<T: Serialize>(value: &T) -> CliResult<String> {
    serde_json::to_string_pretty(value).map_err(|e| CliError::Usage(e.to_string()))
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn parse_network_bytes(bytes: &[u8]) -> CliResult<Network> {
    let text = std::str::from_utf8(bytes).map_err(|e| aquaplace_core::Error::Parse(format!("network: {e}")))?;
    Ok(Network::from_json_str(text)?)
}

/// Inputs read once; digests describe exactly the bytes that were parsed.
struct Loaded {
    network: Network,
    tensor: EventTensor,
    digests: Vec<InputDigest>,
}

#[derive(Debug, Serialize)]
pub struct InputDigest {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

fn digest(role: &str, path: &Path, bytes: &[u8]) -> InputDigest {
    InputDigest {
        role: role.into(),
        path: path.display().to_string(),
        sha256: sha256_hex(bytes),
    }
}

fn load_inputs(input: &InputArgs) -> CliResult<Loaded> {
    let grid = input.grid.grid()?;
    let net_bytes = read_bytes(&input.network)?;
    let tensor_bytes = read_bytes(&input.tensor)?;
    let mut digests = vec![
        digest("network", &input.network, &net_bytes),
        digest("tensor", &input.tensor, &tensor_bytes),
    ];
    let network = parse_network_bytes(&net_bytes)?;
    let mut tensor = read_event_tensor(tensor_bytes.as_slice(), &network, grid)?;
    if let Some(path) = &input.weights {
        let bytes = read_bytes(path)?;
        digests.push(digest("weights", path, &bytes));
        tensor = tensor.with_weights(read_event_weights(bytes.as_slice(), &network)?)?;
    }
    log::info!(
        "loaded {} locations x {} events x {} rows",
        tensor.num_locations(),
        tensor.num_events(),
        grid.rows()
    );
    Ok(Loaded {
        network,
        tensor,
        digests,
    })
}

pub fn cmd_simulate(args: &SimulateArgs) -> CliResult<()> {
    let grid = args.grid.grid()?;
    let network = parse_network_bytes(&read_bytes(&args.network)?)?;
    let tensor = simulate_plug_flow(&network, grid, args.c0, args.decay)?;
    let mut buf = Vec::new();
    tensor.write_csv(&mut buf)?;
    write_file(&args.out, &buf)
}

fn placements_csv<'a>(rows: impl IntoIterator<Item = &'a (Placement, ObjectivePoint)>) -> String {
    let mut out = String::from("bitstring,f1_s,f2_s\n");
    for (s, p) in rows {
        let _ = writeln!(out, "{s},{},{}", p.f1, p.f2);
    }
    out
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub config: EngineConfig,
    pub grid: GridSnapshot,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<InputDigest>,
    pub generations: usize,
    pub termination: String,
    pub duration_s: f64,
}

#[derive(Debug, Serialize)]
pub struct GridSnapshot {
    pub delta_t_s: f64,
    pub steps: usize,
}

pub fn cmd_optimize(args: &OptimizeArgs) -> CliResult<RunManifest> {
    let started = Instant::now();
    let config_bytes = read_bytes(&args.config)?;
    let text = std::str::from_utf8(&config_bytes).map_err(|e| aquaplace_core::Error::Config(e.to_string()))?;
    let mut config = EngineConfig::from_json_str(text)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    config.validate()?;
    let loaded = load_inputs(&args.input)?;
    let mut inputs = loaded.digests;
    inputs.push(digest("config", &args.config, &config_bytes));

    let result = run(&loaded.network, &loaded.tensor, &config)?;
    log::info!(
        "stopped after {} generations: {}",
        result.trace.len(),
        result.termination
    );

    let pareto = placements_csv(&result.pareto_set);
    let mut indicators = Vec::new();
    write_trace_csv(&result.trace, &mut indicators)?;
    let mut outputs = Vec::new();
    for (name, bytes) in [("pareto.csv", pareto.as_bytes()), ("indicators.csv", indicators.as_slice())] {
        let path = args.out.join(name);
        write_file(&path, bytes)?;
        outputs.push(digest("output", &path, bytes));
    }

    let grid = loaded.tensor.grid();
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config,
        grid: GridSnapshot {
            delta_t_s: grid.delta_t(),
            steps: grid.steps(),
        },
        inputs,
        outputs,
        generations: result.trace.len(),
        termination: result.termination.to_string(),
        duration_s: started.elapsed().as_secs_f64(),
    };
    write_file(&args.out.join("manifest.json"), to_json(&manifest)?.as_bytes())?;
    Ok(manifest)
}

#[derive(Debug, Clone, Serialize)]
pub struct ExhaustiveSummary {
    pub locations: usize,
    pub events: usize,
    pub budget: usize,
    pub threshold: f64,
    pub total_feasible: u128,
    pub rejected: usize,
    pub pareto_set_size: usize,
    pub frontier_size: usize,
    pub hypervolume: f64,
    pub reference: ReferencePoint,
    pub frontier: Vec<ObjectivePoint>,
}

pub fn cmd_exhaustive(args: &ExhaustiveArgs) -> CliResult<ExhaustiveSummary> {
    let o = &args.oracle;
    let loaded = load_inputs(&o.input)?;
    let tensor = &loaded.tensor;
    let settings = o.settings();
    settings.validate(tensor.grid())?;
    let reference = args
        .reference
        .unwrap_or_else(|| aquaplace_core::engine::default_reference(settings.penalty, tensor));
    let mut res = exhaustive_pareto(tensor, &settings, o.p, reference, o.cap)?;
    res.pareto_set.sort_by(|a, b| {
        a.1.f1
            .total_cmp(&b.1.f1)
            .then(a.1.f2.total_cmp(&b.1.f2))
            .then_with(|| a.0.cmp(&b.0))
    });

    let mut frontier = String::from("f1_s,f2_s\n");
    for p in &res.pareto_frontier {
        let _ = writeln!(frontier, "{},{}", p.f1, p.f2);
    }
    let summary = ExhaustiveSummary {
        locations: tensor.num_locations(),
        events: tensor.num_events(),
        budget: o.p,
        threshold: o.tau,
        total_feasible: res.total_feasible,
        rejected: res.rejected,
        pareto_set_size: res.pareto_set.len(),
        frontier_size: res.pareto_frontier.len(),
        hypervolume: res.hypervolume,
        reference: res.reference,
        frontier: res.pareto_frontier.clone(),
    };
    write_file(&o.out.join("true_pareto.csv"), placements_csv(&res.pareto_set).as_bytes())?;
    write_file(&o.out.join("true_frontier.csv"), frontier.as_bytes())?;
    write_file(&o.out.join("summary.json"), to_json(&summary)?.as_bytes())?;
    Ok(summary)
}

pub fn cmd_analyze(args: &AnalyzeArgs) -> CliResult<()> {
    let o = &args.oracle;
    let loaded = load_inputs(&o.input)?;
    let analysis = pairwise_analysis(&loaded.tensor, &o.settings(), o.p, args.bins, o.cap)?;
    log::info!(
        "{} pairs, max frobenius {}",
        analysis.records.len(),
        analysis.frobenius_max
    );
    let mut pairs = Vec::new();
    write_pairs_csv(&analysis.records, &mut pairs)?;
    let mut summary = Vec::new();
    write_summary_csv(&analysis.summary, &mut summary)?;
    write_file(&o.out.join("pairs.csv"), &pairs)?;
    write_file(&o.out.join("pairwise_summary.csv"), &summary)
}
