//! Command-line harness: dataset generation, single simulation runs,
//! algorithm comparisons and the ablation matrix.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use fairdvrp::baselines::AlgorithmKind;
use fairdvrp::data::{
    generate_synthetic, load_graph_csv, load_parking_csv, load_taxi_csv, save_graph_csv,
    save_parking_csv, SyntheticParams,
};
use fairdvrp::experiment::{run_compare, summary_table, write_results, ExperimentSpec};
use fairdvrp::fairga::GaConfig;
use fairdvrp::metrics::AreaPartition;
use fairdvrp::simulator::{
    initial_placement, run_simulation, write_placement_json, PlacementMode, Scenario,
    ScenarioConfig,
};
use fairdvrp::world::{CustomerRequest, NodeId, ProviderId, RoadGraph};

#[derive(Parser)]
#[command(
    name = "fairdvrp",
    about = "Dynamic vehicle routing with two-sided fairness: simulator and benchmarks",
    version
)]
struct Cli {
    /// Master random seed.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// GA parameter file (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file or directory, subcommand dependent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic lattice world and violation stream.
    Generate(GenerateArgs),
    /// Run one simulation and write a metrics report.
    Simulate(SimulateArgs),
    /// Run an algorithm x fleet-size x seed grid and summarize it.
    Compare(CompareArgs),
    /// Run the six-variant ablation matrix.
    Ablate(AblateArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value_t = 400)]
    bays: usize,
    #[arg(long, default_value_t = 1900.0)]
    extent_m: f64,
    /// Violations per bay per hour.
    #[arg(long, default_value_t = 0.25)]
    rate: f64,
    /// Mean illegal stay, minutes.
    #[arg(long, default_value_t = 30.0)]
    mean_stay: f64,
    #[arg(long, default_value_t = 480)]
    horizon: u32,
    #[arg(long, default_value_t = 4)]
    area_rows: usize,
    #[arg(long, default_value_t = 4)]
    area_cols: usize,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value = "non_compliance")]
    scenario: String,
    #[arg(long, default_value = "2fairga")]
    algo: String,
    #[arg(long, default_value_t = 20)]
    providers: u32,
    /// Directory holding nodes.csv / edges.csv.
    #[arg(long)]
    graph: PathBuf,
    /// Event CSV (parking schema or taxi schema, per scenario).
    #[arg(long)]
    events: PathBuf,
    /// Trace CSV: one row per minute per provider.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Defaults to the last request start plus one hour.
    #[arg(long)]
    horizon: Option<u32>,
    #[arg(long, default_value_t = 1)]
    cadence: u32,
    #[arg(long, default_value_t = 30.0)]
    mean_stay: f64,
    #[arg(long, default_value_t = 4)]
    area_rows: usize,
    #[arg(long, default_value_t = 4)]
    area_cols: usize,
    /// clustered | random | fixed (defaults to the algorithm's definition).
    #[arg(long)]
    placement: Option<String>,
    /// Provider -> node JSON map, required for fixed placement.
    #[arg(long)]
    placement_file: Option<PathBuf>,
    /// Write the initial placement actually used.
    #[arg(long)]
    placement_out: Option<PathBuf>,
    /// Seed each GA epoch with the previous best plan.
    #[arg(long, conflicts_with = "cold_start")]
    warm_start: bool,
    /// Restart GA populations each epoch (the default).
    #[arg(long)]
    cold_start: bool,
    #[arg(long)]
    max_gen: Option<u32>,
    #[arg(long)]
    population: Option<usize>,
    /// Append per-generation best fitness rows to this CSV.
    #[arg(long)]
    ga_trace: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    events: PathBuf,
    #[arg(long, default_value = "non_compliance")]
    scenario: String,
    /// Comma-separated algorithm list.
    #[arg(long, default_value = "2fairga,ga,greedy,nearest", value_delimiter = ',')]
    algos: Vec<String>,
    #[arg(long, default_value = "20,30,50", value_delimiter = ',')]
    providers: Vec<u32>,
    /// Comma-separated seed list (distinct).
    #[arg(long, default_value = "0,1,2", value_delimiter = ',')]
    seeds: Vec<u64>,
    #[arg(long)]
    horizon: Option<u32>,
    #[arg(long, default_value_t = 30.0)]
    mean_stay: f64,
    #[arg(long)]
    max_gen: Option<u32>,
    #[arg(long)]
    population: Option<usize>,
    /// Seed each GA epoch with the previous best plan.
    #[arg(long, conflicts_with = "cold_start")]
    warm_start: bool,
    /// Restart GA populations each epoch (the default).
    #[arg(long)]
    cold_start: bool,
}

#[derive(Args)]
struct AblateArgs {
    #[command(flatten)]
    compare: CompareArgs,
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Generate(ref args) => generate(&cli, args),
        Command::Simulate(ref args) => simulate(&cli, args),
        Command::Compare(ref args) => compare(&cli, args, None),
        Command::Ablate(ref args) => {
            let algos = fairdvrp::baselines::ABLATION_ALGORITHMS.to_vec();
            compare(&cli, &args.compare, Some(algos))
        }
    }
}

fn ga_config(cli: &Cli, max_gen: Option<u32>, population: Option<usize>) -> anyhow::Result<GaConfig> {
    let mut ga = match &cli.config {
        Some(path) => GaConfig::load_json(path).with_context(|| format!("loading {path:?}"))?,
        None => GaConfig::default(),
    };
    if let Some(m) = max_gen {
        ga.max_gen = m;
    }
    if let Some(p) = population {
        ga.population_size = p;
    }
    ga.validate()?;
    Ok(ga)
}

fn generate(cli: &Cli, args: &GenerateArgs) -> anyhow::Result<()> {
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("dataset"));
    let params = SyntheticParams {
        bays: args.bays,
        extent_m: args.extent_m,
        poisson_rate: args.rate,
        exp_mean_stay: args.mean_stay,
        horizon_min: args.horizon,
        seed: cli.seed,
        area_rows: args.area_rows,
        area_cols: args.area_cols,
    };
    let (graph, events) = generate_synthetic(&params)?;
    save_graph_csv(&graph, &out)?;
    save_parking_csv(&events, &graph, &out.join("events.csv"))?;
    serde_json::to_writer_pretty(File::create(out.join("params.json"))?, &params)?;
    println!(
        "wrote {} nodes, {} edges, {} events to {}",
        graph.node_count(),
        graph.edge_count(),
        events.len(),
        out.display()
    );
    Ok(())
}

fn load_events(
    scenario: Scenario,
    path: &PathBuf,
    graph: &RoadGraph,
    area_rows: usize,
    area_cols: usize,
) -> anyhow::Result<Vec<CustomerRequest>> {
    let events = match scenario {
        Scenario::NonCompliance => load_parking_csv(path, graph)?,
        Scenario::RideHailing => {
            let partition = AreaPartition::covering(graph, area_rows, area_cols)?;
            load_taxi_csv(path, graph, &partition)?
        }
    };
    Ok(events)
}

fn default_horizon(events: &[CustomerRequest]) -> u32 {
    events
        .iter()
        .map(|r| r.window_start)
        .fold(0.0_f64, f64::max)
        .ceil() as u32
        + 60
}

fn simulate(cli: &Cli, args: &SimulateArgs) -> anyhow::Result<()> {
    let scenario: Scenario = args.scenario.parse()?;
    let algo: AlgorithmKind = args.algo.parse()?;
    let graph = load_graph_csv(&args.graph)?;
    let events = load_events(scenario, &args.events, &graph, args.area_rows, args.area_cols)?;
    if events.is_empty() {
        bail!("event file {:?} holds no usable events", args.events);
    }

    let placement = match args.placement.as_deref() {
        None => {
            if algo.uses_clustered_placement() {
                PlacementMode::Clustered
            } else {
                PlacementMode::Random
            }
        }
        Some("clustered") => PlacementMode::Clustered,
        Some("random") => PlacementMode::Random,
        Some("fixed") => {
            let path = args
                .placement_file
                .as_ref()
                .context("--placement fixed requires --placement-file")?;
            let raw: BTreeMap<String, u32> = serde_json::from_reader(File::open(path)?)?;
            let map = raw
                .into_iter()
                .map(|(k, v)| Ok((ProviderId(k.parse()?), NodeId(v))))
                .collect::<anyhow::Result<BTreeMap<_, _>>>()?;
            PlacementMode::Fixed(map)
        }
        Some(other) => bail!("unknown placement mode '{other}'"),
    };

    let cfg = ScenarioConfig {
        scenario,
        horizon_min: args.horizon.unwrap_or_else(|| default_horizon(&events)),
        epoch_cadence: args.cadence,
        num_providers: args.providers,
        placement,
        area_rows: args.area_rows,
        area_cols: args.area_cols,
        seed: cli.seed,
        mean_stay: args.mean_stay,
        warm_start: args.warm_start,
        ..ScenarioConfig::default()
    };

    if let Some(path) = &args.placement_out {
        let placement = initial_placement(&cfg, &graph, &events)?;
        write_placement_json(&placement, path)?;
    }

    let mut ga = ga_config(cli, args.max_gen, args.population)?;
    ga.fitness_trace = args.ga_trace.clone();
    let mut dispatcher = algo.build(ga, args.warm_start);

    let mut trace_file = match &args.trace {
        Some(path) => Some(File::create(path)?),
        None => None,
    };
    let report = run_simulation(
        &cfg,
        &graph,
        &events,
        dispatcher.as_mut(),
        trace_file.as_mut().map(|f| f as &mut dyn Write),
    )?;

    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("report.json"));
    report.write_json(&out)?;
    println!(
        "{}: utility {:.2}, provider fairness {:.4}, customer fairness {:.6}, distance {:.0} m, served {}, expired {} -> {}",
        algo.id(),
        report.total_utility,
        report.provider_fairness,
        report.customer_fairness,
        report.total_distance_m,
        report.served,
        report.expired,
        out.display()
    );
    Ok(())
}

fn compare(
    cli: &Cli,
    args: &CompareArgs,
    fixed_algos: Option<Vec<AlgorithmKind>>,
) -> anyhow::Result<()> {
    let scenario: Scenario = args.scenario.parse()?;
    let graph = load_graph_csv(&args.graph)?;
    let events = load_events(scenario, &args.events, &graph, 4, 4)?;
    if events.is_empty() {
        bail!("event file {:?} holds no usable events", args.events);
    }

    let algorithms = match fixed_algos {
        Some(a) => a,
        None => args
            .algos
            .iter()
            .map(|s| s.parse())
            .collect::<fairdvrp::Result<Vec<AlgorithmKind>>>()?,
    };
    let mut spec = ExperimentSpec::new(scenario, args.horizon.unwrap_or_else(|| default_horizon(&events)));
    spec.algorithms = algorithms;
    spec.provider_counts = args.providers.clone();
    spec.seeds = args.seeds.iter().map(|s| s.wrapping_add(cli.seed)).collect();
    spec.mean_stay = args.mean_stay;
    spec.warm_start = args.warm_start;
    spec.ga = ga_config(cli, args.max_gen, args.population)?;
    spec.events_label = args.events.display().to_string();

    let outcome = run_compare(&spec, &graph, &events)?;
    let out_dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("results"));
    write_results(&spec, &outcome, &out_dir)?;
    print!("{}", summary_table(&outcome));
    println!("rows appended to {}", out_dir.join("results.csv").display());
    if !outcome.failures.is_empty() {
        for (cell, err) in &outcome.failures {
            eprintln!("cell {cell} failed: {err}");
        }
        bail!("{} cell(s) failed", outcome.failures.len());
    }
    Ok(())
}
