//! Compare 2FairGA against the plain GA and the greedy baselines on a small
//! synthetic instance and print the per-algorithm means.
//!
//! ```bash
//! cargo run --release --example compare_algorithms
//! ```

use fairdvrp::baselines::AlgorithmKind;
use fairdvrp::data::{generate_synthetic, SyntheticParams};
use fairdvrp::experiment::{run_compare, summary_table, write_results, ExperimentSpec};
use fairdvrp::fairga::GaConfig;
use fairdvrp::simulator::Scenario;

fn main() -> anyhow::Result<()> {
    let params = SyntheticParams {
        bays: 100,
        extent_m: 900.0,
        poisson_rate: 0.4,
        horizon_min: 180,
        seed: 3,
        ..SyntheticParams::default()
    };
    let (graph, events) = generate_synthetic(&params)?;

    let mut spec = ExperimentSpec::new(Scenario::NonCompliance, params.horizon_min);
    spec.algorithms = vec![
        AlgorithmKind::TwoFairGa,
        AlgorithmKind::Ga,
        AlgorithmKind::GreedyProbability,
        AlgorithmKind::Nearest,
    ];
    spec.provider_counts = vec![5];
    spec.seeds = vec![0, 1, 2];
    spec.ga = GaConfig { max_gen: 40, ..GaConfig::default() };
    spec.events_label = "example".into();

    let outcome = run_compare(&spec, &graph, &events)?;
    print!("{}", summary_table(&outcome));

    let out = std::env::temp_dir().join("fairdvrp-compare");
    write_results(&spec, &outcome, &out)?;
    println!("raw rows appended to {}", out.join("results.csv").display());
    Ok(())
}
