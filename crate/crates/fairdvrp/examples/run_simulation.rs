//! Run one rolling-horizon simulation with the 2FairGA dispatcher and print
//! the resulting metrics report.
//!
//! ```bash
//! cargo run --release --example run_simulation
//! ```

use fairdvrp::baselines::AlgorithmKind;
use fairdvrp::data::{generate_synthetic, SyntheticParams};
use fairdvrp::fairga::GaConfig;
use fairdvrp::simulator::{run_simulation, PlacementMode, Scenario, ScenarioConfig};

fn main() -> anyhow::Result<()> {
    let params = SyntheticParams {
        bays: 100,
        extent_m: 900.0,
        poisson_rate: 0.5,
        exp_mean_stay: 25.0,
        horizon_min: 180,
        seed: 11,
        ..SyntheticParams::default()
    };
    let (graph, events) = generate_synthetic(&params)?;
    println!("generated {} violations on a {}-node lattice", events.len(), graph.node_count());

    let cfg = ScenarioConfig {
        scenario: Scenario::NonCompliance,
        horizon_min: params.horizon_min,
        num_providers: 6,
        placement: PlacementMode::Clustered,
        seed: 1,
        mean_stay: params.exp_mean_stay,
        ..ScenarioConfig::default()
    };
    let ga = GaConfig { max_gen: 60, ..GaConfig::default() };
    let mut dispatcher = AlgorithmKind::TwoFairGa.build(ga, false);
    let report = run_simulation(&cfg, &graph, &events, dispatcher.as_mut(), None)?;

    println!("captures            : {}", report.total_utility);
    println!("missed (expired)    : {}", report.expired);
    println!("provider fairness   : {:.3}", report.provider_fairness);
    println!("customer fairness   : {:.5}", report.customer_fairness);
    println!("total distance      : {:.0} m", report.total_distance_m);
    println!("per-provider ledger :");
    for (provider, utility) in &report.per_provider {
        println!("  officer {provider}: {utility}");
    }
    Ok(())
}
