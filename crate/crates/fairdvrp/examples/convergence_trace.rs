//! Watch the optimizer converge: run a single static optimization epoch and
//! print the best fitness per generation.
//!
//! ```bash
//! cargo run --release --example convergence_trace
//! ```

use fairdvrp::data::{generate_synthetic, SyntheticParams};
use fairdvrp::fairga::{
    run_fairga, AreaSnapshot, GaConfig, GaVariant, IdleProvider, PendingRequest,
    PlanningSnapshot,
};
use fairdvrp::simulator::Scenario;
use fairdvrp::world::{NodeId, ProviderId, RequestId};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> anyhow::Result<()> {
    let params = SyntheticParams { bays: 144, extent_m: 1100.0, seed: 13, ..Default::default() };
    let (graph, _) = generate_synthetic(&params)?;

    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let idle: Vec<IdleProvider> = (0..6)
        .map(|i| IdleProvider { id: ProviderId(i), location: NodeId(rng.gen_range(0..144)) })
        .collect();
    let pending: Vec<PendingRequest> = (0..30)
        .map(|i| {
            let node = NodeId(rng.gen_range(0..144));
            PendingRequest {
                id: RequestId(i),
                target: node,
                destination: node,
                area: fairdvrp::world::AreaId(node.0 % 9),
                window_start: 0.0,
            }
        })
        .collect();
    let areas = AreaSnapshot::from_pending(&pending);
    let snapshot = PlanningSnapshot {
        graph: &graph,
        scenario: Scenario::NonCompliance,
        now: 0.0,
        mean_stay: 30.0,
        idle: idle.clone(),
        ledgers: idle.iter().map(|p| (p.id, 0.0)).collect(),
        pending,
        areas,
    };

    let cfg = GaConfig { max_gen: 80, seed: 1, ..GaConfig::default() };
    let mut trace = Vec::new();
    let plan = run_fairga(
        &snapshot,
        GaVariant::two_fair(),
        &cfg,
        None,
        Some(&mut |generation, best| trace.push((generation, best))),
    )?;

    println!("generation  best_mean_capture_probability");
    for (generation, best) in trace.iter().step_by(8) {
        println!("{generation:>10}  {best:.6}");
    }
    let (g, b) = trace.last().unwrap();
    println!("{g:>10}  {b:.6}  (final)");
    println!();
    println!("best plan segment sizes:");
    for (provider, segment) in &plan.assignments {
        println!("  provider {provider}: {} targets", segment.len());
    }
    Ok(())
}
