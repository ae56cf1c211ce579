//! Constrained K-means provider placement: cluster demand locations with a
//! minimum cluster size and distribute a fleet proportionally to demand.
//!
//! ```bash
//! cargo run --release --example clustered_placement
//! ```

use fairdvrp::data::{generate_synthetic, SyntheticParams};
use fairdvrp::sampling::{constrained_kmeans, distribute_providers};

fn main() -> anyhow::Result<()> {
    let params = SyntheticParams {
        bays: 144,
        extent_m: 1100.0,
        poisson_rate: 0.5,
        horizon_min: 240,
        seed: 21,
        ..SyntheticParams::default()
    };
    let (graph, events) = generate_synthetic(&params)?;

    // Cluster the demand history (here: the event stream itself).
    let points: Vec<(f64, f64)> = events
        .iter()
        .map(|r| graph.coords_of(r.destination))
        .collect::<fairdvrp::Result<_>>()?;
    let k = 4;
    let tau = points.len().div_ceil(2 * k);
    let model = constrained_kmeans(&points, k, tau, 99)?;

    println!("{} demand points into {k} clusters (minimum size {tau}):", points.len());
    for (h, (&(lat, lon), &weight)) in
        model.centroids.iter().zip(&model.demand_weight).enumerate()
    {
        println!("  cluster {h}: centroid ({lat:.5}, {lon:.5}), {weight} requests");
    }
    println!(
        "objective trace (non-increasing): {:?}",
        model
            .objective_trace
            .iter()
            .map(|v| (v * 1e6).round() / 1e6)
            .collect::<Vec<_>>()
    );

    let fleet = distribute_providers(&model, 10, &graph)?;
    println!("fleet of 10 providers, largest-remainder split by demand:");
    for (node, count) in fleet {
        println!("  {count} provider(s) start at node {node}");
    }
    Ok(())
}
