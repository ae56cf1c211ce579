//! Generate a synthetic non-compliance dataset and persist it as CSV.
//!
//! ```bash
//! cargo run --release --example generate_dataset
//! ```

use fairdvrp::data::{generate_synthetic, save_graph_csv, save_parking_csv, SyntheticParams};

fn main() -> anyhow::Result<()> {
    let params = SyntheticParams {
        bays: 100,
        extent_m: 900.0,
        poisson_rate: 0.5,
        exp_mean_stay: 25.0,
        horizon_min: 240,
        seed: 7,
        ..SyntheticParams::default()
    };
    let (graph, events) = generate_synthetic(&params)?;
    println!(
        "lattice: {} nodes, {} directed edges",
        graph.node_count(),
        graph.edge_count()
    );
    println!("violations: {} over {} minutes", events.len(), params.horizon_min);
    let first = &events[0];
    println!(
        "first violation: bay {} in area {}, active {:.1} -> {:.1} min",
        first.destination, first.area, first.window_start, first.window_end
    );

    let out = std::env::temp_dir().join("fairdvrp-dataset");
    save_graph_csv(&graph, &out)?;
    save_parking_csv(&events, &graph, &out.join("events.csv"))?;
    println!("wrote nodes.csv, edges.csv, events.csv to {}", out.display());
    Ok(())
}
