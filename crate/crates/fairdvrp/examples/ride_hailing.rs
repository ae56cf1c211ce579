//! Ride-hailing scenario end to end: requests with pickups and drop-offs,
//! signed ride utilities, and waiting-time based customer fairness.
//!
//! ```bash
//! cargo run --release --example ride_hailing
//! ```

use fairdvrp::baselines::AlgorithmKind;
use fairdvrp::data::{generate_synthetic, SyntheticParams};
use fairdvrp::fairga::GaConfig;
use fairdvrp::metrics::AreaPartition;
use fairdvrp::simulator::{run_simulation, PlacementMode, Scenario, ScenarioConfig};
use fairdvrp::world::{CustomerRequest, RequestId, RequestStatus};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> anyhow::Result<()> {
    // Reuse the lattice generator for the road network, then synthesize ride
    // requests over it.
    let params = SyntheticParams {
        bays: 100,
        extent_m: 900.0,
        horizon_min: 120,
        seed: 2,
        ..SyntheticParams::default()
    };
    let (graph, _) = generate_synthetic(&params)?;
    let partition = AreaPartition::covering(&graph, 4, 4)?;

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut requests: Vec<CustomerRequest> = (0..60)
        .map(|i| {
            let pickup = fairdvrp::world::NodeId(rng.gen_range(0..100));
            let mut dropoff = fairdvrp::world::NodeId(rng.gen_range(0..100));
            while dropoff == pickup {
                dropoff = fairdvrp::world::NodeId(rng.gen_range(0..100));
            }
            let (lat, lon) = graph.coords_of(pickup).unwrap();
            CustomerRequest {
                id: RequestId(i),
                start: Some(pickup),
                destination: dropoff,
                window_start: rng.gen_range(0..100) as f64,
                window_end: f64::INFINITY, // riders wait until picked up
                area: partition.area_of(lat, lon),
                status: RequestStatus::Pending,
            }
        })
        .collect();
    requests.sort_by(|a, b| a.window_start.total_cmp(&b.window_start).then(a.id.cmp(&b.id)));
    for (i, r) in requests.iter_mut().enumerate() {
        r.id = RequestId(i as u32);
    }

    let cfg = ScenarioConfig {
        scenario: Scenario::RideHailing,
        horizon_min: params.horizon_min,
        num_providers: 5,
        placement: PlacementMode::Clustered,
        seed: 1,
        ..ScenarioConfig::default()
    };
    let ga = GaConfig { max_gen: 40, ..GaConfig::default() };
    let mut dispatcher = AlgorithmKind::TwoFairGa.build(ga, false);
    let report = run_simulation(&cfg, &graph, &requests, dispatcher.as_mut(), None)?;

    println!("pickups completed  : {} / {}", report.served, requests.len());
    println!("total ride utility : {:.0} m (trip length minus pickup detour)", report.total_utility);
    println!("driver fairness    : {:.0} (variance of earnings)", report.provider_fairness);
    println!("customer fairness  : {:.2} (variance of per-area mean waits)", report.customer_fairness);
    println!("per-area mean waits:");
    for (area, wait) in &report.per_area {
        println!("  area {area}: {wait:.1} min");
    }
    Ok(())
}
