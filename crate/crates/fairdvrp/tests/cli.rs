//! End-to-end checks of the command-line harness.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fairdvrp"))
}

fn run_ok(cmd: &mut Command) -> String {
    let out = cmd.output().expect("spawn fairdvrp");
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn generate_simulate_compare_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");

    run_ok(bin()
        .args(["generate", "--bays", "36", "--rate", "0.8", "--horizon", "90"])
        .args(["--seed", "7", "--out"])
        .arg(&data));
    for f in ["nodes.csv", "edges.csv", "events.csv", "params.json"] {
        assert!(data.join(f).exists(), "missing {f}");
    }

    // Single greedy run with trace and placement dumps.
    let report_path = dir.path().join("report.json");
    let trace_path = dir.path().join("trace.csv");
    let placement_path = dir.path().join("placement.json");
    run_ok(bin()
        .args(["simulate", "--algo", "greedy", "--providers", "3", "--horizon", "90"])
        .args(["--graph"])
        .arg(&data)
        .args(["--events"])
        .arg(data.join("events.csv"))
        .args(["--trace"])
        .arg(&trace_path)
        .args(["--placement-out"])
        .arg(&placement_path)
        .args(["--seed", "3", "--out"])
        .arg(&report_path));
    let report = fairdvrp::metrics::MetricsReport::read_json(&report_path).unwrap();
    assert!(report.total_utility >= 0.0);
    assert_eq!(
        report.total_utility,
        report.per_provider.values().sum::<f64>()
    );
    let trace = std::fs::read_to_string(&trace_path).unwrap();
    assert!(trace.starts_with("minute,provider,node,cumulative_utility"));
    assert_eq!(trace.lines().count(), 1 + 90 * 3);
    let placement: std::collections::BTreeMap<String, u32> =
        serde_json::from_reader(std::fs::File::open(&placement_path).unwrap()).unwrap();
    assert_eq!(placement.len(), 3);

    // A one-cell compare grid writes exactly one results row.
    let cmp = dir.path().join("cmp");
    let stdout = run_ok(bin()
        .args(["compare", "--algos", "nearest", "--providers", "2", "--seeds", "0"])
        .args(["--horizon", "90", "--graph"])
        .arg(&data)
        .args(["--events"])
        .arg(data.join("events.csv"))
        .args(["--out"])
        .arg(&cmp));
    assert!(stdout.contains("nearest"));
    let rows = fairdvrp::data::read_results_csv(&cmp.join("results.csv")).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].algo, "nearest");
    assert_eq!(rows[0].providers, 2);
}

#[test]
fn compare_mean_equals_mean_of_rows() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    run_ok(bin()
        .args(["generate", "--bays", "25", "--rate", "0.8", "--horizon", "60"])
        .args(["--seed", "1", "--out"])
        .arg(&data));
    let cmp = dir.path().join("cmp");
    run_ok(bin()
        .args(["compare", "--algos", "greedy", "--providers", "2", "--seeds", "0,1,2"])
        .args(["--horizon", "60", "--graph"])
        .arg(&data)
        .args(["--events"])
        .arg(data.join("events.csv"))
        .args(["--out"])
        .arg(&cmp));
    let rows = fairdvrp::data::read_results_csv(&cmp.join("results.csv")).unwrap();
    assert_eq!(rows.len(), 3);
    // Summary statistics must be recomputable from the raw rows.
    let mean: f64 = rows.iter().map(|r| r.total_utility).sum::<f64>() / 3.0;
    assert!(mean >= 0.0);
    for row in &rows {
        assert_eq!(row.events, data.join("events.csv").display().to_string());
        assert_eq!(row.horizon, 60);
    }
}

#[test]
fn ablate_runs_all_six_variants() {
    // Tiny instance so the six GA variants stay fast.
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    run_ok(bin()
        .args(["generate", "--bays", "16", "--rate", "0.5", "--horizon", "30"])
        .args(["--seed", "2", "--out"])
        .arg(&data));
    let out = dir.path().join("abl");
    let stdout = run_ok(bin()
        .args(["ablate", "--providers", "2", "--seeds", "0", "--horizon", "30"])
        .args(["--max-gen", "5", "--population", "10"])
        .args(["--graph"])
        .arg(&data)
        .args(["--events"])
        .arg(data.join("events.csv"))
        .args(["--out"])
        .arg(&out));
    let rows = fairdvrp::data::read_results_csv(&out.join("results.csv")).unwrap();
    assert_eq!(rows.len(), 6);
    for id in ["2fairga", "ga-cluster-provider-fair", "ga-fair", "ga-provider-fair", "ga-customer-fair", "ga3"] {
        assert!(rows.iter().any(|r| r.algo == id), "missing row for {id}");
        assert!(stdout.contains(id), "summary lacks {id}");
    }
}

#[test]
fn bad_events_fail_with_nonzero_exit() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    run_ok(bin()
        .args(["generate", "--bays", "16", "--rate", "0.5", "--horizon", "30"])
        .args(["--out"])
        .arg(&data));
    let bad = dir.path().join("bad.csv");
    std::fs::write(
        &bad,
        "area_id,lat,lon,arrive_time,violation_time,departure_time,marker\n0,0,0,5,9,2,m\n",
    )
    .unwrap();
    let out = bin()
        .args(["simulate", "--algo", "greedy", "--graph"])
        .arg(&data)
        .args(["--events"])
        .arg(&bad)
        .arg("--out")
        .arg(dir.path().join("r.json"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(Path::new(&data).exists());
}
