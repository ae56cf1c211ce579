//! Benchmark harness: runs algorithm x fleet-size x seed grids, persists
//! `results.csv`, and renders per-cell mean summaries.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::baselines::{AlgorithmKind, ABLATION_ALGORITHMS};
use crate::data::{append_results_csv, ResultRow};
use crate::error::{Error, Result};
use crate::fairga::GaConfig;
use crate::metrics::MetricsReport;
use crate::simulator::{run_simulation, PlacementMode, Scenario, ScenarioConfig};
use crate::world::{CustomerRequest, RoadGraph};

/// A grid of runs over algorithms, fleet sizes and seeds.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub scenario: Scenario,
    pub algorithms: Vec<AlgorithmKind>,
    pub provider_counts: Vec<u32>,
    pub seeds: Vec<u64>,
    pub horizon_min: u32,
    pub ga: GaConfig,
    pub epoch_cadence: u32,
    pub mean_stay: f64,
    pub area_rows: usize,
    pub area_cols: usize,
    pub warm_start: bool,
    /// Recorded in result rows so they stay re-runnable.
    pub events_label: String,
}

impl ExperimentSpec {
    pub fn new(scenario: Scenario, horizon_min: u32) -> Self {
        ExperimentSpec {
            scenario,
            algorithms: vec![AlgorithmKind::TwoFairGa, AlgorithmKind::Ga],
            provider_counts: vec![20, 30, 50],
            seeds: vec![0, 1, 2],
            horizon_min,
            ga: GaConfig::default(),
            epoch_cadence: 1,
            mean_stay: 30.0,
            area_rows: 4,
            area_cols: 4,
            warm_start: false,
            events_label: String::new(),
        }
    }

    /// The six-variant ablation matrix.
    pub fn ablation(scenario: Scenario, horizon_min: u32) -> Self {
        ExperimentSpec {
            algorithms: ABLATION_ALGORITHMS.to_vec(),
            ..Self::new(scenario, horizon_min)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.algorithms.is_empty() || self.provider_counts.is_empty() || self.seeds.is_empty() {
            return Err(Error::InvalidConfig(
                "experiment needs at least one algorithm, provider count and seed".into(),
            ));
        }
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        seeds.dedup();
        if seeds.len() != self.seeds.len() {
            return Err(Error::InvalidConfig("seeds must be distinct within a cell".into()));
        }
        self.ga.validate()
    }

    fn scenario_config(&self, algo: AlgorithmKind, providers: u32, seed: u64) -> ScenarioConfig {
        ScenarioConfig {
            scenario: self.scenario,
            horizon_min: self.horizon_min,
            epoch_cadence: self.epoch_cadence,
            num_providers: providers,
            placement: if algo.uses_clustered_placement() {
                PlacementMode::Clustered
            } else {
                PlacementMode::Random
            },
            area_rows: self.area_rows,
            area_cols: self.area_cols,
            seed,
            mean_stay: self.mean_stay,
            warm_start: self.warm_start,
            ..ScenarioConfig::default()
        }
    }
}

/// One finished grid cell.
#[derive(Debug, Clone)]
pub struct CellOutcome {
    pub algo: AlgorithmKind,
    pub providers: u32,
    pub seed: u64,
    pub report: MetricsReport,
}

impl CellOutcome {
    pub fn to_row(&self, spec: &ExperimentSpec) -> ResultRow {
        ResultRow {
            algo: self.algo.id().to_string(),
            scenario: spec.scenario.to_string(),
            providers: self.providers,
            seed: self.seed,
            total_utility: self.report.total_utility,
            provider_fairness: self.report.provider_fairness,
            customer_fairness: self.report.customer_fairness,
            total_distance: self.report.total_distance_m,
            events: spec.events_label.clone(),
            horizon: spec.horizon_min,
            max_gen: spec.ga.max_gen,
            population: spec.ga.population_size,
        }
    }
}

/// Grid results plus any cells that failed (which do not stop the rest).
#[derive(Debug, Default)]
pub struct CompareOutcome {
    pub cells: Vec<CellOutcome>,
    pub failures: Vec<(String, String)>,
}

impl CompareOutcome {
    pub fn mean(&self, algo: AlgorithmKind, providers: u32) -> Option<MeanMetrics> {
        let selected: Vec<&CellOutcome> = self
            .cells
            .iter()
            .filter(|c| c.algo == algo && c.providers == providers)
            .collect();
        if selected.is_empty() {
            return None;
        }
        let n = selected.len() as f64;
        Some(MeanMetrics {
            runs: selected.len(),
            total_utility: selected.iter().map(|c| c.report.total_utility).sum::<f64>() / n,
            provider_fairness: selected.iter().map(|c| c.report.provider_fairness).sum::<f64>()
                / n,
            customer_fairness: selected.iter().map(|c| c.report.customer_fairness).sum::<f64>()
                / n,
            total_distance: selected.iter().map(|c| c.report.total_distance_m).sum::<f64>() / n,
        })
    }
}

/// Per-cell means over seeds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanMetrics {
    pub runs: usize,
    pub total_utility: f64,
    pub provider_fairness: f64,
    pub customer_fairness: f64,
    pub total_distance: f64,
}

/// Runs every `(algorithm, provider count, seed)` cell of the grid. Failed
/// cells are reported in the outcome while the remaining cells still run.
pub fn run_compare(
    spec: &ExperimentSpec,
    graph: &RoadGraph,
    events: &[CustomerRequest],
) -> Result<CompareOutcome> {
    spec.validate()?;
    let mut outcome = CompareOutcome::default();
    for &algo in &spec.algorithms {
        for &providers in &spec.provider_counts {
            for &seed in &spec.seeds {
                let cfg = spec.scenario_config(algo, providers, seed);
                let mut dispatcher = algo.build(spec.ga.clone(), spec.warm_start);
                match run_simulation(&cfg, graph, events, dispatcher.as_mut(), None) {
                    Ok(report) => {
                        outcome.cells.push(CellOutcome { algo, providers, seed, report })
                    }
                    Err(e) => outcome
                        .failures
                        .push((format!("{}/p{}/s{}", algo.id(), providers, seed), e.to_string())),
                }
            }
        }
    }
    Ok(outcome)
}

/// Writes all cells as rows into `<out_dir>/results.csv`.
pub fn write_results(spec: &ExperimentSpec, outcome: &CompareOutcome, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    let rows: Vec<ResultRow> = outcome.cells.iter().map(|c| c.to_row(spec)).collect();
    append_results_csv(&out_dir.join("results.csv"), &rows)
}

/// Renders per-(algorithm, fleet size) means in a four-metric column layout.
pub fn summary_table(outcome: &CompareOutcome) -> String {
    let mut counts: Vec<u32> = outcome.cells.iter().map(|c| c.providers).collect();
    counts.sort_unstable();
    counts.dedup();
    let mut algos: Vec<AlgorithmKind> = Vec::new();
    for c in &outcome.cells {
        if !algos.contains(&c.algo) {
            algos.push(c.algo);
        }
    }

    let metrics: [(&str, fn(&MeanMetrics) -> f64); 4] = [
        ("provider_fairness", |m| m.provider_fairness),
        ("customer_fairness", |m| m.customer_fairness),
        ("total_utility", |m| m.total_utility),
        ("total_distance", |m| m.total_distance),
    ];
    let mut out = String::new();
    let _ = write!(out, "{:<26}", "algorithm");
    for (name, _) in &metrics {
        for c in &counts {
            let _ = write!(out, " {:>22}", format!("{name}@{c}"));
        }
    }
    out.push('\n');
    for algo in algos {
        let _ = write!(out, "{:<26}", algo.id());
        for (_, extract) in &metrics {
            for &c in &counts {
                match outcome.mean(algo, c) {
                    Some(m) => {
                        let _ = write!(out, " {:>22.4}", extract(&m));
                    }
                    None => {
                        let _ = write!(out, " {:>22}", "-");
                    }
                }
            }
        }
        out.push('\n');
    }
    let mut grouped: BTreeMap<&str, usize> = BTreeMap::new();
    for (label, _) in &outcome.failures {
        *grouped.entry(label.split('/').next().unwrap_or(label)).or_default() += 1;
    }
    for (algo, n) in grouped {
        let _ = writeln!(out, "FAILED cells for {algo}: {n}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::generate_synthetic;
    use crate::data::SyntheticParams;

    #[test]
    fn grid_produces_one_row_per_cell_and_stable_means() {
        let params = SyntheticParams {
            bays: 25,
            horizon_min: 40,
            poisson_rate: 0.6,
            ..Default::default()
        };
        let (graph, events) = generate_synthetic(&params).unwrap();
        let mut spec = ExperimentSpec::new(Scenario::NonCompliance, 40);
        spec.algorithms = vec![AlgorithmKind::GreedyProbability, AlgorithmKind::Nearest];
        spec.provider_counts = vec![2];
        spec.seeds = vec![0, 1, 2];
        spec.events_label = "synthetic".into();

        let outcome = run_compare(&spec, &graph, &events).unwrap();
        assert!(outcome.failures.is_empty());
        assert_eq!(outcome.cells.len(), 6);

        let m = outcome.mean(AlgorithmKind::GreedyProbability, 2).unwrap();
        assert_eq!(m.runs, 3);
        let manual: f64 = outcome
            .cells
            .iter()
            .filter(|c| c.algo == AlgorithmKind::GreedyProbability)
            .map(|c| c.report.total_utility)
            .sum::<f64>()
            / 3.0;
        assert!((m.total_utility - manual).abs() < 1e-12);

        let table = summary_table(&outcome);
        assert!(table.contains("greedy"));
        assert!(table.contains("provider_fairness@2"));
    }

    #[test]
    fn duplicate_seeds_are_rejected() {
        let mut spec = ExperimentSpec::new(Scenario::NonCompliance, 10);
        spec.seeds = vec![1, 1];
        assert!(spec.validate().is_err());
    }

    #[test]
    fn ablation_matrix_has_six_algorithms() {
        let spec = ExperimentSpec::ablation(Scenario::NonCompliance, 60);
        assert_eq!(spec.algorithms.len(), 6);
        assert_eq!(spec.provider_counts.len(), 3);
        // 6 algorithms x 3 provider counts = 18 summary cells.
        assert_eq!(spec.algorithms.len() * spec.provider_counts.len(), 18);
    }
}
