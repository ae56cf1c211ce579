//! Synthetic event generation, graph and event CSV ingestion, and results
//! persistence.
//!
//! The synthetic world is a square lattice; violation counts per bay follow
//! a Poisson distribution over the horizon and stay durations are
//! exponential. Real datasets load from CSV: a parking-event schema
//! (violation and departure timestamps per bay) and a taxi-request schema
//! (pickup and drop-off coordinates). Timestamps may be numeric
//! minutes-since-midnight or ISO-8601, auto-detected per field.

use std::path::Path;

use chrono::Timelike;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::AreaPartition;
use crate::world::{AreaId, CustomerRequest, NodeId, RequestId, RequestStatus, RoadGraph};

/// Reference coordinates for the synthetic lattice (degrees).
const BASE_LAT: f64 = -37.81;
const BASE_LON: f64 = 144.96;
const METERS_PER_DEG_LAT: f64 = 111_320.0;

/// Parameters of the synthetic non-compliance dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticParams {
    /// Number of parking bays; rounded to the nearest square lattice.
    pub bays: usize,
    /// Side length of the covered square, meters.
    pub extent_m: f64,
    /// Violation arrivals per bay per hour.
    pub poisson_rate: f64,
    /// Mean illegal-stay duration, minutes.
    pub exp_mean_stay: f64,
    pub horizon_min: u32,
    pub seed: u64,
    pub area_rows: usize,
    pub area_cols: usize,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        SyntheticParams {
            bays: 400,
            extent_m: 1900.0,
            poisson_rate: 0.25,
            exp_mean_stay: 30.0,
            horizon_min: 480,
            seed: 0,
            area_rows: 4,
            area_cols: 4,
        }
    }
}

impl SyntheticParams {
    pub fn validate(&self) -> Result<()> {
        if self.bays < 4 {
            return Err(Error::InvalidConfig("need at least 4 bays".into()));
        }
        if !(self.extent_m > 0.0 && self.poisson_rate > 0.0 && self.exp_mean_stay > 0.0) {
            return Err(Error::InvalidConfig(
                "extent, poisson_rate and exp_mean_stay must be > 0".into(),
            ));
        }
        if self.horizon_min == 0 {
            return Err(Error::InvalidConfig("horizon must be > 0".into()));
        }
        if self.area_rows == 0 || self.area_cols == 0 {
            return Err(Error::InvalidConfig("area grid needs rows, cols >= 1".into()));
        }
        Ok(())
    }
}

/// Builds the lattice world and a violation stream, deterministic per seed.
pub fn generate_synthetic(params: &SyntheticParams) -> Result<(RoadGraph, Vec<CustomerRequest>)> {
    params.validate()?;
    let side = (params.bays as f64).sqrt().round().max(2.0) as usize;
    let spacing = params.extent_m / (side - 1) as f64;
    let dlat = spacing / METERS_PER_DEG_LAT;
    let dlon = spacing / (METERS_PER_DEG_LAT * BASE_LAT.to_radians().cos());

    let mut graph = RoadGraph::new();
    for row in 0..side {
        for col in 0..side {
            let id = NodeId((row * side + col) as u32);
            graph.add_node(id, BASE_LAT + row as f64 * dlat, BASE_LON + col as f64 * dlon)?;
        }
    }
    for row in 0..side {
        for col in 0..side {
            let id = NodeId((row * side + col) as u32);
            if col + 1 < side {
                let right = NodeId((row * side + col + 1) as u32);
                graph.add_edge(id, right, spacing)?;
                graph.add_edge(right, id, spacing)?;
            }
            if row + 1 < side {
                let down = NodeId(((row + 1) * side + col) as u32);
                graph.add_edge(id, down, spacing)?;
                graph.add_edge(down, id, spacing)?;
            }
        }
    }

    let partition = AreaPartition::covering(&graph, params.area_rows, params.area_cols)?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let per_bay_mean = params.poisson_rate * params.horizon_min as f64 / 60.0;
    let poisson = Poisson::new(per_bay_mean)
        .map_err(|e| Error::InvalidConfig(format!("poisson rate: {e}")))?;
    let exp = Exp::new(1.0 / params.exp_mean_stay)
        .map_err(|e| Error::InvalidConfig(format!("exp mean: {e}")))?;

    let mut raw: Vec<(f64, NodeId, f64)> = Vec::new();
    for (node, lat, lon) in graph.nodes().collect::<Vec<_>>() {
        let _ = (lat, lon);
        let count = poisson.sample(&mut rng) as u64;
        for _ in 0..count {
            let start = rng.gen_range(0..params.horizon_min) as f64;
            let stay: f64 = exp.sample(&mut rng);
            raw.push((start, node, start + stay));
        }
    }
    raw.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.total_cmp(&b.2)));

    let requests = raw
        .into_iter()
        .enumerate()
        .map(|(i, (start, node, end))| {
            let area = partition.area_of_node(&graph, node)?;
            Ok(CustomerRequest {
                id: RequestId(i as u32),
                start: None,
                destination: node,
                window_start: start,
                window_end: end,
                area,
                status: RequestStatus::Pending,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((graph, requests))
}

/// Writes `nodes.csv` and `edges.csv` into a directory.
pub fn save_graph_csv(graph: &RoadGraph, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut nodes = csv::Writer::from_path(dir.join("nodes.csv"))?;
    nodes.write_record(["node_id", "lat", "lon"])?;
    for (id, lat, lon) in graph.nodes() {
        nodes.write_record([id.to_string(), lat.to_string(), lon.to_string()])?;
    }
    nodes.flush()?;
    let mut edges = csv::Writer::from_path(dir.join("edges.csv"))?;
    edges.write_record(["from", "to", "length_m"])?;
    for (from, to, len) in graph.edges() {
        edges.write_record([from.to_string(), to.to_string(), len.to_string()])?;
    }
    edges.flush()?;
    Ok(())
}

/// Loads a graph from the `nodes.csv` / `edges.csv` pair in a directory.
pub fn load_graph_csv(dir: &Path) -> Result<RoadGraph> {
    let mut graph = RoadGraph::new();
    let nodes_path = dir.join("nodes.csv");
    let mut reader = csv_reader(&nodes_path)?;
    let idx = header_indices(&nodes_path, &mut reader, &["node_id", "lat", "lon"])?;
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let row = RowContext { path: &nodes_path, line: line as u64 + 2 };
        let id: u32 = row.parse(&record, idx[0], "node_id")?;
        let lat: f64 = row.parse(&record, idx[1], "lat")?;
        let lon: f64 = row.parse(&record, idx[2], "lon")?;
        graph.add_node(NodeId(id), lat, lon)?;
    }
    let edges_path = dir.join("edges.csv");
    let mut reader = csv_reader(&edges_path)?;
    let idx = header_indices(&edges_path, &mut reader, &["from", "to", "length_m"])?;
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let row = RowContext { path: &edges_path, line: line as u64 + 2 };
        let from: u32 = row.parse(&record, idx[0], "from")?;
        let to: u32 = row.parse(&record, idx[1], "to")?;
        let len: f64 = row.parse(&record, idx[2], "length_m")?;
        graph.add_edge(NodeId(from), NodeId(to), len)?;
    }
    Ok(graph)
}

/// Writes a violation stream in the parking-event CSV schema.
pub fn save_parking_csv(requests: &[CustomerRequest], graph: &RoadGraph, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "area_id",
        "lat",
        "lon",
        "arrive_time",
        "violation_time",
        "departure_time",
        "marker",
    ])?;
    for r in requests {
        let (lat, lon) = graph.coords_of(r.destination)?;
        w.write_record([
            r.area.to_string(),
            lat.to_string(),
            lon.to_string(),
            r.window_start.to_string(),
            r.window_start.to_string(),
            r.window_end.to_string(),
            "synthetic".to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Loads parking violations: one request per row, valid from the violation
/// timestamp until departure, snapped to the nearest graph node. The marker
/// column is parsed and ignored.
pub fn load_parking_csv(path: &Path, graph: &RoadGraph) -> Result<Vec<CustomerRequest>> {
    let mut reader = csv_reader(path)?;
    let idx = header_indices(
        path,
        &mut reader,
        &["area_id", "lat", "lon", "arrive_time", "violation_time", "departure_time", "marker"],
    )?;
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let row = RowContext { path, line: line as u64 + 2 };
        let area: u32 = row.parse(&record, idx[0], "area_id")?;
        let lat: f64 = row.parse(&record, idx[1], "lat")?;
        let lon: f64 = row.parse(&record, idx[2], "lon")?;
        let _arrive = row.time(&record, idx[3], "arrive_time")?;
        let violation = row.time(&record, idx[4], "violation_time")?;
        let departure = row.time(&record, idx[5], "departure_time")?;
        if departure < violation {
            return Err(row.error(format!(
                "departure_time {departure} before violation_time {violation}"
            )));
        }
        let node = graph
            .nearest_node(lat, lon)
            .ok_or_else(|| row.error("graph has no nodes".into()))?;
        rows.push((violation, departure, node, AreaId(area)));
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(rows
        .into_iter()
        .enumerate()
        .map(|(i, (start, end, node, area))| CustomerRequest {
            id: RequestId(i as u32),
            start: None,
            destination: node,
            window_start: start,
            window_end: end,
            area,
            status: RequestStatus::Pending,
        })
        .collect())
}

/// Loads ride requests: pickup/drop-off coordinates snapped to graph nodes,
/// unbounded validity windows, areas derived from the pickup location.
pub fn load_taxi_csv(
    path: &Path,
    graph: &RoadGraph,
    partition: &AreaPartition,
) -> Result<Vec<CustomerRequest>> {
    let bbox = graph
        .bounding_box()
        .ok_or_else(|| Error::InvalidConfig("graph has no nodes".into()))?;
    let inside = |lat: f64, lon: f64| {
        lat >= bbox.0 - 1e-9 && lon >= bbox.1 - 1e-9 && lat <= bbox.2 + 1e-9 && lon <= bbox.3 + 1e-9
    };
    let mut reader = csv_reader(path)?;
    let idx = header_indices(
        path,
        &mut reader,
        &["request_time", "pickup_lat", "pickup_lon", "dropoff_lat", "dropoff_lon"],
    )?;
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let row = RowContext { path, line: line as u64 + 2 };
        let t = row.time(&record, idx[0], "request_time")?;
        let plat: f64 = row.parse(&record, idx[1], "pickup_lat")?;
        let plon: f64 = row.parse(&record, idx[2], "pickup_lon")?;
        let dlat: f64 = row.parse(&record, idx[3], "dropoff_lat")?;
        let dlon: f64 = row.parse(&record, idx[4], "dropoff_lon")?;
        if !inside(plat, plon) || !inside(dlat, dlon) {
            return Err(row.error("coordinates outside the graph bounding box".into()));
        }
        let pickup = graph.nearest_node(plat, plon).expect("graph checked non-empty");
        let dropoff = graph.nearest_node(dlat, dlon).expect("graph checked non-empty");
        rows.push((t, pickup, dropoff, partition.area_of(plat, plon)));
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(rows
        .into_iter()
        .enumerate()
        .map(|(i, (t, pickup, dropoff, area))| CustomerRequest {
            id: RequestId(i as u32),
            start: Some(pickup),
            destination: dropoff,
            window_start: t,
            window_end: f64::INFINITY,
            area,
            status: RequestStatus::Pending,
        })
        .collect())
}

fn csv_reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)?)
}

/// Resolves required column names to indices, erroring on missing columns.
fn header_indices(
    path: &Path,
    reader: &mut csv::Reader<std::fs::File>,
    names: &[&str],
) -> Result<Vec<usize>> {
    let headers = reader.headers()?.clone();
    names
        .iter()
        .map(|name| {
            headers
                .iter()
                .position(|h| h == *name)
                .ok_or_else(|| Error::CsvRow {
                    path: path.display().to_string(),
                    line: 1,
                    message: format!("missing column '{name}'"),
                })
        })
        .collect()
}

struct RowContext<'a> {
    path: &'a Path,
    line: u64,
}

impl RowContext<'_> {
    fn error(&self, message: String) -> Error {
        Error::CsvRow { path: self.path.display().to_string(), line: self.line, message }
    }

    fn field<'r>(&self, record: &'r csv::StringRecord, idx: usize, name: &str) -> Result<&'r str> {
        record
            .get(idx)
            .ok_or_else(|| self.error(format!("missing field '{name}'")))
    }

    fn parse<T: std::str::FromStr>(
        &self,
        record: &csv::StringRecord,
        idx: usize,
        name: &str,
    ) -> Result<T> {
        let raw = self.field(record, idx, name)?;
        raw.parse()
            .map_err(|_| self.error(format!("cannot parse {name} from '{raw}'")))
    }

    /// Minutes since midnight, from either a numeric value or an ISO-8601
    /// timestamp.
    fn time(&self, record: &csv::StringRecord, idx: usize, name: &str) -> Result<f64> {
        let raw = self.field(record, idx, name)?;
        parse_time_minutes(raw).map_err(|_| self.error(format!("unparsable timestamp '{raw}'")))
    }
}

/// Parses a timestamp into fractional minutes since midnight. Accepts plain
/// numbers (already minutes) and common ISO-8601 datetime or time formats.
pub fn parse_time_minutes(raw: &str) -> Result<f64> {
    if let Ok(v) = raw.parse::<f64>() {
        return Ok(v);
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"] {
        if let Ok(dt) = chrono::NaiveDateTime::parse_from_str(raw, fmt) {
            let t = dt.time();
            return Ok(t.hour() as f64 * 60.0
                + t.minute() as f64
                + t.second() as f64 / 60.0
                + t.nanosecond() as f64 / 60e9);
        }
    }
    for fmt in ["%H:%M:%S%.f", "%H:%M"] {
        if let Ok(t) = chrono::NaiveTime::parse_from_str(raw, fmt) {
            return Ok(t.hour() as f64 * 60.0
                + t.minute() as f64
                + t.second() as f64 / 60.0
                + t.nanosecond() as f64 / 60e9);
        }
    }
    Err(Error::InvalidConfig(format!("unparsable timestamp '{raw}'")))
}

/// One row of a benchmark results file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub algo: String,
    pub scenario: String,
    pub providers: u32,
    pub seed: u64,
    pub total_utility: f64,
    pub provider_fairness: f64,
    pub customer_fairness: f64,
    pub total_distance: f64,
    /// Inputs that make the row re-runnable.
    pub events: String,
    pub horizon: u32,
    pub max_gen: u32,
    pub population: usize,
}

/// Appends rows to `results.csv`, creating it with a header when absent.
/// Rows are written in canonical (algo, providers, seed) order.
pub fn append_results_csv(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let mut rows = rows.to_vec();
    rows.sort_by(|a, b| {
        (&a.algo, &a.scenario, a.providers, a.seed)
            .cmp(&(&b.algo, &b.scenario, b.providers, b.seed))
    });
    let fresh = !path.exists();
    let file = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
    let mut w = csv::WriterBuilder::new().has_headers(fresh).from_writer(file);
    for row in &rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results_csv(path: &Path) -> Result<Vec<ResultRow>> {
    let mut reader = csv::Reader::from_path(path)?;
    Ok(reader.deserialize().collect::<std::result::Result<_, _>>()?)
}
