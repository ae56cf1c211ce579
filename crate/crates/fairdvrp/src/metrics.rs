//! Utility and fairness formulas, spatial area partitioning, and the
//! Haversine geodesic.
//!
//! Both fairness measures are population variances: provider fairness over
//! each provider's accumulated utility, customer fairness over per-area
//! outcomes (capture rates for non-compliance, mean waiting times for
//! ride-hailing). Lower is fairer; perfectly symmetric inputs score 0.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulator::Scenario;
use crate::world::{
    AreaId, CustomerRequest, NodeId, ProviderId, RequestId, RoadGraph, ServiceProvider,
};

/// Mean Earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Great-circle distance in meters between two (lat, lon) points in degrees.
pub fn haversine(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let (la1, lo1, la2, lo2) = (
        lat1.to_radians(),
        lon1.to_radians(),
        lat2.to_radians(),
        lon2.to_radians(),
    );
    let sin_dlat = ((la2 - la1) / 2.0).sin();
    let sin_dlon = ((lo2 - lo1) / 2.0).sin();
    let h = sin_dlat * sin_dlat + la1.cos() * la2.cos() * sin_dlon * sin_dlon;
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

/// Population variance (divide by count). Zero for empty or singleton input.
pub fn population_variance(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64
}

/// Capture utility: 1 iff the provider stands at the violation node inside
/// the validity window, else 0.
pub fn capture_utility(n: &ServiceProvider, c: &CustomerRequest, t: f64) -> f64 {
    if c.window_start <= t && t <= c.window_end && n.location == c.destination {
        1.0
    } else {
        0.0
    }
}

/// Ride utility in meters, evaluated at assignment time: trip length minus
/// pickup distance. Negative when the pickup is farther than the trip.
pub fn ride_utility(graph: &RoadGraph, n: &ServiceProvider, c: &CustomerRequest) -> Result<f64> {
    let start = c.start.ok_or_else(|| {
        Error::MalformedEvents(format!("request {} has no pickup node", c.id))
    })?;
    let (slat, slon) = graph.coords_of(start)?;
    let (dlat, dlon) = graph.coords_of(c.destination)?;
    let (plat, plon) = graph.coords_of(n.location)?;
    Ok(haversine(dlat, dlon, slat, slon) - haversine(slat, slon, plat, plon))
}

/// One utility award recorded by the simulator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AwardEvent {
    /// Minute (fractional) at which the award was earned.
    pub t: f64,
    pub provider: ProviderId,
    pub request: RequestId,
    /// 1 for a capture; the signed ride utility in meters for a pickup.
    pub award: f64,
}

/// Total utility over an award log: the sum of all per-event awards.
pub fn total_utility(events: &[AwardEvent]) -> f64 {
    events.iter().map(|e| e.award).sum()
}

/// Provider fairness: population variance of accumulated utility across all
/// providers, zero earners included.
pub fn provider_fairness(per_provider: &BTreeMap<ProviderId, f64>) -> Result<f64> {
    if per_provider.is_empty() {
        return Err(Error::NoProviders);
    }
    let values: Vec<f64> = per_provider.values().copied().collect();
    Ok(population_variance(&values))
}

/// Customer fairness over spatial areas.
///
/// Non-compliance: variance of per-area capture rates (captures / raised).
/// Ride-hailing: variance of per-area mean waiting times, where requests
/// still unserved at the horizon contribute `horizon - window_start`. Areas
/// that raised no requests are excluded.
pub fn customer_fairness(
    scenario: Scenario,
    requests: &[CustomerRequest],
    events: &[AwardEvent],
    horizon: f64,
) -> f64 {
    match scenario {
        Scenario::NonCompliance => {
            let rates = area_capture_stats(requests, events)
                .into_values()
                .map(|(raised, captured)| captured / raised)
                .collect::<Vec<_>>();
            population_variance(&rates)
        }
        Scenario::RideHailing => {
            let waits = area_mean_waits(requests, events, horizon)
                .into_values()
                .collect::<Vec<_>>();
            population_variance(&waits)
        }
    }
}

/// Secondary non-compliance customer-fairness figure: variance of raw
/// per-area capture counts rather than rates.
pub fn customer_fairness_raw_counts(
    requests: &[CustomerRequest],
    events: &[AwardEvent],
) -> f64 {
    let counts = area_capture_stats(requests, events)
        .into_values()
        .map(|(_, captured)| captured)
        .collect::<Vec<_>>();
    population_variance(&counts)
}

/// Per-area `(raised, captured)` over areas with at least one request.
fn area_capture_stats(
    requests: &[CustomerRequest],
    events: &[AwardEvent],
) -> BTreeMap<AreaId, (f64, f64)> {
    let mut stats: BTreeMap<AreaId, (f64, f64)> = BTreeMap::new();
    for r in requests {
        stats.entry(r.area).or_insert((0.0, 0.0)).0 += 1.0;
    }
    for e in events {
        if let Some(r) = requests.iter().find(|r| r.id == e.request) {
            if let Some(s) = stats.get_mut(&r.area) {
                s.1 += 1.0;
            }
        }
    }
    stats
}

/// Per-area mean waiting times for the run report.
pub fn area_mean_waits_report(
    requests: &[CustomerRequest],
    events: &[AwardEvent],
    horizon: f64,
) -> BTreeMap<AreaId, f64> {
    area_mean_waits(requests, events, horizon)
}

/// Per-area mean waiting time; waits are measured at pickup.
fn area_mean_waits(
    requests: &[CustomerRequest],
    events: &[AwardEvent],
    horizon: f64,
) -> BTreeMap<AreaId, f64> {
    let mut sums: BTreeMap<AreaId, (f64, f64)> = BTreeMap::new();
    for r in requests {
        let wait = match events.iter().find(|e| e.request == r.id) {
            Some(e) => e.t - r.window_start,
            None => horizon - r.window_start,
        };
        let s = sums.entry(r.area).or_insert((0.0, 0.0));
        s.0 += wait;
        s.1 += 1.0;
    }
    sums.into_iter()
        .map(|(a, (sum, cnt))| (a, sum / cnt))
        .collect()
}

/// Uniform lat/lon grid over a bounding box, mapping every point inside (or
/// clamped onto) the box to exactly one area.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AreaPartition {
    pub rows: usize,
    pub cols: usize,
    pub min_lat: f64,
    pub min_lon: f64,
    pub max_lat: f64,
    pub max_lon: f64,
}

impl AreaPartition {
    pub fn new(rows: usize, cols: usize, bbox: (f64, f64, f64, f64)) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidConfig("area grid needs rows, cols >= 1".into()));
        }
        let (min_lat, min_lon, max_lat, max_lon) = bbox;
        if !(min_lat <= max_lat && min_lon <= max_lon) {
            return Err(Error::InvalidConfig("invalid area bounding box".into()));
        }
        Ok(AreaPartition { rows, cols, min_lat, min_lon, max_lat, max_lon })
    }

    /// Grid covering a whole graph.
    pub fn covering(graph: &RoadGraph, rows: usize, cols: usize) -> Result<Self> {
        let bbox = graph
            .bounding_box()
            .ok_or_else(|| Error::InvalidConfig("empty graph has no bounding box".into()))?;
        Self::new(rows, cols, bbox)
    }

    pub fn num_areas(&self) -> usize {
        self.rows * self.cols
    }

    pub fn area_of(&self, lat: f64, lon: f64) -> AreaId {
        let span_lat = (self.max_lat - self.min_lat).max(f64::MIN_POSITIVE);
        let span_lon = (self.max_lon - self.min_lon).max(f64::MIN_POSITIVE);
        let row = (((lat - self.min_lat) / span_lat) * self.rows as f64)
            .floor()
            .clamp(0.0, self.rows as f64 - 1.0) as u32;
        let col = (((lon - self.min_lon) / span_lon) * self.cols as f64)
            .floor()
            .clamp(0.0, self.cols as f64 - 1.0) as u32;
        AreaId(row * self.cols as u32 + col)
    }

    pub fn area_of_node(&self, graph: &RoadGraph, node: NodeId) -> Result<AreaId> {
        let (lat, lon) = graph.coords_of(node)?;
        Ok(self.area_of(lat, lon))
    }
}

/// Per-run totals written at the end of a simulation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    pub total_utility: f64,
    pub provider_fairness: f64,
    pub customer_fairness: f64,
    /// Raw-count variant of non-compliance customer fairness; absent for
    /// ride-hailing.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub customer_fairness_raw: Option<f64>,
    pub total_distance_m: f64,
    pub per_provider: BTreeMap<ProviderId, f64>,
    /// Captures per area (non-compliance) or mean wait per area (ride).
    pub per_area: BTreeMap<AreaId, f64>,
    pub served: u64,
    pub expired: u64,
}

impl MetricsReport {
    pub fn write_json(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(file, self)?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Ok(serde_json::from_reader(file)?)
    }
}
