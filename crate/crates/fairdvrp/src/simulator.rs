//! Rolling-horizon discrete-time simulation for both scenarios.
//!
//! Every minute the simulator releases newly started requests, expires
//! overdue violations, re-plans idle providers through the configured
//! dispatch algorithm, and advances all providers along graph shortest
//! paths. Utility awards are granted on arrival (Eq.-style window check for
//! captures, assignment-time ride gain at pickup) and the run closes with a
//! [`MetricsReport`].

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{DispatchAlgorithm, ReplanPolicy};
use crate::error::{Error, Result};
use crate::fairga::{AreaSnapshot, IdleProvider, PendingRequest, PlanningSnapshot};
use crate::metrics::{self, AwardEvent, MetricsReport};
use crate::sampling::{constrained_kmeans, distribute_providers};
use crate::world::{
    advance_provider, AreaId, CustomerRequest, NodeId, ProviderId, RequestId, RequestStatus,
    RoadGraph, RouteStop, ServiceProvider, SimulationClock, StepOutcome, SPEED_M_PER_MIN,
};

/// The two supported problem instances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    NonCompliance,
    RideHailing,
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scenario::NonCompliance => write!(f, "non_compliance"),
            Scenario::RideHailing => write!(f, "ride_hailing"),
        }
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "non_compliance" | "non-compliance" | "nc" => Ok(Scenario::NonCompliance),
            "ride_hailing" | "ride-hailing" | "ride" => Ok(Scenario::RideHailing),
            other => Err(Error::InvalidConfig(format!("unknown scenario '{other}'"))),
        }
    }
}

/// How providers are initially placed on the graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlacementMode {
    /// Constrained K-means over the request stream, providers distributed
    /// proportionally to cluster demand.
    Clustered,
    /// Uniform over graph nodes.
    Random,
    /// Explicit provider -> node map.
    Fixed(BTreeMap<ProviderId, NodeId>),
}

/// Full configuration of one simulation run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub horizon_min: u32,
    /// Re-planning interval in minutes.
    pub epoch_cadence: u32,
    pub num_providers: u32,
    pub placement: PlacementMode,
    pub area_rows: usize,
    pub area_cols: usize,
    pub seed: u64,
    /// Mean violation stay duration assumed by the optimizer, minutes.
    pub mean_stay: f64,
    /// Seed each GA epoch's population with the previous best plan instead
    /// of restarting fresh.
    pub warm_start: bool,
    /// Cap on clustering input size; larger request streams are subsampled.
    pub max_cluster_points: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            scenario: Scenario::NonCompliance,
            horizon_min: 480,
            epoch_cadence: 1,
            num_providers: 20,
            placement: PlacementMode::Random,
            area_rows: 4,
            area_cols: 4,
            seed: 0,
            mean_stay: 30.0,
            warm_start: false,
            max_cluster_points: 1500,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon_min == 0 {
            return Err(Error::InvalidConfig("horizon must be > 0".into()));
        }
        if self.num_providers == 0 {
            return Err(Error::InvalidConfig("provider count must be >= 1".into()));
        }
        if self.epoch_cadence == 0 {
            return Err(Error::InvalidConfig("epoch cadence must be >= 1".into()));
        }
        if !(self.mean_stay > 0.0) {
            return Err(Error::InvalidConfig("mean_stay must be > 0".into()));
        }
        if self.area_rows == 0 || self.area_cols == 0 {
            return Err(Error::InvalidConfig("area grid needs rows, cols >= 1".into()));
        }
        Ok(())
    }
}

/// Computes initial provider locations for a run.
pub fn initial_placement(
    cfg: &ScenarioConfig,
    graph: &RoadGraph,
    events: &[CustomerRequest],
) -> Result<Vec<(ProviderId, NodeId)>> {
    let ids: Vec<ProviderId> = (0..cfg.num_providers).map(ProviderId).collect();
    match &cfg.placement {
        PlacementMode::Fixed(map) => ids
            .iter()
            .map(|id| {
                let node = map.get(id).copied().ok_or_else(|| {
                    Error::InvalidConfig(format!("fixed placement misses provider {id}"))
                })?;
                graph.idx(node)?;
                Ok((*id, node))
            })
            .collect(),
        PlacementMode::Random => {
            let nodes: Vec<NodeId> = graph.nodes().map(|(id, _, _)| id).collect();
            if nodes.is_empty() {
                return Err(Error::InvalidConfig("graph has no nodes".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
            Ok(ids
                .iter()
                .map(|&id| (id, nodes[rng.gen_range(0..nodes.len())]))
                .collect())
        }
        PlacementMode::Clustered => {
            let mut points: Vec<(f64, f64)> = events
                .iter()
                .map(|r| graph.coords_of(r.service_node()))
                .collect::<Result<_>>()?;
            if points.is_empty() {
                // Nothing to cluster on; degrade to uniform placement.
                let fallback = ScenarioConfig {
                    placement: PlacementMode::Random,
                    ..cfg.clone()
                };
                return initial_placement(&fallback, graph, events);
            }
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x51_7c_c1_b7);
            while points.len() > cfg.max_cluster_points {
                let drop = rng.gen_range(0..points.len());
                points.swap_remove(drop);
            }
            let m = points.len();
            let k = (cfg.num_providers as usize)
                .min(cfg.area_rows * cfg.area_cols)
                .min(m)
                .max(1);
            let tau = m.div_ceil(2 * k);
            let model = constrained_kmeans(&points, k, tau, cfg.seed ^ 0xc1u64)?;
            let allotment = distribute_providers(&model, cfg.num_providers, graph)?;
            let mut out = Vec::with_capacity(ids.len());
            let mut next = ids.iter();
            for (node, count) in allotment {
                for _ in 0..count {
                    let id = next.next().expect("counts sum to provider count");
                    out.push((*id, node));
                }
            }
            Ok(out)
        }
    }
}

/// Writes the initial placement as a provider -> node JSON object.
pub fn write_placement_json(
    placement: &[(ProviderId, NodeId)],
    path: &std::path::Path,
) -> Result<()> {
    let map: BTreeMap<String, u32> = placement
        .iter()
        .map(|&(p, n)| (p.to_string(), n.0))
        .collect();
    serde_json::to_writer_pretty(std::fs::File::create(path)?, &map)?;
    Ok(())
}

fn epoch_seed(base: u64, minute: u32) -> u64 {
    base.wrapping_add((minute as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

struct Commitment {
    request: RequestId,
    award: f64,
}

struct Simulation<'a> {
    cfg: &'a ScenarioConfig,
    graph: &'a RoadGraph,
    requests: Vec<CustomerRequest>,
    req_idx: HashMap<RequestId, usize>,
    providers: Vec<ServiceProvider>,
    clock: SimulationClock,
    pending: BTreeSet<RequestId>,
    next_release: usize,
    award_log: Vec<AwardEvent>,
    total_distance: f64,
    area_raised: BTreeMap<AreaId, f64>,
    area_captured: BTreeMap<AreaId, f64>,
    /// Served plus committed pickup waits (ride-hailing).
    area_wait: BTreeMap<AreaId, (f64, f64)>,
    commitments: BTreeMap<ProviderId, Commitment>,
    served: u64,
    expired: u64,
}

/// Runs one scenario minute by minute and reports the run totals.
///
/// `events` must be sorted by `window_start` with valid windows and on-graph
/// nodes; anything else aborts before the simulation starts. The optional
/// `trace` sink receives one `minute,provider,node,cumulative_utility` row
/// per provider per minute.
pub fn run_simulation(
    cfg: &ScenarioConfig,
    graph: &RoadGraph,
    events: &[CustomerRequest],
    algo: &mut dyn DispatchAlgorithm,
    mut trace: Option<&mut dyn Write>,
) -> Result<MetricsReport> {
    cfg.validate()?;
    let requests = validate_events(cfg, graph, events)?;
    let placement = initial_placement(cfg, graph, &requests)?;
    check_reachability(graph, &placement, &requests)?;

    let providers: Vec<ServiceProvider> = placement
        .iter()
        .map(|&(id, node)| ServiceProvider::new(id, node))
        .collect();
    let req_idx = requests
        .iter()
        .enumerate()
        .map(|(i, r)| (r.id, i))
        .collect();

    let mut sim = Simulation {
        cfg,
        graph,
        requests,
        req_idx,
        providers,
        clock: SimulationClock::new(cfg.horizon_min),
        pending: BTreeSet::new(),
        next_release: 0,
        award_log: Vec::new(),
        total_distance: 0.0,
        area_raised: BTreeMap::new(),
        area_captured: BTreeMap::new(),
        area_wait: BTreeMap::new(),
        commitments: BTreeMap::new(),
        served: 0,
        expired: 0,
    };

    if let Some(t) = trace.as_mut() {
        writeln!(t, "minute,provider,node,cumulative_utility")?;
    }
    loop {
        let now = sim.clock.now;
        sim.release_requests(now);
        sim.expire_requests(now)?;
        if now % cfg.epoch_cadence == 0 {
            sim.replan(now, algo)?;
        }
        sim.advance_all(now)?;
        if let Some(t) = trace.as_mut() {
            for p in &sim.providers {
                writeln!(t, "{},{},{},{}", now, p.id, p.location, p.accumulated_utility)?;
            }
        }
        if !sim.clock.step() {
            break;
        }
    }
    sim.finalize()
}

fn validate_events(
    cfg: &ScenarioConfig,
    graph: &RoadGraph,
    events: &[CustomerRequest],
) -> Result<Vec<CustomerRequest>> {
    let mut out = Vec::with_capacity(events.len());
    let mut seen = BTreeSet::new();
    let mut last_ts = f64::NEG_INFINITY;
    for r in events {
        r.validate()?;
        if r.window_start < last_ts {
            return Err(Error::MalformedEvents(format!(
                "request {} out of order: window_start {} after {}",
                r.id, r.window_start, last_ts
            )));
        }
        last_ts = r.window_start;
        if !seen.insert(r.id) {
            return Err(Error::MalformedEvents(format!("duplicate request id {}", r.id)));
        }
        if r.status != RequestStatus::Pending {
            return Err(Error::MalformedEvents(format!(
                "request {} starts in status {:?}",
                r.id, r.status
            )));
        }
        match (cfg.scenario, r.start) {
            (Scenario::NonCompliance, Some(_)) => {
                return Err(Error::MalformedEvents(format!(
                    "request {} has a pickup node in the non-compliance scenario",
                    r.id
                )));
            }
            (Scenario::RideHailing, None) => {
                return Err(Error::MalformedEvents(format!(
                    "ride request {} lacks a pickup node",
                    r.id
                )));
            }
            _ => {}
        }
        graph.idx(r.destination)?;
        if let Some(s) = r.start {
            graph.idx(s)?;
        }
        if r.window_start < cfg.horizon_min as f64 {
            out.push(r.clone());
        }
    }
    Ok(out)
}

fn check_reachability(
    graph: &RoadGraph,
    placement: &[(ProviderId, NodeId)],
    requests: &[CustomerRequest],
) -> Result<()> {
    let starts: BTreeSet<NodeId> = placement.iter().map(|&(_, n)| n).collect();
    let targets: BTreeSet<NodeId> = requests.iter().map(|r| r.service_node()).collect();
    for &s in &starts {
        for &t in &targets {
            graph.travel_time_min(s, t)?;
        }
    }
    for r in requests {
        if let Some(s) = r.start {
            graph.travel_time_min(s, r.destination)?;
        }
    }
    Ok(())
}

impl<'a> Simulation<'a> {
    fn release_requests(&mut self, now: u32) {
        while self.next_release < self.requests.len() {
            let r = &self.requests[self.next_release];
            if r.window_start > now as f64 {
                break;
            }
            self.pending.insert(r.id);
            *self.area_raised.entry(r.area).or_default() += 1.0;
            self.next_release += 1;
        }
    }

    /// Removes violations whose car already departed (non-compliance only).
    fn expire_requests(&mut self, now: u32) -> Result<()> {
        if self.cfg.scenario != Scenario::NonCompliance {
            return Ok(());
        }
        let overdue: Vec<RequestId> = self
            .pending
            .iter()
            .copied()
            .filter(|rid| self.requests[self.req_idx[rid]].window_end < now as f64)
            .collect();
        for rid in overdue {
            self.requests[self.req_idx[&rid]].transition(RequestStatus::Expired)?;
            self.pending.remove(&rid);
            self.expired += 1;
            for p in &mut self.providers {
                p.remove_request(rid);
            }
        }
        Ok(())
    }

    fn replan(&mut self, now: u32, algo: &mut dyn DispatchAlgorithm) -> Result<()> {
        let idle: Vec<IdleProvider> = self
            .providers
            .iter()
            .filter(|p| self.is_plannable(p, algo.replan_policy()))
            .map(|p| IdleProvider { id: p.id, location: p.location })
            .collect();
        let claimed: BTreeSet<RequestId> = match algo.replan_policy() {
            ReplanPolicy::UntilTargetReached => self
                .providers
                .iter()
                .flat_map(|p| p.route().map(|s| s.request))
                .collect(),
            ReplanPolicy::EveryEpoch => BTreeSet::new(),
        };
        let pool: Vec<RequestId> = self
            .pending
            .iter()
            .copied()
            .filter(|r| !claimed.contains(r))
            .collect();
        if idle.is_empty() || pool.is_empty() {
            return Ok(());
        }

        let pending: Vec<PendingRequest> = pool
            .iter()
            .map(|rid| {
                let r = &self.requests[self.req_idx[rid]];
                PendingRequest {
                    id: r.id,
                    target: r.service_node(),
                    destination: r.destination,
                    area: r.area,
                    window_start: r.window_start,
                }
            })
            .collect();
        let ledgers: Vec<(ProviderId, f64)> = self
            .providers
            .iter()
            .map(|p| {
                let committed = self
                    .commitments
                    .get(&p.id)
                    .map(|c| c.award)
                    .unwrap_or(0.0);
                (p.id, p.accumulated_utility + committed)
            })
            .collect();
        let areas = match self.cfg.scenario {
            Scenario::NonCompliance => AreaSnapshot {
                capture_stats: self
                    .area_raised
                    .iter()
                    .map(|(&a, &raised)| {
                        (a, raised, self.area_captured.get(&a).copied().unwrap_or(0.0))
                    })
                    .collect(),
                wait_stats: Vec::new(),
            },
            Scenario::RideHailing => AreaSnapshot {
                capture_stats: Vec::new(),
                wait_stats: self
                    .area_wait
                    .iter()
                    .map(|(&a, &(sum, cnt))| (a, sum, cnt))
                    .collect(),
            },
        };
        let snapshot = PlanningSnapshot {
            graph: self.graph,
            scenario: self.cfg.scenario,
            now: now as f64,
            mean_stay: self.cfg.mean_stay,
            idle: idle.clone(),
            ledgers,
            pending,
            areas,
        };
        let plan = algo.plan(&snapshot, epoch_seed(self.cfg.seed, now))?;
        plan.validate()?;
        self.apply_plan(now, &idle, plan)
    }

    fn is_plannable(&self, p: &ServiceProvider, policy: ReplanPolicy) -> bool {
        if !p.is_at_node() {
            return false;
        }
        match self.cfg.scenario {
            Scenario::NonCompliance => match policy {
                ReplanPolicy::EveryEpoch => true,
                ReplanPolicy::UntilTargetReached => p.route_is_empty(),
            },
            // Ride providers are busy from assignment through drop-off.
            Scenario::RideHailing => !self.commitments.contains_key(&p.id),
        }
    }

    fn apply_plan(
        &mut self,
        now: u32,
        idle: &[IdleProvider],
        plan: crate::encoding::AllocationPlan,
    ) -> Result<()> {
        let idle_ids: BTreeSet<ProviderId> = idle.iter().map(|p| p.id).collect();
        for pid in plan.assignments.keys() {
            if !idle_ids.contains(pid) {
                return Err(Error::InvalidConfig(format!(
                    "plan assigns provider {pid}, which is not idle"
                )));
            }
        }
        for &IdleProvider { id, .. } in idle {
            let segment = plan.assignments.get(&id).cloned().unwrap_or_default();
            let pidx = self
                .providers
                .iter()
                .position(|p| p.id == id)
                .expect("idle provider exists");
            match self.cfg.scenario {
                Scenario::NonCompliance => {
                    let stops: Vec<RouteStop> = segment
                        .iter()
                        .map(|&rid| RouteStop {
                            request: rid,
                            node: self.requests[self.req_idx[&rid]].destination,
                        })
                        .collect();
                    self.providers[pidx].assign_route(stops);
                }
                Scenario::RideHailing => {
                    // Commit only the head; the remainder of the segment
                    // stays pending for future epochs.
                    let Some(&rid) = segment.first() else { continue };
                    let ridx = self.req_idx[&rid];
                    let pickup = self.requests[ridx].start.expect("validated ride request");
                    let award =
                        metrics::ride_utility(self.graph, &self.providers[pidx], &self.requests[ridx])?;
                    let to_pickup = self
                        .graph
                        .travel_time_min(self.providers[pidx].location, pickup)?;
                    let to_dest = self.graph.travel_time_min(pickup, self.requests[ridx].destination)?;
                    self.requests[ridx].transition(RequestStatus::Assigned)?;
                    self.pending.remove(&rid);
                    let wait = now as f64 + to_pickup - self.requests[ridx].window_start;
                    let slot = self.area_wait.entry(self.requests[ridx].area).or_default();
                    slot.0 += wait;
                    slot.1 += 1.0;
                    self.commitments.insert(id, Commitment { request: rid, award });
                    self.providers[pidx].busy_until = now as f64 + to_pickup + to_dest;
                    self.providers[pidx].picked_up = false;
                    self.providers[pidx]
                        .assign_route(vec![RouteStop { request: rid, node: pickup }]);
                }
            }
        }
        Ok(())
    }

    fn advance_all(&mut self, now: u32) -> Result<()> {
        for pidx in 0..self.providers.len() {
            let mut budget = SPEED_M_PER_MIN;
            loop {
                let outcome = advance_provider(&mut self.providers[pidx], self.graph, budget)?;
                self.total_distance += outcome.moved_m();
                match outcome {
                    StepOutcome::Idle { .. } | StepOutcome::EnRoute { .. } => break,
                    StepOutcome::TargetReached { budget_left, .. } => {
                        budget = budget_left;
                        let t_arr = now as f64 + (SPEED_M_PER_MIN - budget) / SPEED_M_PER_MIN;
                        self.serve_arrival(pidx, t_arr)?;
                    }
                }
            }
        }
        Ok(())
    }

    /// Handles a provider standing on its current head-target node at time
    /// `t` (fractional minutes).
    fn serve_arrival(&mut self, pidx: usize, t: f64) -> Result<()> {
        let rid = self.providers[pidx].head().expect("arrival implies a head").request;
        let ridx = self.req_idx[&rid];
        match self.cfg.scenario {
            Scenario::NonCompliance => {
                if self.requests[ridx].status == RequestStatus::Served {
                    return Err(Error::AlreadyServed(rid));
                }
                self.providers[pidx].pop_head();
                if self.requests[ridx].status != RequestStatus::Pending {
                    return Ok(()); // stale stop, already expired
                }
                let in_window = self.requests[ridx].window_start <= t
                    && t <= self.requests[ridx].window_end;
                if in_window {
                    self.requests[ridx].transition(RequestStatus::Assigned)?;
                    self.requests[ridx].transition(RequestStatus::Served)?;
                    self.pending.remove(&rid);
                    self.served += 1;
                    let pid = self.providers[pidx].id;
                    self.providers[pidx].accumulated_utility += 1.0;
                    *self.area_captured.entry(self.requests[ridx].area).or_default() += 1.0;
                    self.award_log.push(AwardEvent { t, provider: pid, request: rid, award: 1.0 });
                    for (i, p) in self.providers.iter_mut().enumerate() {
                        if i != pidx {
                            p.remove_request(rid);
                        }
                    }
                } else {
                    // The car is gone; the visit consumes the request.
                    self.requests[ridx].transition(RequestStatus::Expired)?;
                    self.pending.remove(&rid);
                    self.expired += 1;
                    for (i, p) in self.providers.iter_mut().enumerate() {
                        if i != pidx {
                            p.remove_request(rid);
                        }
                    }
                }
            }
            Scenario::RideHailing => {
                if !self.providers[pidx].picked_up {
                    // Pickup: the waiting time ends and the assignment-time
                    // award is banked.
                    if self.requests[ridx].status == RequestStatus::Served {
                        return Err(Error::AlreadyServed(rid));
                    }
                    self.requests[ridx].transition(RequestStatus::Served)?;
                    self.served += 1;
                    let pid = self.providers[pidx].id;
                    let award = self
                        .commitments
                        .get(&pid)
                        .map(|c| {
                            debug_assert_eq!(c.request, rid);
                            c.award
                        })
                        .expect("pickup without commitment");
                    self.providers[pidx].accumulated_utility += award;
                    self.award_log.push(AwardEvent { t, provider: pid, request: rid, award });
                    self.providers[pidx].picked_up = true;
                    let dest = self.requests[ridx].destination;
                    self.providers[pidx].retarget_head(dest);
                } else {
                    // Drop-off: the provider becomes idle again.
                    self.providers[pidx].pop_head();
                    self.providers[pidx].picked_up = false;
                    let pid = self.providers[pidx].id;
                    self.commitments.remove(&pid);
                }
            }
        }
        Ok(())
    }

    fn finalize(self) -> Result<MetricsReport> {
        let per_provider: BTreeMap<ProviderId, f64> = self
            .providers
            .iter()
            .map(|p| (p.id, p.accumulated_utility))
            .collect();
        let total_utility: f64 = per_provider.values().sum();
        let logged = metrics::total_utility(&self.award_log);
        debug_assert!(
            (total_utility - logged).abs() < 1e-6,
            "ledger total {total_utility} != event log total {logged}"
        );
        let horizon = self.cfg.horizon_min as f64;
        let customer_fairness =
            metrics::customer_fairness(self.cfg.scenario, &self.requests, &self.award_log, horizon);
        let customer_fairness_raw = match self.cfg.scenario {
            Scenario::NonCompliance => Some(metrics::customer_fairness_raw_counts(
                &self.requests,
                &self.award_log,
            )),
            Scenario::RideHailing => None,
        };
        let per_area = match self.cfg.scenario {
            Scenario::NonCompliance => self
                .area_raised
                .keys()
                .map(|&a| (a, self.area_captured.get(&a).copied().unwrap_or(0.0)))
                .collect(),
            Scenario::RideHailing => {
                metrics::area_mean_waits_report(&self.requests, &self.award_log, horizon)
            }
        };
        Ok(MetricsReport {
            total_utility,
            provider_fairness: metrics::provider_fairness(&per_provider)?,
            customer_fairness,
            customer_fairness_raw,
            total_distance_m: self.total_distance,
            per_provider,
            per_area,
            served: self.served,
            expired: self.expired,
        })
    }
}
