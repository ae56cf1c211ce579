//! Geographic world model: road graph, entities, shortest-path travel times
//! and the discrete simulation clock.
//!
//! All travel derives from the directed road graph. Providers move at a
//! constant [`SPEED_M_PER_MIN`] along graph edges and may only accept new
//! instructions while standing exactly on a node; a plan handed to a provider
//! mid-edge is deferred until the next node arrival.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, VecDeque};
use std::fmt;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::haversine;

/// Constant provider speed in meters per simulated minute.
pub const SPEED_M_PER_MIN: f64 = 70.0;

macro_rules! id_type {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(
            Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
        )]
        #[serde(transparent)]
        pub struct $name(pub u32);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0)
            }
        }
    };
}

id_type!(
    /// Identifier of a graph node (location).
    NodeId
);
id_type!(
    /// Identifier of a service provider (officer or driver).
    ProviderId
);
id_type!(
    /// Identifier of a customer request.
    RequestId
);
id_type!(
    /// Identifier of a spatial area used by customer fairness.
    AreaId
);

/// Shortest-path tree rooted at one origin, kept in the graph's cache.
pub(crate) struct PathTree {
    pub(crate) dist_m: Vec<f64>,
    parent: Vec<u32>,
}

/// Directed geographic graph of locations and travel edges.
///
/// Shortest-path results are memoized per origin behind an `RwLock`; the
/// cache is invisible to callers, which only see query methods taking
/// `&self`.
pub struct RoadGraph {
    ids: Vec<NodeId>,
    index: HashMap<NodeId, usize>,
    coords: Vec<(f64, f64)>,
    adj: Vec<Vec<(usize, f64)>>,
    edge_count: usize,
    trees: RwLock<HashMap<usize, Arc<PathTree>>>,
}

impl fmt::Debug for RoadGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RoadGraph")
            .field("nodes", &self.ids.len())
            .field("edges", &self.edge_count)
            .finish()
    }
}

impl Default for RoadGraph {
    fn default() -> Self {
        Self::new()
    }
}

impl RoadGraph {
    pub fn new() -> Self {
        RoadGraph {
            ids: Vec::new(),
            index: HashMap::new(),
            coords: Vec::new(),
            adj: Vec::new(),
            edge_count: 0,
            trees: RwLock::new(HashMap::new()),
        }
    }

    pub fn add_node(&mut self, id: NodeId, lat: f64, lon: f64) -> Result<()> {
        if self.index.contains_key(&id) {
            return Err(Error::DuplicateNode(id));
        }
        self.index.insert(id, self.ids.len());
        self.ids.push(id);
        self.coords.push((lat, lon));
        self.adj.push(Vec::new());
        Ok(())
    }

    /// Adds a directed edge with a length in meters. Lengths must be > 0.
    pub fn add_edge(&mut self, from: NodeId, to: NodeId, length_m: f64) -> Result<()> {
        if !(length_m > 0.0) {
            return Err(Error::BadEdgeLength { from, to, length_m });
        }
        let f = self.idx(from)?;
        let t = self.idx(to)?;
        self.adj[f].push((t, length_m));
        self.edge_count += 1;
        self.trees.write().expect("graph cache lock").clear();
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.ids.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.index.contains_key(&id)
    }

    /// Iterates over `(id, lat, lon)` for every node.
    pub fn nodes(&self) -> impl Iterator<Item = (NodeId, f64, f64)> + '_ {
        self.ids
            .iter()
            .zip(&self.coords)
            .map(|(id, &(lat, lon))| (*id, lat, lon))
    }

    /// Iterates over `(from, to, length_m)` for every directed edge.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId, f64)> + '_ {
        self.adj.iter().enumerate().flat_map(move |(f, outs)| {
            outs.iter()
                .map(move |&(t, len)| (self.ids[f], self.ids[t], len))
        })
    }

    pub fn coords_of(&self, id: NodeId) -> Result<(f64, f64)> {
        Ok(self.coords[self.idx(id)?])
    }

    /// `(min_lat, min_lon, max_lat, max_lon)` over all nodes.
    pub fn bounding_box(&self) -> Option<(f64, f64, f64, f64)> {
        if self.coords.is_empty() {
            return None;
        }
        let mut bb = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
        for &(lat, lon) in &self.coords {
            bb.0 = bb.0.min(lat);
            bb.1 = bb.1.min(lon);
            bb.2 = bb.2.max(lat);
            bb.3 = bb.3.max(lon);
        }
        Some(bb)
    }

    /// Nearest node by Haversine distance; ties resolved to the lowest id.
    pub fn nearest_node(&self, lat: f64, lon: f64) -> Option<NodeId> {
        let mut best: Option<(f64, NodeId)> = None;
        for (id, nlat, nlon) in self.nodes() {
            let d = haversine(lat, lon, nlat, nlon);
            let better = match best {
                None => true,
                Some((bd, bid)) => d < bd || (d == bd && id < bid),
            };
            if better {
                best = Some((d, id));
            }
        }
        best.map(|(_, id)| id)
    }

    pub(crate) fn idx(&self, id: NodeId) -> Result<usize> {
        self.index.get(&id).copied().ok_or(Error::UnknownNode(id))
    }

    pub(crate) fn coords_idx(&self, idx: usize) -> (f64, f64) {
        self.coords[idx]
    }

    /// Shortest-path tree from one origin, computed on first use.
    pub(crate) fn tree_from(&self, origin: usize) -> Arc<PathTree> {
        if let Some(t) = self.trees.read().expect("graph cache lock").get(&origin) {
            return Arc::clone(t);
        }
        let tree = Arc::new(self.dijkstra(origin));
        self.trees
            .write()
            .expect("graph cache lock")
            .insert(origin, Arc::clone(&tree));
        tree
    }

    fn dijkstra(&self, origin: usize) -> PathTree {
        struct Entry(f64, usize);
        impl PartialEq for Entry {
            fn eq(&self, o: &Self) -> bool {
                self.cmp(o) == Ordering::Equal
            }
        }
        impl Eq for Entry {}
        impl PartialOrd for Entry {
            fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
                Some(self.cmp(o))
            }
        }
        impl Ord for Entry {
            // Reversed so the std max-heap pops the smallest distance first;
            // node index breaks ties deterministically.
            fn cmp(&self, o: &Self) -> Ordering {
                o.0.total_cmp(&self.0).then(o.1.cmp(&self.1))
            }
        }

        let n = self.ids.len();
        let mut dist = vec![f64::INFINITY; n];
        let mut parent = vec![u32::MAX; n];
        let mut heap = BinaryHeap::new();
        dist[origin] = 0.0;
        heap.push(Entry(0.0, origin));
        while let Some(Entry(d, u)) = heap.pop() {
            if d > dist[u] {
                continue;
            }
            for &(v, len) in &self.adj[u] {
                let nd = d + len;
                if nd < dist[v] {
                    dist[v] = nd;
                    parent[v] = u as u32;
                    heap.push(Entry(nd, v));
                }
            }
        }
        PathTree { dist_m: dist, parent }
    }

    /// Shortest-path distance in meters along directed edges.
    pub fn distance_m(&self, from: NodeId, to: NodeId) -> Result<f64> {
        let f = self.idx(from)?;
        let t = self.idx(to)?;
        let d = self.tree_from(f).dist_m[t];
        if d.is_finite() {
            Ok(d)
        } else {
            Err(Error::Unreachable { from, to })
        }
    }

    /// Shortest travel time in minutes at the constant provider speed.
    ///
    /// Returns 0 when `from == to`; an unreachable destination is an explicit
    /// error, never a sentinel value.
    pub fn travel_time_min(&self, from: NodeId, to: NodeId) -> Result<f64> {
        Ok(self.distance_m(from, to)? / SPEED_M_PER_MIN)
    }

    /// Node sequence of a shortest path, excluding `from`, ending with `to`.
    pub fn path_nodes(&self, from: NodeId, to: NodeId) -> Result<Vec<NodeId>> {
        let f = self.idx(from)?;
        let t = self.idx(to)?;
        if f == t {
            return Ok(Vec::new());
        }
        let tree = self.tree_from(f);
        if !tree.dist_m[t].is_finite() {
            return Err(Error::Unreachable { from, to });
        }
        let mut rev = Vec::new();
        let mut cur = t;
        while cur != f {
            rev.push(self.ids[cur]);
            cur = tree.parent[cur] as usize;
        }
        rev.reverse();
        Ok(rev)
    }

    /// Length of the direct edge `from -> to` (minimum over parallel edges).
    fn edge_length(&self, from: usize, to: usize) -> Option<f64> {
        self.adj[from]
            .iter()
            .filter(|&&(t, _)| t == to)
            .map(|&(_, len)| len)
            .min_by(|a, b| a.total_cmp(b))
    }
}

/// Lifecycle of a customer request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestStatus {
    Pending,
    Assigned,
    Served,
    Expired,
}

/// A demand event: a parked violation (no start node) or a ride request.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CustomerRequest {
    pub id: RequestId,
    /// Pickup node; absent in the non-compliance scenario.
    pub start: Option<NodeId>,
    pub destination: NodeId,
    pub window_start: f64,
    /// `f64::INFINITY` for ride-hailing, where riders wait until picked up.
    pub window_end: f64,
    pub area: AreaId,
    pub status: RequestStatus,
}

impl CustomerRequest {
    pub fn validate(&self) -> Result<()> {
        if self.window_start > self.window_end {
            return Err(Error::MalformedEvents(format!(
                "request {}: window end {} before start {}",
                self.id, self.window_end, self.window_start
            )));
        }
        Ok(())
    }

    /// Applies a status transition, rejecting anything outside
    /// pending -> assigned -> served and pending/assigned -> expired.
    pub fn transition(&mut self, to: RequestStatus) -> Result<()> {
        use RequestStatus::*;
        let ok = matches!(
            (self.status, to),
            (Pending, Assigned) | (Assigned, Served) | (Pending, Expired) | (Assigned, Expired)
        );
        if !ok {
            return Err(Error::MalformedEvents(format!(
                "request {}: illegal status transition {:?} -> {:?}",
                self.id, self.status, to
            )));
        }
        self.status = to;
        Ok(())
    }

    /// Service node for this request: the pickup when present, otherwise the
    /// violation location.
    pub fn service_node(&self) -> NodeId {
        self.start.unwrap_or(self.destination)
    }
}

/// One planned stop: the request and the node it is served at.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RouteStop {
    pub request: RequestId,
    pub node: NodeId,
}

/// A mobile agent accumulating utility while following planned routes.
#[derive(Debug, Clone)]
pub struct ServiceProvider {
    pub id: ProviderId,
    /// Last node reached (`l_n`).
    pub location: NodeId,
    pub accumulated_utility: f64,
    /// Time at which a committed passenger trip completes (ride-hailing).
    pub busy_until: f64,
    /// Meters already walked along the current edge.
    pub position_progress: f64,
    /// Ride-hailing: the head passenger is on board.
    pub picked_up: bool,
    route: VecDeque<RouteStop>,
    path: VecDeque<NodeId>,
    pending_route: Option<Vec<RouteStop>>,
}

impl ServiceProvider {
    pub fn new(id: ProviderId, location: NodeId) -> Self {
        ServiceProvider {
            id,
            location,
            accumulated_utility: 0.0,
            busy_until: 0.0,
            position_progress: 0.0,
            picked_up: false,
            route: VecDeque::new(),
            path: VecDeque::new(),
            pending_route: None,
        }
    }

    pub fn is_at_node(&self) -> bool {
        self.position_progress == 0.0
    }

    pub fn route(&self) -> impl Iterator<Item = &RouteStop> {
        self.route.iter()
    }

    pub fn route_is_empty(&self) -> bool {
        self.route.is_empty()
    }

    pub fn head(&self) -> Option<&RouteStop> {
        self.route.front()
    }

    /// Installs a new route. Takes effect immediately at a node and is
    /// otherwise deferred until the next node arrival.
    pub fn assign_route(&mut self, stops: Vec<RouteStop>) {
        debug_assert!(
            {
                let mut ids: Vec<_> = stops.iter().map(|s| s.request).collect();
                ids.sort();
                ids.windows(2).all(|w| w[0] != w[1])
            },
            "route contains duplicate request ids"
        );
        if self.is_at_node() {
            self.route = stops.into();
            self.path.clear();
            self.pending_route = None;
        } else {
            self.pending_route = Some(stops);
        }
    }

    /// Replaces the head stop's node (ride-hailing pickup -> drop-off leg).
    pub fn retarget_head(&mut self, node: NodeId) {
        if let Some(head) = self.route.front_mut() {
            head.node = node;
            self.path.clear();
        }
    }

    pub fn pop_head(&mut self) -> Option<RouteStop> {
        self.path.clear();
        self.route.pop_front()
    }

    /// Drops a request from the planned route (served elsewhere or expired).
    pub fn remove_request(&mut self, request: RequestId) {
        let was_head = self.route.front().map(|s| s.request) == Some(request);
        self.route.retain(|s| s.request != request);
        if let Some(p) = &mut self.pending_route {
            p.retain(|s| s.request != request);
        }
        if was_head {
            if self.is_at_node() {
                self.path.clear();
            } else {
                // Finish the committed edge, then re-route at the node.
                self.path.drain(1..);
            }
        }
    }
}

/// Result of advancing a provider by (part of) one minute.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepOutcome {
    /// No route; the provider stays in place (after finishing a committed
    /// edge, when mid-way).
    Idle { moved_m: f64 },
    /// Movement budget exhausted before the head target was reached.
    EnRoute { moved_m: f64 },
    /// The head target node was reached with `budget_left` meters unused.
    TargetReached { moved_m: f64, budget_left: f64 },
}

impl StepOutcome {
    pub fn moved_m(&self) -> f64 {
        match *self {
            StepOutcome::Idle { moved_m }
            | StepOutcome::EnRoute { moved_m }
            | StepOutcome::TargetReached { moved_m, .. } => moved_m,
        }
    }
}

/// Moves a provider up to `budget_m` meters along shortest paths toward its
/// route head. Deferred plans are applied at the first node touched. The
/// caller serves the request on [`StepOutcome::TargetReached`] and may resume
/// the same minute with the returned leftover budget.
pub fn advance_provider(
    p: &mut ServiceProvider,
    graph: &RoadGraph,
    budget_m: f64,
) -> Result<StepOutcome> {
    let mut budget = budget_m;
    let mut moved = 0.0;
    loop {
        if p.is_at_node() {
            if let Some(stops) = p.pending_route.take() {
                p.route = stops.into();
                p.path.clear();
            }
            let Some(head) = p.route.front().copied() else {
                return Ok(StepOutcome::Idle { moved_m: moved });
            };
            if head.node == p.location {
                return Ok(StepOutcome::TargetReached {
                    moved_m: moved,
                    budget_left: budget,
                });
            }
            if p.path.is_empty() {
                p.path = graph.path_nodes(p.location, head.node)?.into();
            }
        }
        if budget <= 0.0 {
            return Ok(StepOutcome::EnRoute { moved_m: moved });
        }
        let Some(&next) = p.path.front() else {
            // Mid-edge with an emptied route: the edge was already finished
            // by the branch below, so this is unreachable from valid states.
            return Ok(StepOutcome::Idle { moved_m: moved });
        };
        let from = graph.idx(p.location)?;
        let to = graph.idx(next)?;
        let edge_len = graph
            .edge_length(from, to)
            .ok_or(Error::Unreachable { from: p.location, to: next })?;
        let remaining = edge_len - p.position_progress;
        if budget >= remaining {
            budget -= remaining;
            moved += remaining;
            p.position_progress = 0.0;
            p.location = next;
            p.path.pop_front();
            if p.path.is_empty() && p.route.is_empty() && p.pending_route.is_none() {
                return Ok(StepOutcome::Idle { moved_m: moved });
            }
        } else {
            p.position_progress += budget;
            moved += budget;
            return Ok(StepOutcome::EnRoute { moved_m: moved });
        }
    }
}

/// Discrete clock: `now` advances by exactly one minute per step.
#[derive(Debug, Clone, Copy)]
pub struct SimulationClock {
    pub now: u32,
    pub horizon: u32,
}

impl SimulationClock {
    pub fn new(horizon: u32) -> Self {
        SimulationClock { now: 0, horizon }
    }

    /// Advances one minute; returns false once the horizon is reached.
    pub fn step(&mut self) -> bool {
        if self.now >= self.horizon {
            return false;
        }
        self.now += 1;
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn n(i: u32) -> NodeId {
        NodeId(i)
    }

    fn line_graph(spacing: f64, count: u32) -> RoadGraph {
        let mut g = RoadGraph::new();
        for i in 0..count {
            g.add_node(n(i), 0.0, i as f64 * 1e-4).unwrap();
        }
        for i in 0..count - 1 {
            g.add_edge(n(i), n(i + 1), spacing).unwrap();
            g.add_edge(n(i + 1), n(i), spacing).unwrap();
        }
        g
    }

    #[test]
    fn travel_time_identity_is_zero() {
        let g = line_graph(700.0, 3);
        assert_eq!(g.travel_time_min(n(1), n(1)).unwrap(), 0.0);
    }

    #[test]
    fn travel_time_single_edge() {
        let g = line_graph(700.0, 2);
        assert_eq!(g.travel_time_min(n(0), n(1)).unwrap(), 10.0);
    }

    #[test]
    fn unreachable_is_an_error() {
        let mut g = RoadGraph::new();
        g.add_node(n(0), 0.0, 0.0).unwrap();
        g.add_node(n(1), 0.0, 1.0).unwrap();
        g.add_edge(n(0), n(1), 100.0).unwrap();
        assert!(matches!(
            g.travel_time_min(n(1), n(0)),
            Err(Error::Unreachable { .. })
        ));
    }

    #[test]
    fn rejects_bad_edges_and_duplicate_nodes() {
        let mut g = RoadGraph::new();
        g.add_node(n(0), 0.0, 0.0).unwrap();
        g.add_node(n(1), 0.0, 1.0).unwrap();
        assert!(matches!(
            g.add_edge(n(0), n(1), 0.0),
            Err(Error::BadEdgeLength { .. })
        ));
        assert!(matches!(
            g.add_edge(n(0), n(2), 10.0),
            Err(Error::UnknownNode(_))
        ));
        assert!(matches!(
            g.add_node(n(0), 1.0, 1.0),
            Err(Error::DuplicateNode(_))
        ));
    }

    /// Brute-force enumeration of all simple paths, used as the oracle for
    /// the diamond-graph shortest-path value.
    fn all_simple_path_lengths(
        g: &RoadGraph,
        from: NodeId,
        to: NodeId,
        visited: &mut Vec<NodeId>,
        acc: f64,
        out: &mut Vec<f64>,
    ) {
        if from == to {
            out.push(acc);
            return;
        }
        for (f, t, len) in g.edges() {
            if f == from && !visited.contains(&t) {
                visited.push(t);
                all_simple_path_lengths(g, t, to, visited, acc + len, out);
                visited.pop();
            }
        }
    }

    #[test]
    fn diamond_graph_matches_path_enumeration() {
        let mut g = RoadGraph::new();
        for i in 0..4 {
            g.add_node(n(i), 0.0, i as f64).unwrap();
        }
        // Asymmetric diamond with a shortcut edge.
        g.add_edge(n(0), n(1), 300.0).unwrap();
        g.add_edge(n(0), n(2), 400.0).unwrap();
        g.add_edge(n(1), n(3), 500.0).unwrap();
        g.add_edge(n(2), n(3), 350.0).unwrap();
        g.add_edge(n(1), n(2), 120.0).unwrap();

        let mut lengths = Vec::new();
        all_simple_path_lengths(&g, n(0), n(3), &mut vec![n(0)], 0.0, &mut lengths);
        let best = lengths.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        assert_eq!(best, 750.0);
        assert_eq!(g.travel_time_min(n(0), n(3)).unwrap(), best / SPEED_M_PER_MIN);
    }

    #[test]
    fn triangle_inequality_holds_on_sampled_triples() {
        let g = line_graph(100.0, 8);
        for a in 0..8u32 {
            for b in 0..8u32 {
                for c in 0..8u32 {
                    let ab = g.travel_time_min(n(a), n(b)).unwrap();
                    let bc = g.travel_time_min(n(b), n(c)).unwrap();
                    let ac = g.travel_time_min(n(a), n(c)).unwrap();
                    assert!(ac <= ab + bc + 1e-9);
                    assert!(ac >= 0.0);
                }
            }
        }
    }

    #[test]
    fn idle_provider_does_not_move() {
        let g = line_graph(100.0, 3);
        let mut p = ServiceProvider::new(ProviderId(0), n(0));
        let out = advance_provider(&mut p, &g, SPEED_M_PER_MIN).unwrap();
        assert_eq!(out, StepOutcome::Idle { moved_m: 0.0 });
        assert_eq!(p.location, n(0));
    }

    #[test]
    fn provider_seventy_meters_out_arrives_exactly() {
        let g = line_graph(70.0, 2);
        let mut p = ServiceProvider::new(ProviderId(0), n(0));
        p.assign_route(vec![RouteStop { request: RequestId(0), node: n(1) }]);
        match advance_provider(&mut p, &g, SPEED_M_PER_MIN).unwrap() {
            StepOutcome::TargetReached { moved_m, budget_left } => {
                assert_eq!(moved_m, 70.0);
                assert_eq!(budget_left, 0.0);
                assert_eq!(p.location, n(1));
            }
            other => panic!("expected arrival, got {other:?}"),
        }
    }

    #[test]
    fn per_step_displacement_is_speed_bounded() {
        let g = line_graph(45.0, 10);
        let mut p = ServiceProvider::new(ProviderId(0), n(0));
        p.assign_route(vec![RouteStop { request: RequestId(0), node: n(9) }]);
        for _ in 0..10 {
            let out = advance_provider(&mut p, &g, SPEED_M_PER_MIN).unwrap();
            assert!(out.moved_m() <= SPEED_M_PER_MIN + 1e-9);
            if matches!(out, StepOutcome::TargetReached { .. }) {
                break;
            }
        }
    }

    /// Step-by-step trace over a 3-node path: a plan handed to a mid-edge
    /// provider only takes effect at the next node arrival.
    #[test]
    fn mid_edge_plan_is_deferred_until_node_arrival() {
        let g = line_graph(100.0, 3);
        let mut p = ServiceProvider::new(ProviderId(0), n(0));
        p.assign_route(vec![RouteStop { request: RequestId(0), node: n(2) }]);

        // Minute 1: 70 m into edge 0 -> 1.
        let out = advance_provider(&mut p, &g, SPEED_M_PER_MIN).unwrap();
        assert_eq!(out, StepOutcome::EnRoute { moved_m: 70.0 });
        assert!(!p.is_at_node());

        // New plan while mid-edge: turn back to node 0. Deferred.
        p.assign_route(vec![RouteStop { request: RequestId(1), node: n(0) }]);
        assert_eq!(p.head().unwrap().request, RequestId(0));

        // Minute 2: finishes edge to node 1 (30 m), the deferred plan kicks
        // in there, and the provider walks 40 m back toward node 0.
        let out = advance_provider(&mut p, &g, SPEED_M_PER_MIN).unwrap();
        assert_eq!(out, StepOutcome::EnRoute { moved_m: 70.0 });
        assert_eq!(p.location, n(1));
        assert_eq!(p.head().unwrap().request, RequestId(1));
        assert!((p.position_progress - 40.0).abs() < 1e-9);

        // Minute 3: reaches node 0 with 10 m budget left.
        match advance_provider(&mut p, &g, SPEED_M_PER_MIN).unwrap() {
            StepOutcome::TargetReached { moved_m, budget_left } => {
                assert!((moved_m - 60.0).abs() < 1e-9);
                assert!((budget_left - 10.0).abs() < 1e-9);
                assert_eq!(p.location, n(0));
            }
            other => panic!("expected arrival, got {other:?}"),
        }
    }

    #[test]
    fn status_machine_rejects_illegal_transitions() {
        let mut r = CustomerRequest {
            id: RequestId(0),
            start: None,
            destination: n(0),
            window_start: 0.0,
            window_end: 5.0,
            area: AreaId(0),
            status: RequestStatus::Pending,
        };
        r.transition(RequestStatus::Assigned).unwrap();
        r.transition(RequestStatus::Served).unwrap();
        assert!(r.transition(RequestStatus::Expired).is_err());
        assert!(r.transition(RequestStatus::Pending).is_err());
    }

    #[test]
    fn clock_steps_one_minute_at_a_time() {
        let mut c = SimulationClock::new(3);
        assert_eq!(c.now, 0);
        assert!(c.step());
        assert!(c.step());
        assert!(c.step());
        assert_eq!(c.now, 3);
        assert!(!c.step());
        assert_eq!(c.now, 3);
    }
}
