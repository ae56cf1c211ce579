//! Constrained K-means provider placement.
//!
//! Clusters historical request locations with a minimum cluster size, then
//! distributes providers over the cluster centroids proportionally to
//! demand. The size-constrained assignment step is solved exactly as a
//! transportation problem (successive-shortest-path min-cost flow), which
//! keeps the clustering objective non-increasing across iterations.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::world::{NodeId, RoadGraph};

/// Result of a constrained clustering run.
#[derive(Debug, Clone)]
pub struct ClusterModel {
    pub k: usize,
    /// Minimum number of points per cluster.
    pub tau: usize,
    pub centroids: Vec<(f64, f64)>,
    /// Point index -> cluster index.
    pub assignment: Vec<usize>,
    /// Expected request count per cluster (member counts of the fit data).
    pub demand_weight: Vec<f64>,
    /// Objective value after each iteration; non-increasing.
    pub objective_trace: Vec<f64>,
}

/// Half squared Euclidean distance, the clustering objective's point cost.
fn point_cost(p: (f64, f64), c: (f64, f64)) -> f64 {
    let (dx, dy) = (p.0 - c.0, p.1 - c.1);
    0.5 * (dx * dx + dy * dy)
}

/// Objective value of an assignment against fixed centroids.
pub fn assignment_objective(
    points: &[(f64, f64)],
    centroids: &[(f64, f64)],
    assignment: &[usize],
) -> f64 {
    points
        .iter()
        .zip(assignment)
        .map(|(&p, &h)| point_cost(p, centroids[h]))
        .sum()
}

/// Clusters `points` into `k` groups of at least `tau` members each.
///
/// The assignment step per iteration is exact (min-cost flow), so the
/// objective never increases; iteration stops when assignments stabilize or
/// after 100 rounds. Deterministic for a fixed seed.
pub fn constrained_kmeans(
    points: &[(f64, f64)],
    k: usize,
    tau: usize,
    seed: u64,
) -> Result<ClusterModel> {
    let m = points.len();
    if k == 0 {
        return Err(Error::InvalidConfig("cluster count k must be >= 1".into()));
    }
    if k * tau > m {
        return Err(Error::InfeasibleClustering { k, tau, points: m });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = kmeans_plus_plus_init(points, k, &mut rng);
    let (mut assignment, initial_cost) = constrained_assignment(points, &centroids, tau)?;
    let mut trace = vec![initial_cost];

    for _ in 0..100 {
        let new_centroids = update_centroids(points, &assignment, &centroids);
        let (new_assignment, new_cost) = constrained_assignment(points, &new_centroids, tau)?;
        trace.push(new_cost);
        let stable = new_assignment == assignment;
        centroids = new_centroids;
        assignment = new_assignment;
        if stable {
            break;
        }
    }

    let mut demand_weight = vec![0.0; k];
    for &h in &assignment {
        demand_weight[h] += 1.0;
    }
    Ok(ClusterModel {
        k,
        tau,
        centroids,
        assignment,
        demand_weight,
        objective_trace: trace,
    })
}

fn kmeans_plus_plus_init<R: Rng>(points: &[(f64, f64)], k: usize, rng: &mut R) -> Vec<(f64, f64)> {
    let mut centroids = Vec::with_capacity(k);
    centroids.push(points[rng.gen_range(0..points.len())]);
    let mut d2: Vec<f64> = points
        .iter()
        .map(|&p| 2.0 * point_cost(p, centroids[0]))
        .collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total <= 0.0 {
            // All remaining mass on already-chosen positions; spread
            // deterministically.
            centroids.len() % points.len()
        } else {
            let mut target = rng.gen::<f64>() * total;
            let mut chosen = points.len() - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        };
        let c = points[next];
        centroids.push(c);
        for (i, &p) in points.iter().enumerate() {
            d2[i] = d2[i].min(2.0 * point_cost(p, c));
        }
    }
    centroids
}

fn update_centroids(
    points: &[(f64, f64)],
    assignment: &[usize],
    previous: &[(f64, f64)],
) -> Vec<(f64, f64)> {
    let k = previous.len();
    let mut sums = vec![(0.0, 0.0); k];
    let mut counts = vec![0usize; k];
    for (&p, &h) in points.iter().zip(assignment) {
        sums[h].0 += p.0;
        sums[h].1 += p.1;
        counts[h] += 1;
    }
    (0..k)
        .map(|h| {
            if counts[h] == 0 {
                previous[h]
            } else {
                (sums[h].0 / counts[h] as f64, sums[h].1 / counts[h] as f64)
            }
        })
        .collect()
}

/// Solves the size-constrained assignment exactly for fixed centroids.
///
/// Every point joins exactly one cluster and cluster `h` receives at least
/// `tau` points; among all such assignments the returned one minimizes the
/// summed point costs. Returns `(assignment, objective)`.
pub fn constrained_assignment(
    points: &[(f64, f64)],
    centroids: &[(f64, f64)],
    tau: usize,
) -> Result<(Vec<usize>, f64)> {
    let m = points.len();
    let k = centroids.len();
    if k * tau > m {
        return Err(Error::InfeasibleClustering { k, tau, points: m });
    }

    // Transportation network with per-cluster lower bounds rewritten as
    // super-source / super-sink demands:
    //   SS -> point_i (1), point_i -> cluster_h (1, cost), cluster_h -> TT
    //   (tau), cluster_h -> t (m - tau), SS -> t (k * tau), t -> s (m),
    //   s -> TT (m).
    let ss = 0;
    let tt = 1;
    let s = 2;
    let t = 3;
    let point = |i: usize| 4 + i;
    let cluster = |h: usize| 4 + m + h;
    let n_nodes = 4 + m + k;

    let mut mcf = MinCostFlow::new(n_nodes);
    for i in 0..m {
        mcf.add_edge(ss, point(i), 1, 0.0);
        for (h, &c) in centroids.iter().enumerate() {
            mcf.add_edge(point(i), cluster(h), 1, point_cost(points[i], c));
        }
    }
    for h in 0..k {
        if tau > 0 {
            mcf.add_edge(cluster(h), tt, tau as i64, 0.0);
        }
        mcf.add_edge(cluster(h), t, (m - tau) as i64, 0.0);
    }
    if k * tau > 0 {
        mcf.add_edge(ss, t, (k * tau) as i64, 0.0);
    }
    mcf.add_edge(t, s, m as i64, 0.0);
    mcf.add_edge(s, tt, m as i64, 0.0);

    let want = (m + k * tau) as i64;
    let (flow, _) = mcf.run(ss, tt);
    if flow != want {
        return Err(Error::InfeasibleClustering { k, tau, points: m });
    }

    let mut assignment = vec![usize::MAX; m];
    for i in 0..m {
        for h in 0..k {
            if mcf.flow_between(point(i), cluster(h)) > 0 {
                assignment[i] = h;
            }
        }
    }
    debug_assert!(assignment.iter().all(|&h| h != usize::MAX));
    let objective = assignment_objective(points, centroids, &assignment);
    Ok((assignment, objective))
}

struct FlowEdge {
    to: usize,
    cap: i64,
    cost: f64,
}

/// Successive-shortest-path min-cost flow. Path search uses SPFA, which
/// stays exact on the residual network's negative reverse costs.
struct MinCostFlow {
    edges: Vec<FlowEdge>,
    adj: Vec<Vec<usize>>,
}

impl MinCostFlow {
    fn new(n: usize) -> Self {
        MinCostFlow { edges: Vec::new(), adj: vec![Vec::new(); n] }
    }

    fn add_edge(&mut self, from: usize, to: usize, cap: i64, cost: f64) {
        self.adj[from].push(self.edges.len());
        self.edges.push(FlowEdge { to, cap, cost });
        self.adj[to].push(self.edges.len());
        self.edges.push(FlowEdge { to: from, cap: 0, cost: -cost });
    }

    fn run(&mut self, source: usize, sink: usize) -> (i64, f64) {
        let n = self.adj.len();
        let mut total_flow = 0;
        let mut total_cost = 0.0;
        loop {
            let mut dist = vec![f64::INFINITY; n];
            let mut in_queue = vec![false; n];
            let mut pred: Vec<Option<usize>> = vec![None; n];
            let mut queue = std::collections::VecDeque::new();
            dist[source] = 0.0;
            queue.push_back(source);
            in_queue[source] = true;
            while let Some(u) = queue.pop_front() {
                in_queue[u] = false;
                for &ei in &self.adj[u] {
                    let e = &self.edges[ei];
                    if e.cap > 0 && dist[u] + e.cost < dist[e.to] {
                        dist[e.to] = dist[u] + e.cost;
                        pred[e.to] = Some(ei);
                        if !in_queue[e.to] {
                            queue.push_back(e.to);
                            in_queue[e.to] = true;
                        }
                    }
                }
            }
            if !dist[sink].is_finite() {
                return (total_flow, total_cost);
            }
            let mut push = i64::MAX;
            let mut v = sink;
            while let Some(ei) = pred[v] {
                push = push.min(self.edges[ei].cap);
                v = self.edges[ei ^ 1].to;
            }
            let mut v = sink;
            while let Some(ei) = pred[v] {
                self.edges[ei].cap -= push;
                self.edges[ei ^ 1].cap += push;
                v = self.edges[ei ^ 1].to;
            }
            total_flow += push;
            total_cost += push as f64 * dist[sink];
        }
    }

    /// Flow currently on the first edge `from -> to` (its reverse capacity).
    fn flow_between(&self, from: usize, to: usize) -> i64 {
        for &ei in &self.adj[from] {
            if ei % 2 == 0 && self.edges[ei].to == to {
                return self.edges[ei ^ 1].cap;
            }
        }
        0
    }
}

/// Allots providers to cluster centroids proportionally to demand using
/// largest-remainder rounding; each centroid maps to the graph node nearest
/// to it by Haversine distance. Counts sum exactly to `num_providers`.
pub fn distribute_providers(
    model: &ClusterModel,
    num_providers: u32,
    graph: &RoadGraph,
) -> Result<Vec<(NodeId, u32)>> {
    let counts = largest_remainder(&model.demand_weight, num_providers);
    model
        .centroids
        .iter()
        .zip(counts)
        .map(|(&(lat, lon), count)| {
            let node = graph
                .nearest_node(lat, lon)
                .ok_or_else(|| Error::InvalidConfig("graph has no nodes".into()))?;
            Ok((node, count))
        })
        .collect()
}

/// Largest-remainder apportionment of `total` units over `weights`. Ties on
/// remainders favor the lowest index; a zero weight vector splits uniformly.
pub fn largest_remainder(weights: &[f64], total: u32) -> Vec<u32> {
    let sum: f64 = weights.iter().sum();
    let quotas: Vec<f64> = if sum > 0.0 {
        weights.iter().map(|w| total as f64 * w / sum).collect()
    } else {
        vec![total as f64 / weights.len() as f64; weights.len()]
    };
    let mut counts: Vec<u32> = quotas.iter().map(|q| q.floor() as u32).collect();
    let assigned: u32 = counts.iter().sum();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for i in 0..(total - assigned) as usize {
        counts[order[i % order.len()]] += 1;
    }
    counts
}
