//! Dispatch algorithms sharing the simulator interface: the 2FairGA family
//! (including all ablation variants) and the myopic greedy baselines.

use std::fmt;
use std::str::FromStr;

use crate::encoding::AllocationPlan;
use crate::error::{Error, Result};
use crate::fairga::{run_fairga, GaConfig, GaVariant, PlanningSnapshot};
use crate::simulator::Scenario;

/// When a provider becomes eligible for re-planning.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReplanPolicy {
    /// Any provider standing on a node may receive a fresh plan.
    EveryEpoch,
    /// A provider keeps its committed target until it arrives; committed
    /// targets are not offered to other providers.
    UntilTargetReached,
}

/// A dispatch algorithm producing an allocation plan per re-planning epoch.
pub trait DispatchAlgorithm {
    fn name(&self) -> &'static str;

    fn replan_policy(&self) -> ReplanPolicy {
        ReplanPolicy::EveryEpoch
    }

    /// Plans routes for the snapshot's idle providers over its pending
    /// requests. `seed` varies per epoch; greedy planners ignore it.
    fn plan(&mut self, snapshot: &PlanningSnapshot<'_>, seed: u64) -> Result<AllocationPlan>;
}

/// Greedy-Probability: every idle provider, in id order, takes the unclaimed
/// request with the highest direct expected award (capture probability, or
/// projected ride gain). One target per provider per epoch.
pub struct GreedyProbability;

impl DispatchAlgorithm for GreedyProbability {
    fn name(&self) -> &'static str {
        "greedy"
    }

    fn replan_policy(&self) -> ReplanPolicy {
        ReplanPolicy::UntilTargetReached
    }

    fn plan(&mut self, snapshot: &PlanningSnapshot<'_>, _seed: u64) -> Result<AllocationPlan> {
        greedy_plan(snapshot, GreedyCriterion::ExpectedAward)
    }
}

/// Greedy-Distance ("Nearest"): like [`GreedyProbability`] but minimizing
/// travel time to the request's service node.
pub struct NearestDistance;

impl DispatchAlgorithm for NearestDistance {
    fn name(&self) -> &'static str {
        "nearest"
    }

    fn replan_policy(&self) -> ReplanPolicy {
        ReplanPolicy::UntilTargetReached
    }

    fn plan(&mut self, snapshot: &PlanningSnapshot<'_>, _seed: u64) -> Result<AllocationPlan> {
        greedy_plan(snapshot, GreedyCriterion::Nearest)
    }
}

enum GreedyCriterion {
    ExpectedAward,
    Nearest,
}

fn greedy_plan(
    snapshot: &PlanningSnapshot<'_>,
    criterion: GreedyCriterion,
) -> Result<AllocationPlan> {
    let graph = snapshot.graph;
    let mut plan = AllocationPlan::default();
    let mut taken = vec![false; snapshot.pending.len()];
    for provider in &snapshot.idle {
        let mut best: Option<(usize, f64)> = None;
        for (i, req) in snapshot.pending.iter().enumerate() {
            if taken[i] {
                continue;
            }
            let travel = match graph.travel_time_min(provider.location, req.target) {
                Ok(t) => t,
                Err(_) => continue, // unreachable candidates are skipped
            };
            // Higher is better; ties go to the lowest request id, which is
            // the iteration order.
            let score = match criterion {
                GreedyCriterion::Nearest => -travel,
                GreedyCriterion::ExpectedAward => match snapshot.scenario {
                    Scenario::NonCompliance => {
                        crate::fairga::capture_probability(travel, snapshot.mean_stay)
                    }
                    Scenario::RideHailing => {
                        let (slat, slon) = graph.coords_of(req.target)?;
                        let (dlat, dlon) = graph.coords_of(req.destination)?;
                        let (plat, plon) = graph.coords_of(provider.location)?;
                        crate::metrics::haversine(dlat, dlon, slat, slon)
                            - crate::metrics::haversine(slat, slon, plat, plon)
                    }
                },
            };
            if best.map_or(true, |(_, b)| score > b) {
                best = Some((i, score));
            }
        }
        if let Some((i, _)) = best {
            taken[i] = true;
            plan.assignments
                .insert(provider.id, vec![snapshot.pending[i].id]);
        } else {
            plan.assignments.insert(provider.id, Vec::new());
        }
    }
    plan.unassigned = snapshot
        .pending
        .iter()
        .enumerate()
        .filter(|&(i, _)| !taken[i])
        .map(|(_, r)| r.id)
        .collect();
    Ok(plan)
}

/// GA-family dispatcher: one `run_fairga` call per epoch. Populations
/// restart fresh by default; warm starting seeds each epoch's population
/// with the previous best plan instead.
pub struct GaDispatcher {
    name: &'static str,
    variant: GaVariant,
    cfg: GaConfig,
    warm_start: bool,
    previous_best: Option<AllocationPlan>,
    trace_rows: Option<std::fs::File>,
}

impl GaDispatcher {
    pub fn new(name: &'static str, variant: GaVariant, cfg: GaConfig, warm_start: bool) -> Self {
        GaDispatcher { name, variant, cfg, warm_start, previous_best: None, trace_rows: None }
    }
}

impl DispatchAlgorithm for GaDispatcher {
    fn name(&self) -> &'static str {
        self.name
    }

    fn plan(&mut self, snapshot: &PlanningSnapshot<'_>, seed: u64) -> Result<AllocationPlan> {
        let mut cfg = self.cfg.clone();
        cfg.seed = seed;
        if self.trace_rows.is_none() {
            if let Some(path) = &cfg.fitness_trace {
                let fresh = !path.exists();
                let mut f = std::fs::OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(path)?;
                if fresh {
                    use std::io::Write;
                    writeln!(f, "epoch,generation,best_fitness")?;
                }
                self.trace_rows = Some(f);
            }
        }
        let warm = if self.warm_start { self.previous_best.as_ref() } else { None };
        let plan = match self.trace_rows.as_mut() {
            Some(file) => {
                use std::io::Write;
                let epoch = snapshot.now;
                let mut sink = |generation: u32, best: f64| {
                    let _ = writeln!(file, "{epoch},{generation},{best}");
                };
                run_fairga(snapshot, self.variant, &cfg, warm, Some(&mut sink))?
            }
            None => run_fairga(snapshot, self.variant, &cfg, warm, None)?,
        };
        self.previous_best = Some(plan.clone());
        Ok(plan)
    }
}

/// Plain-GA plan: `run_fairga` with both fairness stages disabled and both
/// fairness rankings replaced by the utility criterion.
pub fn plain_ga_plan(
    snapshot: &PlanningSnapshot<'_>,
    cfg: &GaConfig,
    warm: Option<&AllocationPlan>,
) -> Result<AllocationPlan> {
    run_fairga(snapshot, GaVariant::plain(), cfg, warm, None)
}

/// Weighted-sum GA plan ranking by utility minus both fairness variances.
pub fn ga3_plan(
    snapshot: &PlanningSnapshot<'_>,
    cfg: &GaConfig,
    warm: Option<&AllocationPlan>,
) -> Result<AllocationPlan> {
    run_fairga(snapshot, GaVariant::combined(), cfg, warm, None)
}

/// Greedy-Probability as a bare planning function.
pub fn greedy_probability_plan(snapshot: &PlanningSnapshot<'_>) -> Result<AllocationPlan> {
    greedy_plan(snapshot, GreedyCriterion::ExpectedAward)
}

/// Greedy-Distance as a bare planning function.
pub fn nearest_plan(snapshot: &PlanningSnapshot<'_>) -> Result<AllocationPlan> {
    greedy_plan(snapshot, GreedyCriterion::Nearest)
}

/// Every algorithm the harness can run, including the ablation variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum AlgorithmKind {
    /// Clustered placement, provider- and customer-fairness stages.
    TwoFairGa,
    /// Clustered placement, provider-fairness stage only.
    GaClusterProviderFair,
    /// Random placement, both fairness stages.
    GaFair,
    /// Random placement, provider-fairness stage only.
    GaProviderFair,
    /// Random placement, customer-fairness stage only.
    GaCustomerFair,
    /// Random placement, no fairness stages.
    Ga,
    /// Random placement, weighted-sum combined objective.
    Ga3,
    GreedyProbability,
    Nearest,
}

/// Shorthand used by tests and docs.
#[allow(non_upper_case_globals)]
impl AlgorithmKind {
    pub const Greedy: AlgorithmKind = AlgorithmKind::GreedyProbability;
}

pub const ABLATION_ALGORITHMS: [AlgorithmKind; 6] = [
    AlgorithmKind::TwoFairGa,
    AlgorithmKind::GaClusterProviderFair,
    AlgorithmKind::GaFair,
    AlgorithmKind::GaProviderFair,
    AlgorithmKind::GaCustomerFair,
    AlgorithmKind::Ga3,
];

impl AlgorithmKind {
    pub fn all() -> impl Iterator<Item = AlgorithmKind> {
        [
            AlgorithmKind::TwoFairGa,
            AlgorithmKind::GaClusterProviderFair,
            AlgorithmKind::GaFair,
            AlgorithmKind::GaProviderFair,
            AlgorithmKind::GaCustomerFair,
            AlgorithmKind::Ga,
            AlgorithmKind::Ga3,
            AlgorithmKind::GreedyProbability,
            AlgorithmKind::Nearest,
        ]
        .into_iter()
    }

    pub fn id(&self) -> &'static str {
        match self {
            AlgorithmKind::TwoFairGa => "2fairga",
            AlgorithmKind::GaClusterProviderFair => "ga-cluster-provider-fair",
            AlgorithmKind::GaFair => "ga-fair",
            AlgorithmKind::GaProviderFair => "ga-provider-fair",
            AlgorithmKind::GaCustomerFair => "ga-customer-fair",
            AlgorithmKind::Ga => "ga",
            AlgorithmKind::Ga3 => "ga3",
            AlgorithmKind::GreedyProbability => "greedy",
            AlgorithmKind::Nearest => "nearest",
        }
    }

    /// Whether the algorithm definition includes clustered initial
    /// placement.
    pub fn uses_clustered_placement(&self) -> bool {
        matches!(
            self,
            AlgorithmKind::TwoFairGa | AlgorithmKind::GaClusterProviderFair
        )
    }

    pub fn ga_variant(&self) -> Option<GaVariant> {
        match self {
            AlgorithmKind::TwoFairGa | AlgorithmKind::GaFair => Some(GaVariant::two_fair()),
            AlgorithmKind::GaClusterProviderFair | AlgorithmKind::GaProviderFair => {
                Some(GaVariant::provider_only())
            }
            AlgorithmKind::GaCustomerFair => Some(GaVariant::customer_only()),
            AlgorithmKind::Ga => Some(GaVariant::plain()),
            AlgorithmKind::Ga3 => Some(GaVariant::combined()),
            AlgorithmKind::GreedyProbability | AlgorithmKind::Nearest => None,
        }
    }

    /// Instantiates the dispatcher behind this algorithm.
    pub fn build(&self, ga: GaConfig, warm_start: bool) -> Box<dyn DispatchAlgorithm> {
        match self {
            AlgorithmKind::GreedyProbability => Box::new(GreedyProbability),
            AlgorithmKind::Nearest => Box::new(NearestDistance),
            _ => Box::new(GaDispatcher::new(
                self.id(),
                self.ga_variant().expect("GA family"),
                ga,
                warm_start,
            )),
        }
    }
}

impl fmt::Display for AlgorithmKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for AlgorithmKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AlgorithmKind::all()
            .find(|a| a.id() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown algorithm '{s}'")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fairga::{AreaSnapshot, IdleProvider, PendingRequest};
    use crate::world::{AreaId, NodeId, ProviderId, RequestId, RoadGraph};

    fn n(i: u32) -> NodeId {
        NodeId(i)
    }

    fn line(count: u32) -> RoadGraph {
        let mut g = RoadGraph::new();
        for i in 0..count {
            g.add_node(n(i), 0.0, i as f64 * 0.00063).unwrap();
        }
        for i in 0..count - 1 {
            g.add_edge(n(i), n(i + 1), 70.0).unwrap();
            g.add_edge(n(i + 1), n(i), 70.0).unwrap();
        }
        g
    }

    fn nc_snapshot<'a>(
        graph: &'a RoadGraph,
        idle: Vec<(u32, u32)>,
        pending: Vec<(u32, u32)>,
    ) -> PlanningSnapshot<'a> {
        let pending: Vec<PendingRequest> = pending
            .into_iter()
            .map(|(id, node)| PendingRequest {
                id: RequestId(id),
                target: n(node),
                destination: n(node),
                area: AreaId(0),
                window_start: 0.0,
            })
            .collect();
        let areas = AreaSnapshot::from_pending(&pending);
        PlanningSnapshot {
            graph,
            scenario: Scenario::NonCompliance,
            now: 0.0,
            mean_stay: 10.0,
            idle: idle
                .iter()
                .map(|&(id, node)| IdleProvider { id: ProviderId(id), location: n(node) })
                .collect(),
            ledgers: idle.iter().map(|&(id, _)| (ProviderId(id), 0.0)).collect(),
            pending,
            areas,
        }
    }

    #[test]
    fn greedy_assigns_single_pair() {
        let g = line(3);
        let snap = nc_snapshot(&g, vec![(0, 0)], vec![(0, 2)]);
        let plan = greedy_probability_plan(&snap).unwrap();
        assert_eq!(plan.assignments[&ProviderId(0)], vec![RequestId(0)]);
        assert!(plan.unassigned.is_empty());
    }

    #[test]
    fn greedy_lower_provider_id_wins_contested_request() {
        let g = line(5);
        // Both providers are two hops from the only request.
        let snap = nc_snapshot(&g, vec![(0, 0), (1, 4)], vec![(0, 2)]);
        let plan = greedy_probability_plan(&snap).unwrap();
        assert_eq!(plan.assignments[&ProviderId(0)], vec![RequestId(0)]);
        assert_eq!(plan.assignments[&ProviderId(1)], Vec::<RequestId>::new());
    }

    /// 3x3 instance traced by hand: each provider takes its highest-p
    /// (nearest) unclaimed request in id order.
    #[test]
    fn greedy_three_by_three_matches_hand_trace() {
        let g = line(12);
        let snap = nc_snapshot(
            &g,
            vec![(0, 0), (1, 5), (2, 11)],
            vec![(0, 1), (1, 6), (2, 10)],
        );
        let plan = greedy_probability_plan(&snap).unwrap();
        // P0 is 1 hop from r0; P1 is 1 hop from r1; P2 is 1 hop from r2.
        assert_eq!(plan.assignments[&ProviderId(0)], vec![RequestId(0)]);
        assert_eq!(plan.assignments[&ProviderId(1)], vec![RequestId(1)]);
        assert_eq!(plan.assignments[&ProviderId(2)], vec![RequestId(2)]);

        // Contested variant: P0 and P1 both closest to r0; P0 claims it, P1
        // falls back to its next best.
        let snap = nc_snapshot(&g, vec![(0, 2), (1, 2), (2, 11)], vec![(0, 2), (1, 6), (2, 10)]);
        let plan = greedy_probability_plan(&snap).unwrap();
        assert_eq!(plan.assignments[&ProviderId(0)], vec![RequestId(0)]);
        assert_eq!(plan.assignments[&ProviderId(1)], vec![RequestId(1)]);
        assert_eq!(plan.assignments[&ProviderId(2)], vec![RequestId(2)]);
    }

    #[test]
    fn nearest_breaks_distance_ties_by_request_id() {
        let g = line(5);
        // Requests at nodes 1 and 3 are both two hops from node... make both
        // one hop from the provider at node 2.
        let snap = nc_snapshot(&g, vec![(0, 2)], vec![(7, 1), (9, 3)]);
        let plan = nearest_plan(&snap).unwrap();
        assert_eq!(plan.assignments[&ProviderId(0)], vec![RequestId(7)]);
        assert_eq!(plan.unassigned, vec![RequestId(9)]);
    }

    #[test]
    fn greedy_is_deterministic_without_seed() {
        let g = line(9);
        let snap = nc_snapshot(&g, vec![(0, 0), (1, 8)], vec![(0, 3), (1, 5), (2, 7)]);
        let a = greedy_probability_plan(&snap).unwrap();
        let b = greedy_probability_plan(&snap).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn plain_ga_equals_fairness_disabled_run() {
        let g = line(9);
        let snap = nc_snapshot(&g, vec![(0, 0), (1, 8)], vec![(0, 2), (1, 4), (2, 6)]);
        let cfg = GaConfig { population_size: 14, max_gen: 8, seed: 5, ..GaConfig::default() };
        let direct = plain_ga_plan(&snap, &cfg, None).unwrap();
        let via_variant = run_fairga(&snap, GaVariant::plain(), &cfg, None, None).unwrap();
        assert_eq!(direct, via_variant);
    }

    #[test]
    fn ga3_reduces_to_utility_ranking_on_symmetric_fairness() {
        // With all-equal ledgers and a single area, the fairness terms are
        // identical across plans of equal split, so the combined objective
        // orders by utility.
        let g = line(5);
        let snap = nc_snapshot(&g, vec![(0, 0)], vec![(0, 1), (1, 3)]);
        let cfg = GaConfig { population_size: 10, max_gen: 20, seed: 3, ..GaConfig::default() };
        let plan = ga3_plan(&snap, &cfg, None).unwrap();
        // Single provider: fairness variances are plan-independent, so the
        // combined optimum is the utility optimum: serve the near one first.
        assert_eq!(plan.assignments[&ProviderId(0)], vec![RequestId(0), RequestId(1)]);
    }

    #[test]
    fn algorithm_ids_round_trip() {
        for algo in AlgorithmKind::all() {
            assert_eq!(algo.id().parse::<AlgorithmKind>().unwrap(), algo);
        }
        assert!("bogus".parse::<AlgorithmKind>().is_err());
    }
}
