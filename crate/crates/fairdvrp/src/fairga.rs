//! The 2FairGA optimizer: a generational loop with dual fairness-aware
//! parent selection, elitism, single-point crossover, utility-greedy local
//! optimization and swap mutation.
//!
//! Each generation ranks the population by the utility criterion and keeps
//! an elite fraction. For every crossover slot the population is copied into
//! two shadow populations; one is nudged toward provider fairness and the
//! other toward customer fairness (`assign_provider`), each is ranked by its
//! own fairness variance, and one parent is drawn from the top of each. The
//! resulting child replaces a non-elite slot. A chromosome nudge and its
//! fitness are pure functions of the chromosome and the world snapshot, so
//! the shadow populations are maintained incrementally instead of recopied —
//! the produced generations are identical to the literal recopy, just
//! cheaper.
//!
//! Ablation variants reuse the same loop: plain GA replaces both fairness
//! stages with the utility criterion, single-sided variants replace one, and
//! the weighted-sum variant ranks everything by `utility - provider variance
//! - customer variance`.

use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;
use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::encoding::{crossover, AllocationPlan, Chromosome, ElementSet, FitnessScores};
use crate::error::{Error, Result};
use crate::metrics::haversine;
use crate::simulator::Scenario;
use crate::world::{AreaId, NodeId, ProviderId, RequestId, RoadGraph, SPEED_M_PER_MIN};

/// Probability that a violation is still in place after `delay_min` minutes,
/// for exponentially distributed stay durations with the given mean.
pub fn capture_probability(delay_min: f64, mean_stay_min: f64) -> f64 {
    (-delay_min.max(0.0) / mean_stay_min).exp()
}

/// Mutation flavor for the worst fraction of the population.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MutationMode {
    /// One random key swap per chromosome (default).
    #[default]
    Swap,
    /// Replace the chromosome with a fresh random immigrant.
    Replace,
}

/// GA parameters. The defaults follow the tuned benchmark configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct GaConfig {
    pub elitist_rate: f64,
    pub cross_rate: f64,
    pub mutate_rate: f64,
    pub local_rate: f64,
    pub population_size: usize,
    pub max_gen: u32,
    /// Window length for per-segment local reordering.
    pub local_window: usize,
    pub seed: u64,
    /// Apply the local-optimization gate as `uniform > local_rate` instead
    /// of with probability `local_rate`.
    pub literal_local_gate: bool,
    pub mutation_mode: MutationMode,
    /// Optional CSV path receiving one `generation,best_fitness` row per
    /// generation.
    pub fitness_trace: Option<PathBuf>,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            elitist_rate: 0.2,
            cross_rate: 0.3,
            mutate_rate: 0.2,
            local_rate: 0.5,
            population_size: 100,
            max_gen: 300,
            local_window: 5,
            seed: 0,
            literal_local_gate: false,
            mutation_mode: MutationMode::Swap,
            fitness_trace: None,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("elitist_rate", self.elitist_rate),
            ("cross_rate", self.cross_rate),
            ("mutate_rate", self.mutate_rate),
            ("local_rate", self.local_rate),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidConfig(format!("{name} must be in [0, 1], got {v}")));
            }
        }
        if self.population_size < 2 {
            return Err(Error::InvalidConfig("population_size must be >= 2".into()));
        }
        if self.max_gen < 1 {
            return Err(Error::InvalidConfig("max_gen must be >= 1".into()));
        }
        let n = self.population_size;
        let elites = self.elite_count();
        let cross = self.cross_size();
        let mutants = self.mutation_count();
        if elites + cross > n || elites + mutants > n {
            return Err(Error::InvalidConfig(format!(
                "elitist_rate {} leaves no room for {} children / {} mutants in a population of {n}",
                self.elitist_rate, cross, mutants
            )));
        }
        Ok(())
    }

    pub fn load_json(path: &std::path::Path) -> Result<Self> {
        let cfg: GaConfig = serde_json::from_reader(std::fs::File::open(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn elite_count(&self) -> usize {
        (self.elitist_rate * self.population_size as f64).ceil() as usize
    }

    pub fn cross_size(&self) -> usize {
        (self.cross_rate * self.population_size as f64).ceil() as usize
    }

    pub fn mutation_count(&self) -> usize {
        (self.mutate_rate * self.population_size as f64).floor() as usize
    }
}

/// Fitness criterion used for ranking or for parent-stage selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageCriterion {
    /// Mean expected utility per pending request, descending.
    Utility,
    /// Projected provider-fairness variance, ascending.
    ProviderFairness,
    /// Projected customer-fairness variance, ascending.
    CustomerFairness,
    /// `utility - provider variance - customer variance`, descending.
    Combined,
}

/// Which stages feed the mother and father pools, and what the main ranking
/// criterion is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GaVariant {
    pub mother: StageCriterion,
    pub father: StageCriterion,
    pub rank: StageCriterion,
}

impl GaVariant {
    /// Full 2FairGA: provider-fairness mothers, customer-fairness fathers.
    pub fn two_fair() -> Self {
        GaVariant {
            mother: StageCriterion::ProviderFairness,
            father: StageCriterion::CustomerFairness,
            rank: StageCriterion::Utility,
        }
    }

    /// Plain GA: both fairness stages disabled.
    pub fn plain() -> Self {
        GaVariant {
            mother: StageCriterion::Utility,
            father: StageCriterion::Utility,
            rank: StageCriterion::Utility,
        }
    }

    pub fn provider_only() -> Self {
        GaVariant { father: StageCriterion::Utility, ..Self::two_fair() }
    }

    pub fn customer_only() -> Self {
        GaVariant { mother: StageCriterion::Utility, ..Self::two_fair() }
    }

    /// Weighted-sum variant ranking everything by the combined objective.
    pub fn combined() -> Self {
        GaVariant {
            mother: StageCriterion::Combined,
            father: StageCriterion::Combined,
            rank: StageCriterion::Combined,
        }
    }
}

/// An idle provider available for planning this epoch.
#[derive(Debug, Clone, Copy)]
pub struct IdleProvider {
    pub id: ProviderId,
    pub location: NodeId,
}

/// A pending request as seen by the optimizer. The validity window end is
/// deliberately absent: departure times are not observable, only the mean
/// stay duration is.
#[derive(Debug, Clone, Copy)]
pub struct PendingRequest {
    pub id: RequestId,
    /// Node where service happens: the violation bay or the pickup.
    pub target: NodeId,
    /// Trip destination; equals `target` in the non-compliance scenario.
    pub destination: NodeId,
    pub area: AreaId,
    pub window_start: f64,
}

/// Running per-area tallies carried into fairness projections.
#[derive(Debug, Clone, Default)]
pub struct AreaSnapshot {
    /// `(area, raised, captured)` for areas that raised at least one request
    /// so far (non-compliance).
    pub capture_stats: Vec<(AreaId, f64, f64)>,
    /// `(area, wait_sum, wait_count)` over completed and committed pickups
    /// (ride-hailing).
    pub wait_stats: Vec<(AreaId, f64, f64)>,
}

impl AreaSnapshot {
    /// Static-instance convenience: every pending request counts as raised,
    /// nothing captured yet.
    pub fn from_pending(pending: &[PendingRequest]) -> Self {
        let mut raised: BTreeMap<AreaId, f64> = BTreeMap::new();
        for r in pending {
            *raised.entry(r.area).or_default() += 1.0;
        }
        AreaSnapshot {
            capture_stats: raised.into_iter().map(|(a, n)| (a, n, 0.0)).collect(),
            wait_stats: Vec::new(),
        }
    }
}

/// Immutable world view handed to planners at one re-planning epoch.
#[derive(Debug, Clone)]
pub struct PlanningSnapshot<'a> {
    pub graph: &'a RoadGraph,
    pub scenario: Scenario,
    pub now: f64,
    /// Mean violation stay in minutes, driving capture probabilities.
    pub mean_stay: f64,
    pub idle: Vec<IdleProvider>,
    /// Accumulated utility of every provider (not only idle ones), by id.
    pub ledgers: Vec<(ProviderId, f64)>,
    pub pending: Vec<PendingRequest>,
    pub areas: AreaSnapshot,
}

impl<'a> PlanningSnapshot<'a> {
    pub fn element_set(&self) -> Result<Arc<ElementSet>> {
        Ok(Arc::new(ElementSet::new(
            self.idle.iter().map(|p| p.id).collect(),
            self.pending.iter().map(|r| r.id).collect(),
        )?))
    }
}

/// Projects chromosomes onto the three fitness criteria against one world
/// snapshot. Pure; every public method is safe to call in any order.
pub struct FitnessEvaluator<'a> {
    snap: &'a PlanningSnapshot<'a>,
    elements: Arc<ElementSet>,
    n_req: usize,
    // Dense travel tables for every origin a plan walk can stand on.
    trees: HashMap<usize, Arc<crate::world::PathTree>>,
    idle_loc: Vec<usize>,
    req_target: Vec<usize>,
    req_dest: Vec<usize>,
    req_start_coords: Vec<(f64, f64)>,
    idle_coords: Vec<(f64, f64)>,
    req_dest_coords: Vec<(f64, f64)>,
    trip_len: Vec<f64>,
    // Ledger basis over all providers; idle slot -> ledger position.
    ledger_values: Vec<f64>,
    idle_ledger_pos: Vec<usize>,
    // Area bases, dense. Non-compliance: capture rates; ride: waits.
    rate_raised: Vec<f64>,
    rate_captured: Vec<f64>,
    wait_sum: Vec<f64>,
    wait_cnt: Vec<f64>,
    req_area_pos: Vec<usize>,
    // Direct single-hop projections per (idle, request) pair.
    direct_award: Vec<f64>,
    direct_wait: Vec<f64>,
}

impl<'a> FitnessEvaluator<'a> {
    pub fn new(snap: &'a PlanningSnapshot<'a>) -> Result<Self> {
        let elements = snap.element_set()?;
        let graph = snap.graph;
        let n_req = snap.pending.len();
        debug_assert_eq!(elements.num_providers(), snap.idle.len());

        let idle_loc = snap
            .idle
            .iter()
            .map(|p| graph.idx(p.location))
            .collect::<Result<Vec<_>>>()?;
        let req_target = snap
            .pending
            .iter()
            .map(|r| graph.idx(r.target))
            .collect::<Result<Vec<_>>>()?;
        let req_dest = snap
            .pending
            .iter()
            .map(|r| graph.idx(r.destination))
            .collect::<Result<Vec<_>>>()?;

        let mut trees = HashMap::new();
        for &o in idle_loc.iter().chain(&req_target).chain(&req_dest) {
            trees.entry(o).or_insert_with(|| graph.tree_from(o));
        }

        let idle_coords: Vec<_> = idle_loc.iter().map(|&i| graph.coords_idx(i)).collect();
        let req_start_coords: Vec<_> = req_target.iter().map(|&i| graph.coords_idx(i)).collect();
        let req_dest_coords: Vec<_> = req_dest.iter().map(|&i| graph.coords_idx(i)).collect();
        let trip_len: Vec<f64> = (0..n_req)
            .map(|r| {
                let (dlat, dlon) = req_dest_coords[r];
                let (slat, slon) = req_start_coords[r];
                haversine(dlat, dlon, slat, slon)
            })
            .collect();

        // Ledger basis keyed by provider id order.
        let mut ledgers = snap.ledgers.clone();
        ledgers.sort_by_key(|&(id, _)| id);
        let ledger_values: Vec<f64> = ledgers.iter().map(|&(_, v)| v).collect();
        let idle_ledger_pos = snap
            .idle
            .iter()
            .map(|p| {
                ledgers
                    .binary_search_by_key(&p.id, |&(id, _)| id)
                    .map_err(|_| Error::InvalidConfig(format!("idle provider {} has no ledger", p.id)))
            })
            .collect::<Result<Vec<_>>>()?;

        // Dense area universe: every area seen in the running tallies plus
        // the areas of pending requests.
        let mut area_index: BTreeMap<AreaId, usize> = BTreeMap::new();
        for &(a, _, _) in snap.areas.capture_stats.iter().chain(&snap.areas.wait_stats) {
            let next = area_index.len();
            area_index.entry(a).or_insert(next);
        }
        for r in &snap.pending {
            let next = area_index.len();
            area_index.entry(r.area).or_insert(next);
        }
        let n_areas = area_index.len();
        let mut rate_raised = vec![0.0; n_areas];
        let mut rate_captured = vec![0.0; n_areas];
        for &(a, raised, captured) in &snap.areas.capture_stats {
            rate_raised[area_index[&a]] = raised;
            rate_captured[area_index[&a]] = captured;
        }
        if snap.scenario == Scenario::NonCompliance {
            // A pending request was raised by definition; cover areas the
            // caller did not tally.
            for r in &snap.pending {
                let pos = area_index[&r.area];
                if rate_raised[pos] == 0.0 {
                    rate_raised[pos] = snap.pending.iter().filter(|q| q.area == r.area).count() as f64;
                }
            }
        }
        let mut wait_sum = vec![0.0; n_areas];
        let mut wait_cnt = vec![0.0; n_areas];
        for &(a, sum, cnt) in &snap.areas.wait_stats {
            wait_sum[area_index[&a]] = sum;
            wait_cnt[area_index[&a]] = cnt;
        }
        let req_area_pos: Vec<usize> = snap.pending.iter().map(|r| area_index[&r.area]).collect();

        let mut ev = FitnessEvaluator {
            snap,
            elements,
            n_req,
            trees,
            idle_loc,
            req_target,
            req_dest,
            req_start_coords,
            idle_coords,
            req_dest_coords,
            trip_len,
            ledger_values,
            idle_ledger_pos,
            rate_raised,
            rate_captured,
            wait_sum,
            wait_cnt,
            req_area_pos,
            direct_award: Vec::new(),
            direct_wait: Vec::new(),
        };
        ev.build_direct_tables();
        Ok(ev)
    }

    fn build_direct_tables(&mut self) {
        let n_idle = self.idle_loc.len();
        let n_req = self.n_req;
        let mut award = vec![0.0; n_idle * n_req];
        let mut wait = vec![0.0; n_idle * n_req];
        for i in 0..n_idle {
            for r in 0..n_req {
                let travel = self.minutes(self.idle_loc[i], self.req_target[r]);
                match self.snap.scenario {
                    Scenario::NonCompliance => {
                        award[i * n_req + r] = if travel.is_finite() {
                            capture_probability(travel, self.snap.mean_stay)
                        } else {
                            0.0
                        };
                    }
                    Scenario::RideHailing => {
                        let (slat, slon) = self.req_start_coords[r];
                        let (plat, plon) = self.idle_coords[i];
                        award[i * n_req + r] = self.trip_len[r] - haversine(slat, slon, plat, plon);
                        wait[i * n_req + r] =
                            self.snap.now + travel - self.snap.pending[r].window_start;
                    }
                }
            }
        }
        self.direct_award = award;
        self.direct_wait = wait;
    }

    pub fn elements(&self) -> &Arc<ElementSet> {
        &self.elements
    }

    pub fn pending_count(&self) -> usize {
        self.n_req
    }

    fn minutes(&self, from: usize, to: usize) -> f64 {
        self.trees[&from].dist_m[to] / SPEED_M_PER_MIN
    }

    /// Expected award of serving request `r` first, directly from idle
    /// provider `i`'s current location.
    fn direct_award(&self, i: usize, r: usize) -> f64 {
        self.direct_award[i * self.n_req + r]
    }

    fn direct_wait(&self, i: usize, r: usize) -> f64 {
        self.direct_wait[i * self.n_req + r]
    }

    /// Full projection of a chromosome: expected utility, provider fairness
    /// and customer fairness, all from one sequential walk of the decoded
    /// plan. Results are cached on the chromosome.
    pub fn evaluate(&self, chrom: &mut Chromosome) -> FitnessScores {
        if let Some(f) = chrom.fitness {
            return f;
        }
        let segments = chrom.decode_slots();
        let mut ledger = self.ledger_values.clone();
        let mut raw_sum = 0.0;

        let scores = match self.snap.scenario {
            Scenario::NonCompliance => {
                let mut captured = self.rate_captured.clone();
                for (p, seg) in segments.iter().enumerate() {
                    let mut loc = self.idle_loc[p];
                    let mut t_acc = 0.0;
                    for &r in seg {
                        let leg = self.minutes(loc, self.req_target[r]);
                        let prob = if leg.is_finite() {
                            t_acc += leg;
                            capture_probability(t_acc, self.snap.mean_stay)
                        } else {
                            0.0
                        };
                        raw_sum += prob;
                        ledger[self.idle_ledger_pos[p]] += prob;
                        captured[self.req_area_pos[r]] += prob;
                        if leg.is_finite() {
                            loc = self.req_target[r];
                        }
                    }
                }
                let cf = rate_variance(&self.rate_raised, &captured);
                FitnessScores {
                    expected_utility: raw_sum / self.n_req.max(1) as f64,
                    provider_fairness: crate::metrics::population_variance(&ledger),
                    customer_fairness: cf,
                }
            }
            Scenario::RideHailing => {
                let mut wsum = self.wait_sum.clone();
                let mut wcnt = self.wait_cnt.clone();
                for (p, seg) in segments.iter().enumerate() {
                    let mut loc = self.idle_loc[p];
                    let mut prev_coords = self.idle_coords[p];
                    let mut t_acc = 0.0;
                    for &r in seg {
                        let leg1 = self.minutes(loc, self.req_target[r]);
                        let (slat, slon) = self.req_start_coords[r];
                        let award =
                            self.trip_len[r] - haversine(slat, slon, prev_coords.0, prev_coords.1);
                        let pickup_t = self.snap.now + t_acc + leg1;
                        raw_sum += award;
                        ledger[self.idle_ledger_pos[p]] += award;
                        let a = self.req_area_pos[r];
                        wsum[a] += pickup_t - self.snap.pending[r].window_start;
                        wcnt[a] += 1.0;
                        let leg2 = self.minutes(self.req_target[r], self.req_dest[r]);
                        t_acc += leg1 + leg2;
                        loc = self.req_dest[r];
                        prev_coords = self.req_dest_coords[r];
                    }
                }
                FitnessScores {
                    expected_utility: raw_sum / self.n_req.max(1) as f64,
                    provider_fairness: crate::metrics::population_variance(&ledger),
                    customer_fairness: mean_variance(&wsum, &wcnt),
                }
            }
        };
        chrom.fitness = Some(scores);
        scores
    }

    /// Combined weighted-sum objective over the raw (unnormalized) utility.
    pub fn combined(&self, scores: FitnessScores) -> f64 {
        scores.expected_utility * self.n_req as f64
            - scores.provider_fairness
            - scores.customer_fairness
    }

    /// Sort key, ascending-is-better, for one criterion.
    fn sort_key(&self, scores: FitnessScores, criterion: StageCriterion) -> f64 {
        match criterion {
            StageCriterion::Utility => -scores.expected_utility,
            StageCriterion::ProviderFairness => scores.provider_fairness,
            StageCriterion::CustomerFairness => scores.customer_fairness,
            StageCriterion::Combined => -self.combined(scores),
        }
    }

    /// Ranks a population in place: best first, stable on ties.
    pub fn rank(&self, population: &mut Vec<Chromosome>, criterion: StageCriterion) {
        let keys: Vec<f64> = population
            .iter_mut()
            .map(|c| self.sort_key(self.evaluate(c), criterion))
            .collect();
        let mut order: Vec<usize> = (0..population.len()).collect();
        order.sort_by(|&a, &b| keys[a].total_cmp(&keys[b]).then(a.cmp(&b)));
        apply_permutation(population, &order);
    }

    /// One fairness-driven nudge pass (the `AssignV` step).
    ///
    /// For each idle provider in genome order, every not-yet-consumed
    /// pending request is tried as that provider's next target; the
    /// candidate whose hypothetical completion lowers the chosen fairness
    /// variance the most (strict improvement only, accumulated across
    /// providers) is keyed to the front of the provider's segment. At most
    /// one move per provider per call.
    pub fn assign_provider(&self, chrom: &Chromosome, kind: StageCriterion) -> Chromosome {
        let mut out = chrom.clone();
        let is_fairness = matches!(
            kind,
            StageCriterion::ProviderFairness | StageCriterion::CustomerFairness
        );
        if self.n_req == 0 || !is_fairness {
            return out;
        }
        let n_prov = self.elements.num_providers();
        let mut segments = out.decode_slots();
        let mut consumed = vec![false; self.n_req];

        // Incremental variance state for the chosen fairness kind.
        let mut ledger = self.ledger_values.clone();
        let (mut lsum, mut lsumsq) = sum_sumsq(&ledger);
        let ln = ledger.len() as f64;

        let mut rates: Vec<f64> = self
            .rate_raised
            .iter()
            .zip(&self.rate_captured)
            .map(|(&ra, &ca)| if ra > 0.0 { ca / ra } else { 0.0 })
            .collect();
        let rate_active: Vec<bool> = self.rate_raised.iter().map(|&r| r > 0.0).collect();
        let (mut rsum, mut rsumsq) = sum_sumsq_active(&rates, &rate_active);
        let rn = rate_active.iter().filter(|&&a| a).count() as f64;

        let mut wsum = self.wait_sum.clone();
        let mut wcnt = self.wait_cnt.clone();
        let mut means: Vec<f64> = wsum
            .iter()
            .zip(&wcnt)
            .map(|(&s, &c)| if c > 0.0 { s / c } else { 0.0 })
            .collect();
        let wait_active: Vec<bool> = wcnt.iter().map(|&c| c > 0.0).collect();
        let (mut msum, mut msumsq) = sum_sumsq_active(&means, &wait_active);
        let mut mn = wait_active.iter().filter(|&&a| a).count() as f64;
        let mut wait_active = wait_active;

        for p in 0..n_prov {
            let lpos = self.idle_ledger_pos[p];
            let mut best: Option<(usize, f64)> = None;
            let current_var = match kind {
                StageCriterion::ProviderFairness => variance_from(lsum, lsumsq, ln),
                StageCriterion::CustomerFairness => match self.snap.scenario {
                    Scenario::NonCompliance => variance_from(rsum, rsumsq, rn),
                    Scenario::RideHailing => variance_from(msum, msumsq, mn),
                },
                _ => return out,
            };
            for r in 0..self.n_req {
                if consumed[r] {
                    continue;
                }
                let hyp = match kind {
                    StageCriterion::ProviderFairness => {
                        let w = self.direct_award(p, r);
                        let v = ledger[lpos];
                        variance_from(lsum + w, lsumsq + 2.0 * v * w + w * w, ln)
                    }
                    StageCriterion::CustomerFairness => match self.snap.scenario {
                        Scenario::NonCompliance => {
                            let a = self.req_area_pos[r];
                            let dr = self.direct_award(p, r) / self.rate_raised[a];
                            let v = rates[a];
                            variance_from(rsum + dr, rsumsq + 2.0 * v * dr + dr * dr, rn)
                        }
                        Scenario::RideHailing => {
                            let a = self.req_area_pos[r];
                            let w = self.direct_wait(p, r);
                            if wait_active[a] {
                                let new_mean = (wsum[a] + w) / (wcnt[a] + 1.0);
                                let d = new_mean - means[a];
                                variance_from(
                                    msum + d,
                                    msumsq + 2.0 * means[a] * d + d * d,
                                    mn,
                                )
                            } else {
                                variance_from(msum + w, msumsq + w * w, mn + 1.0)
                            }
                        }
                    },
                    _ => unreachable!(),
                };
                let better = match best {
                    None => hyp < current_var,
                    Some((_, bv)) => hyp < bv,
                };
                if better {
                    best = Some((r, hyp));
                }
            }
            let Some((r, _)) = best else { continue };
            if !self.move_to_front(&mut out, &mut segments, p, r) {
                continue;
            }
            consumed[r] = true;
            // Accumulate the accepted hypothetical award into the running
            // state so later providers see it.
            match kind {
                StageCriterion::ProviderFairness => {
                    let w = self.direct_award(p, r);
                    let v = ledger[lpos];
                    lsum += w;
                    lsumsq += 2.0 * v * w + w * w;
                    ledger[lpos] += w;
                }
                StageCriterion::CustomerFairness => match self.snap.scenario {
                    Scenario::NonCompliance => {
                        let a = self.req_area_pos[r];
                        let dr = self.direct_award(p, r) / self.rate_raised[a];
                        let v = rates[a];
                        rsum += dr;
                        rsumsq += 2.0 * v * dr + dr * dr;
                        rates[a] += dr;
                    }
                    Scenario::RideHailing => {
                        let a = self.req_area_pos[r];
                        let w = self.direct_wait(p, r);
                        if wait_active[a] {
                            let new_mean = (wsum[a] + w) / (wcnt[a] + 1.0);
                            let d = new_mean - means[a];
                            msum += d;
                            msumsq += 2.0 * means[a] * d + d * d;
                            means[a] = new_mean;
                        } else {
                            msum += w;
                            msumsq += w * w;
                            mn += 1.0;
                            means[a] = w;
                            wait_active[a] = true;
                        }
                        wsum[a] += w;
                        wcnt[a] += 1.0;
                    }
                },
                _ => unreachable!(),
            }
        }
        out
    }

    /// Rekeys request slot `r` to the front of provider `p`'s segment.
    /// Returns false when no key fits strictly between the provider and its
    /// current first element.
    fn move_to_front(
        &self,
        chrom: &mut Chromosome,
        segments: &mut [Vec<usize>],
        p: usize,
        r: usize,
    ) -> bool {
        let n_prov = self.elements.num_providers();
        if segments[p].first() == Some(&r) {
            return true; // already in place
        }
        let p_key = chrom.keys()[p];
        let upper = match segments[p].first() {
            Some(&first) => chrom.keys()[n_prov + first],
            None => chrom
                .keys()
                .iter()
                .copied()
                .filter(|&k| k > p_key)
                .fold(1.0_f64, f64::min),
        };
        let new_key = (p_key + upper) / 2.0;
        if !(new_key > p_key && new_key < upper) {
            return false; // keys too dense to wedge in between
        }
        for seg in segments.iter_mut() {
            seg.retain(|&x| x != r);
        }
        segments[p].insert(0, r);
        chrom.set_key(n_prov + r, new_key);
        true
    }

    /// Reorders each provider's first `window` targets greedily by the
    /// highest sequential expected award, rewriting keys in place while
    /// preserving segment boundaries.
    pub fn local_optimization(&self, chrom: &mut Chromosome, window: usize) {
        if window <= 1 {
            return;
        }
        let n_prov = self.elements.num_providers();
        let segments = chrom.decode_slots();
        for (p, seg) in segments.iter().enumerate() {
            let w = window.min(seg.len());
            if w <= 1 {
                continue;
            }
            let mut remaining: Vec<usize> = seg[..w].to_vec();
            let mut ordered = Vec::with_capacity(w);
            let mut loc = self.idle_loc[p];
            let mut prev_coords = self.idle_coords[p];
            let mut t_acc = 0.0;
            while !remaining.is_empty() {
                let mut best = 0usize;
                let mut best_score = f64::NEG_INFINITY;
                for (pos, &r) in remaining.iter().enumerate() {
                    let score = match self.snap.scenario {
                        Scenario::NonCompliance => {
                            let leg = self.minutes(loc, self.req_target[r]);
                            if leg.is_finite() {
                                capture_probability(t_acc + leg, self.snap.mean_stay)
                            } else {
                                f64::NEG_INFINITY
                            }
                        }
                        Scenario::RideHailing => {
                            let (slat, slon) = self.req_start_coords[r];
                            self.trip_len[r] - haversine(slat, slon, prev_coords.0, prev_coords.1)
                        }
                    };
                    if score > best_score {
                        best_score = score;
                        best = pos;
                    }
                }
                let r = remaining.remove(best);
                ordered.push(r);
                match self.snap.scenario {
                    Scenario::NonCompliance => {
                        let leg = self.minutes(loc, self.req_target[r]);
                        if leg.is_finite() {
                            t_acc += leg;
                            loc = self.req_target[r];
                        }
                    }
                    Scenario::RideHailing => {
                        let leg1 = self.minutes(loc, self.req_target[r]);
                        let leg2 = self.minutes(self.req_target[r], self.req_dest[r]);
                        t_acc += leg1 + leg2;
                        loc = self.req_dest[r];
                        prev_coords = self.req_dest_coords[r];
                    }
                }
            }
            if ordered == seg[..w] {
                continue;
            }
            // The window's keys are already in ascending decode order;
            // hand them to the new element order.
            let keys: Vec<f64> = seg[..w].iter().map(|&r| chrom.keys()[n_prov + r]).collect();
            for (j, &r) in ordered.iter().enumerate() {
                chrom.set_key(n_prov + r, keys[j]);
            }
        }
    }
}

fn sum_sumsq(values: &[f64]) -> (f64, f64) {
    values.iter().fold((0.0, 0.0), |(s, q), &v| (s + v, q + v * v))
}

fn sum_sumsq_active(values: &[f64], active: &[bool]) -> (f64, f64) {
    values
        .iter()
        .zip(active)
        .filter(|&(_, &a)| a)
        .fold((0.0, 0.0), |(s, q), (&v, _)| (s + v, q + v * v))
}

fn variance_from(sum: f64, sumsq: f64, n: f64) -> f64 {
    if n <= 0.0 {
        return 0.0;
    }
    let mean = sum / n;
    (sumsq / n - mean * mean).max(0.0)
}

/// Variance of per-area capture rates over areas that raised requests.
fn rate_variance(raised: &[f64], captured: &[f64]) -> f64 {
    let rates: Vec<f64> = raised
        .iter()
        .zip(captured)
        .filter(|&(&r, _)| r > 0.0)
        .map(|(&r, &c)| c / r)
        .collect();
    crate::metrics::population_variance(&rates)
}

/// Variance of per-area mean waits over areas with at least one pickup.
fn mean_variance(wsum: &[f64], wcnt: &[f64]) -> f64 {
    let means: Vec<f64> = wsum
        .iter()
        .zip(wcnt)
        .filter(|&(_, &c)| c > 0.0)
        .map(|(&s, &c)| s / c)
        .collect();
    crate::metrics::population_variance(&means)
}

fn apply_permutation<T>(items: &mut Vec<T>, order: &[usize]) {
    debug_assert_eq!(items.len(), order.len());
    let mut taken: Vec<Option<T>> = items.drain(..).map(Some).collect();
    items.extend(
        order
            .iter()
            .map(|&src| taken[src].take().expect("order must be a permutation")),
    );
}

/// Top `ceil(cross_rate * len)` of an already ranked slice.
pub fn select_cross_rate<T>(ranked: &[T], cross_rate: f64) -> &[T] {
    let take = ((cross_rate * ranked.len() as f64).ceil() as usize).min(ranked.len());
    &ranked[..take]
}

/// Swap mutation over the worst `mutate_rate` fraction of a ranked
/// population: one random key swap per chromosome, leader re-enforced.
pub fn mutate<R: Rng>(
    population: &mut [Chromosome],
    cfg: &GaConfig,
    rng: &mut R,
) {
    let count = cfg.mutation_count().min(population.len());
    let start = population.len() - count;
    for chrom in &mut population[start..] {
        match cfg.mutation_mode {
            MutationMode::Swap => {
                let a = rng.gen_range(0..chrom.len());
                let b = rng.gen_range(0..chrom.len());
                chrom.swap_keys(a, b);
                chrom.enforce_leader();
            }
            MutationMode::Replace => {
                *chrom = Chromosome::random(Arc::clone(chrom.elements()), rng);
            }
        }
    }
}

struct Indiv {
    chrom: Chromosome,
    nudged_provider: Option<Chromosome>,
    nudged_customer: Option<Chromosome>,
}

impl Indiv {
    fn new(chrom: Chromosome) -> Self {
        Indiv { chrom, nudged_provider: None, nudged_customer: None }
    }
}

/// A persistently sorted view of the population under one stage criterion.
struct StageOrder {
    stage: StageCriterion,
    entries: Vec<(f64, usize)>,
    slot_keys: Vec<f64>,
}

impl StageOrder {
    fn build(stage: StageCriterion, ev: &FitnessEvaluator<'_>, pop: &mut [Indiv]) -> Self {
        let slot_keys: Vec<f64> = (0..pop.len())
            .map(|i| stage_key(ev, &mut pop[i], stage))
            .collect();
        let mut entries: Vec<(f64, usize)> = slot_keys.iter().copied().zip(0..pop.len()).collect();
        entries.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        StageOrder { stage, entries, slot_keys }
    }

    fn replace(&mut self, slot: usize, new_key: f64) {
        let old = (self.slot_keys[slot], slot);
        let pos = self
            .entries
            .binary_search_by(|e| e.0.total_cmp(&old.0).then(e.1.cmp(&old.1)))
            .expect("stage order entry");
        self.entries.remove(pos);
        let new = (new_key, slot);
        let pos = self
            .entries
            .binary_search_by(|e| e.0.total_cmp(&new.0).then(e.1.cmp(&new.1)))
            .unwrap_err();
        self.entries.insert(pos, new);
        self.slot_keys[slot] = new_key;
    }

    fn pick<R: Rng>(&self, cross_rate: f64, rng: &mut R) -> usize {
        let take = ((cross_rate * self.entries.len() as f64).ceil() as usize)
            .clamp(1, self.entries.len());
        self.entries[rng.gen_range(0..take)].1
    }
}

/// Ensures the stage-specific chromosome and returns its sort key.
fn stage_key(ev: &FitnessEvaluator<'_>, ind: &mut Indiv, stage: StageCriterion) -> f64 {
    match stage {
        StageCriterion::Utility | StageCriterion::Combined => {
            let s = ev.evaluate(&mut ind.chrom);
            ev.sort_key(s, stage)
        }
        StageCriterion::ProviderFairness => {
            if ind.nudged_provider.is_none() {
                ind.nudged_provider = Some(ev.assign_provider(&ind.chrom, stage));
            }
            let c = ind.nudged_provider.as_mut().unwrap();
            let s = ev.evaluate(c);
            ev.sort_key(s, stage)
        }
        StageCriterion::CustomerFairness => {
            if ind.nudged_customer.is_none() {
                ind.nudged_customer = Some(ev.assign_provider(&ind.chrom, stage));
            }
            let c = ind.nudged_customer.as_mut().unwrap();
            let s = ev.evaluate(c);
            ev.sort_key(s, stage)
        }
    }
}

fn stage_parent<'p>(ind: &'p Indiv, stage: StageCriterion) -> &'p Chromosome {
    match stage {
        StageCriterion::Utility | StageCriterion::Combined => &ind.chrom,
        StageCriterion::ProviderFairness => ind.nudged_provider.as_ref().expect("nudged"),
        StageCriterion::CustomerFairness => ind.nudged_customer.as_ref().expect("nudged"),
    }
}

/// Runs the full optimization loop and returns the decoded best-of-run plan
/// under the variant's ranking criterion.
///
/// With zero idle providers this yields an empty plan; with zero pending
/// requests, an all-idle plan. All randomness flows from `cfg.seed`.
pub fn run_fairga(
    snapshot: &PlanningSnapshot<'_>,
    variant: GaVariant,
    cfg: &GaConfig,
    warm: Option<&AllocationPlan>,
    mut trace: Option<&mut dyn FnMut(u32, f64)>,
) -> Result<AllocationPlan> {
    cfg.validate()?;
    if snapshot.idle.is_empty() {
        return Ok(AllocationPlan {
            assignments: BTreeMap::new(),
            unassigned: snapshot.pending.iter().map(|r| r.id).collect(),
        });
    }
    if snapshot.pending.is_empty() {
        return Ok(AllocationPlan {
            assignments: snapshot.idle.iter().map(|p| (p.id, Vec::new())).collect(),
            unassigned: Vec::new(),
        });
    }

    let ev = FitnessEvaluator::new(snapshot)?;
    let elements = Arc::clone(ev.elements());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let n = cfg.population_size;
    let mut pop: Vec<Indiv> = (0..n)
        .map(|i| {
            let chrom = match (i, warm) {
                (0, Some(plan)) => Chromosome::from_plan(Arc::clone(&elements), plan, &mut rng),
                _ => Chromosome::random(Arc::clone(&elements), &mut rng),
            };
            Indiv::new(chrom)
        })
        .collect();

    let cross_size = cfg.cross_size();
    let child_slots = (n - cross_size)..n;
    let mut best: Option<(f64, Chromosome)> = None;

    for gen in 0..cfg.max_gen {
        // Rank by the main criterion, best first, stable.
        let rank_keys: Vec<f64> = pop
            .iter_mut()
            .map(|ind| {
                let s = ev.evaluate(&mut ind.chrom);
                ev.sort_key(s, variant.rank)
            })
            .collect();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| rank_keys[a].total_cmp(&rank_keys[b]).then(a.cmp(&b)));
        apply_permutation(&mut pop, &order);

        let gen_best_key = ev.sort_key(ev.evaluate(&mut pop[0].chrom), variant.rank);
        if best.as_ref().map_or(true, |(k, _)| gen_best_key < *k) {
            best = Some((gen_best_key, pop[0].chrom.clone()));
        }
        if let Some(t) = trace.as_mut() {
            t(gen, -gen_best_key);
        }

        // Shadow populations for the two parent stages, updated in place as
        // children land.
        let mut mother_order = StageOrder::build(variant.mother, &ev, &mut pop);
        let mut father_order = if variant.father == variant.mother {
            None
        } else {
            Some(StageOrder::build(variant.father, &ev, &mut pop))
        };

        for slot in child_slots.clone() {
            let m_slot = mother_order.pick(cfg.cross_rate, &mut rng);
            let f_slot = father_order
                .as_ref()
                .unwrap_or(&mother_order)
                .pick(cfg.cross_rate, &mut rng);
            let mother = stage_parent(&pop[m_slot], variant.mother);
            let father = stage_parent(&pop[f_slot], variant.father);
            let mut child = crossover(mother, father, &mut rng);
            let u: f64 = rng.gen();
            let apply_local = if cfg.literal_local_gate {
                u > cfg.local_rate
            } else {
                u < cfg.local_rate
            };
            if apply_local {
                ev.local_optimization(&mut child, cfg.local_window);
            }
            pop[slot] = Indiv::new(child);
            let key = stage_key(&ev, &mut pop[slot], mother_order.stage);
            mother_order.replace(slot, key);
            if let Some(fo) = father_order.as_mut() {
                let key = stage_key(&ev, &mut pop[slot], fo.stage);
                fo.replace(slot, key);
            }
        }

        // Immigrate the worst fraction.
        let count = cfg.mutation_count().min(n);
        let start = n - count;
        for ind in &mut pop[start..] {
            match cfg.mutation_mode {
                MutationMode::Swap => {
                    let a = rng.gen_range(0..ind.chrom.len());
                    let b = rng.gen_range(0..ind.chrom.len());
                    ind.chrom.swap_keys(a, b);
                    ind.chrom.enforce_leader();
                }
                MutationMode::Replace => {
                    ind.chrom = Chromosome::random(Arc::clone(&elements), &mut rng);
                }
            }
            ind.nudged_provider = None;
            ind.nudged_customer = None;
        }
    }

    // The final generation's children still count toward best-of-run.
    for ind in &mut pop {
        let key = ev.sort_key(ev.evaluate(&mut ind.chrom), variant.rank);
        if best.as_ref().map_or(true, |(k, _)| key < *k) {
            best = Some((key, ind.chrom.clone()));
        }
    }

    let (_, best_chrom) = best.expect("population is non-empty");
    let plan = best_chrom.decode();
    debug_assert!(plan.validate().is_ok());
    Ok(plan)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::RoadGraph;

    fn n(i: u32) -> NodeId {
        NodeId(i)
    }

    /// Bidirectional line graph with 70 m spacing: one hop = one minute.
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

    fn nc_request(id: u32, node: u32, area: u32) -> PendingRequest {
        PendingRequest {
            id: RequestId(id),
            target: n(node),
            destination: n(node),
            area: AreaId(area),
            window_start: 0.0,
        }
    }

    fn snapshot<'a>(
        graph: &'a RoadGraph,
        idle: Vec<IdleProvider>,
        pending: Vec<PendingRequest>,
        ledgers: Vec<(ProviderId, f64)>,
    ) -> PlanningSnapshot<'a> {
        let areas = AreaSnapshot::from_pending(&pending);
        PlanningSnapshot {
            graph,
            scenario: Scenario::NonCompliance,
            now: 0.0,
            mean_stay: 10.0,
            idle,
            ledgers,
            pending,
            areas,
        }
    }

    #[test]
    fn capture_probability_closed_form() {
        assert_eq!(capture_probability(0.0, 10.0), 1.0);
        let p = capture_probability(10.0, 10.0);
        assert!((p - (-1.0_f64).exp()).abs() < 1e-12);
        assert!((p - 0.3679).abs() < 1e-4);
        assert!(capture_probability(30.0, 10.0) < p);
    }

    #[test]
    fn select_cross_rate_portions() {
        let v: Vec<u32> = (0..100).collect();
        assert_eq!(select_cross_rate(&v, 1.0).len(), 100);
        assert_eq!(select_cross_rate(&v, 0.3).len(), 30);
        assert_eq!(select_cross_rate(&v, 0.001).len(), 1);
    }

    /// Three hand-built plans; the utility and provider-fairness orders must
    /// match an independent recomputation of the fitness values.
    #[test]
    fn rank_matches_direct_fitness_recomputation() {
        let g = line(5);
        let idle = vec![
            IdleProvider { id: ProviderId(0), location: n(0) },
            IdleProvider { id: ProviderId(1), location: n(4) },
        ];
        let pending = vec![nc_request(0, 1, 0), nc_request(1, 2, 0), nc_request(2, 3, 0)];
        let ledgers = vec![(ProviderId(0), 0.0), (ProviderId(1), 0.0)];
        let snap = snapshot(&g, idle, pending, ledgers);
        let ev = FitnessEvaluator::new(&snap).unwrap();
        let elements = Arc::clone(ev.elements());

        let plan = |a: Vec<u32>, b: Vec<u32>| {
            let mut p = AllocationPlan::default();
            p.assignments.insert(ProviderId(0), a.into_iter().map(RequestId).collect());
            p.assignments.insert(ProviderId(1), b.into_iter().map(RequestId).collect());
            p
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut a = Chromosome::from_plan(Arc::clone(&elements), &plan(vec![0, 1], vec![2]), &mut rng);
        let mut b = Chromosome::from_plan(Arc::clone(&elements), &plan(vec![1, 0], vec![2]), &mut rng);
        let mut c = Chromosome::from_plan(Arc::clone(&elements), &plan(vec![0, 1, 2], vec![]), &mut rng);

        // Independent arithmetic: hops are minutes, p = exp(-delay / 10).
        let e = |mins: f64| (-mins / 10.0_f64).exp();
        let util_a = (e(1.0) + e(2.0) + e(1.0)) / 3.0;
        let util_b = (e(2.0) + e(3.0) + e(1.0)) / 3.0;
        let util_c = (e(1.0) + e(2.0) + e(3.0)) / 3.0;
        let sa = ev.evaluate(&mut a);
        let sb = ev.evaluate(&mut b);
        let sc = ev.evaluate(&mut c);
        assert!((sa.expected_utility - util_a).abs() < 1e-12);
        assert!((sb.expected_utility - util_b).abs() < 1e-12);
        assert!((sc.expected_utility - util_c).abs() < 1e-12);

        let var2 = |x: f64, y: f64| {
            let m = (x + y) / 2.0;
            ((x - m).powi(2) + (y - m).powi(2)) / 2.0
        };
        assert!((sa.provider_fairness - var2(e(1.0) + e(2.0), e(1.0))).abs() < 1e-12);
        assert!((sc.provider_fairness - var2(e(1.0) + e(2.0) + e(3.0), 0.0)).abs() < 1e-12);

        let mut population = vec![c.clone(), a.clone(), b.clone()];
        ev.rank(&mut population, StageCriterion::Utility);
        assert_eq!(population[0].decode(), a.decode());

        // The balanced plan ranks first under provider fairness.
        let mut population = vec![c.clone(), a.clone()];
        ev.rank(&mut population, StageCriterion::ProviderFairness);
        assert_eq!(population[0].decode(), a.decode());
    }

    #[test]
    fn rank_breaks_ties_by_insertion_order() {
        let g = line(3);
        let idle = vec![IdleProvider { id: ProviderId(0), location: n(0) }];
        let pending = vec![nc_request(0, 1, 0)];
        let snap = snapshot(&g, idle, pending, vec![(ProviderId(0), 0.0)]);
        let ev = FitnessEvaluator::new(&snap).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = Chromosome::random(Arc::clone(ev.elements()), &mut rng);
        // Same decode (monotone key transform), hence identical scores, but
        // distinguishable keys.
        let b = Chromosome::from_keys(
            Arc::clone(ev.elements()),
            a.keys().iter().map(|k| k / 2.0).collect(),
        );
        let mut population = vec![b.clone(), a.clone()];
        ev.rank(&mut population, StageCriterion::Utility);
        assert_eq!(population[0].keys(), b.keys());
    }

    #[test]
    fn assign_provider_moves_single_candidate_to_front() {
        let g = line(4);
        let idle = vec![IdleProvider { id: ProviderId(0), location: n(0) }];
        let pending = vec![nc_request(0, 2, 0)];
        let snap = snapshot(&g, idle, pending, vec![(ProviderId(0), 0.0)]);
        let ev = FitnessEvaluator::new(&snap).unwrap();
        // Variance over a single provider stays 0; no strict improvement, so
        // provider fairness cannot move anything for a singleton, but the
        // request is already in the only segment.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let chrom = Chromosome::random(Arc::clone(ev.elements()), &mut rng);
        let out = ev.assign_provider(&chrom, StageCriterion::ProviderFairness);
        assert_eq!(out.decode().assignments[&ProviderId(0)], vec![RequestId(0)]);
    }

    /// Ledgers [10, 0] and one request worth ~5: the poorer provider's
    /// hypothetical variance wins over both the baseline and the richer
    /// provider's hypothesis, so the request keys into the poorer segment.
    #[test]
    fn assign_provider_feeds_the_poorer_provider() {
        let g = line(4);
        let idle = vec![
            IdleProvider { id: ProviderId(0), location: n(1) },
            IdleProvider { id: ProviderId(1), location: n(3) },
        ];
        // Equidistant from both providers so the award is symmetric.
        let pending = vec![nc_request(0, 2, 0)];
        let ledgers = vec![(ProviderId(0), 10.0), (ProviderId(1), 0.0)];
        let mut snap = snapshot(&g, idle, pending, ledgers);
        snap.mean_stay = 1000.0; // award ~ 1 for both
        let ev = FitnessEvaluator::new(&snap).unwrap();
        let elements = Arc::clone(ev.elements());

        // Start from a genome whose decode gives the request to the rich one.
        let mut plan = AllocationPlan::default();
        plan.assignments.insert(ProviderId(0), vec![RequestId(0)]);
        plan.assignments.insert(ProviderId(1), vec![]);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let chrom = Chromosome::from_plan(elements, &plan, &mut rng);

        let out = ev.assign_provider(&chrom, StageCriterion::ProviderFairness);
        let decoded = out.decode();
        assert_eq!(decoded.assignments[&ProviderId(1)], vec![RequestId(0)]);
        assert!(decoded.assignments[&ProviderId(0)].is_empty());
    }

    #[test]
    fn assign_provider_without_pending_is_identity() {
        let g = line(3);
        let idle = vec![IdleProvider { id: ProviderId(0), location: n(0) }];
        let snap = snapshot(&g, idle, vec![], vec![(ProviderId(0), 0.0)]);
        let ev = FitnessEvaluator::new(&snap).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let chrom = Chromosome::random(Arc::clone(ev.elements()), &mut rng);
        let out = ev.assign_provider(&chrom, StageCriterion::ProviderFairness);
        assert_eq!(out.keys(), chrom.keys());
    }

    /// Three-target segment: the greedy reorder must match a brute-force
    /// replay of the greedy rule implemented independently.
    #[test]
    fn local_optimization_matches_greedy_oracle() {
        let g = line(8);
        let idle = vec![IdleProvider { id: ProviderId(0), location: n(0) }];
        let pending = vec![nc_request(0, 6, 0), nc_request(1, 1, 0), nc_request(2, 3, 0)];
        let snap = snapshot(&g, idle, pending, vec![(ProviderId(0), 0.0)]);
        let ev = FitnessEvaluator::new(&snap).unwrap();
        let elements = Arc::clone(ev.elements());

        let mut plan = AllocationPlan::default();
        plan.assignments
            .insert(ProviderId(0), vec![RequestId(0), RequestId(1), RequestId(2)]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut chrom = Chromosome::from_plan(elements, &plan, &mut rng);
        ev.local_optimization(&mut chrom, 5);

        // Independent replay: nodes 6, 1, 3 from node 0, one hop per minute,
        // p = exp(-t/10); greedy picks the nearest-in-time each step.
        let targets = [(RequestId(0), 6i64), (RequestId(1), 1), (RequestId(2), 3)];
        let mut loc = 0i64;
        let mut t = 0.0;
        let mut remaining: Vec<_> = targets.to_vec();
        let mut expect = Vec::new();
        while !remaining.is_empty() {
            let (pos, _) = remaining
                .iter()
                .enumerate()
                .map(|(i, &(_, node))| (i, (-(t + (node - loc).abs() as f64) / 10.0_f64).exp()))
                .fold((0, f64::NEG_INFINITY), |acc, (i, p)| if p > acc.1 { (i, p) } else { acc });
            let (id, node) = remaining.remove(pos);
            t += (node - loc).abs() as f64;
            loc = node;
            expect.push(id);
        }
        assert_eq!(expect, vec![RequestId(1), RequestId(2), RequestId(0)]);
        assert_eq!(chrom.decode().assignments[&ProviderId(0)], expect);
    }

    #[test]
    fn local_optimization_window_one_is_identity() {
        let g = line(8);
        let idle = vec![IdleProvider { id: ProviderId(0), location: n(0) }];
        let pending = vec![nc_request(0, 6, 0), nc_request(1, 1, 0)];
        let snap = snapshot(&g, idle, pending, vec![(ProviderId(0), 0.0)]);
        let ev = FitnessEvaluator::new(&snap).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut chrom = Chromosome::random(Arc::clone(ev.elements()), &mut rng);
        let before = chrom.keys().to_vec();
        ev.local_optimization(&mut chrom, 1);
        assert_eq!(chrom.keys(), &before[..]);
    }

    #[test]
    fn mutation_preserves_multiset_and_rate_zero_is_identity() {
        let g = line(5);
        let idle = vec![IdleProvider { id: ProviderId(0), location: n(0) }];
        let pending = vec![nc_request(0, 1, 0), nc_request(1, 2, 0)];
        let snap = snapshot(&g, idle, pending, vec![(ProviderId(0), 0.0)]);
        let ev = FitnessEvaluator::new(&snap).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut pop: Vec<Chromosome> = (0..4)
            .map(|_| Chromosome::random(Arc::clone(ev.elements()), &mut rng))
            .collect();

        let frozen: Vec<Vec<f64>> = pop.iter().map(|c| c.keys().to_vec()).collect();
        let cfg = GaConfig { mutate_rate: 0.0, population_size: 4, ..GaConfig::default() };
        mutate(&mut pop, &cfg, &mut rng);
        for (c, keys) in pop.iter().zip(&frozen) {
            assert_eq!(c.keys(), &keys[..]);
        }

        let cfg = GaConfig { mutate_rate: 0.5, population_size: 4, ..GaConfig::default() };
        mutate(&mut pop, &cfg, &mut rng);
        for (c, keys) in pop.iter().zip(&frozen) {
            let mut a = c.keys().to_vec();
            let mut b = keys.clone();
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn run_assigns_the_only_request() {
        let g = line(3);
        let idle = vec![IdleProvider { id: ProviderId(0), location: n(0) }];
        let pending = vec![nc_request(0, 2, 0)];
        let snap = snapshot(&g, idle, pending, vec![(ProviderId(0), 0.0)]);
        let cfg = GaConfig { population_size: 10, max_gen: 5, seed: 1, ..GaConfig::default() };
        let plan = run_fairga(&snap, GaVariant::two_fair(), &cfg, None, None).unwrap();
        assert_eq!(plan.assignments[&ProviderId(0)], vec![RequestId(0)]);
    }

    #[test]
    fn identical_seeds_return_identical_plans() {
        let g = line(9);
        let idle = vec![
            IdleProvider { id: ProviderId(0), location: n(0) },
            IdleProvider { id: ProviderId(1), location: n(8) },
        ];
        let pending: Vec<_> = (0..5).map(|i| nc_request(i, i + 2, i % 2)).collect();
        let ledgers = vec![(ProviderId(0), 1.0), (ProviderId(1), 4.0)];
        let snap = snapshot(&g, idle, pending, ledgers);
        let cfg = GaConfig { population_size: 20, max_gen: 15, seed: 33, ..GaConfig::default() };
        let a = run_fairga(&snap, GaVariant::two_fair(), &cfg, None, None).unwrap();
        let b = run_fairga(&snap, GaVariant::two_fair(), &cfg, None, None).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_idle_providers_yield_an_empty_plan() {
        let g = line(3);
        let snap = snapshot(&g, vec![], vec![nc_request(0, 1, 0)], vec![]);
        let cfg = GaConfig::default();
        let plan = run_fairga(&snap, GaVariant::plain(), &cfg, None, None).unwrap();
        assert!(plan.assignments.is_empty());
        assert_eq!(plan.unassigned, vec![RequestId(0)]);
    }

    /// Exhaustive enumeration over every assignment and order of a tiny
    /// static instance: plain GA must reach the optimum expected utility.
    #[test]
    fn plain_ga_reaches_brute_force_optimum() {
        let g = line(10);
        let idle = vec![
            IdleProvider { id: ProviderId(0), location: n(2) },
            IdleProvider { id: ProviderId(1), location: n(7) },
        ];
        let pending: Vec<_> = [(0u32, 0u32), (1, 4), (2, 5), (3, 9)]
            .iter()
            .map(|&(id, node)| nc_request(id, node, 0))
            .collect();
        let ledgers = vec![(ProviderId(0), 0.0), (ProviderId(1), 0.0)];
        let snap = snapshot(&g, idle, pending.clone(), ledgers);
        let ev = FitnessEvaluator::new(&snap).unwrap();

        // Oracle: enumerate ordered two-way splits of the four requests and
        // score them with direct arithmetic on hop counts.
        let hops = |a: i64, b: i64| (a - b).abs() as f64;
        let node_of = [0i64, 4, 5, 9];
        let score_seg = |start: i64, seg: &[usize]| {
            let mut t = 0.0;
            let mut loc = start;
            let mut sum = 0.0;
            for &r in seg {
                t += hops(loc, node_of[r]);
                sum += (-t / 10.0_f64).exp();
                loc = node_of[r];
            }
            sum
        };
        let mut best = f64::NEG_INFINITY;
        // Every subset for provider 0, every permutation of both segments.
        for mask in 0u32..16 {
            let s0: Vec<usize> = (0..4).filter(|i| mask & (1 << i) != 0).collect();
            let s1: Vec<usize> = (0..4).filter(|i| mask & (1 << i) == 0).collect();
            for p0 in permutations(&s0) {
                for p1 in permutations(&s1) {
                    let total = score_seg(2, &p0) + score_seg(7, &p1);
                    best = best.max(total);
                }
            }
        }
        let optimum = best / 4.0;

        let cfg = GaConfig { population_size: 60, max_gen: 300, seed: 7, ..GaConfig::default() };
        let plan = run_fairga(&snap, GaVariant::plain(), &cfg, None, None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut chrom = Chromosome::from_plan(Arc::clone(ev.elements()), &plan, &mut rng);
        let got = ev.evaluate(&mut chrom).expected_utility;
        assert!(
            (got - optimum).abs() < 1e-9,
            "GA fitness {got} differs from brute-force optimum {optimum}"
        );
    }

    fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
        if items.is_empty() {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for (i, &x) in items.iter().enumerate() {
            let mut rest = items.to_vec();
            rest.remove(i);
            for mut p in permutations(&rest) {
                p.insert(0, x);
                out.push(p);
            }
        }
        out
    }

    /// Elitism keeps the best rank-criterion fitness non-decreasing across
    /// generations.
    #[test]
    fn best_fitness_is_monotone_across_generations() {
        let g = line(9);
        let idle = vec![
            IdleProvider { id: ProviderId(0), location: n(0) },
            IdleProvider { id: ProviderId(1), location: n(8) },
        ];
        let pending: Vec<_> = (0..6).map(|i| nc_request(i, i + 1, i % 3)).collect();
        let snap = snapshot(&g, idle, pending, vec![(ProviderId(0), 0.0), (ProviderId(1), 0.0)]);
        let cfg = GaConfig { population_size: 16, max_gen: 40, seed: 12, ..GaConfig::default() };
        let mut trace = Vec::new();
        run_fairga(
            &snap,
            GaVariant::two_fair(),
            &cfg,
            None,
            Some(&mut |_, best| trace.push(best)),
        )
        .unwrap();
        assert_eq!(trace.len(), 40);
        for w in trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-12, "best fitness regressed: {:?}", w);
        }
    }
}
