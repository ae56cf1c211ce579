//! Leader-based random-keys (LERK) genome encoding.
//!
//! A chromosome holds one uniform key in `[0, 1)` per element, where the
//! elements are every idle provider and every pending request in a canonical
//! order (providers by id, then requests by id). Sorting elements by key
//! yields a sequence whose first element is forced to be a provider (the
//! leader); the requests between two providers are the preceding provider's
//! ordered targets. Crossover and mutation operate positionally on the key
//! vector; sorting happens only at decode time.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::world::{ProviderId, RequestId};

/// A genome element: an idle provider or a pending request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Element {
    Provider(ProviderId),
    Request(RequestId),
}

/// The shared element universe of one optimization epoch, in canonical
/// order. All chromosomes of a population point at the same set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ElementSet {
    providers: Vec<ProviderId>,
    requests: Vec<RequestId>,
}

impl ElementSet {
    /// Builds the canonical ordering. Requires at least one provider so a
    /// leader exists.
    pub fn new(mut providers: Vec<ProviderId>, mut requests: Vec<RequestId>) -> Result<Self> {
        if providers.is_empty() {
            return Err(Error::NoProviders);
        }
        providers.sort();
        providers.dedup();
        requests.sort();
        requests.dedup();
        Ok(ElementSet { providers, requests })
    }

    pub fn len(&self) -> usize {
        self.providers.len() + self.requests.len()
    }

    pub fn is_empty(&self) -> bool {
        false // at least one provider by construction
    }

    pub fn num_providers(&self) -> usize {
        self.providers.len()
    }

    pub fn num_requests(&self) -> usize {
        self.requests.len()
    }

    pub fn providers(&self) -> &[ProviderId] {
        &self.providers
    }

    pub fn requests(&self) -> &[RequestId] {
        &self.requests
    }

    pub fn element(&self, idx: usize) -> Element {
        if idx < self.providers.len() {
            Element::Provider(self.providers[idx])
        } else {
            Element::Request(self.requests[idx - self.providers.len()])
        }
    }

    pub fn is_provider(&self, idx: usize) -> bool {
        idx < self.providers.len()
    }
}

/// Cached fitness of a chromosome against one world snapshot. Cleared by any
/// key mutation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitnessScores {
    /// Mean expected utility per pending request (capture probability or
    /// projected ride gain).
    pub expected_utility: f64,
    /// Projected provider-fairness variance.
    pub provider_fairness: f64,
    /// Projected customer-fairness variance.
    pub customer_fairness: f64,
}

/// A random-keys genome over one element set.
#[derive(Debug, Clone)]
pub struct Chromosome {
    elements: Arc<ElementSet>,
    keys: Vec<f64>,
    pub fitness: Option<FitnessScores>,
}

/// Decoded solution: ordered targets per provider plus any requests left
/// unassigned (always empty for LERK decodes; greedy planners use it).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AllocationPlan {
    pub assignments: BTreeMap<ProviderId, Vec<RequestId>>,
    pub unassigned: Vec<RequestId>,
}

impl AllocationPlan {
    /// Checks that no request appears twice across segments and the
    /// unassigned pool.
    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        let all = self
            .assignments
            .values()
            .flatten()
            .chain(self.unassigned.iter());
        for &r in all {
            if !seen.insert(r) {
                return Err(Error::DuplicateAssignment(r));
            }
        }
        Ok(())
    }

    pub fn assigned_count(&self) -> usize {
        self.assignments.values().map(|v| v.len()).sum()
    }
}

impl Chromosome {
    /// Generates a random genome: keys i.i.d. uniform in `[0, 1)`, leader
    /// property enforced by a key swap.
    pub fn random<R: Rng>(elements: Arc<ElementSet>, rng: &mut R) -> Self {
        let keys = (0..elements.len()).map(|_| rng.gen::<f64>()).collect();
        let mut c = Chromosome { elements, keys, fitness: None };
        c.enforce_leader();
        c
    }

    /// Builds a genome whose decode reproduces `plan` for every surviving
    /// element; elements missing from the plan get fresh random keys.
    pub fn from_plan<R: Rng>(
        elements: Arc<ElementSet>,
        plan: &AllocationPlan,
        rng: &mut R,
    ) -> Self {
        let p = elements.num_providers();
        let mut keys: Vec<f64> = (0..elements.len()).map(|_| rng.gen::<f64>()).collect();
        let req_slot: BTreeMap<RequestId, usize> = elements
            .requests()
            .iter()
            .enumerate()
            .map(|(i, &r)| (r, p + i))
            .collect();
        for (pi, &pid) in elements.providers().iter().enumerate() {
            keys[pi] = pi as f64 / p as f64;
            if let Some(segment) = plan.assignments.get(&pid) {
                let live: Vec<usize> = segment
                    .iter()
                    .filter_map(|r| req_slot.get(r).copied())
                    .collect();
                let width = 1.0 / (p as f64 * (live.len() + 1) as f64);
                for (j, slot) in live.into_iter().enumerate() {
                    keys[slot] = keys[pi] + (j + 1) as f64 * width;
                }
            }
        }
        let mut c = Chromosome { elements, keys, fitness: None };
        c.enforce_leader();
        c
    }

    pub fn elements(&self) -> &Arc<ElementSet> {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn keys(&self) -> &[f64] {
        &self.keys
    }

    pub fn set_key(&mut self, idx: usize, key: f64) {
        self.keys[idx] = key;
        self.fitness = None;
    }

    pub fn swap_keys(&mut self, a: usize, b: usize) {
        self.keys.swap(a, b);
        self.fitness = None;
    }

    /// Builds a chromosome from explicit keys. The leader property is not
    /// enforced here; callers construct decodable genomes or follow up with
    /// [`Chromosome::enforce_leader`].
    pub fn from_keys(elements: Arc<ElementSet>, keys: Vec<f64>) -> Self {
        debug_assert_eq!(elements.len(), keys.len());
        Chromosome { elements, keys, fitness: None }
    }

    /// Indices of all elements sorted by key ascending, ties by canonical
    /// position.
    pub fn sorted_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.keys.len()).collect();
        order.sort_by(|&a, &b| self.keys[a].total_cmp(&self.keys[b]).then(a.cmp(&b)));
        order
    }

    /// If the smallest key belongs to a request, swaps it with the smallest
    /// provider key so the sorted sequence starts with a provider.
    /// Idempotent; preserves both the key multiset and the element multiset.
    pub fn enforce_leader(&mut self) {
        let n_prov = self.elements.num_providers();
        debug_assert!(n_prov > 0);
        let mut min_all = 0usize;
        let mut min_prov = 0usize;
        for i in 1..self.keys.len() {
            if self.keys[i] < self.keys[min_all] {
                min_all = i;
            }
            if i < n_prov && self.keys[i] < self.keys[min_prov] {
                min_prov = i;
            }
        }
        if !self.elements.is_provider(min_all) {
            self.keys.swap(min_all, min_prov);
            self.fitness = None;
        }
    }

    /// Decodes into per-provider slot segments: `segments[i]` holds request
    /// slot indices (offsets into `elements.requests()`) assigned to provider
    /// slot `i`, in key order.
    pub(crate) fn decode_slots(&self) -> Vec<Vec<usize>> {
        let n_prov = self.elements.num_providers();
        let mut segments = vec![Vec::new(); n_prov];
        let mut current: Option<usize> = None;
        for idx in self.sorted_order() {
            if idx < n_prov {
                current = Some(idx);
            } else {
                // Leader enforcement guarantees a provider precedes any
                // request in sorted order.
                let p = current.expect("leader invariant violated");
                segments[p].push(idx - n_prov);
            }
        }
        segments
    }

    /// Decodes into an [`AllocationPlan`].
    pub fn decode(&self) -> AllocationPlan {
        let segments = self.decode_slots();
        let mut plan = AllocationPlan::default();
        for (pi, seg) in segments.into_iter().enumerate() {
            let pid = self.elements.providers()[pi];
            let reqs = seg
                .into_iter()
                .map(|ri| self.elements.requests()[ri])
                .collect();
            plan.assignments.insert(pid, reqs);
        }
        plan
    }

    /// Debug dump: one line per gene, `element_id key`, sorted by key.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for idx in self.sorted_order() {
            match self.elements.element(idx) {
                Element::Provider(p) => writeln!(out, "P{} {}", p, self.keys[idx]).unwrap(),
                Element::Request(r) => writeln!(out, "R{} {}", r, self.keys[idx]).unwrap(),
            }
        }
        out
    }
}

/// Single-point crossover on the canonical key vectors: the child takes the
/// mother's keys up to a uniform cut index and the father's afterwards, then
/// has the leader property re-enforced.
pub fn crossover<R: Rng>(mother: &Chromosome, father: &Chromosome, rng: &mut R) -> Chromosome {
    let cut = rng.gen_range(0..=mother.len());
    crossover_at(mother, father, cut)
}

pub(crate) fn crossover_at(mother: &Chromosome, father: &Chromosome, cut: usize) -> Chromosome {
    debug_assert_eq!(mother.len(), father.len());
    let mut keys = Vec::with_capacity(mother.len());
    keys.extend_from_slice(&mother.keys()[..cut]);
    keys.extend_from_slice(&father.keys()[cut..]);
    let mut child = Chromosome::from_keys(Arc::clone(mother.elements()), keys);
    child.enforce_leader();
    child
}
