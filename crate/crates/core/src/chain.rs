//! The recombination chain: merge two adjacent districts, redivide their
//! union along a balanced spanning-tree cut, repeat.
//!
//! The chain only ever sees a [`Topology`]; vote columns are not reachable
//! from here, so transition probabilities cannot depend on partisan data.

use indexmap::IndexSet;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Assignment, DualGraph, Topology};
use crate::seed::{chain_rng, derive_seed};
use crate::tally::{SeatCounter, Seats, TiePolicy};
use crate::tree::{recursive_seed, BalanceWindow, TreeError, TreeSampler, DEFAULT_MAX_TREE_ATTEMPTS};

pub const DEFAULT_PAIR_RETRIES: u32 = 50;
pub const DEFAULT_SEED_ATTEMPTS: u32 = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChainError {
    #[error("invalid chain parameters: {0}")]
    InvalidParams(String),
    #[error("seed plan failed: {0}")]
    Seed(TreeError),
    #[error("chain stalled at step {step}: {retries} district pairs in a row had no balanced split")]
    ChainStalled { step: u64, retries: u32 },
    #[error(transparent)]
    Tree(#[from] TreeError),
}

/// How the district pair to merge is drawn each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, Hash)]
#[serde(rename_all = "snake_case")]
pub enum PairSelection {
    /// Uniform over adjacent district pairs.
    #[default]
    Uniform,
    /// Pair of a uniformly drawn cut edge.
    CutEdgeWeighted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainParams {
    pub k: u32,
    pub epsilon: f64,
    /// Number of recorded plans.
    pub steps: u64,
    pub rng_seed: u64,
    #[serde(default = "default_tree_attempts")]
    pub max_tree_attempts: u32,
    #[serde(default = "default_pair_retries")]
    pub pair_retries: u32,
    #[serde(default = "default_seed_attempts")]
    pub seed_attempts: u32,
    /// Unrecorded steps between the seed plan and the first recorded plan.
    #[serde(default)]
    pub burn_in: u64,
    /// Steps per recorded plan.
    #[serde(default = "default_thin")]
    pub thin: u64,
    #[serde(default)]
    pub pair_selection: PairSelection,
}

fn default_tree_attempts() -> u32 {
    DEFAULT_MAX_TREE_ATTEMPTS
}
fn default_pair_retries() -> u32 {
    DEFAULT_PAIR_RETRIES
}
fn default_seed_attempts() -> u32 {
    DEFAULT_SEED_ATTEMPTS
}
fn default_thin() -> u64 {
    1
}

impl ChainParams {
    pub fn new(k: u32, epsilon: f64, steps: u64, rng_seed: u64) -> Self {
        Self {
            k,
            epsilon,
            steps,
            rng_seed,
            max_tree_attempts: DEFAULT_MAX_TREE_ATTEMPTS,
            pair_retries: DEFAULT_PAIR_RETRIES,
            seed_attempts: DEFAULT_SEED_ATTEMPTS,
            burn_in: 0,
            thin: 1,
            pair_selection: PairSelection::Uniform,
        }
    }

    pub fn validate(&self) -> Result<(), ChainError> {
        let bad = |m: &str| Err(ChainError::InvalidParams(m.to_string()));
        if self.k == 0 {
            return bad("k must be at least 1");
        }
        if self.steps == 0 {
            return bad("steps must be at least 1");
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return bad("epsilon must be a finite value >= 0");
        }
        if self.max_tree_attempts == 0 || self.pair_retries == 0 || self.seed_attempts == 0 {
            return bad("attempt limits must be at least 1");
        }
        if self.thin == 0 {
            return bad("thin must be at least 1");
        }
        Ok(())
    }

    /// Same parameters with `k` and the per-run seed for that `k`.
    pub fn for_k(&self, k: u32, stream_tag: u32) -> Self {
        Self {
            k,
            rng_seed: derive_seed(self.rng_seed, stream_tag, k),
            ..*self
        }
    }
}

/// The plan as delivered to observers.
pub struct PlanView<'a> {
    /// 1-based index of this recorded plan.
    pub index: u64,
    pub plan: &'a Assignment,
    /// Member lists, indexed by district.
    pub members: &'a [Vec<usize>],
    /// Districts whose membership changed since the previous delivery.
    pub dirty: &'a [u32],
}

pub trait Observer {
    /// Called once with the plan the recorded stream starts from.
    fn start(&mut self, _plan: &Assignment, _members: &[Vec<usize>]) {}
    fn observe(&mut self, view: &PlanView<'_>);
}

/// Outcome of one accepted step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepInfo {
    pub merged: (u32, u32),
    /// Pairs tried and abandoned before this one succeeded.
    pub failed_pairs: u32,
}

/// Chain state with incremental district adjacency bookkeeping.
pub struct Chain<'g, R> {
    topology: &'g Topology,
    plan: Assignment,
    members: Vec<Vec<usize>>,
    window: BalanceWindow,
    params: ChainParams,
    rng: R,
    sampler: TreeSampler,
    /// Cut edges per district pair, row-major `k × k` with `a < b`.
    pair_cuts: Vec<u32>,
    pairs: IndexSet<(u32, u32)>,
    cut_edges: IndexSet<usize>,
    steps_taken: u64,
}

impl<'g, R: Rng> Chain<'g, R> {
    /// Starts a chain from an existing valid plan.
    pub fn from_plan(topology: &'g Topology, plan: Assignment, params: ChainParams, rng: R) -> Result<Self, ChainError> {
        params.validate()?;
        if plan.k() != params.k {
            return Err(ChainError::InvalidParams(format!(
                "plan has {} districts, params say {}",
                plan.k(),
                params.k
            )));
        }
        let window = BalanceWindow::ideal(topology.total_population(), params.k, params.epsilon)?;
        let k = params.k as usize;
        let mut members = vec![Vec::new(); k];
        for (node, &d) in plan.district_of().iter().enumerate() {
            members[d as usize].push(node);
        }
        let mut chain = Self {
            topology,
            plan,
            members,
            window,
            params,
            rng,
            sampler: TreeSampler::new(topology),
            pair_cuts: vec![0; k * k],
            pairs: IndexSet::new(),
            cut_edges: IndexSet::new(),
            steps_taken: 0,
        };
        for e in 0..topology.edge_count() {
            chain.add_edge(e);
        }
        Ok(chain)
    }

    /// Seeds a plan with recursive balanced peeling, then starts the chain.
    pub fn seeded(topology: &'g Topology, params: ChainParams, mut rng: R) -> Result<Self, ChainError> {
        params.validate()?;
        if params.k as usize > topology.node_count() {
            return Err(ChainError::InvalidParams(format!(
                "k = {} exceeds the {} available units",
                params.k,
                topology.node_count()
            )));
        }
        let window = BalanceWindow::ideal(topology.total_population(), params.k, params.epsilon)?;
        let plan =
            recursive_seed(topology, params.k, &window, &mut rng, params.seed_attempts).map_err(ChainError::Seed)?;
        Self::from_plan(topology, plan, params, rng)
    }

    pub fn plan(&self) -> &Assignment {
        &self.plan
    }

    pub fn members(&self) -> &[Vec<usize>] {
        &self.members
    }

    pub fn window(&self) -> &BalanceWindow {
        &self.window
    }

    pub fn steps_taken(&self) -> u64 {
        self.steps_taken
    }

    pub fn into_plan(self) -> Assignment {
        self.plan
    }

    /// Adjacent district pairs `(a, b)` with `a < b`, in internal order.
    pub fn adjacent_pairs(&self) -> &IndexSet<(u32, u32)> {
        &self.pairs
    }

    #[inline]
    fn pair_slot(&self, a: u32, b: u32) -> usize {
        a as usize * self.params.k as usize + b as usize
    }

    fn add_edge(&mut self, e: usize) {
        let (u, v) = self.topology.edges()[e];
        let (a, b) = (self.plan.district(u), self.plan.district(v));
        if a == b {
            return;
        }
        let (a, b) = (a.min(b), a.max(b));
        let slot = self.pair_slot(a, b);
        self.pair_cuts[slot] += 1;
        if self.pair_cuts[slot] == 1 {
            self.pairs.insert((a, b));
        }
        self.cut_edges.insert(e);
    }

    fn remove_edge(&mut self, e: usize) {
        let (u, v) = self.topology.edges()[e];
        let (a, b) = (self.plan.district(u), self.plan.district(v));
        if a == b {
            return;
        }
        let (a, b) = (a.min(b), a.max(b));
        let slot = self.pair_slot(a, b);
        self.pair_cuts[slot] -= 1;
        if self.pair_cuts[slot] == 0 {
            self.pairs.swap_remove(&(a, b));
        }
        self.cut_edges.swap_remove(&e);
    }

    fn select_pair(&mut self) -> (u32, u32) {
        match self.params.pair_selection {
            PairSelection::Uniform => {
                let i = self.rng.gen_range(0..self.pairs.len());
                self.pairs[i]
            }
            PairSelection::CutEdgeWeighted => {
                let i = self.rng.gen_range(0..self.cut_edges.len());
                let (u, v) = self.topology.edges()[self.cut_edges[i]];
                let (a, b) = (self.plan.district(u), self.plan.district(v));
                (a.min(b), a.max(b))
            }
        }
    }

    /// One merge-and-redivide step. With a single district the plan is
    /// returned unchanged.
    pub fn step(&mut self) -> Result<StepInfo, ChainError> {
        self.steps_taken += 1;
        if self.params.k == 1 {
            return Ok(StepInfo {
                merged: (0, 0),
                failed_pairs: 0,
            });
        }
        for attempt in 0..self.params.pair_retries {
            let (a, b) = self.select_pair();
            let mut union = Vec::with_capacity(self.members[a as usize].len() + self.members[b as usize].len());
            union.extend_from_slice(&self.members[a as usize]);
            union.extend_from_slice(&self.members[b as usize]);
            match self.sampler.bipartition(
                self.topology,
                &union,
                &self.window,
                &mut self.rng,
                self.params.max_tree_attempts,
            ) {
                Ok((side_a, side_b)) => {
                    self.apply(a, b, &union, side_a, side_b);
                    return Ok(StepInfo {
                        merged: (a, b),
                        failed_pairs: attempt,
                    });
                }
                Err(TreeError::BalanceUnreachable { .. }) => continue,
                Err(e) => return Err(e.into()),
            }
        }
        Err(ChainError::ChainStalled {
            step: self.steps_taken,
            retries: self.params.pair_retries,
        })
    }

    fn apply(&mut self, a: u32, b: u32, union: &[usize], side_a: Vec<usize>, side_b: Vec<usize>) {
        let topo = self.topology;
        let mut touched = Vec::new();
        for &u in union {
            for (&v, &e) in topo.neighbors(u).iter().zip(topo.incident_edges(u)) {
                let dv = self.plan.district(v);
                if (dv != a && dv != b) || u < v {
                    touched.push(e);
                }
            }
        }
        for &e in &touched {
            self.remove_edge(e);
        }
        self.plan.reassign(topo, &side_a, a);
        self.plan.reassign(topo, &side_b, b);
        for &e in &touched {
            self.add_edge(e);
        }
        self.members[a as usize] = side_a;
        self.members[b as usize] = side_b;
    }
}

/// One step from `plan`, as a pure function.
pub fn recom_step<R: Rng>(
    topology: &Topology,
    plan: &Assignment,
    params: &ChainParams,
    rng: &mut R,
) -> Result<Assignment, ChainError> {
    let mut chain = Chain::from_plan(topology, plan.clone(), *params, rng)?;
    chain.step()?;
    Ok(chain.into_plan())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ChainSummary {
    pub steps_taken: u64,
    pub failed_pairs: u64,
}

/// Seeds, burns in, then delivers `params.steps` recorded plans to every
/// observer. The seed plan itself is not delivered.
pub fn run_chain(
    topology: &Topology,
    params: &ChainParams,
    observers: &mut [&mut dyn Observer],
) -> Result<(Assignment, ChainSummary), ChainError> {
    let mut chain = Chain::seeded(topology, *params, chain_rng(params.rng_seed))?;
    let seed_plan = chain.plan().clone();
    let mut summary = ChainSummary::default();
    for _ in 0..params.burn_in {
        summary.failed_pairs += chain.step()?.failed_pairs as u64;
    }
    for o in observers.iter_mut() {
        o.start(chain.plan(), chain.members());
    }
    let mut dirty = Vec::new();
    for index in 1..=params.steps {
        dirty.clear();
        for _ in 0..params.thin {
            let info = chain.step()?;
            summary.failed_pairs += info.failed_pairs as u64;
            if info.merged.0 != info.merged.1 {
                dirty.push(info.merged.0);
                dirty.push(info.merged.1);
            }
        }
        dirty.sort_unstable();
        dirty.dedup();
        let view = PlanView {
            index,
            plan: chain.plan(),
            members: chain.members(),
            dirty: &dirty,
        };
        for o in observers.iter_mut() {
            o.observe(&view);
        }
    }
    summary.steps_taken = chain.steps_taken();
    Ok((seed_plan, summary))
}

/// Records Democratic seats per recorded plan for a set of contests.
pub struct SeatObserver<'g> {
    graph: &'g DualGraph,
    contests: Vec<usize>,
    policy: TiePolicy,
    counter: Option<SeatCounter>,
    /// One series per contest.
    pub seats: Vec<Vec<Seats>>,
}

impl<'g> SeatObserver<'g> {
    pub fn new(graph: &'g DualGraph, contests: Vec<usize>, policy: TiePolicy) -> Self {
        let n = contests.len();
        Self {
            graph,
            contests,
            policy,
            counter: None,
            seats: vec![Vec::new(); n],
        }
    }
}

impl Observer for SeatObserver<'_> {
    fn start(&mut self, plan: &Assignment, _members: &[Vec<usize>]) {
        self.counter = Some(SeatCounter::new(self.graph, &self.contests, plan));
    }

    fn observe(&mut self, view: &PlanView<'_>) {
        let counter = self
            .counter
            .get_or_insert_with(|| SeatCounter::new(self.graph, &self.contests, view.plan));
        for &d in view.dirty {
            counter.refresh(d, &view.members[d as usize]);
        }
        for (i, series) in self.seats.iter_mut().enumerate() {
            series.push(counter.outcome(i).dem_seats(self.policy));
        }
    }
}

/// One ensemble: parameters, the seed plan, and per-contest seat series.
#[derive(Debug, Clone)]
pub struct EnsembleRun {
    pub params: ChainParams,
    pub seed_plan: Assignment,
    pub contests: Vec<String>,
    pub tie_policy: TiePolicy,
    /// `seats[c][i]` is the Democratic seat count of recorded plan `i`
    /// under contest `c`.
    pub seats: Vec<Vec<Seats>>,
    pub summary: ChainSummary,
}

impl EnsembleRun {
    pub fn observations(&self) -> u64 {
        self.seats.first().map_or(self.params.steps, |s| s.len() as u64)
    }
}

/// Runs one chain and records seats for `contests` (graph contest indices).
pub fn run_ensemble(
    graph: &DualGraph,
    params: &ChainParams,
    contests: &[usize],
    tie_policy: TiePolicy,
) -> Result<EnsembleRun, ChainError> {
    let mut seats = SeatObserver::new(graph, contests.to_vec(), tie_policy);
    let (seed_plan, summary) = run_chain(graph.topology(), params, &mut [&mut seats])?;
    Ok(EnsembleRun {
        params: *params,
        seed_plan,
        contests: contests.iter().map(|&c| graph.contest_names()[c].clone()).collect(),
        tie_policy,
        seats: seats.seats,
        summary,
    })
}

/// One independent ensemble per `k`, run in parallel. Each run's seed is
/// derived from the base seed and `k`, so results do not depend on the
/// order of `k_list` or on scheduling.
pub fn run_multiscale(
    graph: &DualGraph,
    k_list: &[u32],
    base: &ChainParams,
    contests: &[usize],
    tie_policy: TiePolicy,
) -> Vec<(u32, Result<EnsembleRun, ChainError>)> {
    k_list
        .par_iter()
        .map(|&k| (k, run_ensemble(graph, &base.for_k(k, 0), contests, tie_policy)))
        .collect()
}
