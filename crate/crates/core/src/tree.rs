//! Spanning-tree machinery for the merge-and-redivide step.
//!
//! Trees are minimum spanning trees under independent uniform edge weights.
//! A tree edge is a balanced cut when both components it separates fall in
//! the population window.

use rand::Rng;
use thiserror::Error;

use crate::graph::{Assignment, Topology};

pub const DEFAULT_MAX_TREE_ATTEMPTS: u32 = 1000;

const ROOT: usize = usize::MAX;
const ABSENT: usize = usize::MAX;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TreeError {
    #[error("member set is empty")]
    EmptySubset,
    #[error("member set does not induce a connected subgraph")]
    DisconnectedSubset,
    #[error("no balanced cut found after {attempts} spanning trees")]
    BalanceUnreachable { attempts: u32 },
    #[error("could not build a seed plan after {attempts} attempts")]
    SeedFailure { attempts: u32 },
    #[error("invalid balance window: target {target}, epsilon {epsilon}")]
    InvalidWindow { target: f64, epsilon: f64 },
    #[error("k must be at least 1")]
    ZeroDistricts,
}

/// Closed interval of acceptable populations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PopRange {
    pub min: f64,
    pub max: f64,
}

impl PopRange {
    #[inline]
    pub fn contains(&self, pop: u64) -> bool {
        let p = pop as f64;
        p >= self.min && p <= self.max
    }

    pub fn intersect(&self, other: &PopRange) -> PopRange {
        PopRange {
            min: self.min.max(other.min),
            max: self.max.min(other.max),
        }
    }

    pub fn scale(&self, factor: f64) -> PopRange {
        PopRange {
            min: self.min * factor,
            max: self.max * factor,
        }
    }
}

/// Population balance constraint: `target · (1 ± epsilon)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BalanceWindow {
    target: f64,
    epsilon: f64,
}

impl BalanceWindow {
    pub fn new(target: f64, epsilon: f64) -> Result<Self, TreeError> {
        if !(target.is_finite() && target > 0.0 && epsilon.is_finite() && epsilon >= 0.0) {
            return Err(TreeError::InvalidWindow { target, epsilon });
        }
        Ok(Self { target, epsilon })
    }

    /// Window around the ideal district population `total / k`.
    pub fn ideal(total_pop: u64, k: u32, epsilon: f64) -> Result<Self, TreeError> {
        if k == 0 {
            return Err(TreeError::ZeroDistricts);
        }
        Self::new(total_pop as f64 / k as f64, epsilon)
    }

    pub fn target(&self) -> f64 {
        self.target
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn range(&self) -> PopRange {
        PopRange {
            min: self.target * (1.0 - self.epsilon),
            max: self.target * (1.0 + self.epsilon),
        }
    }

    #[inline]
    pub fn contains(&self, pop: u64) -> bool {
        self.range().contains(pop)
    }
}

/// A spanning tree over a member subset, rooted at the first member.
#[derive(Debug, Clone)]
pub struct SpanningTree {
    members: Vec<usize>,
    /// Local parent index, `ROOT` for the root.
    parent: Vec<usize>,
    /// Local indices in BFS order from the root.
    order: Vec<usize>,
    subtree_pop: Vec<u64>,
}

/// A tree edge identified by its child endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TreeEdge {
    /// Global id of the endpoint farther from the root.
    pub child: usize,
    /// Global id of the endpoint nearer the root.
    pub parent: usize,
    local: usize,
}

impl TreeEdge {
    /// Endpoints as an ordered pair `(min, max)`.
    pub fn endpoints(&self) -> (usize, usize) {
        (self.child.min(self.parent), self.child.max(self.parent))
    }
}

impl SpanningTree {
    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn edge_count(&self) -> usize {
        self.members.len().saturating_sub(1)
    }

    pub fn total_pop(&self) -> u64 {
        self.subtree_pop.first().copied().unwrap_or(0)
    }

    pub fn edges(&self) -> Vec<TreeEdge> {
        self.order[1..]
            .iter()
            .map(|&local| self.edge(local))
            .collect()
    }

    fn edge(&self, local: usize) -> TreeEdge {
        TreeEdge {
            child: self.members[local],
            parent: self.members[self.parent[local]],
            local,
        }
    }

    /// Population of the component below `edge` (the child side).
    pub fn below_pop(&self, edge: &TreeEdge) -> u64 {
        self.subtree_pop[edge.local]
    }

    /// Subtree population for global node `node`, if it is a member.
    pub fn subtree_pop_of(&self, node: usize) -> Option<u64> {
        self.members
            .iter()
            .position(|&m| m == node)
            .map(|i| self.subtree_pop[i])
    }

    /// Splits members into (child side, root side) at `edge`.
    pub fn split(&self, edge: &TreeEdge) -> (Vec<usize>, Vec<usize>) {
        let mut below = vec![false; self.members.len()];
        below[edge.local] = true;
        // BFS order puts parents before children.
        for &v in &self.order[1..] {
            if below[self.parent[v]] {
                below[v] = true;
            }
        }
        let mut a = Vec::new();
        let mut b = Vec::new();
        for (i, &m) in self.members.iter().enumerate() {
            if below[i] {
                a.push(m);
            } else {
                b.push(m);
            }
        }
        (a, b)
    }

    /// Tree edges as global `(min, max)` pairs.
    pub fn edge_pairs(&self) -> Vec<(usize, usize)> {
        self.edges().iter().map(TreeEdge::endpoints).collect()
    }
}

/// Reusable buffers for tree sampling over a fixed topology.
#[derive(Debug, Clone)]
pub struct TreeSampler {
    local: Vec<usize>,
}

impl TreeSampler {
    pub fn new(topology: &Topology) -> Self {
        Self {
            local: vec![ABSENT; topology.node_count()],
        }
    }

    /// Minimum spanning tree under uniform random edge weights.
    pub fn random_spanning_tree<R: Rng + ?Sized>(
        &mut self,
        topology: &Topology,
        members: &[usize],
        rng: &mut R,
    ) -> Result<SpanningTree, TreeError> {
        if members.is_empty() {
            return Err(TreeError::EmptySubset);
        }
        for (i, &m) in members.iter().enumerate() {
            self.local[m] = i;
        }
        let result = self.build_tree(topology, members, rng);
        for &m in members {
            self.local[m] = ABSENT;
        }
        result
    }

    fn build_tree<R: Rng + ?Sized>(
        &self,
        topology: &Topology,
        members: &[usize],
        rng: &mut R,
    ) -> Result<SpanningTree, TreeError> {
        let n = members.len();
        let mut weighted: Vec<(u64, usize, usize)> = Vec::new();
        for (i, &u) in members.iter().enumerate() {
            for &v in topology.neighbors(u) {
                let j = self.local[v];
                if j != ABSENT && i < j {
                    weighted.push((rng.gen::<u64>(), i, j));
                }
            }
        }
        weighted.sort_unstable();

        let mut dsu = DisjointSets::new(n);
        let mut adj_count = vec![0usize; n];
        let mut tree_edges = Vec::with_capacity(n.saturating_sub(1));
        for &(_, a, b) in &weighted {
            if dsu.union(a, b) {
                tree_edges.push((a, b));
                adj_count[a] += 1;
                adj_count[b] += 1;
                if tree_edges.len() + 1 == n {
                    break;
                }
            }
        }
        if tree_edges.len() + 1 != n {
            return Err(TreeError::DisconnectedSubset);
        }

        let mut offsets = vec![0usize; n + 1];
        for i in 0..n {
            offsets[i + 1] = offsets[i] + adj_count[i];
        }
        let mut fill = offsets.clone();
        let mut adj = vec![0usize; offsets[n]];
        for &(a, b) in &tree_edges {
            adj[fill[a]] = b;
            fill[a] += 1;
            adj[fill[b]] = a;
            fill[b] += 1;
        }

        let mut parent = vec![ROOT; n];
        let mut visited = vec![false; n];
        visited[0] = true;
        let mut order = Vec::with_capacity(n);
        order.push(0);
        let mut head = 0;
        while head < order.len() {
            let u = order[head];
            head += 1;
            for &v in &adj[offsets[u]..offsets[u + 1]] {
                if !visited[v] {
                    visited[v] = true;
                    parent[v] = u;
                    order.push(v);
                }
            }
        }

        let mut subtree_pop: Vec<u64> = members.iter().map(|&m| topology.population(m)).collect();
        for &v in order[1..].iter().rev() {
            subtree_pop[parent[v]] += subtree_pop[v];
        }

        Ok(SpanningTree {
            members: members.to_vec(),
            parent,
            order,
            subtree_pop,
        })
    }

    /// Splits `members` into two connected sides, each inside `window`.
    pub fn bipartition<R: Rng + ?Sized>(
        &mut self,
        topology: &Topology,
        members: &[usize],
        window: &BalanceWindow,
        rng: &mut R,
        max_tree_attempts: u32,
    ) -> Result<(Vec<usize>, Vec<usize>), TreeError> {
        let range = window.range();
        self.split_with(topology, members, rng, max_tree_attempts, |below, above| {
            range.contains(below) && range.contains(above)
        })
        .map(|(a, b, _)| (a, b))
    }

    /// Cuts one side inside `district` off a region whose rest must land in
    /// `remainder`. Returns (district side, remainder side).
    pub fn peel<R: Rng + ?Sized>(
        &mut self,
        topology: &Topology,
        members: &[usize],
        district: PopRange,
        remainder: PopRange,
        rng: &mut R,
        max_tree_attempts: u32,
    ) -> Result<(Vec<usize>, Vec<usize>), TreeError> {
        if members.len() < 2 {
            return Err(TreeError::BalanceUnreachable { attempts: 0 });
        }
        for _ in 0..max_tree_attempts {
            let tree = self.random_spanning_tree(topology, members, rng)?;
            let total = tree.total_pop();
            let mut candidates = Vec::new();
            for edge in tree.edges() {
                let below = tree.below_pop(&edge);
                let above = total - below;
                if district.contains(below) && remainder.contains(above) {
                    candidates.push((edge, true));
                }
                if district.contains(above) && remainder.contains(below) {
                    candidates.push((edge, false));
                }
            }
            if candidates.is_empty() {
                continue;
            }
            let (edge, below_is_district) = candidates[rng.gen_range(0..candidates.len())];
            let (below, above) = tree.split(&edge);
            return Ok(if below_is_district { (below, above) } else { (above, below) });
        }
        Err(TreeError::BalanceUnreachable {
            attempts: max_tree_attempts,
        })
    }

    fn split_with<R: Rng + ?Sized>(
        &mut self,
        topology: &Topology,
        members: &[usize],
        rng: &mut R,
        max_tree_attempts: u32,
        accept: impl Fn(u64, u64) -> bool,
    ) -> Result<(Vec<usize>, Vec<usize>, TreeEdge), TreeError> {
        if members.len() < 2 {
            return Err(TreeError::BalanceUnreachable { attempts: 0 });
        }
        for _ in 0..max_tree_attempts {
            let tree = self.random_spanning_tree(topology, members, rng)?;
            let cuts = cuts_where(&tree, &accept);
            if cuts.is_empty() {
                continue;
            }
            let edge = cuts[rng.gen_range(0..cuts.len())];
            let (a, b) = tree.split(&edge);
            return Ok((a, b, edge));
        }
        Err(TreeError::BalanceUnreachable {
            attempts: max_tree_attempts,
        })
    }
}

fn cuts_where(tree: &SpanningTree, accept: impl Fn(u64, u64) -> bool) -> Vec<TreeEdge> {
    let total = tree.total_pop();
    tree.order[1..]
        .iter()
        .filter(|&&v| {
            let below = tree.subtree_pop[v];
            accept(below, total - below)
        })
        .map(|&v| tree.edge(v))
        .collect()
}

/// Random-weight minimum spanning tree of the subgraph induced by `members`.
pub fn random_spanning_tree<R: Rng + ?Sized>(
    topology: &Topology,
    members: &[usize],
    rng: &mut R,
) -> Result<SpanningTree, TreeError> {
    TreeSampler::new(topology).random_spanning_tree(topology, members, rng)
}

/// Every tree edge whose removal leaves both components inside `window`.
pub fn find_balanced_cuts(tree: &SpanningTree, window: &BalanceWindow) -> Vec<TreeEdge> {
    let range = window.range();
    cuts_where(tree, |below, above| range.contains(below) && range.contains(above))
}

pub fn bipartition<R: Rng + ?Sized>(
    topology: &Topology,
    members: &[usize],
    window: &BalanceWindow,
    rng: &mut R,
    max_tree_attempts: u32,
) -> Result<(Vec<usize>, Vec<usize>), TreeError> {
    TreeSampler::new(topology).bipartition(topology, members, window, rng, max_tree_attempts)
}

/// Builds a k-district plan by peeling balanced districts off the remaining
/// region one at a time.
///
/// Each peel must land in the global window shifted against the running
/// surplus (`debt`) of the districts peeled so far, so the cumulative
/// deviation from the ideal never leaves one window width and the final
/// remainder is itself balanced. The remainder after each peel must also be
/// able to hold the districts still to come.
pub fn recursive_seed<R: Rng + ?Sized>(
    topology: &Topology,
    k: u32,
    window: &BalanceWindow,
    rng: &mut R,
    max_attempts: u32,
) -> Result<Assignment, TreeError> {
    if k == 0 {
        return Err(TreeError::ZeroDistricts);
    }
    if k == 1 {
        return Ok(Assignment::single_district(topology));
    }
    let global = window.range();
    let target = window.target();
    let mut sampler = TreeSampler::new(topology);

    'attempt: for _ in 0..max_attempts.max(1) {
        let mut district_of = vec![0u32; topology.node_count()];
        let mut remaining: Vec<usize> = (0..topology.node_count()).collect();
        let mut debt = 0.0f64;

        for d in 0..k - 1 {
            let r = (k - d) as f64;
            let district = PopRange {
                min: global.min.max(global.min - debt),
                max: global.max.min(global.max - debt),
            };
            let rest = global.scale(r - 1.0);
            match sampler.peel(topology, &remaining, district, rest, rng, DEFAULT_MAX_TREE_ATTEMPTS) {
                Ok((peeled, rest)) => {
                    let pop: u64 = peeled.iter().map(|&n| topology.population(n)).sum();
                    for &node in &peeled {
                        district_of[node] = d;
                    }
                    debt += pop as f64 - target;
                    remaining = rest;
                }
                Err(TreeError::BalanceUnreachable { .. }) => continue 'attempt,
                Err(e) => return Err(e),
            }
        }
        for &node in &remaining {
            district_of[node] = k - 1;
        }
        let plan = Assignment::new_unchecked_contiguity(topology, district_of, k)
            .expect("peeling yields k nonempty districts");
        return Ok(plan);
    }
    Err(TreeError::SeedFailure {
        attempts: max_attempts.max(1),
    })
}

struct DisjointSets {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl DisjointSets {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return false;
        }
        if self.size[a] < self.size[b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a;
        self.size[a] += self.size[b];
        true
    }
}
