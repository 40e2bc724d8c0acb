//! Dual graph of geographic units and districting assignments.
//!
//! The graph is split in two layers. [`Topology`] holds adjacency and
//! population, which is everything the chain is allowed to read.
//! [`DualGraph`] adds the attribute columns (voting-age population, county,
//! votes) that only the tally and reporting layers consume.

use std::collections::{BTreeSet, HashSet, VecDeque};

use num_rational::BigRational;
use num_traits::Signed;
use thiserror::Error;

/// Exact vote count. Proration produces fractional values.
pub type Votes = BigRational;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("graph has no nodes")]
    Empty,
    #[error("graph is disconnected: node {node} is unreachable from node 0")]
    DisconnectedGraph { node: usize },
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("self-loop on node {0}")]
    SelfLoop(usize),
    #[error("edge ({0}, {1}) references a node outside 0..{2}")]
    InvalidEndpoint(usize, usize, usize),
    #[error("node {node} has negative {field}")]
    NegativeAttribute { node: usize, field: String },
    #[error("node {node} has {found} vote columns, expected {expected}")]
    ContestArity { node: usize, found: usize, expected: usize },
    #[error("total population is zero")]
    ZeroPopulation,
    #[error("district {0} does not exist")]
    UnknownDistrict(u32),
    #[error("assignment covers {found} nodes, graph has {expected}")]
    AssignmentLength { found: usize, expected: usize },
    #[error("node {node} assigned to district {district}, but k = {k}")]
    DistrictOutOfRange { node: usize, district: u32, k: u32 },
    #[error("district {0} is empty")]
    EmptyDistrict(u32),
    #[error("district {0} is not contiguous")]
    NoncontiguousDistrict(u32),
    #[error("k must be at least 1")]
    ZeroDistricts,
}

/// Two-party vote pair for one contest.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct VotePair {
    pub dem: Votes,
    pub rep: Votes,
}

impl VotePair {
    pub fn new(dem: Votes, rep: Votes) -> Self {
        Self { dem, rep }
    }

    pub fn from_integers(dem: i64, rep: i64) -> Self {
        Self {
            dem: BigRational::from_integer(dem.into()),
            rep: BigRational::from_integer(rep.into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeRecord {
    pub population: u64,
    pub vap: u64,
    pub county: String,
    /// One pair per contest, in the graph's contest order.
    pub votes: Vec<VotePair>,
}

impl NodeRecord {
    pub fn with_population(population: u64) -> Self {
        Self {
            population,
            vap: population,
            county: String::new(),
            votes: Vec::new(),
        }
    }
}

/// Adjacency and population in compressed sparse row form.
#[derive(Debug, Clone)]
pub struct Topology {
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    /// Edge index for each entry of `neighbors`.
    incident: Vec<usize>,
    edges: Vec<(usize, usize)>,
    pops: Vec<u64>,
    total_pop: u64,
}

impl Topology {
    pub fn node_count(&self) -> usize {
        self.pops.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Undirected edges with `u < v`, in input order.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    #[inline]
    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.neighbors[self.offsets[node]..self.offsets[node + 1]]
    }

    /// Edge indices parallel to [`Topology::neighbors`].
    #[inline]
    pub fn incident_edges(&self, node: usize) -> &[usize] {
        &self.incident[self.offsets[node]..self.offsets[node + 1]]
    }

    #[inline]
    pub fn population(&self, node: usize) -> u64 {
        self.pops[node]
    }

    pub fn populations(&self) -> &[u64] {
        &self.pops
    }

    pub fn total_population(&self) -> u64 {
        self.total_pop
    }

    /// True iff the subgraph induced by `members` is connected (BFS).
    /// The empty set counts as disconnected.
    pub fn is_connected_subset(&self, members: &[usize]) -> bool {
        let Some(&start) = members.first() else {
            return false;
        };
        let mut inside = vec![false; self.node_count()];
        for &m in members {
            inside[m] = true;
        }
        let mut seen = vec![false; self.node_count()];
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        let mut reached = 1usize;
        while let Some(u) = queue.pop_front() {
            for &v in self.neighbors(u) {
                if inside[v] && !seen[v] {
                    seen[v] = true;
                    reached += 1;
                    queue.push_back(v);
                }
            }
        }
        let distinct = members.iter().collect::<HashSet<_>>().len();
        reached == distinct
    }
}

/// Immutable unit graph with attributes.
#[derive(Debug, Clone)]
pub struct DualGraph {
    topology: Topology,
    nodes: Vec<NodeRecord>,
    contest_names: Vec<String>,
}

impl DualGraph {
    /// Builds and validates a graph. Edge orientation is ignored.
    pub fn new(
        nodes: Vec<NodeRecord>,
        edges: &[(usize, usize)],
        contest_names: Vec<String>,
    ) -> Result<Self, GraphError> {
        let n = nodes.len();
        if n == 0 {
            return Err(GraphError::Empty);
        }
        for (i, node) in nodes.iter().enumerate() {
            if node.votes.len() != contest_names.len() {
                return Err(GraphError::ContestArity {
                    node: i,
                    found: node.votes.len(),
                    expected: contest_names.len(),
                });
            }
            for (c, pair) in node.votes.iter().enumerate() {
                if pair.dem.is_negative() {
                    return Err(GraphError::NegativeAttribute {
                        node: i,
                        field: format!("{} dem votes", contest_names[c]),
                    });
                }
                if pair.rep.is_negative() {
                    return Err(GraphError::NegativeAttribute {
                        node: i,
                        field: format!("{} rep votes", contest_names[c]),
                    });
                }
            }
        }

        let mut seen = HashSet::with_capacity(edges.len());
        let mut normalized = Vec::with_capacity(edges.len());
        let mut degree = vec![0usize; n];
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(GraphError::InvalidEndpoint(a, b, n));
            }
            if a == b {
                return Err(GraphError::SelfLoop(a));
            }
            let e = (a.min(b), a.max(b));
            if !seen.insert(e) {
                return Err(GraphError::DuplicateEdge(e.0, e.1));
            }
            degree[a] += 1;
            degree[b] += 1;
            normalized.push(e);
        }

        let mut offsets = vec![0usize; n + 1];
        for i in 0..n {
            offsets[i + 1] = offsets[i] + degree[i];
        }
        let mut fill = offsets.clone();
        let mut neighbors = vec![0usize; offsets[n]];
        let mut incident = vec![0usize; offsets[n]];
        for (e, &(a, b)) in normalized.iter().enumerate() {
            neighbors[fill[a]] = b;
            incident[fill[a]] = e;
            fill[a] += 1;
            neighbors[fill[b]] = a;
            incident[fill[b]] = e;
            fill[b] += 1;
        }

        let pops: Vec<u64> = nodes.iter().map(|r| r.population).collect();
        let total_pop = pops.iter().sum();
        let topology = Topology {
            offsets,
            neighbors,
            incident,
            edges: normalized,
            pops,
            total_pop,
        };

        let all: Vec<usize> = (0..n).collect();
        if !topology.is_connected_subset(&all) {
            let node = first_unreachable(&topology);
            return Err(GraphError::DisconnectedGraph { node });
        }
        if total_pop == 0 {
            return Err(GraphError::ZeroPopulation);
        }

        Ok(Self {
            topology,
            nodes,
            contest_names,
        })
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.topology.edge_count()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        self.topology.edges()
    }

    pub fn nodes(&self) -> &[NodeRecord] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &NodeRecord {
        &self.nodes[id]
    }

    pub fn total_population(&self) -> u64 {
        self.topology.total_population()
    }

    pub fn contest_names(&self) -> &[String] {
        &self.contest_names
    }

    pub fn contest_index(&self, name: &str) -> Option<usize> {
        self.contest_names.iter().position(|c| c == name)
    }

    pub fn counties(&self) -> BTreeSet<&str> {
        self.nodes.iter().map(|n| n.county.as_str()).collect()
    }

    /// Graph induced by `members`, re-indexed densely in the given order.
    /// Fails if the induced subgraph is disconnected.
    pub fn induced_subgraph(&self, members: &[usize]) -> Result<DualGraph, GraphError> {
        let mut local = vec![usize::MAX; self.node_count()];
        for (i, &m) in members.iter().enumerate() {
            local[m] = i;
        }
        let nodes = members.iter().map(|&m| self.nodes[m].clone()).collect();
        let edges: Vec<(usize, usize)> = self
            .edges()
            .iter()
            .filter(|(a, b)| local[*a] != usize::MAX && local[*b] != usize::MAX)
            .map(|&(a, b)| (local[a], local[b]))
            .collect();
        DualGraph::new(nodes, &edges, self.contest_names.clone())
    }

    /// Copy of the graph with every vote column replaced.
    pub fn with_votes(&self, votes: Vec<Vec<VotePair>>, contest_names: Vec<String>) -> Result<DualGraph, GraphError> {
        let nodes = self
            .nodes
            .iter()
            .zip(votes)
            .map(|(n, v)| NodeRecord {
                votes: v,
                ..n.clone()
            })
            .collect();
        DualGraph::new(nodes, self.edges(), contest_names)
    }
}

fn first_unreachable(topology: &Topology) -> usize {
    let mut seen = vec![false; topology.node_count()];
    seen[0] = true;
    let mut queue = VecDeque::from([0]);
    while let Some(u) = queue.pop_front() {
        for &v in topology.neighbors(u) {
            if !seen[v] {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    seen.iter().position(|s| !s).unwrap_or(0)
}

/// A districting plan: node id to district id, with cached populations.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Assignment {
    district_of: Vec<u32>,
    k: u32,
    district_pops: Vec<u64>,
}

impl Assignment {
    /// Validates coverage, non-emptiness and contiguity of every district.
    pub fn new(topology: &Topology, district_of: Vec<u32>, k: u32) -> Result<Self, GraphError> {
        let plan = Self::new_unchecked_contiguity(topology, district_of, k)?;
        for d in 0..k {
            if !plan.is_contiguous(topology, d) {
                return Err(GraphError::NoncontiguousDistrict(d));
            }
        }
        Ok(plan)
    }

    /// Validates coverage and non-emptiness but skips the BFS checks.
    pub(crate) fn new_unchecked_contiguity(
        topology: &Topology,
        district_of: Vec<u32>,
        k: u32,
    ) -> Result<Self, GraphError> {
        if k == 0 {
            return Err(GraphError::ZeroDistricts);
        }
        if district_of.len() != topology.node_count() {
            return Err(GraphError::AssignmentLength {
                found: district_of.len(),
                expected: topology.node_count(),
            });
        }
        let mut district_pops = vec![0u64; k as usize];
        let mut sizes = vec![0usize; k as usize];
        for (node, &d) in district_of.iter().enumerate() {
            if d >= k {
                return Err(GraphError::DistrictOutOfRange { node, district: d, k });
            }
            district_pops[d as usize] += topology.population(node);
            sizes[d as usize] += 1;
        }
        if let Some(d) = sizes.iter().position(|&s| s == 0) {
            return Err(GraphError::EmptyDistrict(d as u32));
        }
        Ok(Self {
            district_of,
            k,
            district_pops,
        })
    }

    /// Every node in district 0.
    pub fn single_district(topology: &Topology) -> Self {
        Self {
            district_of: vec![0; topology.node_count()],
            k: 1,
            district_pops: vec![topology.total_population()],
        }
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn district_of(&self) -> &[u32] {
        &self.district_of
    }

    #[inline]
    pub fn district(&self, node: usize) -> u32 {
        self.district_of[node]
    }

    pub fn district_pops(&self) -> &[u64] {
        &self.district_pops
    }

    pub fn members(&self, district: u32) -> Vec<usize> {
        self.district_of
            .iter()
            .enumerate()
            .filter(|(_, &d)| d == district)
            .map(|(i, _)| i)
            .collect()
    }

    /// Moves `nodes` into `district`, keeping the population cache in step.
    pub(crate) fn reassign(&mut self, topology: &Topology, nodes: &[usize], district: u32) {
        for &node in nodes {
            let old = self.district_of[node];
            let pop = topology.population(node);
            self.district_pops[old as usize] -= pop;
            self.district_pops[district as usize] += pop;
            self.district_of[node] = district;
        }
    }

    pub fn is_contiguous(&self, topology: &Topology, district: u32) -> bool {
        topology.is_connected_subset(&self.members(district))
    }

    /// Recomputes district populations from scratch.
    pub fn recompute_pops(&self, topology: &Topology) -> Vec<u64> {
        let mut pops = vec![0u64; self.k as usize];
        for (node, &d) in self.district_of.iter().enumerate() {
            pops[d as usize] += topology.population(node);
        }
        pops
    }
}

/// Whether the district's induced subgraph is connected.
pub fn contiguous(graph: &DualGraph, plan: &Assignment, district: u32) -> Result<bool, GraphError> {
    if district >= plan.k() {
        return Err(GraphError::UnknownDistrict(district));
    }
    Ok(plan.is_contiguous(graph.topology(), district))
}

pub fn district_population(plan: &Assignment, district: u32) -> Result<u64, GraphError> {
    plan.district_pops()
        .get(district as usize)
        .copied()
        .ok_or(GraphError::UnknownDistrict(district))
}

/// Pairs `(a, b)` with `a < b` joined by at least one cut edge.
pub fn adjacent_district_pairs(topology: &Topology, plan: &Assignment) -> BTreeSet<(u32, u32)> {
    topology
        .edges()
        .iter()
        .filter_map(|&(u, v)| {
            let (a, b) = (plan.district(u), plan.district(v));
            (a != b).then(|| (a.min(b), a.max(b)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::grid_graph;

    fn unit_nodes(n: usize) -> Vec<NodeRecord> {
        (0..n).map(|_| NodeRecord::with_population(1)).collect()
    }

    #[test]
    fn minimal_graph() {
        let g = DualGraph::new(unit_nodes(2), &[(0, 1)], vec![]).unwrap();
        assert_eq!(g.total_population(), 2);
        assert_eq!(g.edge_count(), 1);
    }

    #[test]
    fn isolated_node_rejected() {
        let err = DualGraph::new(unit_nodes(3), &[(0, 1)], vec![]).unwrap_err();
        assert_eq!(err, GraphError::DisconnectedGraph { node: 2 });
    }

    #[test]
    fn duplicate_and_self_loop_rejected() {
        assert_eq!(
            DualGraph::new(unit_nodes(2), &[(0, 1), (1, 0)], vec![]).unwrap_err(),
            GraphError::DuplicateEdge(0, 1)
        );
        assert_eq!(
            DualGraph::new(unit_nodes(2), &[(0, 1), (1, 1)], vec![]).unwrap_err(),
            GraphError::SelfLoop(1)
        );
    }

    #[test]
    fn negative_votes_rejected() {
        let mut nodes = unit_nodes(2);
        for n in &mut nodes {
            n.votes = vec![VotePair::from_integers(1, 1)];
        }
        nodes[1].votes[0].rep = BigRational::from_integer((-1).into());
        let err = DualGraph::new(nodes, &[(0, 1)], vec!["X".into()]).unwrap_err();
        assert!(matches!(err, GraphError::NegativeAttribute { node: 1, .. }));
    }

    #[test]
    fn zero_population_rejected() {
        let nodes = (0..2).map(|_| NodeRecord::with_population(0)).collect();
        assert_eq!(DualGraph::new(nodes, &[(0, 1)], vec![]).unwrap_err(), GraphError::ZeroPopulation);
    }

    #[test]
    fn grid_edge_count() {
        // 4 rows of 3 horizontal edges plus 4 columns of 3 vertical edges.
        let g = grid_graph(4, 4);
        assert_eq!(g.node_count(), 16);
        assert_eq!(g.edge_count(), 2 * 4 * 3);
    }

    fn bfs_connected(g: &DualGraph, members: &[usize]) -> bool {
        // Independent oracle: repeated edge relaxation until fixpoint.
        let set: HashSet<usize> = members.iter().copied().collect();
        let mut reached: HashSet<usize> = HashSet::from([members[0]]);
        loop {
            let before = reached.len();
            for &(a, b) in g.edges() {
                if set.contains(&a) && set.contains(&b) {
                    if reached.contains(&a) {
                        reached.insert(b);
                    }
                    if reached.contains(&b) {
                        reached.insert(a);
                    }
                }
            }
            if reached.len() == before {
                return reached.len() == set.len();
            }
        }
    }

    #[test]
    fn contiguity_cases() {
        let path = DualGraph::new(unit_nodes(3), &[(0, 1), (1, 2)], vec![]).unwrap();
        let plan = Assignment::new_unchecked_contiguity(path.topology(), vec![0, 1, 0], 2).unwrap();
        assert!(!contiguous(&path, &plan, 0).unwrap());
        assert!(contiguous(&path, &plan, 1).unwrap());
        assert_eq!(contiguous(&path, &plan, 2).unwrap_err(), GraphError::UnknownDistrict(2));
        assert_eq!(
            Assignment::new(path.topology(), vec![0, 1, 0], 2).unwrap_err(),
            GraphError::NoncontiguousDistrict(0)
        );

        let grid = grid_graph(4, 4);
        let left: Vec<u32> = (0..16).map(|i| if i % 4 < 2 { 0 } else { 1 }).collect();
        let plan = Assignment::new(grid.topology(), left, 2).unwrap();
        assert!(contiguous(&grid, &plan, 0).unwrap());
        assert!(bfs_connected(&grid, &plan.members(0)));
        assert_eq!(district_population(&plan, 0).unwrap(), 8);
        assert_eq!(district_population(&plan, 1).unwrap(), 8);
    }

    #[test]
    fn empty_district_rejected() {
        let g = DualGraph::new(unit_nodes(2), &[(0, 1)], vec![]).unwrap();
        assert_eq!(
            Assignment::new(g.topology(), vec![0, 0], 2).unwrap_err(),
            GraphError::EmptyDistrict(1)
        );
    }

    #[test]
    fn single_node_pop() {
        let mut nodes = unit_nodes(2);
        nodes[0].population = 7;
        let g = DualGraph::new(nodes, &[(0, 1)], vec![]).unwrap();
        let plan = Assignment::new(g.topology(), vec![0, 1], 2).unwrap();
        assert_eq!(district_population(&plan, 0).unwrap(), 7);
        assert!(contiguous(&g, &plan, 0).unwrap());
    }

    #[test]
    fn district_pairs() {
        let path = DualGraph::new(unit_nodes(3), &[(0, 1), (1, 2)], vec![]).unwrap();
        let one = Assignment::single_district(path.topology());
        assert!(adjacent_district_pairs(path.topology(), &one).is_empty());
        let three = Assignment::new(path.topology(), vec![0, 1, 2], 3).unwrap();
        assert_eq!(
            adjacent_district_pairs(path.topology(), &three),
            BTreeSet::from([(0, 1), (1, 2)])
        );

        // Quadrants 0 1 / 2 3.
        let grid = grid_graph(4, 4);
        let quad: Vec<u32> = (0..16)
            .map(|i| {
                let (r, c) = (i / 4, i % 4);
                (r / 2 * 2 + c / 2) as u32
            })
            .collect();
        let plan = Assignment::new(grid.topology(), quad, 4).unwrap();
        let mut oracle = BTreeSet::new();
        for &(a, b) in grid.edges() {
            let (da, db) = (plan.district(a), plan.district(b));
            if da != db {
                oracle.insert((da.min(db), da.max(db)));
            }
        }
        let pairs = adjacent_district_pairs(grid.topology(), &plan);
        assert_eq!(pairs, oracle);
        assert_eq!(pairs, BTreeSet::from([(0, 1), (0, 2), (1, 3), (2, 3)]));
    }

    #[test]
    fn induced_subgraph_reindexes() {
        let grid = grid_graph(2, 3);
        let sub = grid.induced_subgraph(&[0, 1, 3, 4]).unwrap();
        assert_eq!(sub.node_count(), 4);
        assert_eq!(sub.edge_count(), 4);
        assert!(matches!(
            grid.induced_subgraph(&[0, 2]),
            Err(GraphError::DisconnectedGraph { .. })
        ));
    }
}
