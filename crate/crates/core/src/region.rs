//! Two-region splits along county lines, per-region ensembles and their
//! pairing by convolution.

use std::collections::BTreeSet;

use num_rational::BigRational;
use num_traits::Zero;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{run_ensemble, ChainError, ChainParams, EnsembleRun};
use crate::graph::{DualGraph, GraphError};
use crate::stats::{pair_convolution, SeatHistogram, StatsError};
use crate::tally::{ratio_to_f64, TallyError, TiePolicy};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegionError {
    #[error("region {0} is empty or not contiguous")]
    RegionDisconnected(String),
    #[error("county {0} is assigned to both regions")]
    CountyOverlap(String),
    #[error("county {0} is not assigned to any region")]
    UncoveredCounty(String),
    #[error("region {region} lists county {county}, which does not occur in the graph")]
    UnknownCounty { region: String, county: String },
    #[error("ratio target must have two positive parts")]
    InvalidRatio,
    #[error("region {region}: {source}")]
    Chain { region: String, source: ChainError },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionSpec {
    pub name: String,
    pub counties: BTreeSet<String>,
    #[serde(rename = "k")]
    pub k_region: u32,
}

impl RegionSpec {
    pub fn nodes(&self, graph: &DualGraph) -> Vec<usize> {
        graph
            .nodes()
            .iter()
            .enumerate()
            .filter(|(_, n)| self.counties.contains(&n.county))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn population(&self, graph: &DualGraph) -> u64 {
        self.nodes(graph).iter().map(|&i| graph.node(i).population).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitReport {
    pub pop_a: u64,
    pub pop_b: u64,
    /// Intended population ratio `a : b`.
    pub ratio_target: (u32, u32),
    /// `|pop_a − total · a / (a + b)|`, in persons.
    pub deviation_from_ratio: f64,
}

/// Checks that two county lists partition the graph into two contiguous
/// regions and reports how far region `a` is from its target share.
pub fn validate_split(
    graph: &DualGraph,
    a: &RegionSpec,
    b: &RegionSpec,
    ratio_target: (u32, u32),
) -> Result<SplitReport, RegionError> {
    if ratio_target.0 == 0 || ratio_target.1 == 0 {
        return Err(RegionError::InvalidRatio);
    }
    if let Some(c) = a.counties.intersection(&b.counties).next() {
        return Err(RegionError::CountyOverlap(c.clone()));
    }
    let present = graph.counties();
    for region in [a, b] {
        if let Some(c) = region.counties.iter().find(|c| !present.contains(c.as_str())) {
            return Err(RegionError::UnknownCounty {
                region: region.name.clone(),
                county: c.clone(),
            });
        }
    }
    if let Some(c) = present
        .iter()
        .find(|c| !a.counties.contains(**c) && !b.counties.contains(**c))
    {
        return Err(RegionError::UncoveredCounty(c.to_string()));
    }
    for region in [a, b] {
        if !graph.topology().is_connected_subset(&region.nodes(graph)) {
            return Err(RegionError::RegionDisconnected(region.name.clone()));
        }
    }
    let (pop_a, pop_b) = (a.population(graph), b.population(graph));
    let total = (pop_a + pop_b) as f64;
    let share = ratio_target.0 as f64 / (ratio_target.0 + ratio_target.1) as f64;
    Ok(SplitReport {
        pop_a,
        pop_b,
        ratio_target,
        deviation_from_ratio: (pop_a as f64 - total * share).abs(),
    })
}

#[derive(Debug, Clone)]
pub struct RegionRun {
    pub spec: RegionSpec,
    pub run: EnsembleRun,
    /// One histogram per contest, in run contest order.
    pub histograms: Vec<SeatHistogram>,
}

#[derive(Debug, Clone)]
pub struct RegionEnsembles {
    pub regions: [RegionRun; 2],
    pub full: EnsembleRun,
    pub full_histograms: Vec<SeatHistogram>,
    /// Convolution of the two region histograms, per contest.
    pub pairs: Vec<SeatHistogram>,
}

pub fn histograms_of(run: &EnsembleRun) -> Result<Vec<SeatHistogram>, StatsError> {
    run.contests
        .iter()
        .zip(&run.seats)
        .map(|(name, series)| SeatHistogram::from_observations(series, run.params.k, name.clone()))
        .collect()
}

/// Runs independent chains on each region (with region-local ideal
/// population) and on the full graph, then pairs the regions.
///
/// Stream tags: the full run uses tag 0, region `i` uses tag `i + 1`.
pub fn run_region_ensembles(
    graph: &DualGraph,
    regions: [&RegionSpec; 2],
    k_full: u32,
    base: &ChainParams,
    contests: &[usize],
    tie_policy: TiePolicy,
) -> Result<RegionEnsembles, RegionError> {
    let sub_a = graph.induced_subgraph(&regions[0].nodes(graph))?;
    let sub_b = graph.induced_subgraph(&regions[1].nodes(graph))?;
    let params_a = base.for_k(regions[0].k_region, 1);
    let params_b = base.for_k(regions[1].k_region, 2);
    let params_full = base.for_k(k_full, 0);

    let ((run_a, run_b), full) = rayon::join(
        || {
            rayon::join(
                || run_ensemble(&sub_a, &params_a, contests, tie_policy),
                || run_ensemble(&sub_b, &params_b, contests, tie_policy),
            )
        },
        || run_ensemble(graph, &params_full, contests, tie_policy),
    );
    let tag = |name: &str| {
        let region = name.to_string();
        move |source| RegionError::Chain { region, source }
    };
    let run_a = run_a.map_err(tag(&regions[0].name))?;
    let run_b = run_b.map_err(tag(&regions[1].name))?;
    let full = full.map_err(tag("full"))?;

    let hist_a = histograms_of(&run_a)?;
    let hist_b = histograms_of(&run_b)?;
    let pairs = hist_a
        .iter()
        .zip(&hist_b)
        .map(|(a, b)| pair_convolution(a, b))
        .collect::<Result<Vec<_>, _>>()?;
    let full_histograms = histograms_of(&full)?;

    Ok(RegionEnsembles {
        regions: [
            RegionRun {
                spec: regions[0].clone(),
                run: run_a,
                histograms: hist_a,
            },
            RegionRun {
                spec: regions[1].clone(),
                run: run_b,
                histograms: hist_b,
            },
        ],
        full,
        full_histograms,
        pairs,
    })
}

/// Exact two-party totals for one region and contest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoteCell {
    pub region: String,
    pub dem: BigRational,
    pub rep: BigRational,
}

impl VoteCell {
    pub fn turnout(&self) -> BigRational {
        &self.dem + &self.rep
    }

    pub fn share_exact(&self, contest: &str) -> Result<BigRational, TallyError> {
        let t = self.turnout();
        if t.is_zero() {
            return Err(TallyError::ZeroTurnout(contest.to_string()));
        }
        Ok(&self.dem / t)
    }

    pub fn share(&self, contest: &str) -> Result<f64, TallyError> {
        self.share_exact(contest).map(|r| ratio_to_f64(&r))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoteTableRow {
    pub contest: String,
    /// Region `a`, region `b`, then the full graph.
    pub cells: [VoteCell; 3],
}

pub fn region_vote_table(graph: &DualGraph, regions: [&RegionSpec; 2], contests: &[usize]) -> Vec<VoteTableRow> {
    let nodes_a = regions[0].nodes(graph);
    let nodes_b = regions[1].nodes(graph);
    let all: Vec<usize> = (0..graph.node_count()).collect();
    contests
        .iter()
        .map(|&c| {
            let cell = |name: &str, nodes: &[usize]| {
                let (mut dem, mut rep) = (BigRational::zero(), BigRational::zero());
                for &i in nodes {
                    dem += &graph.node(i).votes[c].dem;
                    rep += &graph.node(i).votes[c].rep;
                }
                VoteCell {
                    region: name.to_string(),
                    dem,
                    rep,
                }
            };
            VoteTableRow {
                contest: graph.contest_names()[c].clone(),
                cells: [
                    cell(&regions[0].name, &nodes_a),
                    cell(&regions[1].name, &nodes_b),
                    cell("Full", &all),
                ],
            }
        })
        .collect()
}
