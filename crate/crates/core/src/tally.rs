//! Votes to seats: proration, vote shares, district wins, seat shares and
//! the equal-turnout efficiency gap.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{Assignment, DualGraph, VotePair, Votes};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TallyError {
    #[error("contest {0} has zero two-party turnout")]
    ZeroTurnout(String),
    #[error("block {0} has no parent precinct")]
    OrphanBlock(usize),
    #[error("block {block} references precinct {precinct}, but only {count} precincts exist")]
    UnknownPrecinct { block: usize, precinct: usize, count: usize },
    #[error("precinct {0} has no blocks; its votes cannot be distributed")]
    PrecinctWithoutBlocks(usize),
    #[error("precinct {precinct} has {found} vote columns, expected {expected}")]
    ContestArity { precinct: usize, found: usize, expected: usize },
    #[error("unknown contest {0}")]
    UnknownContest(String),
    #[error("block attribute arrays have mismatched lengths")]
    LengthMismatch,
}

/// Names one contest and the node attribute columns that carry it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContestSpec {
    pub name: String,
    #[serde(rename = "dem")]
    pub dem_column: String,
    #[serde(rename = "rep")]
    pub rep_column: String,
}

/// How a district with exactly equal two-party votes is counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, Hash)]
#[serde(rename_all = "snake_case")]
pub enum TiePolicy {
    #[default]
    CountRep,
    CountDem,
    CountHalf,
}

impl FromStr for TiePolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "count_rep" => Ok(Self::CountRep),
            "count_dem" => Ok(Self::CountDem),
            "count_half" => Ok(Self::CountHalf),
            other => Err(format!("unknown tie policy {other:?}")),
        }
    }
}

impl fmt::Display for TiePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::CountRep => "count_rep",
            Self::CountDem => "count_dem",
            Self::CountHalf => "count_half",
        })
    }
}

/// A seat count in half-seat units, so that split ties stay exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct Seats(u32);

impl Seats {
    pub const ZERO: Seats = Seats(0);

    pub fn whole(n: u32) -> Self {
        Self(2 * n)
    }

    pub fn from_halves(halves: u32) -> Self {
        Self(halves)
    }

    pub fn halves(self) -> u32 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 / 2.0
    }

    pub fn is_whole(self) -> bool {
        self.0 % 2 == 0
    }
}

impl std::ops::Add for Seats {
    type Output = Seats;

    fn add(self, rhs: Seats) -> Seats {
        Seats(self.0 + rhs.0)
    }
}

impl fmt::Display for Seats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_whole() {
            write!(f, "{}", self.0 / 2)
        } else {
            write!(f, "{}.5", self.0 / 2)
        }
    }
}

impl FromStr for Seats {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || format!("invalid seat count {s:?}");
        match s.split_once('.') {
            None => s.parse::<u32>().map(Seats::whole).map_err(|_| bad()),
            Some((whole, frac)) => {
                let w: u32 = whole.parse().map_err(|_| bad())?;
                match frac.trim_end_matches('0') {
                    "" => Ok(Seats::whole(w)),
                    "5" => Ok(Seats(2 * w + 1)),
                    _ => Err(bad()),
                }
            }
        }
    }
}

/// District wins for one contest under one plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeatOutcome {
    pub dem_wins: u32,
    pub rep_wins: u32,
    pub ties: u32,
}

impl SeatOutcome {
    pub fn k(&self) -> u32 {
        self.dem_wins + self.rep_wins + self.ties
    }

    pub fn dem_seats(&self, policy: TiePolicy) -> Seats {
        let tie_halves = match policy {
            TiePolicy::CountRep => 0,
            TiePolicy::CountDem => 2,
            TiePolicy::CountHalf => 1,
        };
        Seats(2 * self.dem_wins + tie_halves * self.ties)
    }

    pub fn rep_seats(&self, policy: TiePolicy) -> Seats {
        Seats(2 * self.k() - self.dem_seats(policy).0)
    }
}

/// Per-district two-party sums for one contest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ElectionTally {
    pub contest: String,
    pub per_district: Vec<VotePair>,
}

impl ElectionTally {
    pub fn new(graph: &DualGraph, plan: &Assignment, contest: usize) -> Self {
        let mut per_district = vec![VotePair::default(); plan.k() as usize];
        for (node, record) in graph.nodes().iter().enumerate() {
            let sums = &mut per_district[plan.district(node) as usize];
            sums.dem += &record.votes[contest].dem;
            sums.rep += &record.votes[contest].rep;
        }
        Self {
            contest: graph.contest_names()[contest].clone(),
            per_district,
        }
    }

    pub fn k(&self) -> u32 {
        self.per_district.len() as u32
    }

    pub fn outcome(&self) -> SeatOutcome {
        outcome_of(self.per_district.iter().map(|p| p.dem.cmp(&p.rep)))
    }
}

fn outcome_of(cmps: impl Iterator<Item = std::cmp::Ordering>) -> SeatOutcome {
    let mut out = SeatOutcome {
        dem_wins: 0,
        rep_wins: 0,
        ties: 0,
    };
    for c in cmps {
        match c {
            std::cmp::Ordering::Greater => out.dem_wins += 1,
            std::cmp::Ordering::Less => out.rep_wins += 1,
            std::cmp::Ordering::Equal => out.ties += 1,
        }
    }
    out
}

/// Distributes precinct votes to blocks in proportion to voting-age
/// population, falling back to total population and then to an equal split
/// when a precinct's weights are all zero.
///
/// `precinct_votes[p]` holds one pair per contest. The result holds one
/// vector of pairs per block.
pub fn prorate_to_blocks(
    precinct_votes: &[Vec<VotePair>],
    block_precinct: &[Option<usize>],
    block_vap: &[u64],
    block_pop: &[u64],
) -> Result<Vec<Vec<VotePair>>, TallyError> {
    if block_precinct.len() != block_vap.len() || block_vap.len() != block_pop.len() {
        return Err(TallyError::LengthMismatch);
    }
    let contests = precinct_votes.first().map_or(0, Vec::len);
    for (p, v) in precinct_votes.iter().enumerate() {
        if v.len() != contests {
            return Err(TallyError::ContestArity {
                precinct: p,
                found: v.len(),
                expected: contests,
            });
        }
    }

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); precinct_votes.len()];
    for (block, parent) in block_precinct.iter().enumerate() {
        let p = parent.ok_or(TallyError::OrphanBlock(block))?;
        members
            .get_mut(p)
            .ok_or(TallyError::UnknownPrecinct {
                block,
                precinct: p,
                count: precinct_votes.len(),
            })?
            .push(block);
    }

    let mut out = vec![Vec::new(); block_precinct.len()];
    for (p, blocks) in members.iter().enumerate() {
        if blocks.is_empty() {
            return Err(TallyError::PrecinctWithoutBlocks(p));
        }
        let vap_total: u64 = blocks.iter().map(|&b| block_vap[b]).sum();
        let pop_total: u64 = blocks.iter().map(|&b| block_pop[b]).sum();
        let weight = |b: usize| -> BigRational {
            if vap_total > 0 {
                BigRational::new(block_vap[b].into(), vap_total.into())
            } else if pop_total > 0 {
                BigRational::new(block_pop[b].into(), pop_total.into())
            } else {
                BigRational::new(BigInt::one(), blocks.len().into())
            }
        };
        for &b in blocks {
            let w = weight(b);
            out[b] = precinct_votes[p]
                .iter()
                .map(|pair| VotePair::new(&pair.dem * &w, &pair.rep * &w))
                .collect();
        }
    }
    Ok(out)
}

/// Exact two-party Democratic share over a set of nodes.
pub fn share_over<'a>(
    pairs: impl Iterator<Item = &'a VotePair>,
    contest_name: &str,
) -> Result<BigRational, TallyError> {
    let (mut dem, mut rep) = (Votes::zero(), Votes::zero());
    for p in pairs {
        dem += &p.dem;
        rep += &p.rep;
    }
    let total = &dem + &rep;
    if total.is_zero() {
        return Err(TallyError::ZeroTurnout(contest_name.to_string()));
    }
    Ok(dem / total)
}

pub fn statewide_share_exact(graph: &DualGraph, contest: usize) -> Result<BigRational, TallyError> {
    share_over(
        graph.nodes().iter().map(|n| &n.votes[contest]),
        &graph.contest_names()[contest],
    )
}

/// `Σdem / (Σdem + Σrep)` over the whole graph.
pub fn statewide_share(graph: &DualGraph, contest: usize) -> Result<f64, TallyError> {
    statewide_share_exact(graph, contest).map(|r| ratio_to_f64(&r))
}

pub fn ratio_to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

pub fn seats_won(graph: &DualGraph, plan: &Assignment, contest: usize) -> SeatOutcome {
    ElectionTally::new(graph, plan, contest).outcome()
}

pub fn seat_share(dem_seats: Seats, k: u32) -> f64 {
    dem_seats.as_f64() / k as f64
}

/// Equal-turnout efficiency gap, `(S − ½) − 2(V − ½)`. Zero exactly when a
/// `50 + x` percent vote share yields `50 + 2x` percent of the seats.
pub fn efficiency_gap_simplified(seat_share: f64, vote_share: f64) -> f64 {
    (seat_share - 0.5) - 2.0 * (vote_share - 0.5)
}

/// Vote columns for one contest, as scaled integers when they fit.
#[derive(Debug, Clone)]
enum Column {
    /// Every value multiplied by a common denominator.
    Scaled { dem: Vec<i128>, rep: Vec<i128> },
    Exact { dem: Vec<BigRational>, rep: Vec<BigRational> },
}

impl Column {
    fn new(graph: &DualGraph, contest: usize) -> Self {
        let pairs: Vec<&VotePair> = graph.nodes().iter().map(|n| &n.votes[contest]).collect();
        let mut lcm = BigInt::one();
        for p in &pairs {
            lcm = lcm.lcm(p.dem.denom());
            lcm = lcm.lcm(p.rep.denom());
        }
        let scale = |v: &BigRational| -> BigInt { v.numer() * (&lcm / v.denom()) };
        let dem: Vec<BigInt> = pairs.iter().map(|p| scale(&p.dem)).collect();
        let rep: Vec<BigInt> = pairs.iter().map(|p| scale(&p.rep)).collect();
        let total: BigInt = dem.iter().chain(rep.iter()).sum();
        if total.to_i128().is_some() {
            Column::Scaled {
                dem: dem.iter().map(|v| v.to_i128().expect("bounded by total")).collect(),
                rep: rep.iter().map(|v| v.to_i128().expect("bounded by total")).collect(),
            }
        } else {
            Column::Exact {
                dem: pairs.iter().map(|p| p.dem.clone()).collect(),
                rep: pairs.iter().map(|p| p.rep.clone()).collect(),
            }
        }
    }
}

#[derive(Debug, Clone)]
enum Totals {
    Scaled(Vec<(i128, i128)>),
    Exact(Vec<(BigRational, BigRational)>),
}

/// District vote totals for several contests, maintained incrementally as a
/// plan changes a few districts at a time.
#[derive(Debug, Clone)]
pub struct SeatCounter {
    columns: Vec<Column>,
    totals: Vec<Totals>,
}

impl SeatCounter {
    pub fn new(graph: &DualGraph, contests: &[usize], plan: &Assignment) -> Self {
        let columns: Vec<Column> = contests.iter().map(|&c| Column::new(graph, c)).collect();
        let k = plan.k() as usize;
        let totals = columns
            .iter()
            .map(|col| match col {
                Column::Scaled { .. } => Totals::Scaled(vec![(0, 0); k]),
                Column::Exact { .. } => Totals::Exact(vec![(BigRational::zero(), BigRational::zero()); k]),
            })
            .collect();
        let mut counter = Self { columns, totals };
        let mut members = vec![Vec::new(); k];
        for (node, &d) in plan.district_of().iter().enumerate() {
            members[d as usize].push(node);
        }
        for (d, m) in members.iter().enumerate() {
            counter.refresh(d as u32, m);
        }
        counter
    }

    /// Recomputes the totals of `district` from its member list.
    pub fn refresh(&mut self, district: u32, members: &[usize]) {
        let d = district as usize;
        for (col, totals) in self.columns.iter().zip(self.totals.iter_mut()) {
            match (col, totals) {
                (Column::Scaled { dem, rep }, Totals::Scaled(t)) => {
                    let mut sum = (0i128, 0i128);
                    for &m in members {
                        sum.0 += dem[m];
                        sum.1 += rep[m];
                    }
                    t[d] = sum;
                }
                (Column::Exact { dem, rep }, Totals::Exact(t)) => {
                    let mut sum = (BigRational::zero(), BigRational::zero());
                    for &m in members {
                        sum.0 += &dem[m];
                        sum.1 += &rep[m];
                    }
                    t[d] = sum;
                }
                _ => unreachable!("column and totals share a representation"),
            }
        }
    }

    pub fn contest_count(&self) -> usize {
        self.columns.len()
    }

    /// Outcome for the i-th tracked contest.
    pub fn outcome(&self, i: usize) -> SeatOutcome {
        match &self.totals[i] {
            Totals::Scaled(t) => outcome_of(t.iter().map(|(d, r)| d.cmp(r))),
            Totals::Exact(t) => outcome_of(t.iter().map(|(d, r)| d.cmp(r))),
        }
    }

    pub fn is_scaled(&self, i: usize) -> bool {
        matches!(self.columns[i], Column::Scaled { .. })
    }
}
