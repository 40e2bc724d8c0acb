//! Ensemble aggregation: seat histograms, the districts × seat-share grid,
//! seats-votes point clouds and convolution of independent region ensembles.

use std::collections::BTreeMap;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tally::Seats;

/// District counts of the Pennsylvania chambers, drawn as reference lines.
pub const REFERENCE_SCALES: [(u32, &str); 3] = [(18, "U.S. Congress"), (50, "State Senate"), (203, "State House")];

pub fn is_reference_scale(k: u32) -> bool {
    REFERENCE_SCALES.iter().any(|&(r, _)| r == k)
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StatsError {
    #[error("seat count {seats} outside 0..={k}")]
    OutOfRangeSeats { seats: Seats, k: u32 },
    #[error("cannot combine histograms for contests {0} and {1}")]
    ContestMismatch(String, String),
    #[error("cannot merge histograms keyed ({0}) and ({1})")]
    KeyMismatch(String, String),
    #[error("histogram is empty")]
    EmptyHistogram,
}

/// Seats-won counts over an ensemble for one `(contest, k)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeatHistogram {
    pub k: u32,
    pub contest: String,
    pub counts: BTreeMap<Seats, u64>,
    pub total: u64,
}

impl SeatHistogram {
    pub fn new(k: u32, contest: impl Into<String>) -> Self {
        Self {
            k,
            contest: contest.into(),
            counts: BTreeMap::new(),
            total: 0,
        }
    }

    pub fn from_observations(observations: &[Seats], k: u32, contest: impl Into<String>) -> Result<Self, StatsError> {
        let mut h = Self::new(k, contest);
        for &s in observations {
            h.add(s, 1)?;
        }
        Ok(h)
    }

    pub fn add(&mut self, seats: Seats, count: u64) -> Result<(), StatsError> {
        if seats > Seats::whole(self.k) {
            return Err(StatsError::OutOfRangeSeats { seats, k: self.k });
        }
        if count > 0 {
            *self.counts.entry(seats).or_default() += count;
            self.total += count;
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn frequency(&self, seats: Seats) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        self.counts.get(&seats).copied().unwrap_or(0) as f64 / self.total as f64
    }

    fn key(&self) -> String {
        format!("k={}, contest={}", self.k, self.contest)
    }

    /// Pointwise sum of counts. Associative and commutative, with the empty
    /// histogram of the same key as identity.
    pub fn merge(&self, other: &SeatHistogram) -> Result<SeatHistogram, StatsError> {
        if self.k != other.k || self.contest != other.contest {
            return Err(StatsError::KeyMismatch(self.key(), other.key()));
        }
        let mut out = self.clone();
        for (&s, &c) in &other.counts {
            *out.counts.entry(s).or_default() += c;
        }
        out.total += other.total;
        Ok(out)
    }

    /// Exact mean seats as a fraction of `k`.
    pub fn mean_seat_share_exact(&self) -> Result<Ratio<u128>, StatsError> {
        if self.total == 0 {
            return Err(StatsError::EmptyHistogram);
        }
        let halves: u128 = self
            .counts
            .iter()
            .map(|(s, &c)| s.halves() as u128 * c as u128)
            .sum();
        Ok(Ratio::new(halves, 2 * self.total as u128 * self.k as u128))
    }

    /// `Σ seats · count / (total · k)`.
    pub fn mean_seat_share(&self) -> Result<f64, StatsError> {
        let r = self.mean_seat_share_exact()?;
        Ok(*r.numer() as f64 / *r.denom() as f64)
    }

    /// Standard deviation of the seat share over the ensemble.
    pub fn seat_share_std(&self) -> Result<f64, StatsError> {
        let mean = self.mean_seat_share()?;
        let var = self
            .counts
            .iter()
            .map(|(s, &c)| {
                let x = s.as_f64() / self.k as f64 - mean;
                x * x * c as f64
            })
            .sum::<f64>()
            / self.total as f64;
        Ok(var.sqrt())
    }
}

/// Seat histogram of every pairing of a plan from `a` with a plan from `b`.
/// Districts in disjoint regions add, so this is the discrete convolution.
pub fn pair_convolution(a: &SeatHistogram, b: &SeatHistogram) -> Result<SeatHistogram, StatsError> {
    if a.contest != b.contest {
        return Err(StatsError::ContestMismatch(a.contest.clone(), b.contest.clone()));
    }
    let mut out = SeatHistogram::new(a.k + b.k, a.contest.clone());
    for (&sa, &ca) in &a.counts {
        for (&sb, &cb) in &b.counts {
            *out.counts.entry(sa + sb).or_default() += ca * cb;
        }
    }
    out.total = a.total * b.total;
    Ok(out)
}

/// One dot of the districts × seat-share heat map.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaleGridCell {
    pub k: u32,
    pub seats: Seats,
    pub seat_fraction: f64,
    pub frequency: f64,
}

/// One cell per `(k, observed seat count)`, ordered by `(k, seats)`.
pub fn to_scale_grid(histograms: &[SeatHistogram]) -> Vec<ScaleGridCell> {
    let mut cells: Vec<ScaleGridCell> = histograms
        .iter()
        .flat_map(|h| {
            h.counts.iter().map(move |(&seats, &count)| ScaleGridCell {
                k: h.k,
                seats,
                seat_fraction: seats.as_f64() / h.k as f64,
                frequency: count as f64 / h.total as f64,
            })
        })
        .collect();
    cells.sort_by(|a, b| (a.k, a.seats).cmp(&(b.k, b.seats)));
    cells
}

/// A straight reference line in the seats-votes plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceLine {
    pub name: &'static str,
    pub from: (f64, f64),
    pub to: (f64, f64),
}

impl ReferenceLine {
    pub fn at(&self, vote_share: f64) -> f64 {
        let slope = (self.to.1 - self.from.1) / (self.to.0 - self.from.0);
        self.from.1 + slope * (vote_share - self.from.0)
    }
}

/// Seat share equals vote share.
pub const PROPORTIONALITY: ReferenceLine = ReferenceLine {
    name: "proportionality",
    from: (0.0, 0.0),
    to: (1.0, 1.0),
};

/// Zero equal-turnout efficiency gap: `S = 2V − ½`.
pub const EFFICIENCY_GAP_ZERO: ReferenceLine = ReferenceLine {
    name: "efficiency_gap_zero",
    from: (0.25, 0.0),
    to: (0.75, 1.0),
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeatsVotesPoint {
    pub contest: String,
    pub vote_share: f64,
    pub k: u32,
    pub seat_fraction: f64,
    pub frequency: f64,
}

/// Points for every `(contest, seat outcome)`, ordered by vote share then
/// seat fraction. `entries` pairs each histogram with its statewide share.
pub fn seats_votes_points(entries: &[(f64, &SeatHistogram)]) -> Vec<SeatsVotesPoint> {
    let mut points: Vec<SeatsVotesPoint> = entries
        .iter()
        .flat_map(|&(vote_share, h)| {
            h.counts.iter().map(move |(&seats, &count)| SeatsVotesPoint {
                contest: h.contest.clone(),
                vote_share,
                k: h.k,
                seat_fraction: seats.as_f64() / h.k as f64,
                frequency: count as f64 / h.total as f64,
            })
        })
        .collect();
    points.sort_by(|a, b| {
        a.vote_share
            .total_cmp(&b.vote_share)
            .then(a.seat_fraction.total_cmp(&b.seat_fraction))
            .then(a.k.cmp(&b.k))
            .then(a.contest.cmp(&b.contest))
    });
    points
}
