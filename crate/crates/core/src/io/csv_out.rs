//! CSV tables. Headers are fixed; fractions carry six decimal places.
//!
//! | file             | columns                                              |
//! |------------------|------------------------------------------------------|
//! | histogram        | `k,seats,count,frequency`                            |
//! | scale grid       | `k,seat_fraction,frequency,is_reference_scale`       |
//! | seats-votes      | `contest,vote_share,k,seat_fraction,frequency`       |
//! | vote shares      | `contest,vote_share`                                 |
//! | summary          | `panel,contest,k,vote_share,mean_seat_share,seat_share_std,efficiency_gap` |

use std::fs::File;
use std::path::Path;

use super::IoError;
use crate::stats::{is_reference_scale, ScaleGridCell, SeatHistogram, SeatsVotesPoint};
use crate::tally::Seats;

pub const HISTOGRAM_HEADER: [&str; 4] = ["k", "seats", "count", "frequency"];
pub const SCALE_GRID_HEADER: [&str; 4] = ["k", "seat_fraction", "frequency", "is_reference_scale"];
pub const SEATS_VOTES_HEADER: [&str; 5] = ["contest", "vote_share", "k", "seat_fraction", "frequency"];
pub const VOTE_SHARES_HEADER: [&str; 2] = ["contest", "vote_share"];
pub const SUMMARY_HEADER: [&str; 7] = [
    "panel",
    "contest",
    "k",
    "vote_share",
    "mean_seat_share",
    "seat_share_std",
    "efficiency_gap",
];

pub fn fmt6(x: f64) -> String {
    let s = format!("{x:.6}");
    if s == "-0.000000" {
        "0.000000".to_string()
    } else {
        s
    }
}

fn csv_err(path: &Path, e: csv::Error) -> IoError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => IoError::io(path, io),
        other => IoError::Parse {
            path: path.display().to_string(),
            message: format!("{other:?}"),
        },
    }
}

fn write_rows<const N: usize>(path: &Path, header: [&str; N], rows: impl Iterator<Item = [String; N]>) -> Result<(), IoError> {
    let file = File::create(path).map_err(|e| IoError::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| IoError::io(path, e))
}

/// Rows sorted by `(k, seats)`.
pub fn emit_histogram_csv(path: &Path, histograms: &[SeatHistogram]) -> Result<(), IoError> {
    let mut sorted: Vec<&SeatHistogram> = histograms.iter().collect();
    sorted.sort_by_key(|h| h.k);
    let rows = sorted.into_iter().flat_map(|h| {
        h.counts.iter().map(move |(s, &c)| {
            [
                h.k.to_string(),
                s.to_string(),
                c.to_string(),
                fmt6(c as f64 / h.total as f64),
            ]
        })
    });
    write_rows(path, HISTOGRAM_HEADER, rows)
}

pub fn emit_scale_grid_csv(path: &Path, cells: &[ScaleGridCell]) -> Result<(), IoError> {
    let rows = cells.iter().map(|c| {
        [
            c.k.to_string(),
            fmt6(c.seat_fraction),
            fmt6(c.frequency),
            is_reference_scale(c.k).to_string(),
        ]
    });
    write_rows(path, SCALE_GRID_HEADER, rows)
}

pub fn emit_seats_votes_csv(path: &Path, points: &[SeatsVotesPoint]) -> Result<(), IoError> {
    let rows = points.iter().map(|p| {
        [
            p.contest.clone(),
            fmt6(p.vote_share),
            p.k.to_string(),
            fmt6(p.seat_fraction),
            fmt6(p.frequency),
        ]
    });
    write_rows(path, SEATS_VOTES_HEADER, rows)
}

pub fn emit_vote_shares_csv(path: &Path, shares: &[(String, f64)]) -> Result<(), IoError> {
    write_rows(path, VOTE_SHARES_HEADER, shares.iter().map(|(c, v)| [c.clone(), fmt6(*v)]))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub panel: String,
    pub contest: String,
    pub k: u32,
    pub vote_share: f64,
    pub mean_seat_share: f64,
    pub seat_share_std: f64,
    pub efficiency_gap: f64,
}

pub fn emit_summary_csv(path: &Path, rows: &[SummaryRow]) -> Result<(), IoError> {
    let rows = rows.iter().map(|r| {
        [
            r.panel.clone(),
            r.contest.clone(),
            r.k.to_string(),
            fmt6(r.vote_share),
            fmt6(r.mean_seat_share),
            fmt6(r.seat_share_std),
            fmt6(r.efficiency_gap),
        ]
    });
    write_rows(path, SUMMARY_HEADER, rows)
}

/// Generic table writer for ad-hoc outputs such as the region vote table.
pub fn emit_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), IoError> {
    let file = File::create(path).map_err(|e| IoError::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for row in rows {
        w.write_record(row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| IoError::io(path, e))
}

fn read_records(path: &Path, header: &[&str]) -> Result<Vec<csv::StringRecord>, IoError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let found = r.headers().map_err(|e| csv_err(path, e))?.clone();
    if found.iter().collect::<Vec<_>>() != header {
        return Err(IoError::SchemaMismatch(format!(
            "{}: expected header {}, found {}",
            path.display(),
            header.join(","),
            found.iter().collect::<Vec<_>>().join(",")
        )));
    }
    r.records().map(|rec| rec.map_err(|e| csv_err(path, e))).collect()
}

fn field<T: std::str::FromStr>(path: &Path, rec: &csv::StringRecord, i: usize) -> Result<T, IoError> {
    rec.get(i).and_then(|s| s.parse().ok()).ok_or_else(|| IoError::Parse {
        path: path.display().to_string(),
        message: format!("bad value in column {i} of record {:?}", rec.iter().collect::<Vec<_>>()),
    })
}

/// Reads a histogram file back into one histogram per `k`.
pub fn read_histogram_csv(path: &Path, contest: &str) -> Result<Vec<SeatHistogram>, IoError> {
    let mut out: Vec<SeatHistogram> = Vec::new();
    for rec in read_records(path, &HISTOGRAM_HEADER)? {
        let k: u32 = field(path, &rec, 0)?;
        let seats: Seats = field(path, &rec, 1)?;
        let count: u64 = field(path, &rec, 2)?;
        if out.last().map_or(true, |h| h.k != k) {
            out.push(SeatHistogram::new(k, contest));
        }
        out.last_mut()
            .expect("pushed above")
            .add(seats, count)
            .map_err(|e| IoError::Invalid(format!("{}: {e}", path.display())))?;
    }
    Ok(out)
}

pub fn read_vote_shares_csv(path: &Path) -> Result<Vec<(String, f64)>, IoError> {
    read_records(path, &VOTE_SHARES_HEADER)?
        .iter()
        .map(|rec| Ok((field(path, rec, 0)?, field(path, rec, 1)?)))
        .collect()
}
