//! C ABI over `recom-core`.
//!
//! Graphs and runs are opaque handles owned by the caller and released with
//! the matching `_free` function. Every fallible call returns a
//! [`RecomStatus`]; on failure [`recom_last_error`] describes the problem.
//! Seat counts cross the boundary in half-seat units so that split-tie
//! policies stay exact.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use recom_core::cli::CliError;
use recom_core::io::graph_file::load_graph;
use recom_core::stats::SeatHistogram;
use recom_core::tally::{efficiency_gap_simplified, statewide_share};
use recom_core::{run_ensemble, ChainParams, DualGraph, EnsembleRun, NodeRecord, TiePolicy, VotePair};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecomStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DataError = 3,
    ChainError = 4,
    Panic = 5,
}

/// A validated dual graph.
pub struct RecomGraph {
    graph: DualGraph,
}

/// A finished ensemble.
pub struct RecomRun {
    run: EnsembleRun,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes replaced");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn fail(status: RecomStatus, msg: impl AsRef<str>) -> RecomStatus {
    set_error(msg.as_ref());
    status
}

fn from_cli(e: CliError) -> RecomStatus {
    let status = match e.exit_code {
        recom_core::cli::EXIT_USAGE => RecomStatus::InvalidArgument,
        recom_core::cli::EXIT_CHAIN => RecomStatus::ChainError,
        _ => RecomStatus::DataError,
    };
    fail(status, format!("{}: {}", e.kind, e.message))
}

fn guard(f: impl FnOnce() -> RecomStatus) -> RecomStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => {
            if s == RecomStatus::Ok {
                set_error("");
            }
            s
        }
        Err(_) => fail(RecomStatus::Panic, "internal panic"),
    }
}

/// Message for the most recent failed call on this thread, or an empty
/// string. Valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn recom_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn recom_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a node-link graph file, using the contests in its metadata.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn recom_graph_load(path: *const c_char, out: *mut *mut RecomGraph) -> RecomStatus {
    guard(|| {
        if path.is_null() || out.is_null() {
            return fail(RecomStatus::NullPointer, "null argument");
        }
        let Ok(path) = CStr::from_ptr(path).to_str() else {
            return fail(RecomStatus::InvalidArgument, "path is not UTF-8");
        };
        match load_graph(Path::new(path), None) {
            Ok(loaded) => {
                *out = Box::into_raw(Box::new(RecomGraph { graph: loaded.graph }));
                RecomStatus::Ok
            }
            Err(e) => from_cli(e.into()),
        }
    })
}

/// Builds a graph from flat arrays. Edge `i` joins `edge_src[i]` and
/// `edge_dst[i]`. `dem` and `rep` may both be null (no contest) or both
/// point at `n_nodes` vote counts for a single contest named "C0".
///
/// # Safety
/// Every non-null pointer must reference an array of the stated length.
#[no_mangle]
pub unsafe extern "C" fn recom_graph_from_arrays(
    n_nodes: usize,
    populations: *const u64,
    n_edges: usize,
    edge_src: *const u32,
    edge_dst: *const u32,
    dem: *const i64,
    rep: *const i64,
    out: *mut *mut RecomGraph,
) -> RecomStatus {
    guard(|| {
        if out.is_null() || (n_nodes > 0 && populations.is_null()) || (n_edges > 0 && (edge_src.is_null() || edge_dst.is_null())) {
            return fail(RecomStatus::NullPointer, "null argument");
        }
        if dem.is_null() != rep.is_null() {
            return fail(RecomStatus::InvalidArgument, "dem and rep must both be given or both be null");
        }
        let pops = slice(populations, n_nodes);
        let votes = (!dem.is_null()).then(|| (slice(dem, n_nodes), slice(rep, n_nodes)));
        if let Some((d, r)) = votes {
            if d.iter().chain(r).any(|&v| v < 0) {
                return fail(RecomStatus::InvalidArgument, "vote counts must be non-negative");
            }
        }
        let nodes = (0..n_nodes)
            .map(|i| NodeRecord {
                population: pops[i],
                vap: pops[i],
                county: String::new(),
                votes: votes.map_or_else(Vec::new, |(d, r)| vec![VotePair::from_integers(d[i], r[i])]),
            })
            .collect();
        let (src, dst) = (slice(edge_src, n_edges), slice(edge_dst, n_edges));
        let edges: Vec<(usize, usize)> = src.iter().zip(dst).map(|(&a, &b)| (a as usize, b as usize)).collect();
        let names = if votes.is_some() { vec!["C0".to_string()] } else { Vec::new() };
        match DualGraph::new(nodes, &edges, names) {
            Ok(graph) => {
                *out = Box::into_raw(Box::new(RecomGraph { graph }));
                RecomStatus::Ok
            }
            Err(e) => fail(RecomStatus::DataError, e.to_string()),
        }
    })
}

unsafe fn slice<'a, T>(p: *const T, len: usize) -> &'a [T] {
    if len == 0 {
        &[]
    } else {
        std::slice::from_raw_parts(p, len)
    }
}

/// # Safety
/// `graph` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn recom_graph_free(graph: *mut RecomGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

/// # Safety
/// `graph` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn recom_graph_node_count(graph: *const RecomGraph) -> usize {
    graph.as_ref().map_or(0, |g| g.graph.node_count())
}

/// # Safety
/// `graph` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn recom_graph_total_population(graph: *const RecomGraph) -> u64 {
    graph.as_ref().map_or(0, |g| g.graph.total_population())
}

/// # Safety
/// `graph` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn recom_graph_contest_count(graph: *const RecomGraph) -> usize {
    graph.as_ref().map_or(0, |g| g.graph.contest_names().len())
}

/// Democratic two-party share of contest `contest` over the whole graph.
///
/// # Safety
/// `graph` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn recom_statewide_share(graph: *const RecomGraph, contest: usize, out: *mut f64) -> RecomStatus {
    guard(|| {
        let (Some(g), false) = (graph.as_ref(), out.is_null()) else {
            return fail(RecomStatus::NullPointer, "null argument");
        };
        if contest >= g.graph.contest_names().len() {
            return fail(RecomStatus::InvalidArgument, "contest index out of range");
        }
        match statewide_share(&g.graph, contest) {
            Ok(v) => {
                *out = v;
                RecomStatus::Ok
            }
            Err(e) => fail(RecomStatus::DataError, e.to_string()),
        }
    })
}

/// Runs one ensemble of `steps` recorded plans with `k` districts. The run
/// seed is derived from `seed` exactly as the `recom run` command does, so
/// the same inputs give the same ensemble. `tie_policy`: 0 count_rep,
/// 1 count_dem, 2 count_half.
///
/// # Safety
/// `graph` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn recom_run_chain(
    graph: *const RecomGraph,
    k: u32,
    epsilon: f64,
    steps: u64,
    seed: u64,
    tie_policy: u32,
    out: *mut *mut RecomRun,
) -> RecomStatus {
    guard(|| {
        let (Some(g), false) = (graph.as_ref(), out.is_null()) else {
            return fail(RecomStatus::NullPointer, "null argument");
        };
        let policy = match tie_policy {
            0 => TiePolicy::CountRep,
            1 => TiePolicy::CountDem,
            2 => TiePolicy::CountHalf,
            _ => return fail(RecomStatus::InvalidArgument, "tie_policy must be 0, 1 or 2"),
        };
        let params = ChainParams::new(k, epsilon, steps, seed).for_k(k, 0);
        let contests: Vec<usize> = (0..g.graph.contest_names().len()).collect();
        match run_ensemble(&g.graph, &params, &contests, policy) {
            Ok(run) => {
                *out = Box::into_raw(Box::new(RecomRun { run }));
                RecomStatus::Ok
            }
            Err(e) => from_cli(e.into()),
        }
    })
}

/// # Safety
/// `run` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn recom_run_free(run: *mut RecomRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// Number of recorded plans.
///
/// # Safety
/// `run` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn recom_run_observations(run: *const RecomRun) -> u64 {
    run.as_ref().map_or(0, |r| r.run.observations())
}

/// Copies the seed plan's district labels into `out[0..len]`; `len` must
/// equal the graph's node count.
///
/// # Safety
/// `run` must be a live handle; `out` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn recom_run_seed_plan(run: *const RecomRun, out: *mut u32, len: usize) -> RecomStatus {
    guard(|| {
        let (Some(r), false) = (run.as_ref(), out.is_null()) else {
            return fail(RecomStatus::NullPointer, "null argument");
        };
        let plan = r.run.seed_plan.district_of();
        if len != plan.len() {
            return fail(RecomStatus::InvalidArgument, format!("need {} slots", plan.len()));
        }
        std::slice::from_raw_parts_mut(out, len).copy_from_slice(plan);
        RecomStatus::Ok
    })
}

/// Copies the Democratic seat series of `contest` in half-seat units into
/// `out[0..len]`; `len` must equal the number of recorded plans.
///
/// # Safety
/// `run` must be a live handle; `out` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn recom_run_seat_halves(run: *const RecomRun, contest: usize, out: *mut u32, len: usize) -> RecomStatus {
    guard(|| {
        let (Some(r), false) = (run.as_ref(), out.is_null()) else {
            return fail(RecomStatus::NullPointer, "null argument");
        };
        let Some(series) = r.run.seats.get(contest) else {
            return fail(RecomStatus::InvalidArgument, "contest index out of range");
        };
        if len != series.len() {
            return fail(RecomStatus::InvalidArgument, format!("need {} slots", series.len()));
        }
        let dst = std::slice::from_raw_parts_mut(out, len);
        for (d, s) in dst.iter_mut().zip(series) {
            *d = s.halves();
        }
        RecomStatus::Ok
    })
}

/// Histogram of Democratic seats for `contest`: `out[h]` counts plans with
/// `h` half-seats, so `len` must be `2k + 1`.
///
/// # Safety
/// `run` must be a live handle; `out` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn recom_run_histogram(run: *const RecomRun, contest: usize, out: *mut u64, len: usize) -> RecomStatus {
    guard(|| {
        let (Some(r), false) = (run.as_ref(), out.is_null()) else {
            return fail(RecomStatus::NullPointer, "null argument");
        };
        let k = r.run.params.k;
        let Some(series) = r.run.seats.get(contest) else {
            return fail(RecomStatus::InvalidArgument, "contest index out of range");
        };
        if len != 2 * k as usize + 1 {
            return fail(RecomStatus::InvalidArgument, format!("need {} slots", 2 * k + 1));
        }
        let h = match SeatHistogram::from_observations(series, k, r.run.contests[contest].clone()) {
            Ok(h) => h,
            Err(e) => return fail(RecomStatus::DataError, e.to_string()),
        };
        let dst = std::slice::from_raw_parts_mut(out, len);
        dst.fill(0);
        for (s, &c) in &h.counts {
            dst[s.halves() as usize] = c;
        }
        RecomStatus::Ok
    })
}

/// `(S − ½) − 2(V − ½)`.
#[no_mangle]
pub extern "C" fn recom_efficiency_gap_simplified(seat_share: f64, vote_share: f64) -> f64 {
    efficiency_gap_simplified(seat_share, vote_share)
}
