//! Command-line front end for the `recom` binary.
//!
//! Every command that samples plans writes a `manifest.json` next to its
//! CSVs; `recom replay` regenerates the CSVs from that manifest and the
//! graph file and checks them byte for byte.
//!
//! Exit codes: 0 success, 2 usage, 3 data, 4 chain failure. Failures print
//! a single JSON line on stderr:
//! `{"error":{"kind":"…","exit_code":3,"message":"…"}}`.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_rational::BigRational;
use serde_json::json;

use crate::chain::{run_multiscale, Chain, ChainError, ChainParams, PairSelection, DEFAULT_PAIR_RETRIES, DEFAULT_SEED_ATTEMPTS};
use crate::graph::GraphError;
use crate::io::config::{read_json, write_json, ElectionConfig, RegionFile};
use crate::io::csv_out::{
    emit_histogram_csv, emit_scale_grid_csv, emit_seats_votes_csv, emit_summary_csv, emit_table, emit_vote_shares_csv,
    fmt6, read_histogram_csv, read_vote_shares_csv, SummaryRow,
};
use crate::io::graph_file::{from_graph, load_graph, plan_to_json, save_graph, LoadedGraph, UnitLevel};
use crate::io::manifest::{Command as RunCommand, RegionSection, RunManifest, MANIFEST_FILE};
use crate::io::svg::{scale_grid_svg, seats_votes_svg};
use crate::io::IoError;
use crate::region::{histograms_of, region_vote_table, run_region_ensembles, validate_split, RegionError, RegionSpec};
use crate::seed::chain_rng;
use crate::stats::{seats_votes_points, to_scale_grid, SeatHistogram, StatsError};
use crate::synth::{grid_graph, CityState};
use crate::tally::{efficiency_gap_simplified, statewide_share, ContestSpec, TallyError, TiePolicy};
use crate::tree::{TreeError, DEFAULT_MAX_TREE_ATTEMPTS};

pub const OUT_DIR_ENV: &str = "RECOM_OUT_DIR";

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_CHAIN: i32 = 4;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub kind: String,
    pub exit_code: i32,
    pub message: String,
}

impl CliError {
    pub fn new(kind: &str, exit_code: i32, message: impl Into<String>) -> Self {
        Self {
            kind: kind.to_string(),
            exit_code,
            message: message.into(),
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::new("UsageError", EXIT_USAGE, message)
    }

    pub fn data(kind: &str, message: impl Into<String>) -> Self {
        Self::new(kind, EXIT_DATA, message)
    }

    pub fn json_line(&self) -> String {
        json!({"error": {"kind": self.kind, "exit_code": self.exit_code, "message": self.message}}).to_string()
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        CliError::data(e.kind(), e.to_string())
    }
}

impl From<GraphError> for CliError {
    fn from(e: GraphError) -> Self {
        CliError::data("InvalidGraph", e.to_string())
    }
}

impl From<TallyError> for CliError {
    fn from(e: TallyError) -> Self {
        CliError::data("TallyError", e.to_string())
    }
}

impl From<StatsError> for CliError {
    fn from(e: StatsError) -> Self {
        CliError::data("StatsError", e.to_string())
    }
}

impl From<ChainError> for CliError {
    fn from(e: ChainError) -> Self {
        let kind = match &e {
            ChainError::InvalidParams(_) => return CliError::new("InvalidParams", EXIT_USAGE, e.to_string()),
            ChainError::Seed(_) => "SeedFailure",
            ChainError::ChainStalled { .. } => "ChainStalled",
            ChainError::Tree(TreeError::BalanceUnreachable { .. }) => "BalanceUnreachable",
            ChainError::Tree(_) => "TreeFailure",
        };
        CliError::new(kind, EXIT_CHAIN, e.to_string())
    }
}

impl From<RegionError> for CliError {
    fn from(e: RegionError) -> Self {
        match e {
            RegionError::Chain { region, source } => {
                let mut err = CliError::from(source);
                err.message = format!("region {region}: {}", err.message);
                err
            }
            RegionError::RegionDisconnected(_) => CliError::data("RegionDisconnected", e.to_string()),
            other => CliError::data("InvalidRegions", other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "recom", version, about = "Recombination ensembles for districting analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic grid graph file.
    Synth(SynthArgs),
    /// Draw one seed plan and print it as JSON.
    Seed(SeedArgs),
    /// One ensemble at one district count.
    Run(RunArgs),
    /// One ensemble per district count.
    Multiscale(MultiscaleArgs),
    /// Two-region ensembles, the full-graph ensemble and their pairs.
    Regions(RegionsArgs),
    /// Recompute summary tables (and optionally SVG figures) for an output directory.
    Stats(StatsArgs),
    /// Rerun from a manifest and compare every CSV byte for byte.
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
pub struct GraphArgs {
    /// Node-link graph file.
    #[arg(long)]
    pub graph: PathBuf,
    /// Election config JSON; defaults to the contests in the graph metadata.
    #[arg(long)]
    pub election_config: Option<PathBuf>,
    /// Comma-separated contest names (default: all configured contests).
    #[arg(long, value_delimiter = ',')]
    pub contests: Vec<String>,
}

#[derive(Debug, Args)]
pub struct ChainArgs {
    /// Recorded plans per ensemble.
    #[arg(long)]
    pub steps: u64,
    /// Population tolerance; defaults by unit level (precinct 0.02, block 0.01).
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Base seed. Per-run seeds are derived from it.
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 0)]
    pub burn_in: u64,
    #[arg(long, default_value_t = 1)]
    pub thin: u64,
    /// uniform | cut_edge_weighted
    #[arg(long, default_value = "uniform", value_parser = parse_pair_selection)]
    pub pair_selection: PairSelection,
    #[arg(long, default_value_t = DEFAULT_MAX_TREE_ATTEMPTS)]
    pub max_tree_attempts: u32,
    #[arg(long, default_value_t = DEFAULT_PAIR_RETRIES)]
    pub pair_retries: u32,
    #[arg(long, default_value_t = DEFAULT_SEED_ATTEMPTS)]
    pub seed_attempts: u32,
    /// count_rep | count_dem | count_half
    #[arg(long, default_value = "count_rep", value_parser = parse_tie_policy)]
    pub tie_policy: TiePolicy,
    /// Output directory.
    #[arg(long, env = OUT_DIR_ENV)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[command(flatten)]
    pub chain: ChainArgs,
    #[arg(long)]
    pub k: u32,
}

/// District counts: `2..220` (inclusive), `2,5,10`, or a mix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KList(pub Vec<u32>);

#[derive(Debug, Args)]
pub struct MultiscaleArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[command(flatten)]
    pub chain: ChainArgs,
    #[arg(long, value_parser = parse_k_list)]
    pub k_list: KList,
}

#[derive(Debug, Args)]
pub struct RegionsArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[command(flatten)]
    pub chain: ChainArgs,
    /// Region spec JSON.
    #[arg(long)]
    pub spec: PathBuf,
    /// District count of the first region in the spec.
    #[arg(long)]
    pub kw: Option<u32>,
    /// District count of the second region in the spec.
    #[arg(long)]
    pub ke: Option<u32>,
    /// District count of the full-graph run (default: kw + ke).
    #[arg(long)]
    pub kfull: Option<u32>,
}

#[derive(Debug, Args)]
pub struct SeedArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub k: u32,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_SEED_ATTEMPTS)]
    pub seed_attempts: u32,
    /// Write the plan here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 30)]
    pub rows: usize,
    #[arg(long, default_value_t = 30)]
    pub cols: usize,
    /// Side of the square city in the middle of the grid.
    #[arg(long, default_value_t = 10)]
    pub city_side: usize,
    /// Two-party voters per cell.
    #[arg(long, default_value_t = 200)]
    pub voters: i64,
    /// Democratic voters per city cell.
    #[arg(long, default_value_t = 140)]
    pub city_dem: i64,
    /// Number of vertical county bands.
    #[arg(long, default_value_t = 6)]
    pub bands: usize,
    /// Unit-population grid with no contests.
    #[arg(long)]
    pub plain: bool,
    /// precinct | block
    #[arg(long, default_value = "precinct", value_parser = parse_unit_level)]
    pub unit_level: UnitLevel,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write a two-region spec: the first third of the bands against the rest.
    #[arg(long)]
    pub regions_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Output directory of `run`, `multiscale` or `regions`.
    #[arg(long)]
    pub dir: PathBuf,
    /// Also write SVG figures.
    #[arg(long)]
    pub svg: bool,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Graph file, if not at the path recorded in the manifest.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    #[arg(long, env = OUT_DIR_ENV)]
    pub out: PathBuf,
}

fn parse_pair_selection(s: &str) -> Result<PairSelection, String> {
    match s {
        "uniform" => Ok(PairSelection::Uniform),
        "cut_edge_weighted" => Ok(PairSelection::CutEdgeWeighted),
        other => Err(format!("unknown pair selection {other:?}")),
    }
}

fn parse_tie_policy(s: &str) -> Result<TiePolicy, String> {
    s.parse()
}

fn parse_unit_level(s: &str) -> Result<UnitLevel, String> {
    match s {
        "precinct" => Ok(UnitLevel::Precinct),
        "block" => Ok(UnitLevel::Block),
        other => Err(format!("unknown unit level {other:?}")),
    }
}

pub fn parse_k_list(s: &str) -> Result<KList, String> {
    let mut ks = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((a, b)) = part.split_once("..") {
            let b = b.strip_prefix('=').unwrap_or(b);
            let lo: u32 = a.trim().parse().map_err(|_| format!("bad range start in {part:?}"))?;
            let hi: u32 = b.trim().parse().map_err(|_| format!("bad range end in {part:?}"))?;
            if lo > hi {
                return Err(format!("empty range {part:?}"));
            }
            ks.extend(lo..=hi);
        } else {
            ks.push(part.parse().map_err(|_| format!("bad district count {part:?}"))?);
        }
    }
    if ks.is_empty() {
        return Err("empty k list".into());
    }
    if ks.contains(&0) {
        return Err("district counts must be positive".into());
    }
    ks.sort_unstable();
    ks.dedup();
    Ok(KList(ks))
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code. Errors are printed as one JSON line.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if e.exit_code() == 0 => {
            let _ = e.print();
            return 0;
        }
        Err(e) => {
            let text = e.to_string();
            let msg = text
                .lines()
                .take_while(|l| !l.starts_with("Usage:") && !l.starts_with("For more information"))
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .collect::<Vec<_>>()
                .join(" ");
            let msg = msg.strip_prefix("error: ").unwrap_or(&msg);
            eprintln!("{}", CliError::usage(msg).json_line());
            return EXIT_USAGE;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.json_line());
            e.exit_code
        }
    }
}

pub fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Synth(a) => synth(&a),
        Command::Seed(a) => seed(&a),
        Command::Run(a) => run(&a),
        Command::Multiscale(a) => multiscale(&a),
        Command::Regions(a) => regions(&a),
        Command::Stats(a) => stats(&a),
        Command::Replay(a) => replay(&a),
    }
}

fn synth(a: &SynthArgs) -> Result<(), CliError> {
    if a.rows == 0 || a.cols == 0 {
        return Err(CliError::usage("grid needs at least one row and one column"));
    }
    let loaded = if a.plain {
        from_graph(grid_graph(a.rows, a.cols), Vec::new(), a.unit_level)
    } else {
        let spec = CityState {
            rows: a.rows,
            cols: a.cols,
            city_side: a.city_side,
            voters: a.voters,
            city_dem: a.city_dem,
            county_bands: a.bands,
        };
        if a.city_side > a.rows.min(a.cols) || a.city_dem > a.voters || a.city_dem < 0 {
            return Err(CliError::usage("city must fit in the grid and city_dem must lie in 0..=voters"));
        }
        let graph = spec.build().ok_or_else(|| {
            CliError::usage("no integer rural vote split gives an even statewide share for these parameters")
        })?;
        let contest = ContestSpec {
            name: "SYNTH".into(),
            dem_column: "SYNTHD".into(),
            rep_column: "SYNTHR".into(),
        };
        from_graph(graph, vec![contest], a.unit_level)
    };
    save_graph(&a.out, &loaded)?;
    if let Some(path) = &a.regions_out {
        let mut counties: Vec<String> = loaded.graph.counties().into_iter().map(String::from).collect();
        counties.sort();
        let split = (counties.len() / 3).max(1);
        if counties.len() < 2 {
            return Err(CliError::usage("a region split needs at least two county bands"));
        }
        let east = counties.split_off(split);
        let file = RegionFile {
            regions: [
                RegionSpec {
                    name: "West".into(),
                    counties: counties.into_iter().collect(),
                    k_region: 2,
                },
                RegionSpec {
                    name: "East".into(),
                    counties: east.into_iter().collect(),
                    k_region: 4,
                },
            ],
            ratio: (1, 2),
            k_full: None,
        };
        write_json(path, &file)?;
    }
    println!(
        "{}",
        json!({"ok": {"command": "synth", "nodes": loaded.graph.node_count(), "links": loaded.graph.edge_count()}})
    );
    Ok(())
}

fn seed(a: &SeedArgs) -> Result<(), CliError> {
    let loaded = load_graph(&a.graph, Some(&[]))?;
    let epsilon = a.epsilon.unwrap_or(loaded.unit_level.default_epsilon());
    let mut params = ChainParams::new(a.k, epsilon, 1, a.seed).for_k(a.k, 0);
    params.seed_attempts = a.seed_attempts;
    params.validate()?;
    let plan = Chain::seeded(loaded.graph.topology(), params, chain_rng(params.rng_seed))?.into_plan();
    let value = plan_to_json(&loaded.keys, plan.district_of(), plan.k());
    match &a.out {
        Some(path) => write_json(path, &value)?,
        None => println!("{value}"),
    }
    Ok(())
}

/// Loads the graph restricted to the selected contests, in selection order.
fn load_selected(g: &GraphArgs) -> Result<LoadedGraph, CliError> {
    let config: Option<ElectionConfig> = g.election_config.as_deref().map(read_json).transpose()?;
    let loaded = load_graph(&g.graph, config.as_ref().map(|c| c.contests.as_slice()))?;
    if g.contests.is_empty() {
        return Ok(loaded);
    }
    let specs = g
        .contests
        .iter()
        .map(|name| {
            loaded
                .contests
                .iter()
                .find(|c| &c.name == name)
                .cloned()
                .ok_or_else(|| CliError::data("SchemaMismatch", format!("contest {name:?} is not configured")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(load_graph(&g.graph, Some(&specs))?)
}

fn base_params(c: &ChainArgs, k: u32, loaded: &LoadedGraph) -> ChainParams {
    let mut p = ChainParams::new(k, c.epsilon.unwrap_or(loaded.unit_level.default_epsilon()), c.steps, c.seed);
    p.burn_in = c.burn_in;
    p.thin = c.thin;
    p.pair_selection = c.pair_selection;
    p.max_tree_attempts = c.max_tree_attempts;
    p.pair_retries = c.pair_retries;
    p.seed_attempts = c.seed_attempts;
    p
}

fn new_manifest(command: RunCommand, g: &GraphArgs, c: &ChainArgs, loaded: &LoadedGraph, k: u32) -> RunManifest {
    RunManifest::new(
        command,
        &g.graph.display().to_string(),
        loaded.digest.as_deref().unwrap_or_default(),
        loaded.contests.clone(),
        c.tie_policy,
        base_params(c, k, loaded),
    )
}

fn check_runs(manifest: &RunManifest) -> Result<(), CliError> {
    for r in &manifest.runs {
        r.params.validate()?;
    }
    Ok(())
}

fn finish(manifest: &RunManifest, loaded: &LoadedGraph, out: &Path) -> Result<(), CliError> {
    let failures = execute(manifest, loaded, out)?;
    manifest.save(out)?;
    for f in &failures {
        eprintln!("{}", f.json_line());
    }
    println!(
        "{}",
        json!({"ok": {"out": out.display().to_string(), "runs": manifest.runs.len(), "failed": failures.len()}})
    );
    match failures.into_iter().next() {
        Some(f) => Err(CliError::new(&f.kind, f.exit_code, format!("some runs failed; see {}", out.join(FAILURES_FILE).display()))),
        None => Ok(()),
    }
}

fn run(a: &RunArgs) -> Result<(), CliError> {
    let loaded = load_selected(&a.graph)?;
    let mut m = new_manifest(RunCommand::Run, &a.graph, &a.chain, &loaded, a.k);
    m.k_list = vec![a.k];
    m.push_run(&format!("k_{}", a.k), ".", a.k, 0);
    check_runs(&m)?;
    finish(&m, &loaded, &a.chain.out)
}

fn multiscale(a: &MultiscaleArgs) -> Result<(), CliError> {
    let loaded = load_selected(&a.graph)?;
    let ks = &a.k_list.0;
    let mut m = new_manifest(RunCommand::Multiscale, &a.graph, &a.chain, &loaded, ks[0]);
    m.k_list = ks.clone();
    for &k in ks {
        let label = format!("k_{k}");
        m.push_run(&label, &label, k, 0);
    }
    check_runs(&m)?;
    finish(&m, &loaded, &a.chain.out)
}

fn dir_name(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn regions(a: &RegionsArgs) -> Result<(), CliError> {
    let loaded = load_selected(&a.graph)?;
    let mut file: RegionFile = read_json(&a.spec)?;
    if let Some(k) = a.kw {
        file.regions[0].k_region = k;
    }
    if let Some(k) = a.ke {
        file.regions[1].k_region = k;
    }
    let (ka, kb) = (file.regions[0].k_region, file.regions[1].k_region);
    let k_full = a.kfull.or(file.k_full).unwrap_or(ka + kb);
    let dirs = [dir_name(&file.regions[0].name), dir_name(&file.regions[1].name)];
    if dirs[0] == dirs[1] || dirs.iter().any(|d| d == "full" || d == "pairs" || d.is_empty()) {
        return Err(CliError::data(
            "InvalidRegions",
            "region names must be distinct and must not be \"full\" or \"pairs\"",
        ));
    }
    validate_split(&loaded.graph, &file.regions[0], &file.regions[1], file.ratio)?;
    let mut m = new_manifest(RunCommand::Regions, &a.graph, &a.chain, &loaded, k_full);
    m.k_list = vec![ka, kb, k_full];
    m.push_run(&file.regions[0].name, &dirs[0], ka, 1);
    m.push_run(&file.regions[1].name, &dirs[1], kb, 2);
    m.push_run("Full", "full", k_full, 0);
    m.regions = Some(RegionSection {
        regions: file.regions.clone(),
        ratio: file.ratio,
        k_full,
    });
    check_runs(&m)?;
    finish(&m, &loaded, &a.chain.out)
}

pub const FAILURES_FILE: &str = "failures.csv";
pub const VOTE_SHARES_FILE: &str = "vote_shares.csv";

pub fn histogram_file(contest: &str) -> String {
    format!("histogram_{}.csv", dir_name(contest))
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|e| IoError::io(path, e).into())
}

fn write_panel(dir: &Path, histograms: &[SeatHistogram], shares: &[(String, f64)]) -> Result<(), CliError> {
    create_dir(dir)?;
    for h in histograms {
        emit_histogram_csv(&dir.join(histogram_file(&h.contest)), std::slice::from_ref(h))?;
    }
    emit_vote_shares_csv(&dir.join(VOTE_SHARES_FILE), shares)?;
    Ok(())
}

fn exact(r: &BigRational) -> String {
    if r.is_integer() {
        r.to_integer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Runs everything a manifest describes and writes all CSV outputs under
/// `out`. Per-run chain failures of a multiscale sweep are collected and
/// returned; the other runs still complete.
pub fn execute(manifest: &RunManifest, loaded: &LoadedGraph, out: &Path) -> Result<Vec<CliError>, CliError> {
    let graph = &loaded.graph;
    let contests: Vec<usize> = (0..manifest.contests.len()).collect();
    if graph.contest_names().len() != contests.len() {
        return Err(CliError::data("SchemaMismatch", "graph contests differ from the manifest"));
    }
    let statewide = contests
        .iter()
        .map(|&c| Ok((manifest.contests[c].name.clone(), statewide_share(graph, c)?)))
        .collect::<Result<Vec<_>, CliError>>()?;
    create_dir(out)?;
    let mut failures = Vec::new();
    match manifest.command {
        RunCommand::Run | RunCommand::Multiscale => {
            let results = run_multiscale(graph, &manifest.k_list, &manifest.base_params, &contests, manifest.tie_policy);
            for entry in &manifest.runs {
                let (_, result) = results.iter().find(|(k, _)| *k == entry.k).expect("one result per k");
                match result {
                    Ok(run) => {
                        let dir = out.join(&entry.dir);
                        write_panel(&dir, &histograms_of(run)?, &statewide)?;
                        let plan = plan_to_json(&loaded.keys, run.seed_plan.district_of(), run.seed_plan.k());
                        write_json(&dir.join("seed_plan.json"), &plan)?;
                    }
                    Err(e) => {
                        let mut err = CliError::from(e.clone());
                        err.message = format!("k = {}: {}", entry.k, err.message);
                        failures.push((entry.k, err));
                    }
                }
            }
            if manifest.command == RunCommand::Run {
                if let Some((_, e)) = failures.pop() {
                    return Err(e);
                }
            }
        }
        RunCommand::Regions => {
            let section = manifest
                .regions
                .as_ref()
                .ok_or_else(|| CliError::data("SchemaMismatch", "regions manifest without a region section"))?;
            let [ra, rb] = &section.regions;
            let result = run_region_ensembles(graph, [ra, rb], section.k_full, &manifest.base_params, &contests, manifest.tie_policy)?;
            let table = region_vote_table(graph, [ra, rb], &contests);
            let mut rows = Vec::new();
            let mut region_shares = [Vec::new(), Vec::new()];
            for row in &table {
                for (i, cell) in row.cells.iter().enumerate() {
                    let share = cell.share(&row.contest)?;
                    if i < 2 {
                        region_shares[i].push((row.contest.clone(), share));
                    }
                    rows.push(vec![
                        row.contest.clone(),
                        cell.region.clone(),
                        exact(&cell.dem),
                        exact(&cell.rep),
                        fmt6(share),
                    ]);
                }
            }
            emit_table(&out.join("region_votes.csv"), &["contest", "region", "dem", "rep", "vote_share"], &rows)?;
            let split = validate_split(graph, ra, rb, section.ratio)?;
            write_json(&out.join("split.json"), &split)?;

            let by_tag = |tag: u32| manifest.runs.iter().find(|r| r.stream_tag == tag).expect("region manifest lists three runs");
            for (i, region) in result.regions.iter().enumerate() {
                let dir = out.join(&by_tag(i as u32 + 1).dir);
                write_panel(&dir, &region.histograms, &region_shares[i])?;
                let keys: Vec<String> = region.spec.nodes(graph).iter().map(|&n| loaded.keys[n].clone()).collect();
                let plan = plan_to_json(&keys, region.run.seed_plan.district_of(), region.run.seed_plan.k());
                write_json(&dir.join("seed_plan.json"), &plan)?;
            }
            let full_dir = out.join(&by_tag(0).dir);
            write_panel(&full_dir, &result.full_histograms, &statewide)?;
            let plan = plan_to_json(&loaded.keys, result.full.seed_plan.district_of(), result.full.seed_plan.k());
            write_json(&full_dir.join("seed_plan.json"), &plan)?;
            write_panel(&out.join("pairs"), &result.pairs, &statewide)?;
        }
    }
    if !failures.is_empty() {
        let rows: Vec<Vec<String>> = failures
            .iter()
            .map(|(k, e)| vec![k.to_string(), e.kind.clone(), e.message.clone()])
            .collect();
        emit_table(&out.join(FAILURES_FILE), &["k", "kind", "message"], &rows)?;
    }
    derive_stats(out, manifest, false)?;
    Ok(failures.into_iter().map(|(_, e)| e).collect())
}

struct Panel {
    label: String,
    dir: PathBuf,
    k: u32,
}

fn panels(out: &Path, manifest: &RunManifest) -> Vec<Panel> {
    let mut panels: Vec<Panel> = manifest
        .runs
        .iter()
        .map(|r| Panel {
            label: r.label.clone(),
            dir: out.join(&r.dir),
            k: r.k,
        })
        .collect();
    if let Some(section) = &manifest.regions {
        panels.push(Panel {
            label: "Pairs".into(),
            dir: out.join("pairs"),
            k: section.regions[0].k_region + section.regions[1].k_region,
        });
    }
    panels
}

/// Summary, scale-grid and seats-votes tables from the per-run histogram
/// files under `out`. Runs without outputs (failed runs) are skipped.
pub fn derive_stats(out: &Path, manifest: &RunManifest, svg: bool) -> Result<(), CliError> {
    let mut summary = Vec::new();
    let mut all: Vec<(f64, SeatHistogram)> = Vec::new();
    let per_panel = manifest.command == RunCommand::Regions;
    for panel in panels(out, manifest) {
        let shares_path = panel.dir.join(VOTE_SHARES_FILE);
        if !shares_path.exists() {
            continue;
        }
        let shares = read_vote_shares_csv(&shares_path)?;
        let mut entries = Vec::new();
        for contest in &manifest.contests {
            let share = shares
                .iter()
                .find(|(c, _)| c == &contest.name)
                .map(|(_, v)| *v)
                .ok_or_else(|| CliError::data("SchemaMismatch", format!("{}: no vote share for {}", shares_path.display(), contest.name)))?;
            let path = panel.dir.join(histogram_file(&contest.name));
            let mut hs = read_histogram_csv(&path, &contest.name)?;
            let h = match (hs.pop(), hs.is_empty()) {
                (Some(h), true) if h.k == panel.k => h,
                _ => {
                    return Err(CliError::data(
                        "SchemaMismatch",
                        format!("{}: expected one histogram at k = {}", path.display(), panel.k),
                    ))
                }
            };
            let mean = h.mean_seat_share()?;
            summary.push(SummaryRow {
                panel: panel.label.clone(),
                contest: contest.name.clone(),
                k: h.k,
                vote_share: share,
                mean_seat_share: mean,
                seat_share_std: h.seat_share_std()?,
                efficiency_gap: efficiency_gap_simplified(mean, share),
            });
            entries.push((share, h));
        }
        if per_panel {
            let refs: Vec<(f64, &SeatHistogram)> = entries.iter().map(|(v, h)| (*v, h)).collect();
            let points = seats_votes_points(&refs);
            emit_seats_votes_csv(&panel.dir.join("seats_votes.csv"), &points)?;
            if svg {
                write_text(&panel.dir.join("seats_votes.svg"), &seats_votes_svg(&points))?;
            }
        }
        all.extend(entries);
    }
    emit_summary_csv(&out.join("summary.csv"), &summary)?;
    if !per_panel {
        let refs: Vec<(f64, &SeatHistogram)> = all.iter().map(|(v, h)| (*v, h)).collect();
        let points = seats_votes_points(&refs);
        emit_seats_votes_csv(&out.join("seats_votes.csv"), &points)?;
        if svg {
            write_text(&out.join("seats_votes.svg"), &seats_votes_svg(&points))?;
        }
        for contest in &manifest.contests {
            let hs: Vec<SeatHistogram> = all.iter().filter(|(_, h)| h.contest == contest.name).map(|(_, h)| h.clone()).collect();
            let cells = to_scale_grid(&hs);
            let stem = format!("scale_grid_{}", dir_name(&contest.name));
            emit_scale_grid_csv(&out.join(format!("{stem}.csv")), &cells)?;
            if svg {
                write_text(&out.join(format!("{stem}.svg")), &scale_grid_svg(&cells))?;
            }
        }
    }
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| IoError::io(path, e).into())
}

fn stats(a: &StatsArgs) -> Result<(), CliError> {
    let manifest = RunManifest::load(&a.dir.join(MANIFEST_FILE))?;
    derive_stats(&a.dir, &manifest, a.svg)?;
    println!("{}", json!({"ok": {"command": "stats", "dir": a.dir.display().to_string()}}));
    Ok(())
}

fn csv_files(root: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).map_err(|e| IoError::io(&dir, e))? {
            let path = entry.map_err(|e| IoError::io(&dir, e))?.path();
            if path.is_dir() {
                stack.push(path);
            } else if path.extension().is_some_and(|x| x == "csv") {
                out.push(path.strip_prefix(root).expect("walked from root").to_path_buf());
            }
        }
    }
    out.sort();
    Ok(out)
}

fn replay(a: &ReplayArgs) -> Result<(), CliError> {
    let manifest = RunManifest::load(&a.manifest)?;
    let origin = a.manifest.parent().unwrap_or(Path::new("."));
    let graph_path = match &a.graph {
        Some(p) => p.clone(),
        None => {
            let recorded = PathBuf::from(&manifest.graph_path);
            if recorded.exists() {
                recorded
            } else {
                origin.join(recorded)
            }
        }
    };
    let loaded = load_graph(&graph_path, Some(&manifest.contests))?;
    if loaded.digest.as_deref() != Some(manifest.graph_digest.as_str()) {
        return Err(CliError::data(
            "DigestMismatch",
            format!("{} does not match the graph digest in the manifest", graph_path.display()),
        ));
    }
    let failures = execute(&manifest, &loaded, &a.out)?;
    manifest.save(&a.out)?;
    for f in &failures {
        eprintln!("{}", f.json_line());
    }
    let expected = csv_files(origin)?;
    let produced = csv_files(&a.out)?;
    let mut differing: Vec<String> = expected
        .iter()
        .filter(|rel| fs::read(origin.join(rel)).ok() != fs::read(a.out.join(rel)).ok())
        .map(|rel| rel.display().to_string())
        .collect();
    differing.extend(produced.iter().filter(|p| !expected.contains(p)).map(|p| p.display().to_string()));
    if !differing.is_empty() {
        return Err(CliError::data(
            "ReplayMismatch",
            format!("outputs differ from the original run: {}", differing.join(", ")),
        ));
    }
    println!("{}", json!({"ok": {"command": "replay", "files": expected.len(), "identical": true}}));
    Ok(())
}
