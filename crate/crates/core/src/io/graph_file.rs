//! Node-link graph files.
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "metadata": {
//!     "unit_level": "precinct",
//!     "contests": [{"name": "PRES16", "dem": "PRES16D", "rep": "PRES16R"}]
//!   },
//!   "nodes": [
//!     {"id": "42001-1", "population": 812, "vap": 640, "county": "Adams",
//!      "PRES16D": 201, "PRES16R": "1573/4"}
//!   ],
//!   "links": [{"source": "42001-1", "target": "42001-2"}]
//! }
//! ```
//!
//! Vote columns accept JSON numbers, decimal strings, and `"p/q"` fraction
//! strings. Non-integers are written back as `"p/q"` so values survive a
//! round trip exactly.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use super::IoError;
use crate::graph::{DualGraph, GraphError, NodeRecord, VotePair, Votes};
use crate::tally::ContestSpec;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum UnitLevel {
    #[default]
    Precinct,
    Block,
}

impl UnitLevel {
    /// Default population tolerance for plans built from these units.
    pub fn default_epsilon(self) -> f64 {
        match self {
            UnitLevel::Precinct => 0.02,
            UnitLevel::Block => 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    #[serde(default)]
    pub unit_level: UnitLevel,
    #[serde(default)]
    pub contests: Vec<ContestSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawNode {
    pub id: String,
    pub population: u64,
    pub vap: u64,
    #[serde(default)]
    pub county: String,
    #[serde(flatten)]
    pub columns: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawLink {
    pub source: String,
    pub target: String,
}

/// The file as written on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawGraphFile {
    pub schema_version: u32,
    pub metadata: Metadata,
    pub nodes: Vec<RawNode>,
    pub links: Vec<RawLink>,
}

/// A validated graph plus everything needed to write it back.
#[derive(Debug, Clone)]
pub struct LoadedGraph {
    pub graph: DualGraph,
    /// External key of each dense node id.
    pub keys: Vec<String>,
    pub unit_level: UnitLevel,
    pub contests: Vec<ContestSpec>,
    /// Node columns not bound to a contest, kept for round trips.
    pub extra_columns: Vec<BTreeMap<String, Value>>,
    /// Hex SHA-256 of the source bytes, when loaded from a file.
    pub digest: Option<String>,
}

impl LoadedGraph {
    pub fn key_index(&self) -> HashMap<&str, usize> {
        self.keys.iter().enumerate().map(|(i, k)| (k.as_str(), i)).collect()
    }

    pub fn same_content(&self, other: &LoadedGraph) -> bool {
        self.keys == other.keys
            && self.unit_level == other.unit_level
            && self.contests == other.contests
            && self.extra_columns == other.extra_columns
            && self.graph.nodes() == other.graph.nodes()
            && self.graph.edges() == other.graph.edges()
            && self.graph.contest_names() == other.graph.contest_names()
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Loads and validates a graph file. When `contests` is given it replaces
/// the contest list from the file's metadata.
pub fn load_graph(path: &Path, contests: Option<&[ContestSpec]>) -> Result<LoadedGraph, IoError> {
    let bytes = fs::read(path).map_err(|e| IoError::io(path, e))?;
    let mut loaded = parse_graph(&bytes, contests).map_err(|e| e.with_path(path))?;
    loaded.digest = Some(sha256_hex(&bytes));
    Ok(loaded)
}

pub fn parse_graph(bytes: &[u8], contests: Option<&[ContestSpec]>) -> Result<LoadedGraph, IoError> {
    let raw: RawGraphFile = serde_json::from_slice(bytes).map_err(|e| IoError::Parse {
        path: String::new(),
        message: e.to_string(),
    })?;
    from_raw(raw, contests)
}

pub fn from_raw(raw: RawGraphFile, contests: Option<&[ContestSpec]>) -> Result<LoadedGraph, IoError> {
    if raw.schema_version != SCHEMA_VERSION {
        return Err(IoError::SchemaMismatch(format!(
            "unsupported schema_version {} (expected {SCHEMA_VERSION})",
            raw.schema_version
        )));
    }
    let contests: Vec<ContestSpec> = contests.map_or_else(|| raw.metadata.contests.clone(), <[_]>::to_vec);

    let mut index: HashMap<&str, usize> = HashMap::with_capacity(raw.nodes.len());
    for (i, n) in raw.nodes.iter().enumerate() {
        if index.insert(n.id.as_str(), i).is_some() {
            return Err(IoError::SchemaMismatch(format!("duplicate node id {:?}", n.id)));
        }
    }

    let mut nodes = Vec::with_capacity(raw.nodes.len());
    let mut extra_columns = Vec::with_capacity(raw.nodes.len());
    for n in &raw.nodes {
        let mut columns = n.columns.clone();
        let mut votes = Vec::with_capacity(contests.len());
        for c in &contests {
            let mut take = |col: &str| -> Result<Votes, IoError> {
                let v = columns.remove(col).ok_or_else(|| {
                    IoError::SchemaMismatch(format!(
                        "node {:?} has no column {col:?} required by contest {}",
                        n.id, c.name
                    ))
                })?;
                parse_votes(&v).map_err(|m| IoError::SchemaMismatch(format!("node {:?} column {col:?}: {m}", n.id)))
            };
            let dem = take(&c.dem_column)?;
            let rep = take(&c.rep_column)?;
            votes.push(VotePair::new(dem, rep));
        }
        nodes.push(NodeRecord {
            population: n.population,
            vap: n.vap,
            county: n.county.clone(),
            votes,
        });
        extra_columns.push(columns);
    }

    let mut edges = Vec::with_capacity(raw.links.len());
    for l in &raw.links {
        let endpoint = |key: &str| {
            index
                .get(key)
                .copied()
                .ok_or_else(|| IoError::SchemaMismatch(format!("link {:?}–{:?} references unknown node {key:?}", l.source, l.target)))
        };
        edges.push((endpoint(&l.source)?, endpoint(&l.target)?));
    }

    let keys: Vec<String> = raw.nodes.iter().map(|n| n.id.clone()).collect();
    let names = contests.iter().map(|c| c.name.clone()).collect();
    let graph = DualGraph::new(nodes, &edges, names).map_err(|e| describe_graph_error(e, &keys))?;
    Ok(LoadedGraph {
        graph,
        keys,
        unit_level: raw.metadata.unit_level,
        contests,
        extra_columns,
        digest: None,
    })
}

fn describe_graph_error(e: GraphError, keys: &[String]) -> IoError {
    let key = |i: usize| keys.get(i).map_or_else(|| format!("#{i}"), |k| format!("{k:?}"));
    let detail = match &e {
        GraphError::DisconnectedGraph { node } => format!("node {} is unreachable from node {}", key(*node), key(0)),
        GraphError::DuplicateEdge(a, b) => format!("duplicate link {}–{}", key(*a), key(*b)),
        GraphError::SelfLoop(a) => format!("self-loop on node {}", key(*a)),
        GraphError::NegativeAttribute { node, field } => format!("node {} has negative {field}", key(*node)),
        other => other.to_string(),
    };
    IoError::Graph { source: e, detail }
}

pub fn to_raw(loaded: &LoadedGraph) -> RawGraphFile {
    let graph = &loaded.graph;
    let nodes = graph
        .nodes()
        .iter()
        .enumerate()
        .map(|(i, n)| {
            let mut columns = loaded.extra_columns.get(i).cloned().unwrap_or_default();
            for (c, pair) in loaded.contests.iter().zip(&n.votes) {
                columns.insert(c.dem_column.clone(), votes_to_json(&pair.dem));
                columns.insert(c.rep_column.clone(), votes_to_json(&pair.rep));
            }
            RawNode {
                id: loaded.keys[i].clone(),
                population: n.population,
                vap: n.vap,
                county: n.county.clone(),
                columns,
            }
        })
        .collect();
    let links = graph
        .edges()
        .iter()
        .map(|&(a, b)| RawLink {
            source: loaded.keys[a].clone(),
            target: loaded.keys[b].clone(),
        })
        .collect();
    RawGraphFile {
        schema_version: SCHEMA_VERSION,
        metadata: Metadata {
            unit_level: loaded.unit_level,
            contests: loaded.contests.clone(),
        },
        nodes,
        links,
    }
}

pub fn save_graph(path: &Path, loaded: &LoadedGraph) -> Result<(), IoError> {
    let text = serde_json::to_string_pretty(&to_raw(loaded)).expect("graph file serializes");
    fs::write(path, text + "\n").map_err(|e| IoError::io(path, e))
}

/// Wraps a graph built in memory, naming nodes `n0, n1, …`.
pub fn from_graph(graph: DualGraph, contests: Vec<ContestSpec>, unit_level: UnitLevel) -> LoadedGraph {
    let n = graph.node_count();
    LoadedGraph {
        keys: (0..n).map(|i| format!("n{i}")).collect(),
        graph,
        unit_level,
        contests,
        extra_columns: vec![BTreeMap::new(); n],
        digest: None,
    }
}

fn votes_to_json(v: &Votes) -> Value {
    if v.denom().is_one() {
        if let Some(i) = v.numer().to_i64() {
            return Value::from(i);
        }
        return Value::String(v.numer().to_string());
    }
    Value::String(format!("{}/{}", v.numer(), v.denom()))
}

pub fn parse_votes(v: &Value) -> Result<Votes, String> {
    match v {
        Value::Number(n) => parse_decimal(&n.to_string()),
        Value::String(s) => match s.split_once('/') {
            Some((p, q)) => {
                let p: BigInt = p.trim().parse().map_err(|_| format!("bad numerator in {s:?}"))?;
                let q: BigInt = q.trim().parse().map_err(|_| format!("bad denominator in {s:?}"))?;
                if q.is_zero() {
                    return Err(format!("zero denominator in {s:?}"));
                }
                Ok(BigRational::new(p, q))
            }
            None => parse_decimal(s.trim()),
        },
        other => Err(format!("expected a number, found {other}")),
    }
}

/// Exact value of a decimal literal such as `-12.5e-3`.
pub fn parse_decimal(s: &str) -> Result<BigRational, String> {
    let bad = || format!("invalid decimal {s:?}");
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (s, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let all = format!("{int_part}{frac_part}");
    let mut numer: BigInt = if all.is_empty() { BigInt::zero() } else { all.parse().map_err(|_| bad())? };
    if negative {
        numer = -numer;
    }
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10);
    Ok(if scale >= 0 {
        BigRational::from_integer(numer * ten.pow(scale as u32))
    } else {
        BigRational::new(numer, ten.pow((-scale) as u32))
    })
}

/// Node-link JSON object for a plan: `{"k": …, "assignment": {key: district}}`.
pub fn plan_to_json(keys: &[String], district_of: &[u32], k: u32) -> Value {
    let mut assignment = Map::new();
    for (key, &d) in keys.iter().zip(district_of) {
        assignment.insert(key.clone(), Value::from(d));
    }
    serde_json::json!({ "k": k, "assignment": assignment })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::CityState;

    const MINIMAL: &str = r#"{
        "schema_version": 1,
        "metadata": {"unit_level": "precinct", "contests": [{"name": "X", "dem": "XD", "rep": "XR"}]},
        "nodes": [
            {"id": "a", "population": 3, "vap": 2, "county": "C", "XD": 1.5, "XR": "7/3", "note": "keep"},
            {"id": "b", "population": 4, "vap": 4, "county": "C", "XD": 2, "XR": "0.25"}
        ],
        "links": [{"source": "a", "target": "b"}]
    }"#;

    fn frac(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn minimal_file() {
        let g = parse_graph(MINIMAL.as_bytes(), None).unwrap();
        assert_eq!(g.graph.node_count(), 2);
        assert_eq!(g.graph.total_population(), 7);
        assert_eq!(g.graph.node(0).votes[0].dem, frac(3, 2));
        assert_eq!(g.graph.node(0).votes[0].rep, frac(7, 3));
        assert_eq!(g.graph.node(1).votes[0].rep, frac(1, 4));
        assert_eq!(g.extra_columns[0]["note"], Value::from("keep"));
    }

    #[test]
    fn round_trip_is_identity() {
        let g = parse_graph(MINIMAL.as_bytes(), None).unwrap();
        let text = serde_json::to_vec(&to_raw(&g)).unwrap();
        let again = parse_graph(&text, None).unwrap();
        assert!(g.same_content(&again));
        assert_eq!(to_raw(&g), to_raw(&again));

        let city = from_graph(
            CityState::desk_scale().build().unwrap(),
            vec![ContestSpec {
                name: "SYNTH".into(),
                dem_column: "D".into(),
                rep_column: "R".into(),
            }],
            UnitLevel::Block,
        );
        let again = parse_graph(&serde_json::to_vec(&to_raw(&city)).unwrap(), None).unwrap();
        assert!(city.same_content(&again));
    }

    #[test]
    fn unknown_contest_column() {
        let spec = [ContestSpec {
            name: "Y".into(),
            dem_column: "YD".into(),
            rep_column: "YR".into(),
        }];
        let err = parse_graph(MINIMAL.as_bytes(), Some(&spec)).unwrap_err();
        assert!(matches!(err, IoError::SchemaMismatch(ref m) if m.contains("YD")), "{err}");
    }

    #[test]
    fn schema_and_parse_errors() {
        let wrong = MINIMAL.replace("\"schema_version\": 1", "\"schema_version\": 9");
        assert!(matches!(parse_graph(wrong.as_bytes(), None), Err(IoError::SchemaMismatch(_))));
        assert!(matches!(parse_graph(b"{not json", None), Err(IoError::Parse { .. })));
        let dangling = MINIMAL.replace("\"target\": \"b\"", "\"target\": \"zz\"");
        assert!(matches!(parse_graph(dangling.as_bytes(), None), Err(IoError::SchemaMismatch(ref m)) if m.contains("zz")));
    }

    #[test]
    fn disconnected_names_the_node() {
        let text = MINIMAL.replace(r#"[{"source": "a", "target": "b"}]"#, "[]");
        match parse_graph(text.as_bytes(), None).unwrap_err() {
            IoError::Graph { source, detail } => {
                assert_eq!(source, GraphError::DisconnectedGraph { node: 1 });
                assert!(detail.contains("\"b\""), "{detail}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn decimals() {
        assert_eq!(parse_decimal("12.5").unwrap(), frac(25, 2));
        assert_eq!(parse_decimal("-0.125").unwrap(), frac(-1, 8));
        assert_eq!(parse_decimal("1e3").unwrap(), frac(1000, 1));
        assert_eq!(parse_decimal("2.5E-1").unwrap(), frac(1, 4));
        assert_eq!(parse_decimal(".5").unwrap(), frac(1, 2));
        assert!(parse_decimal("1.2.3").is_err());
        assert!(parse_decimal("").is_err());
        assert!(parse_decimal("abc").is_err());
    }
}
