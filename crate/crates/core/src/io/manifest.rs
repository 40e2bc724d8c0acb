//! Run manifests. A manifest plus the graph file it names is enough to
//! regenerate every CSV of a run byte for byte.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{read_json, write_json};
use super::IoError;
use crate::chain::ChainParams;
use crate::region::RegionSpec;
use crate::seed::SEED_RULE;
use crate::tally::{ContestSpec, TiePolicy};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Run,
    Multiscale,
    Regions,
}

/// One chain run and where its outputs live, relative to the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEntry {
    pub label: String,
    pub dir: String,
    pub k: u32,
    pub stream_tag: u32,
    pub params: ChainParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionSection {
    pub regions: [RegionSpec; 2],
    pub ratio: (u32, u32),
    pub k_full: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub manifest_version: u32,
    pub tool: String,
    pub tool_version: String,
    pub command: Command,
    /// Graph path as given on the command line.
    pub graph_path: String,
    /// SHA-256 of the graph file bytes.
    pub graph_digest: String,
    pub contests: Vec<ContestSpec>,
    pub tie_policy: TiePolicy,
    /// Parameters before per-run `k` and seed derivation.
    pub base_params: ChainParams,
    pub k_list: Vec<u32>,
    pub seed_rule: String,
    pub runs: Vec<RunEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regions: Option<RegionSection>,
}

impl RunManifest {
    pub fn new(
        command: Command,
        graph_path: &str,
        graph_digest: &str,
        contests: Vec<ContestSpec>,
        tie_policy: TiePolicy,
        base_params: ChainParams,
    ) -> Self {
        Self {
            manifest_version: MANIFEST_VERSION,
            tool: env!("CARGO_PKG_NAME").to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command,
            graph_path: graph_path.to_string(),
            graph_digest: graph_digest.to_string(),
            contests,
            tie_policy,
            base_params,
            k_list: Vec::new(),
            seed_rule: SEED_RULE.to_string(),
            runs: Vec::new(),
            regions: None,
        }
    }

    /// Adds a run whose parameters follow the seed rule.
    pub fn push_run(&mut self, label: &str, dir: &str, k: u32, stream_tag: u32) {
        self.runs.push(RunEntry {
            label: label.to_string(),
            dir: dir.to_string(),
            k,
            stream_tag,
            params: self.base_params.for_k(k, stream_tag),
        });
    }

    /// Every run's parameters must equal what the seed rule derives.
    pub fn check(&self) -> Result<(), IoError> {
        if self.manifest_version != MANIFEST_VERSION {
            return Err(IoError::SchemaMismatch(format!(
                "manifest version {} unsupported (expected {MANIFEST_VERSION})",
                self.manifest_version
            )));
        }
        for r in &self.runs {
            if r.params != self.base_params.for_k(r.k, r.stream_tag) {
                return Err(IoError::Invalid(format!(
                    "run {:?}: recorded parameters disagree with the seed rule",
                    r.label
                )));
            }
        }
        Ok(())
    }

    pub fn save(&self, dir: &Path) -> Result<(), IoError> {
        write_json(&dir.join(MANIFEST_FILE), self)
    }

    pub fn load(path: &Path) -> Result<Self, IoError> {
        let m: RunManifest = read_json(path)?;
        m.check()?;
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> RunManifest {
        let mut m = RunManifest::new(
            Command::Multiscale,
            "g.json",
            "abc",
            vec![ContestSpec {
                name: "X".into(),
                dem_column: "XD".into(),
                rep_column: "XR".into(),
            }],
            TiePolicy::CountHalf,
            ChainParams::new(2, 0.02, 10, 7),
        );
        m.k_list = vec![2, 3];
        m.push_run("k_2", "k_2", 2, 0);
        m.push_run("k_3", "k_3", 3, 0);
        m
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let m = sample();
        m.save(dir.path()).unwrap();
        assert_eq!(RunManifest::load(&dir.path().join(MANIFEST_FILE)).unwrap(), m);
    }

    #[test]
    fn derived_seeds_distinct_and_checked() {
        let mut m = sample();
        assert_ne!(m.runs[0].params.rng_seed, m.runs[1].params.rng_seed);
        assert!(m.check().is_ok());
        m.runs[1].params.rng_seed ^= 1;
        assert!(m.check().is_err());
    }
}
