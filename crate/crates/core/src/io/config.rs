//! Election config and region spec files.

use std::fs;
use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use super::IoError;
use crate::region::RegionSpec;
use crate::tally::ContestSpec;

/// `{"contests": [{"name": "PRES16", "dem": "PRES16D", "rep": "PRES16R"}]}`
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElectionConfig {
    pub contests: Vec<ContestSpec>,
}

/// Two regions given as county lists, with the intended population ratio
/// and the district count for the full-graph comparison run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionFile {
    pub regions: [RegionSpec; 2],
    #[serde(default = "default_ratio")]
    pub ratio: (u32, u32),
    #[serde(default)]
    pub k_full: Option<u32>,
}

fn default_ratio() -> (u32, u32) {
    (1, 2)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    let bytes = fs::read(path).map_err(|e| IoError::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| IoError::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let text = serde_json::to_string_pretty(value).expect("value serializes");
    fs::write(path, text + "\n").map_err(|e| IoError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn region_file_defaults() {
        let text = r#"{"regions": [
            {"name": "West", "counties": ["A"], "k": 6},
            {"name": "East", "counties": ["B", "C"], "k": 12}
        ]}"#;
        let f: RegionFile = serde_json::from_str(text).unwrap();
        assert_eq!(f.ratio, (1, 2));
        assert_eq!(f.k_full, None);
        assert_eq!(f.regions[1].counties.len(), 2);
    }

    #[test]
    fn election_config_shape() {
        let c: ElectionConfig =
            serde_json::from_str(r#"{"contests": [{"name": "X", "dem": "XD", "rep": "XR"}]}"#).unwrap();
        assert_eq!(c.contests[0].dem_column, "XD");
    }
}
