//! Optional TOML configuration file. Flags always override file values;
//! unknown keys are rejected.

use convkit::{Error, Result};
use serde::Deserialize;
use std::path::Path;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub lr: Option<f64>,
    pub epochs: Option<usize>,
    pub batch: Option<usize>,
    pub test_fraction: Option<f64>,
    pub image_size: Option<usize>,
    pub per_class: Option<usize>,
    pub rotation: Option<f64>,
    pub translation_fraction: Option<f64>,
    pub lighting: Option<f64>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(FileConfig::default()),
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    Error::usage(format!("cannot read config {}: {e}", path.display()))
                })?;
                toml::from_str(&text)
                    .map_err(|e| Error::usage(format!("bad config {}: {e}", path.display())))
            }
        }
    }
}
