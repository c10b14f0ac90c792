//! Declarative experiment configs (TOML) and their archived resolved form.

use std::fs;
use std::path::{Path, PathBuf};

use ifelab_core::dgp::DgpSpec;
use ifelab_core::estimator::EstimatorSpec;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorEntry {
    pub name: String,
    #[serde(flatten)]
    pub spec: EstimatorSpec,
}

impl EstimatorEntry {
    pub fn new(spec: EstimatorSpec) -> Self {
        Self {
            name: spec.label().to_string(),
            spec,
        }
    }
}

pub(crate) fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub replications: usize,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub dgp: DgpSpec,
    pub estimators: Vec<EstimatorEntry>,
}

impl ExperimentConfig {
    pub fn new(dgp: DgpSpec, estimators: Vec<EstimatorEntry>, replications: usize) -> Self {
        Self {
            replications,
            workers: default_workers(),
            output_dir: default_output_dir(),
            dgp,
            estimators,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(HarnessError::Config("replications must be >= 1".into()));
        }
        if self.estimators.is_empty() {
            return Err(HarnessError::Config("at least one estimator is required".into()));
        }
        self.dgp.validate()?;
        Ok(())
    }
}

pub fn load_config<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    Ok(toml::from_str(&text)?)
}

/// Writes `config.resolved` into `dir` and returns the SHA-256 of its text.
pub fn archive_config<T: Serialize>(config: &T, dir: &Path) -> Result<String> {
    let text = toml::to_string(config)?;
    fs::create_dir_all(dir)?;
    fs::write(dir.join("config.resolved"), &text)?;
    Ok(config_hash(&text))
}

pub fn config_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
replications = 10
workers = 2
output_dir = "out/het"

[dgp]
design = "het"
n = 20
t = 10
n1 = 10
t0 = 5
k0 = 1
k_alpha = 2
structural_seed = 1

[[estimators]]
name = "IFE"
method = "ife"
k = 3

[[estimators]]
name = "GSC"
method = "gsc"
k = 1

[[estimators]]
name = "SC"
method = "sc"

[[estimators]]
name = "SDiD"
method = "sdid"
"#;

    #[test]
    fn parses_and_round_trips() {
        let cfg: ExperimentConfig = toml::from_str(SAMPLE).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.estimators.len(), 4);
        assert_eq!(cfg.estimators[0].spec, EstimatorSpec::ife(3));
        assert_eq!(cfg.dgp.noise_sd, 1.0);
        let text = toml::to_string(&cfg).unwrap();
        let back: ExperimentConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn rejects_empty() {
        let mut cfg: ExperimentConfig = toml::from_str(SAMPLE).unwrap();
        cfg.replications = 0;
        assert!(cfg.validate().is_err());
        cfg.replications = 1;
        cfg.estimators.clear();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn hash_is_stable() {
        assert_eq!(config_hash("a"), config_hash("a"));
        assert_ne!(config_hash("a"), config_hash("b"));
        assert_eq!(config_hash("").len(), 64);
    }
}
