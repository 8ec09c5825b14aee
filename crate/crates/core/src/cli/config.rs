use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::encoder::PretrainConfig;
use crate::engine::{EvalConfig, NluMode, RlConfig};
use crate::error::{Md3Error, Result};
use crate::nlu::NluConfig;
use crate::policy::PolicyConfig;

pub const DATA_DIR_ENV: &str = "MD3_DATA_DIR";
pub const DEFAULT_DATA_DIR: &str = "md3-data";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    /// Only the built-in movie schema is available.
    pub schema: String,
    pub n: usize,
    /// Scripted dialogues generated for NLU training.
    pub dialogues: usize,
    pub dialogue_m: usize,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            schema: "movie".into(),
            n: 2000,
            dialogues: 3000,
            dialogue_m: 32,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServeConfig {
    pub addr: String,
    /// Built web client to host at `/`.
    pub static_dir: Option<PathBuf>,
    pub max_m: usize,
    pub idle_minutes: u64,
}

impl Default for ServeConfig {
    fn default() -> Self {
        ServeConfig {
            addr: "127.0.0.1:8080".into(),
            static_dir: None,
            max_m: 128,
            idle_minutes: 30,
        }
    }
}

/// Input and output locations; anything unset is derived from `data_dir`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub data_dir: Option<PathBuf>,
    pub corpus: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub paths: Paths,
    pub corpus: CorpusConfig,
    pub encoder: PretrainConfig,
    pub nlu: NluConfig,
    pub nlu_mode: NluMode,
    pub rl: RlConfig,
    pub eval: EvalConfig,
    pub policy: PolicyConfig,
    pub serve: ServeConfig,
}

impl RunConfig {
    /// Reads a config file, or the `config` block of a run manifest.
    pub fn load(path: &Path) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_slice(&std::fs::read(path)?)?;
        let is_manifest = value.get("stage").is_some() && value.get("config").is_some();
        let body = if is_manifest {
            value["config"].clone()
        } else {
            value
        };
        serde_json::from_value(body)
            .map_err(|e| Md3Error::InvalidConfig(format!("{}: {e}", path.display())))
    }

    pub fn data_dir(&self) -> PathBuf {
        self.paths.data_dir.clone().unwrap_or_else(|| {
            std::env::var_os(DATA_DIR_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from(DEFAULT_DATA_DIR))
        })
    }

    /// Pins `data_dir` so the config alone reproduces the run.
    pub fn resolve(mut self) -> Self {
        self.paths.data_dir = Some(self.data_dir());
        self
    }

    pub fn corpus_dir(&self) -> PathBuf {
        self.paths
            .corpus
            .clone()
            .unwrap_or_else(|| self.data_dir().join("corpus"))
    }

    pub fn hash(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(serde_json::to_vec(self)?)))
    }

    pub fn validate(&self) -> Result<()> {
        if self.corpus.schema != "movie" {
            return Err(Md3Error::InvalidConfig(format!(
                "unknown schema `{}`",
                self.corpus.schema
            )));
        }
        self.encoder.validate()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_rejected() {
        let err = serde_json::from_str::<RunConfig>(r#"{"seed": 1, "sedd": 2}"#);
        assert!(err.is_err());
        let ok: RunConfig =
            serde_json::from_str(r#"{"seed": 1, "policy": {"mode": "fixed", "K": 0.9}}"#).unwrap();
        assert_eq!(ok.policy.k, 0.9);
    }

    #[test]
    fn round_trips() {
        let c = RunConfig::default();
        let back: RunConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }
}
