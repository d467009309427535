//! The declarative run configuration.
//!
//! ```toml
//! [corpus]
//! min_count = 3
//! train_fraction = 0.6
//! split_seed = 42
//! sentence_delimiter = "."
//!
//! [embedding]
//! dimension = 100
//! window = 5
//!
//! [pipeline]
//! iterations = 4
//! eta = 0.1
//! ```
//!
//! Every section and key is optional; unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::CorpusFormat;
use crate::embedding::TrainConfig;
use crate::error::{Error, Result};
use crate::pipeline::PipelineConfig;
use crate::sentence::Bm25Params;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorpusConfig {
    pub min_count: u64,
    pub train_fraction: f64,
    pub split_seed: u64,
    pub sentence_delimiter: String,
    pub lowercase: bool,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            min_count: 3,
            train_fraction: 0.6,
            split_seed: 42,
            sentence_delimiter: ".".into(),
            lowercase: true,
        }
    }
}

impl CorpusConfig {
    pub fn format(&self) -> CorpusFormat {
        CorpusFormat {
            sentence_delimiter: self.sentence_delimiter.clone(),
            lowercase: self.lowercase,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlmConfig {
    /// Mentions averaged per term at most; 0 means all of them.
    pub mention_cap: usize,
    pub seed: u64,
}

impl Default for PlmConfig {
    fn default() -> Self {
        PlmConfig {
            mention_cap: 1000,
            seed: 7,
        }
    }
}

impl PlmConfig {
    pub fn cap(&self) -> Option<usize> {
        (self.mention_cap > 0).then_some(self.mention_cap)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RuntimeConfig {
    /// Worker threads for scoring; 0 uses every available core.
    pub threads: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsConfig {
    pub corpus: Option<PathBuf>,
    pub seeds: Option<PathBuf>,
    pub bundle: Option<PathBuf>,
    pub mentions: Option<PathBuf>,
    pub gold: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub corpus: CorpusConfig,
    pub embedding: TrainConfig,
    pub plm: PlmConfig,
    pub bm25: Bm25Params,
    pub pipeline: PipelineConfig,
    pub runtime: RuntimeConfig,
    pub paths: PathsConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            e => e,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let f = self.corpus.train_fraction;
        if !(f > 0.0 && f < 1.0) {
            return Err(Error::Config(format!(
                "corpus: train_fraction must lie in (0, 1), got {f}"
            )));
        }
        if self.corpus.sentence_delimiter.is_empty() || self.corpus.sentence_delimiter.contains(char::is_whitespace) {
            return Err(Error::Config(
                "corpus: sentence_delimiter must be a non-empty token".into(),
            ));
        }
        self.embedding.validate()?;
        self.bm25.validate()?;
        self.pipeline.validate()
    }

    /// SHA-256 over the settings that influence results. Paths and the
    /// thread count are left out.
    pub fn hash(&self) -> String {
        digest(&self.hashed_view())
    }

    /// Like [`RunConfig::hash`] but blind to the iteration count, so a run
    /// state can be resumed with a larger `N`.
    pub fn resume_key(&self) -> String {
        let mut view = self.hashed_view();
        view["pipeline"]["iterations"] = serde_json::Value::Null;
        digest(&view)
    }

    fn hashed_view(&self) -> serde_json::Value {
        serde_json::json!({
            "corpus": self.corpus,
            "embedding": self.embedding,
            "plm": self.plm,
            "bm25": self.bm25,
            "pipeline": self.pipeline,
        })
    }
}

fn digest(value: &serde_json::Value) -> String {
    // serde_json maps are ordered, so this is canonical
    hex::encode(Sha256::digest(value.to_string().as_bytes()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = RunConfig::from_toml("").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.embedding.window, 5);
        assert_eq!(c.embedding.dimension, 100);
        assert_eq!(c.pipeline.alpha, 0.2);
        assert_eq!(c.pipeline.tau, 20);
        assert_eq!(c.pipeline.anchor_limit, 500);
        assert_eq!(c.pipeline.neighbor_window, 4);
        assert_eq!(c.pipeline.rho, 20);
        assert_eq!(c.pipeline.eta, 0.1);
        assert_eq!(c.pipeline.iterations, 4);
        c.validate().unwrap();
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::from_toml("[pipeline]\ntaus = 3\n").is_err());
        assert!(RunConfig::from_toml("[pipelines]\n").is_err());
        assert!(RunConfig::from_toml("verbose = true\n").is_err());
    }

    #[test]
    fn toml_round_trip() {
        let mut c = RunConfig::default();
        c.pipeline.eta = 0.25;
        c.embedding.seed = 99;
        c.paths.gold = Some("g.txt".into());
        assert_eq!(RunConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn hash_tracks_results_only() {
        let base = RunConfig::default();
        let mut c = base.clone();
        c.runtime.threads = 3;
        c.paths.out = Some("x".into());
        assert_eq!(c.hash(), base.hash());
        c.pipeline.eta = 0.2;
        assert_ne!(c.hash(), base.hash());

        let mut more = base.clone();
        more.pipeline.iterations = 7;
        assert_ne!(more.hash(), base.hash());
        assert_eq!(more.resume_key(), base.resume_key());
    }

    #[test]
    fn rejects_bad_values() {
        let c = RunConfig::from_toml("[pipeline]\neta = 0.0\n").unwrap();
        assert!(c.validate().is_err());
        let c = RunConfig::from_toml("[corpus]\ntrain_fraction = 1.0\n").unwrap();
        assert!(c.validate().is_err());
    }
}
