//! TOML defaults. Every key is optional; command-line flags take precedence.
//!
//! ```toml
//! [retrieval]
//! model = "bm25"    # or "lm"
//! k = 1000
//! k1 = 1.2
//! b = 0.75
//! mu = 1000.0
//!
//! [feedback]
//! fb_docs = 10
//! fb_terms = 20
//! lambda = 0.6
//!
//! [decision]
//! top_n = 10
//! tau = 0.5
//!
//! [logistic]
//! learning_rate = 0.1
//! l2 = 0.0001
//! epochs = 2000
//!
//! [deep]
//! embed_dim = 32
//! pair_dim = 64
//! hidden_dim = 64
//! k = 10
//! branch_dropout = 0.5
//! learning_rate = 0.5
//! epochs = 300
//! init_scale = 0.5
//! max_vocab = 20000
//! seed = 42
//!
//! [fusion]
//! aleph = 1000
//! alpha = 0.5
//! k = 1000
//! ```

use std::path::Path;

use anyhow::{Context, Result};
use serde::Deserialize;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub retrieval: RetrievalSection,
    #[serde(default)]
    pub feedback: FeedbackSection,
    #[serde(default)]
    pub decision: DecisionSection,
    #[serde(default)]
    pub logistic: LogisticSection,
    #[serde(default)]
    pub deep: DeepSection,
    #[serde(default)]
    pub fusion: FusionSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetrievalSection {
    pub model: Option<String>,
    pub k: Option<usize>,
    pub k1: Option<f64>,
    pub b: Option<f64>,
    pub mu: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeedbackSection {
    pub fb_docs: Option<usize>,
    pub fb_terms: Option<usize>,
    pub lambda: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecisionSection {
    pub top_n: Option<usize>,
    pub tau: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogisticSection {
    pub learning_rate: Option<f64>,
    pub l2: Option<f64>,
    pub epochs: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeepSection {
    pub embed_dim: Option<usize>,
    pub pair_dim: Option<usize>,
    pub hidden_dim: Option<usize>,
    pub k: Option<usize>,
    pub branch_dropout: Option<f64>,
    pub learning_rate: Option<f64>,
    pub epochs: Option<usize>,
    pub init_scale: Option<f64>,
    pub max_vocab: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FusionSection {
    pub aleph: Option<usize>,
    pub alpha: Option<f64>,
    pub k: Option<usize>,
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Config::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

/// First present value: flag, then config, then built-in default.
pub fn pick<T>(flag: Option<T>, config: Option<T>, default: T) -> T {
    flag.or(config).unwrap_or(default)
}
