//! Seed-guided topic term discovery.
//!
//! Given a tokenized corpus, a handful of seed terms and per-mention encoder
//! vectors, the pipeline grows one term set per seed by repeatedly ranking
//! vocabulary terms with three context signals: spherical word embeddings
//! trained on the corpus, averaged encoder representations, and the
//! sentences retrieved for each seed.

#![cfg_attr(test, allow(clippy::excessive_precision))]

pub mod config;
pub mod corpus;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod pipeline;
pub mod plm;
pub mod sentence;
pub mod synthetic;
pub mod util;
pub mod workflow;

pub use error::{Error, Result};
