//! Joint spherical embedding of terms, documents and categories.
//!
//! Every term has a center vector `u`, a context vector `v` and a
//! concentration `κ ≥ 0`; every document and every category has one vector.
//! All vectors live on the unit sphere. The likelihood of a context `z`
//! given a center term `w` is a von Mises-Fisher density whose logit is
//! `κ_w · cos(u_w, z)`, trained with negative sampling (see [`objective`]).

mod checkpoint;
pub mod objective;
mod train;

pub use checkpoint::{read_checkpoint, write_checkpoint, write_text_export};
pub use objective::{component_gradient, objective_terms, Component, Gradient, ObjectiveTerms, Sample, SampleBatch};
pub use train::{train_embeddings, train_embeddings_observed, EpochStats, TrainConfig};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::corpus::TermId;
use crate::error::{Error, Result};
use crate::util;

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingSpace {
    pub(crate) dim: usize,
    pub(crate) center: Vec<f64>,
    pub(crate) context: Vec<f64>,
    pub(crate) docs: Vec<f64>,
    pub(crate) categories: Vec<f64>,
    pub(crate) kappa: Vec<f64>,
}

impl EmbeddingSpace {
    /// Uniformly random unit directions (normalized Gaussian draws) for every
    /// vector family, drawn in the order center, context, document,
    /// category. All concentrations start at `kappa_init`.
    pub fn random(n_terms: usize, n_docs: usize, n_categories: usize, dim: usize, kappa_init: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut family = |count: usize| {
            let mut data: Vec<f64> = (0..count * dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            data.chunks_mut(dim.max(1)).for_each(util::normalize);
            data
        };
        let center = family(n_terms);
        let context = family(n_terms);
        let docs = family(n_docs);
        let categories = family(n_categories);
        EmbeddingSpace {
            dim,
            center,
            context,
            docs,
            categories,
            kappa: vec![kappa_init; n_terms],
        }
    }

    /// Assembles a space from raw blocks. Vectors are used as given (not
    /// normalized), which is what gradient checks need.
    pub fn from_parts(
        dim: usize,
        center: Vec<f64>,
        context: Vec<f64>,
        docs: Vec<f64>,
        categories: Vec<f64>,
        kappa: Vec<f64>,
    ) -> Result<Self> {
        let n_terms = kappa.len();
        let ok = dim > 0
            && center.len() == n_terms * dim
            && context.len() == n_terms * dim
            && docs.len().is_multiple_of(dim)
            && categories.len().is_multiple_of(dim);
        if !ok {
            return Err(Error::Format("embedding blocks do not match the dimension".into()));
        }
        Ok(EmbeddingSpace {
            dim,
            center,
            context,
            docs,
            categories,
            kappa,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_terms(&self) -> usize {
        self.kappa.len()
    }

    pub fn num_docs(&self) -> usize {
        self.docs.len() / self.dim
    }

    pub fn num_categories(&self) -> usize {
        self.categories.len() / self.dim
    }

    pub fn center(&self, w: TermId) -> &[f64] {
        row(&self.center, self.dim, w.index())
    }

    pub fn context(&self, w: TermId) -> &[f64] {
        row(&self.context, self.dim, w.index())
    }

    pub fn doc(&self, d: usize) -> &[f64] {
        row(&self.docs, self.dim, d)
    }

    pub fn category(&self, c: usize) -> &[f64] {
        row(&self.categories, self.dim, c)
    }

    pub fn kappa(&self, w: TermId) -> f64 {
        self.kappa[w.index()]
    }

    pub fn kappas(&self) -> &[f64] {
        &self.kappa
    }

    pub(crate) fn table(&self, component: Component) -> &[f64] {
        match component {
            Component::SkipGram => &self.context,
            Component::Document => &self.docs,
            Component::Category => &self.categories,
        }
    }

    pub(crate) fn table_mut(&mut self, component: Component) -> &mut [f64] {
        match component {
            Component::SkipGram => &mut self.context,
            Component::Document => &mut self.docs,
            Component::Category => &mut self.categories,
        }
    }

    /// Embedding similarity `cos(u_w, u_t)`.
    pub fn sim_emb(&self, w: TermId, t: TermId) -> Result<f64> {
        let n = self.num_terms();
        for id in [w, t] {
            if id.index() >= n {
                return Err(Error::UnknownTerm(format!("#{}", id.0)));
            }
        }
        if w == t {
            return Ok(1.0);
        }
        Ok(util::cosine(self.center(w), self.center(t)).unwrap_or(0.0))
    }

    /// Largest deviation from unit norm over all four vector families.
    pub fn max_norm_error(&self) -> f64 {
        [&self.center, &self.context, &self.docs, &self.categories]
            .into_iter()
            .flat_map(|block| block.chunks(self.dim))
            .map(|v| (util::norm(v) - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn kappa_within(&self, kappa_max: f64) -> bool {
        self.kappa.iter().all(|&k| (0.0..=kappa_max).contains(&k))
    }
}

#[inline]
fn row(block: &[f64], dim: usize, i: usize) -> &[f64] {
    &block[i * dim..(i + 1) * dim]
}
