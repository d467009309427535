//! Negative-sampled surrogate of the three likelihood components.
//!
//! For a center term `w` with positive context `z` and negatives `z'`:
//!
//! ```text
//! ℓ = ln σ(κ_w cos(u_w, z)) + Σ_z' ln σ(−κ_w cos(u_w, z'))
//! ```
//!
//! The context table depends on the component: term context vectors for
//! skip-gram pairs, document vectors for the document component, category
//! vectors for the category component. Gradients are taken with respect to
//! the raw coordinates, so at unit norm they are already tangent to the
//! sphere.

use crate::corpus::TermId;
use crate::util::{self, log_sigmoid, sigmoid};

use super::EmbeddingSpace;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Component {
    SkipGram,
    Document,
    Category,
}

impl Component {
    pub const ALL: [Component; 3] = [Component::SkipGram, Component::Document, Component::Category];

    pub fn name(self) -> &'static str {
        match self {
            Component::SkipGram => "skip-gram",
            Component::Document => "document",
            Component::Category => "category",
        }
    }
}

/// One positive observation with its negatives. `positive` and `negatives`
/// index the component's context table.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub term: TermId,
    pub positive: usize,
    pub negatives: Vec<usize>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SampleBatch {
    pub skipgram: Vec<Sample>,
    pub document: Vec<Sample>,
    pub category: Vec<Sample>,
}

impl SampleBatch {
    pub fn samples(&self, component: Component) -> &[Sample] {
        match component {
            Component::SkipGram => &self.skipgram,
            Component::Document => &self.document,
            Component::Category => &self.category,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ObjectiveTerms {
    pub skipgram: f64,
    pub document: f64,
    pub category: f64,
}

impl ObjectiveTerms {
    pub fn total(&self) -> f64 {
        self.skipgram + self.document + self.category
    }

    pub fn get(&self, component: Component) -> f64 {
        match component {
            Component::SkipGram => self.skipgram,
            Component::Document => self.document,
            Component::Category => self.category,
        }
    }

    pub(crate) fn get_mut(&mut self, component: Component) -> &mut f64 {
        match component {
            Component::SkipGram => &mut self.skipgram,
            Component::Document => &mut self.document,
            Component::Category => &mut self.category,
        }
    }
}

/// The vMF logit `κ_w · cos(u_w, z)` for one (term, context) pair.
pub fn logit(space: &EmbeddingSpace, component: Component, term: TermId, context: usize) -> f64 {
    let u = space.center(term);
    let z = row(space.table(component), space.dim, context);
    space.kappa(term) * util::cosine(u, z).unwrap_or(0.0)
}

pub fn sample_log_likelihood(space: &EmbeddingSpace, component: Component, sample: &Sample) -> f64 {
    let pos = log_sigmoid(logit(space, component, sample.term, sample.positive));
    let neg: f64 = sample
        .negatives
        .iter()
        .map(|&z| log_sigmoid(-logit(space, component, sample.term, z)))
        .sum();
    pos + neg
}

/// Summed log-likelihood estimate of each component over a batch.
pub fn objective_terms(space: &EmbeddingSpace, batch: &SampleBatch) -> ObjectiveTerms {
    let mut out = ObjectiveTerms::default();
    for component in Component::ALL {
        *out.get_mut(component) = batch
            .samples(component)
            .iter()
            .map(|s| sample_log_likelihood(space, component, s))
            .sum();
    }
    out
}

/// Per-sample gradient scratch space. `contexts[k]` belongs to the k-th
/// context of the sample: the positive first, then negatives in order.
#[derive(Clone, Debug, Default)]
pub(crate) struct SampleGrad {
    pub center: Vec<f64>,
    pub contexts: Vec<f64>,
    pub kappa: f64,
}

/// Log-likelihood of one sample and its gradient, written into `grad`.
pub(crate) fn sample_gradient(
    space: &EmbeddingSpace,
    component: Component,
    sample: &Sample,
    grad: &mut SampleGrad,
) -> f64 {
    let dim = space.dim;
    let n_ctx = 1 + sample.negatives.len();
    grad.center.clear();
    grad.center.resize(dim, 0.0);
    grad.contexts.clear();
    grad.contexts.resize(n_ctx * dim, 0.0);
    grad.kappa = 0.0;

    let u = space.center(sample.term);
    let kappa = space.kappa(sample.term);
    let nu = util::norm(u);
    let table = space.table(component);
    let mut ll = 0.0;

    let contexts = std::iter::once((sample.positive, true)).chain(sample.negatives.iter().map(|&z| (z, false)));
    for (k, (ctx, positive)) in contexts.enumerate() {
        let z = row(table, dim, ctx);
        let nz = util::norm(z);
        if nu == 0.0 || nz == 0.0 {
            ll += log_sigmoid(0.0);
            continue;
        }
        let cos = util::dot(u, z) / (nu * nz);
        let s = kappa * cos;
        // d ln σ(±s) / ds
        let g = if positive {
            ll += log_sigmoid(s);
            sigmoid(-s)
        } else {
            ll += log_sigmoid(-s);
            -sigmoid(s)
        };
        grad.kappa += g * cos;
        let gk = g * kappa;
        let gz = &mut grad.contexts[k * dim..(k + 1) * dim];
        for i in 0..dim {
            let uh = u[i] / nu;
            let zh = z[i] / nz;
            grad.center[i] += gk * (zh - cos * uh) / nu;
            gz[i] = gk * (uh - cos * zh) / nz;
        }
    }
    ll
}

/// Dense gradient with the same layout as [`EmbeddingSpace`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradient {
    pub center: Vec<f64>,
    pub context: Vec<f64>,
    pub docs: Vec<f64>,
    pub categories: Vec<f64>,
    pub kappa: Vec<f64>,
}

impl Gradient {
    fn zeros_like(space: &EmbeddingSpace) -> Self {
        Gradient {
            center: vec![0.0; space.center.len()],
            context: vec![0.0; space.context.len()],
            docs: vec![0.0; space.docs.len()],
            categories: vec![0.0; space.categories.len()],
            kappa: vec![0.0; space.kappa.len()],
        }
    }

    fn table_mut(&mut self, component: Component) -> &mut [f64] {
        match component {
            Component::SkipGram => &mut self.context,
            Component::Document => &mut self.docs,
            Component::Category => &mut self.categories,
        }
    }
}

/// Analytic gradient of one component's summed log-likelihood over a batch.
pub fn component_gradient(space: &EmbeddingSpace, batch: &SampleBatch, component: Component) -> Gradient {
    let dim = space.dim;
    let mut out = Gradient::zeros_like(space);
    let mut grad = SampleGrad::default();
    for sample in batch.samples(component) {
        sample_gradient(space, component, sample, &mut grad);
        let w = sample.term.index();
        out.kappa[w] += grad.kappa;
        for (o, g) in out.center[w * dim..(w + 1) * dim].iter_mut().zip(&grad.center) {
            *o += g;
        }
        let table = out.table_mut(component);
        let contexts = std::iter::once(sample.positive).chain(sample.negatives.iter().copied());
        for (k, ctx) in contexts.enumerate() {
            let src = &grad.contexts[k * dim..(k + 1) * dim];
            for (o, g) in table[ctx * dim..(ctx + 1) * dim].iter_mut().zip(src) {
                *o += g;
            }
        }
    }
    out
}

#[inline]
pub(crate) fn row(block: &[f64], dim: usize, i: usize) -> &[f64] {
    &block[i * dim..(i + 1) * dim]
}
