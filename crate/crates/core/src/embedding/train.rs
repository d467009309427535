use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{IndexedCorpus, TermId, Vocabulary};
use crate::error::{Error, Result};
use crate::util;

use super::objective::{row, sample_gradient, Component, ObjectiveTerms, Sample, SampleGrad};
use super::EmbeddingSpace;

// Offsets the sampling stream from the initialization stream.
const SAMPLING_STREAM: u64 = 0x005E_ED0F_5A3F_11E5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub dimension: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    /// Initial step size; decays linearly to `learning_rate * 1e-4`.
    pub learning_rate: f64,
    pub kappa_init: f64,
    pub kappa_max: f64,
    /// Train the category component at all.
    pub category_context: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dimension: 100,
            window: 5,
            negatives: 5,
            epochs: 10,
            learning_rate: 0.025,
            kappa_init: 1.0,
            kappa_max: 50.0,
            category_context: true,
            seed: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("embedding: {m}")));
        if self.dimension == 0 || self.window == 0 || self.epochs == 0 {
            return bad("dimension, window and epochs must be positive");
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be a finite non-negative number");
        }
        if !(self.kappa_max > 0.0 && (0.0..=self.kappa_max).contains(&self.kappa_init)) {
            return bad("need 0 <= kappa_init <= kappa_max and kappa_max > 0");
        }
        Ok(())
    }
}

/// Mean per-sample log-likelihood of each component over one epoch,
/// measured before each update.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean: ObjectiveTerms,
    pub samples: [usize; 3],
}

impl EpochStats {
    /// Mean log-likelihood over all samples of all components.
    pub fn overall(&self) -> f64 {
        let n: usize = self.samples.iter().sum();
        if n == 0 {
            return 0.0;
        }
        let total: f64 = Component::ALL
            .iter()
            .zip(self.samples)
            .map(|(&c, k)| self.mean.get(c) * k as f64)
            .sum();
        total / n as f64
    }
}

pub fn train_embeddings(
    corpus: &IndexedCorpus,
    vocab: &Vocabulary,
    topic_terms: &[Vec<TermId>],
    config: &TrainConfig,
) -> Result<EmbeddingSpace> {
    train_embeddings_observed(corpus, vocab, topic_terms, config, |_, _| {})
}

/// Single-threaded negative-sampling SGD. `observer` sees the space and the
/// epoch statistics after every epoch. With a fixed seed the result is
/// bit-reproducible.
pub fn train_embeddings_observed(
    corpus: &IndexedCorpus,
    vocab: &Vocabulary,
    topic_terms: &[Vec<TermId>],
    config: &TrainConfig,
    mut observer: impl FnMut(&EmbeddingSpace, &EpochStats),
) -> Result<EmbeddingSpace> {
    config.validate()?;
    if vocab.is_empty() {
        return Err(Error::Config("cannot train embeddings over an empty vocabulary".into()));
    }
    for terms in topic_terms {
        if terms.is_empty() {
            return Err(Error::Config("every category needs at least one topic term".into()));
        }
        if let Some(t) = terms.iter().find(|t| t.index() >= vocab.len()) {
            return Err(Error::UnknownTerm(format!("#{}", t.0)));
        }
    }

    let mut space = EmbeddingSpace::random(
        vocab.len(),
        corpus.len(),
        topic_terms.len(),
        config.dimension,
        config.kappa_init,
        config.seed,
    );
    let mut trainer = Trainer::new(corpus, vocab, topic_terms, config)?;
    for epoch in 0..config.epochs {
        let stats = trainer.epoch(&mut space, epoch)?;
        observer(&space, &stats);
    }
    Ok(space)
}

struct Trainer<'a> {
    corpus: &'a IndexedCorpus,
    topic_terms: &'a [Vec<TermId>],
    config: &'a TrainConfig,
    unigram: WeightedIndex<f64>,
    rng: ChaCha8Rng,
    grad: SampleGrad,
    sample: Sample,
    total_steps: f64,
    step: f64,
    ll_sum: ObjectiveTerms,
    counts: [usize; 3],
}

impl<'a> Trainer<'a> {
    fn new(
        corpus: &'a IndexedCorpus,
        vocab: &Vocabulary,
        topic_terms: &'a [Vec<TermId>],
        config: &'a TrainConfig,
    ) -> Result<Self> {
        let weights: Vec<f64> = vocab.ids().map(|w| (vocab.frequency(w) as f64).powf(0.75)).collect();
        let unigram =
            WeightedIndex::new(&weights).map_err(|e| Error::Config(format!("negative sampling table: {e}")))?;
        let tokens: usize = corpus
            .docs()
            .iter()
            .map(|d| d.tokens().iter().filter(|t| t.is_some()).count())
            .sum();
        Ok(Trainer {
            corpus,
            topic_terms,
            config,
            unigram,
            rng: ChaCha8Rng::seed_from_u64(config.seed ^ SAMPLING_STREAM),
            grad: SampleGrad::default(),
            sample: Sample {
                term: TermId(0),
                positive: 0,
                negatives: Vec::with_capacity(config.negatives),
            },
            total_steps: (tokens * config.epochs).max(1) as f64,
            step: 0.0,
            ll_sum: ObjectiveTerms::default(),
            counts: [0; 3],
        })
    }

    fn learning_rate(&self) -> f64 {
        let lr = self.config.learning_rate;
        (lr * (1.0 - self.step / self.total_steps)).max(lr * 1e-4)
    }

    fn epoch(&mut self, space: &mut EmbeddingSpace, epoch: usize) -> Result<EpochStats> {
        self.ll_sum = ObjectiveTerms::default();
        self.counts = [0; 3];

        // Category positives are re-drawn each epoch and spread evenly over
        // the token stream.
        let mut category_queue: Vec<(TermId, usize)> = Vec::new();
        if self.config.category_context {
            for (c, terms) in self.topic_terms.iter().enumerate() {
                category_queue.extend(terms.iter().map(|&t| (t, c)));
            }
            category_queue.shuffle(&mut self.rng);
        }
        let epoch_tokens = (self.total_steps / self.config.epochs as f64) as usize;
        let stride = if category_queue.is_empty() {
            usize::MAX
        } else {
            (epoch_tokens / category_queue.len()).max(1)
        };
        let mut next_category = 0;
        let mut seen = 0usize;

        let corpus = self.corpus;
        let window = self.config.window;
        for (d, doc) in corpus.docs().iter().enumerate() {
            let tokens = doc.tokens();
            for (i, center) in tokens.iter().enumerate() {
                let Some(w) = *center else { continue };
                let lr = self.learning_rate();
                let lo = i.saturating_sub(window);
                let hi = (i + window).min(tokens.len() - 1);
                for (j, token) in tokens.iter().enumerate().take(hi + 1).skip(lo) {
                    if j == i {
                        continue;
                    }
                    if let Some(ctx) = *token {
                        self.draw_term_negatives(w, ctx.index());
                        self.apply(space, Component::SkipGram, lr)?;
                    }
                }
                self.draw_uniform_negatives(w, d, corpus.len());
                self.apply(space, Component::Document, lr)?;

                seen += 1;
                self.step += 1.0;
                if seen.is_multiple_of(stride) && next_category < category_queue.len() {
                    let (t, c) = category_queue[next_category];
                    next_category += 1;
                    self.draw_uniform_negatives(t, c, self.topic_terms.len());
                    self.apply(space, Component::Category, lr)?;
                }
            }
        }
        let lr = self.learning_rate();
        while next_category < category_queue.len() {
            let (t, c) = category_queue[next_category];
            next_category += 1;
            self.draw_uniform_negatives(t, c, self.topic_terms.len());
            self.apply(space, Component::Category, lr)?;
        }

        let mut mean = ObjectiveTerms::default();
        for (k, c) in Component::ALL.into_iter().enumerate() {
            if self.counts[k] > 0 {
                *mean.get_mut(c) = self.ll_sum.get(c) / self.counts[k] as f64;
            }
        }
        Ok(EpochStats {
            epoch,
            mean,
            samples: self.counts,
        })
    }

    fn draw_term_negatives(&mut self, term: TermId, positive: usize) {
        self.sample.term = term;
        self.sample.positive = positive;
        self.sample.negatives.clear();
        for _ in 0..self.config.negatives {
            let z = self.unigram.sample(&mut self.rng);
            if z != positive {
                self.sample.negatives.push(z);
            }
        }
    }

    /// Negatives drawn uniformly from the other entries of a table of `n`.
    fn draw_uniform_negatives(&mut self, term: TermId, positive: usize, n: usize) {
        self.sample.term = term;
        self.sample.positive = positive;
        self.sample.negatives.clear();
        if n < 2 {
            return;
        }
        for _ in 0..self.config.negatives {
            let mut z = self.rng.random_range(0..n - 1);
            if z >= positive {
                z += 1;
            }
            self.sample.negatives.push(z);
        }
    }

    /// One ascent step on the current sample, followed by projection back
    /// onto the constraint set.
    fn apply(&mut self, space: &mut EmbeddingSpace, component: Component, lr: f64) -> Result<()> {
        let ll = sample_gradient(space, component, &self.sample, &mut self.grad);
        if !ll.is_finite() {
            return Err(Error::NonFiniteLoss {
                component: component.name(),
                term: self.sample.term.0,
                context: self.sample.positive,
            });
        }
        let k = component_slot(component);
        *self.ll_sum.get_mut(component) += ll;
        self.counts[k] += 1;
        if lr == 0.0 {
            return Ok(());
        }

        let dim = space.dim;
        let table = space.table_mut(component);
        let contexts = std::iter::once(self.sample.positive).chain(self.sample.negatives.iter().copied());
        for (k, ctx) in contexts.enumerate() {
            let z = &mut table[ctx * dim..(ctx + 1) * dim];
            for (x, g) in z.iter_mut().zip(&self.grad.contexts[k * dim..(k + 1) * dim]) {
                *x += lr * g;
            }
            util::normalize(z);
        }
        let w = self.sample.term.index();
        let u = &mut space.center[w * dim..(w + 1) * dim];
        for (x, g) in u.iter_mut().zip(&self.grad.center) {
            *x += lr * g;
        }
        util::normalize(u);
        let kappa = &mut space.kappa[w];
        *kappa = (*kappa + lr * self.grad.kappa).clamp(0.0, self.config.kappa_max);
        debug_assert!(row(&space.center, dim, w).iter().all(|x| x.is_finite()));
        Ok(())
    }
}

fn component_slot(component: Component) -> usize {
    match component {
        Component::SkipGram => 0,
        Component::Document => 1,
        Component::Category => 2,
    }
}
