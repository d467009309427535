//! The iterative seed-guided loop: train embeddings, rank terms against each
//! category's current term set, retrieve anchor and neighbor sentences,
//! fuse three rank lists by mean reciprocal rank and keep the terms that
//! clear the threshold.

pub mod ranking;
pub mod retrieval;
mod state;

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::corpus::{IndexedCorpus, SentenceRef, TermId, Vocabulary};
use crate::embedding::{train_embeddings_observed, EmbeddingSpace, EpochStats};
use crate::error::{Error, Result};
use crate::plm::TermRepresentations;
use crate::sentence::{SentencePool, SentencePools};

pub use ranking::{
    ensemble_rank, initial_rank, mean_reciprocal_rank, rank_order, rank_positions, update_terms, CategoryRanking,
    EnsembleInputs, RankEntry, Signals, SimilaritySums, UnitVectors,
};
pub use retrieval::{
    anchors_from_counts, count_indicative, expand_neighbors, neighbors_from_counts, retrieve_anchors, SentenceCounts,
};
pub use state::{
    read_run_state, write_run_state, FinalTopic, RunState, ScoredTerm, TopicResult, TopicState, TopicTerm,
};

/// Supporting anchor sentences reported per output term.
const SUPPORT_PER_TERM: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    /// Terms kept by the initial ranking.
    pub tau: usize,
    pub anchor_limit: usize,
    /// Neighbor window `y` on each side of an anchor.
    pub neighbor_window: usize,
    /// Depth of each rank list that earns a non-zero reciprocal rank.
    pub rho: u32,
    /// MRR threshold for keeping a term.
    pub eta: f64,
    pub iterations: usize,
    pub alpha: f64,
    /// Keep a term only in its best category.
    pub exclusive: bool,
    pub signals: Signals,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            tau: 20,
            anchor_limit: 500,
            neighbor_window: 4,
            rho: 20,
            eta: 0.1,
            iterations: 4,
            alpha: 0.2,
            exclusive: true,
            signals: Signals::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.iterations < 1 {
            return bad("N must be ≥ 1".into());
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return bad(format!("eta must lie in (0, 1], got {}", self.eta));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if self.tau == 0 || self.anchor_limit == 0 || self.neighbor_window == 0 || self.rho == 0 {
            return bad("tau, anchor_limit, neighbor_window and rho must be positive".into());
        }
        if !self.signals.embedding && !self.signals.plm {
            return bad("at least one of the embedding and plm signals must stay enabled".into());
        }
        Ok(())
    }
}

/// Everything one iteration produced.
#[derive(Clone, Debug)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Term sets after the initial ranking.
    pub initial: Vec<Vec<TermId>>,
    pub anchors: Vec<Vec<SentenceRef>>,
    pub neighbors: Vec<Vec<SentenceRef>>,
    pub rankings: Vec<CategoryRanking>,
    /// Term sets after the MRR update, each led by its seed.
    pub terms: Vec<Vec<TermId>>,
}

pub struct Pipeline<'a> {
    corpus: &'a IndexedCorpus,
    vocab: &'a Vocabulary,
    seeds: Vec<TermId>,
    reps: Option<&'a TermRepresentations>,
    config: &'a RunConfig,
    config_hash: String,
}

impl<'a> Pipeline<'a> {
    /// `seeds` must be distinct vocabulary ids, at least two. When the PLM
    /// signal is on, every seed needs a representation.
    pub fn new(
        corpus: &'a IndexedCorpus,
        vocab: &'a Vocabulary,
        seeds: Vec<TermId>,
        reps: Option<&'a TermRepresentations>,
        config: &'a RunConfig,
    ) -> Result<Self> {
        config.validate()?;
        if seeds.len() < 2 {
            return Err(Error::Seeds("need at least two seeds".into()));
        }
        if seeds.iter().collect::<HashSet<_>>().len() != seeds.len() {
            return Err(Error::Seeds("duplicate seed".into()));
        }
        if let Some(s) = seeds.iter().find(|s| s.index() >= vocab.len()) {
            return Err(Error::UnknownSeed(format!("#{}", s.0)));
        }
        let reps = if config.pipeline.signals.plm {
            let reps = reps.ok_or_else(|| Error::Config("the plm signal needs term representations".into()))?;
            if reps.len() != vocab.len() {
                return Err(Error::Config("term representations do not match the vocabulary".into()));
            }
            for &s in &seeds {
                if reps.get(s).is_none() {
                    return Err(Error::SeedWithoutMentions(vocab.term(s).to_string()));
                }
            }
            let missing = vocab.ids().filter(|&w| reps.get(w).is_none()).count();
            if missing > 0 {
                log::warn!("{missing} vocabulary terms have no encoder mentions; their representation similarity is 0");
            }
            Some(reps)
        } else {
            None
        };
        Ok(Pipeline {
            corpus,
            vocab,
            seeds,
            reps,
            config,
            config_hash: config.hash(),
        })
    }

    pub fn seeds(&self) -> &[TermId] {
        &self.seeds
    }

    pub fn config_hash(&self) -> &str {
        &self.config_hash
    }

    /// All `N` iterations from the seeds alone.
    pub fn run(&self) -> Result<TopicResult> {
        let state = self.run_from(None, |_, _| Ok(()))?;
        Ok(self.result(&state))
    }

    /// Runs the remaining iterations after `resume` (or from scratch) and
    /// returns the final state. `after_iteration` sees each record and the
    /// state it produced, e.g. to checkpoint it.
    pub fn run_from(
        &self,
        resume: Option<RunState>,
        mut after_iteration: impl FnMut(&IterationRecord, &RunState) -> Result<()>,
    ) -> Result<RunState> {
        let (start, mut terms, mut state) = match resume {
            Some(state) => {
                let terms = self.check_resume(&state)?;
                (state.iteration, terms, state)
            }
            None => (
                0,
                self.seeds.iter().map(|&s| vec![s]).collect(),
                RunState::empty(self.config, self.seeds.iter().map(|&s| self.vocab.term(s).to_string())),
            ),
        };
        for iteration in start + 1..=self.config.pipeline.iterations {
            let record = self.iterate(iteration, &terms, |_, _| {})?;
            state = RunState::from_record(&record, self.vocab, &self.seeds, self.config);
            after_iteration(&record, &state)?;
            terms = record.terms;
        }
        Ok(state)
    }

    fn check_resume(&self, state: &RunState) -> Result<Vec<Vec<TermId>>> {
        if state.resume_key != self.config.resume_key() {
            return Err(Error::Config(
                "run state was produced under a different configuration".into(),
            ));
        }
        if state.iteration > self.config.pipeline.iterations {
            return Err(Error::Config(format!(
                "run state is at iteration {} but only {} are configured",
                state.iteration, self.config.pipeline.iterations
            )));
        }
        if state.topics.len() != self.seeds.len()
            || state
                .topics
                .iter()
                .zip(&self.seeds)
                .any(|(t, &s)| t.seed != self.vocab.term(s))
        {
            return Err(Error::Config("run state seeds differ from the configured seeds".into()));
        }
        state
            .topics
            .iter()
            .map(|t| {
                t.terms
                    .iter()
                    .map(|st| {
                        self.vocab
                            .id(&st.term)
                            .ok_or_else(|| Error::UnknownTerm(st.term.clone()))
                    })
                    .collect()
            })
            .collect()
    }

    /// One pass of the loop starting from `terms`. `epoch_observer` sees the
    /// embedding space after every training epoch.
    pub fn iterate(
        &self,
        iteration: usize,
        terms: &[Vec<TermId>],
        epoch_observer: impl FnMut(&EmbeddingSpace, &EpochStats),
    ) -> Result<IterationRecord> {
        let cfg = &self.config.pipeline;
        let space = if cfg.signals.embedding {
            let mut train = self.config.embedding.clone();
            train.seed = train.seed.wrapping_add(iteration as u64 - 1);
            Some(train_embeddings_observed(
                self.corpus,
                self.vocab,
                terms,
                &train,
                epoch_observer,
            )?)
        } else {
            None
        };
        let unit = UnitVectors::new(space.as_ref(), self.reps);
        let n_terms = self.vocab.len();

        let candidates: Vec<Vec<TermId>> = (0..self.seeds.len())
            .map(|i| {
                let others: HashSet<TermId> = self
                    .seeds
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, &s)| s)
                    .collect();
                self.vocab.ids().filter(|w| !others.contains(w)).collect()
            })
            .collect();

        let initial: Vec<Vec<TermId>> = terms
            .par_iter()
            .enumerate()
            .map(|(i, t)| initial_rank(&candidates[i], &unit.sums(t, n_terms), cfg.tau, self.vocab))
            .collect();

        let counts = SentenceCounts::compute(self.corpus, &initial);
        let anchors: Vec<Vec<SentenceRef>> = (0..initial.len())
            .into_par_iter()
            .map(|i| anchors_from_counts(&counts, i, cfg.anchor_limit))
            .collect();
        let neighbors: Vec<Vec<SentenceRef>> = anchors
            .par_iter()
            .enumerate()
            .map(|(i, a)| neighbors_from_counts(&counts, a, i, cfg.neighbor_window))
            .collect();
        for (i, a) in anchors.iter().enumerate() {
            if a.is_empty() {
                log::warn!(
                    "iteration {iteration}: no anchor sentences for `{}`",
                    self.vocab.term(self.seeds[i])
                );
            }
        }
        let pools = SentencePools::new(
            anchors
                .iter()
                .zip(&neighbors)
                .map(|(a, n)| SentencePool::build(self.corpus, a.iter().chain(n).copied()))
                .collect(),
        );

        let rankings: Vec<CategoryRanking> = initial
            .par_iter()
            .enumerate()
            .map(|(i, t)| {
                let sums = unit.sums(t, n_terms);
                let inputs = ranking::EnsembleInputs {
                    vocab: self.vocab,
                    sums: &sums,
                    pools: &pools,
                    bm25: &self.config.bm25,
                    alpha: cfg.alpha,
                    rho: cfg.rho,
                    use_sentences: cfg.signals.sentences,
                };
                ensemble_rank(&candidates[i], i, &inputs)
            })
            .collect();

        let updated = update_terms(&rankings, &self.seeds, cfg.eta, cfg.exclusive, self.vocab);
        Ok(IterationRecord {
            iteration,
            initial,
            anchors,
            neighbors,
            rankings,
            terms: updated,
        })
    }

    /// Final topics: seeds removed, terms by MRR descending, each with up to
    /// three supporting anchors from the last iteration.
    pub fn result(&self, state: &RunState) -> TopicResult {
        let signals = self.config.pipeline.signals;
        let topics = state
            .topics
            .iter()
            .map(|topic| {
                let terms = topic
                    .terms
                    .iter()
                    .filter(|t| t.term != topic.seed)
                    .map(|t| {
                        let id = self.vocab.id(&t.term);
                        let support = topic
                            .anchors
                            .iter()
                            .filter(|&&r| id.is_some_and(|w| self.corpus.sentence(r).contains(&Some(w))))
                            .take(SUPPORT_PER_TERM)
                            .copied()
                            .collect();
                        TopicTerm {
                            term: t.term.clone(),
                            mrr: t.mrr,
                            r_all: t.r_all,
                            r_emb: t.r_emb.filter(|_| signals.embedding),
                            r_plm: t.r_plm.filter(|_| signals.plm),
                            anchors: support,
                        }
                    })
                    .collect();
                FinalTopic {
                    seed: topic.seed.clone(),
                    terms,
                }
            })
            .collect();
        TopicResult {
            config_hash: self.config_hash.clone(),
            iterations: state.iteration,
            topics,
        }
    }
}
