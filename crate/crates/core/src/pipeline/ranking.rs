//! Term scoring, rank lists and mean-reciprocal-rank fusion.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::corpus::{TermId, Vocabulary};
use crate::embedding::EmbeddingSpace;
use crate::plm::TermRepresentations;
use crate::sentence::{distinctiveness_from_scores, popularity, sim_sntn_from_parts, Bm25Params, SentencePools};
use crate::util;

/// Which context signals take part in scoring. Disabling one drops its
/// factor from every product score and its single-signal rank list.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Signals {
    pub embedding: bool,
    pub plm: bool,
    pub sentences: bool,
}

impl Default for Signals {
    fn default() -> Self {
        Signals {
            embedding: true,
            plm: true,
            sentences: true,
        }
    }
}

/// Sums of embedding and representation similarity to a term set, for
/// every vocabulary term. `None` marks a disabled signal.
pub struct SimilaritySums {
    pub emb: Option<Vec<f64>>,
    pub plm: Option<Vec<f64>>,
}

/// Unit-normalized term vectors for both similarity signals.
pub struct UnitVectors {
    dim_emb: usize,
    emb: Option<Vec<f64>>,
    dim_plm: usize,
    plm: Option<Vec<Option<Vec<f64>>>>,
}

impl UnitVectors {
    pub fn new(space: Option<&EmbeddingSpace>, reps: Option<&TermRepresentations>) -> Self {
        let (dim_emb, emb) = match space {
            Some(s) => {
                let mut centers = Vec::with_capacity(s.num_terms() * s.dim());
                for w in 0..s.num_terms() {
                    let mut u = s.center(TermId(w as u32)).to_vec();
                    util::normalize(&mut u);
                    centers.extend(u);
                }
                (s.dim(), Some(centers))
            }
            None => (0, None),
        };
        let (dim_plm, plm) = match reps {
            Some(r) => (r.dimension(), Some(r.normalized())),
            None => (0, None),
        };
        UnitVectors {
            dim_emb,
            emb,
            dim_plm,
            plm,
        }
    }

    /// `Σ_{t∈terms} cos(·, t)` for every vocabulary term. Terms without a
    /// representation contribute and receive representation similarity 0.
    pub fn sums(&self, terms: &[TermId], n_terms: usize) -> SimilaritySums {
        let emb = self.emb.as_ref().map(|centers| {
            let d = self.dim_emb;
            let mut total = vec![0.0; d];
            for t in terms {
                for (acc, x) in total.iter_mut().zip(&centers[t.index() * d..(t.index() + 1) * d]) {
                    *acc += x;
                }
            }
            (0..n_terms)
                .map(|w| util::dot(&centers[w * d..(w + 1) * d], &total))
                .collect()
        });
        let plm = self.plm.as_ref().map(|vectors| {
            let mut total = vec![0.0; self.dim_plm];
            for t in terms {
                if let Some(h) = &vectors[t.index()] {
                    for (acc, x) in total.iter_mut().zip(h) {
                        *acc += x;
                    }
                }
            }
            vectors
                .iter()
                .map(|h| h.as_ref().map_or(0.0, |h| util::dot(h, &total)))
                .collect()
        });
        SimilaritySums { emb, plm }
    }
}

impl SimilaritySums {
    /// Product of the enabled sums; the initial ranking score.
    pub fn initial_score(&self, w: TermId) -> f64 {
        let mut s = 1.0;
        if let Some(e) = &self.emb {
            s *= e[w.index()];
        }
        if let Some(p) = &self.plm {
            s *= p[w.index()];
        }
        s
    }
}

/// Descending by score; ties broken by the term string.
pub fn rank_order(candidates: &[TermId], score: impl Fn(TermId) -> f64, vocab: &Vocabulary) -> Vec<TermId> {
    let mut scored: Vec<(f64, TermId)> = candidates.iter().map(|&w| (score(w), w)).collect();
    scored.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap_or(Ordering::Equal)
            .then_with(|| vocab.term(a.1).cmp(vocab.term(b.1)))
    });
    scored.into_iter().map(|(_, w)| w).collect()
}

/// 1-based rank of each candidate when sorted by `scores` descending, ties
/// broken by term string. `scores[k]` belongs to `candidates[k]`.
pub fn rank_positions(candidates: &[TermId], scores: &[f64], vocab: &Vocabulary) -> Vec<u32> {
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(Ordering::Equal)
            .then_with(|| vocab.term(candidates[a]).cmp(vocab.term(candidates[b])))
    });
    let mut ranks = vec![0u32; candidates.len()];
    for (r, k) in order.into_iter().enumerate() {
        ranks[k] = r as u32 + 1;
    }
    ranks
}

/// Top-`tau` candidates by the initial score.
pub fn initial_rank(candidates: &[TermId], sums: &SimilaritySums, tau: usize, vocab: &Vocabulary) -> Vec<TermId> {
    let mut order = rank_order(candidates, |w| sums.initial_score(w), vocab);
    order.truncate(tau);
    order
}

/// Mean of reciprocal ranks, counting ranks beyond `rho` as 0.
pub fn mean_reciprocal_rank(ranks: &[u32], rho: u32) -> f64 {
    if ranks.is_empty() {
        return 0.0;
    }
    let sum: f64 = ranks
        .iter()
        .map(|&r| if r >= 1 && r <= rho { 1.0 / r as f64 } else { 0.0 })
        .sum();
    sum / ranks.len() as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub term: TermId,
    pub score_all: f64,
    pub score_emb: Option<f64>,
    pub score_plm: Option<f64>,
    pub r_all: u32,
    pub r_emb: Option<u32>,
    pub r_plm: Option<u32>,
    pub mrr: f64,
}

/// Rank bundle of one category: one entry per candidate, in candidate
/// order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CategoryRanking {
    pub entries: Vec<RankEntry>,
}

impl CategoryRanking {
    pub fn get(&self, w: TermId) -> Option<&RankEntry> {
        self.entries.iter().find(|e| e.term == w)
    }
}

pub struct EnsembleInputs<'a> {
    pub vocab: &'a Vocabulary,
    pub sums: &'a SimilaritySums,
    pub pools: &'a SentencePools,
    pub bm25: &'a Bm25Params,
    pub alpha: f64,
    pub rho: u32,
    pub use_sentences: bool,
}

/// `sim_Sntn(w, c_i)` for every candidate, computed in one pass.
pub fn sentence_scores(
    candidates: &[TermId],
    i: usize,
    pools: &SentencePools,
    bm25: &Bm25Params,
    alpha: f64,
) -> Vec<f64> {
    candidates
        .iter()
        .map(|&w| {
            let pop = popularity(w, pools.pool(i));
            if pop == 0.0 {
                return 0.0;
            }
            let dist = distinctiveness_from_scores(&pools.bm25_all(w, bm25), i);
            sim_sntn_from_parts(pop, dist, alpha)
        })
        .collect()
}

/// Builds the All / Emb / PLM rank lists for category `i` and fuses them.
pub fn ensemble_rank(candidates: &[TermId], i: usize, inp: &EnsembleInputs<'_>) -> CategoryRanking {
    let sntn = inp
        .use_sentences
        .then(|| sentence_scores(candidates, i, inp.pools, inp.bm25, inp.alpha));
    let all_scores: Vec<f64> = candidates
        .iter()
        .enumerate()
        .map(|(k, &w)| inp.sums.initial_score(w) * sntn.as_ref().map_or(1.0, |s| s[k]))
        .collect();

    let r_all = rank_positions(candidates, &all_scores, inp.vocab);
    let emb_scores = inp.sums.emb.as_ref();
    let plm_scores = inp.sums.plm.as_ref();
    let by_term = |table: &Vec<f64>| -> Vec<f64> { candidates.iter().map(|w| table[w.index()]).collect() };
    let r_emb = emb_scores.map(|e| rank_positions(candidates, &by_term(e), inp.vocab));
    let r_plm = plm_scores.map(|p| rank_positions(candidates, &by_term(p), inp.vocab));

    let entries = candidates
        .iter()
        .enumerate()
        .map(|(k, &w)| {
            let mut ranks = vec![r_all[k]];
            ranks.extend(r_emb.as_ref().map(|r| r[k]));
            ranks.extend(r_plm.as_ref().map(|r| r[k]));
            RankEntry {
                term: w,
                score_all: all_scores[k],
                score_emb: emb_scores.map(|e| e[w.index()]),
                score_plm: plm_scores.map(|p| p[w.index()]),
                r_all: r_all[k],
                r_emb: r_emb.as_ref().map(|r| r[k]),
                r_plm: r_plm.as_ref().map(|r| r[k]),
                mrr: mean_reciprocal_rank(&ranks, inp.rho),
            }
        })
        .collect();
    CategoryRanking { entries }
}

/// New term sets: every candidate with `MRR ≥ η`. With `exclusive`, a term
/// qualifying for several categories stays only where its MRR is highest
/// (lowest category index on ties). Each set starts with its seed, then
/// the other terms by MRR descending, then term string.
pub fn update_terms(
    rankings: &[CategoryRanking],
    seeds: &[TermId],
    eta: f64,
    exclusive: bool,
    vocab: &Vocabulary,
) -> Vec<Vec<TermId>> {
    use std::collections::HashMap;

    let mut qualified: Vec<Vec<(f64, TermId)>> = rankings
        .iter()
        .map(|r| {
            r.entries
                .iter()
                .filter(|e| e.mrr >= eta)
                .map(|e| (e.mrr, e.term))
                .collect()
        })
        .collect();

    if exclusive {
        let mut best: HashMap<TermId, (f64, usize)> = HashMap::new();
        for (c, list) in qualified.iter().enumerate() {
            for &(mrr, w) in list {
                best.entry(w)
                    .and_modify(|b| {
                        if mrr > b.0 {
                            *b = (mrr, c);
                        }
                    })
                    .or_insert((mrr, c));
            }
        }
        for (c, list) in qualified.iter_mut().enumerate() {
            list.retain(|(_, w)| best[w].1 == c);
        }
    }

    qualified
        .into_iter()
        .enumerate()
        .map(|(c, mut list)| {
            list.sort_by(|a, b| {
                b.0.partial_cmp(&a.0)
                    .unwrap_or(Ordering::Equal)
                    .then_with(|| vocab.term(a.1).cmp(vocab.term(b.1)))
            });
            let mut terms: Vec<TermId> = list.into_iter().map(|(_, w)| w).collect();
            if let Some(&seed) = seeds.get(c) {
                terms.retain(|&w| w != seed);
                terms.insert(0, seed);
                if terms.len() == 1 {
                    log::warn!("category {c} kept no terms besides its seed");
                }
            }
            terms
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Corpus;

    fn vocab(terms: &[&str]) -> Vocabulary {
        Vocabulary::build(&Corpus::from_tokens(&[vec![terms.to_vec()]]), 1)
    }

    fn entry(term: TermId, mrr: f64) -> RankEntry {
        RankEntry {
            term,
            score_all: 0.0,
            score_emb: None,
            score_plm: None,
            r_all: 1,
            r_emb: None,
            r_plm: None,
            mrr,
        }
    }

    #[test]
    fn mrr_examples() {
        assert_eq!(mean_reciprocal_rank(&[1, 1, 1], 20), 1.0);
        assert!((mean_reciprocal_rank(&[2, 5, 21], 20) - 0.233333).abs() < 1e-6);
        assert!((mean_reciprocal_rank(&[2, 5, 21], 20) - 0.7 / 3.0).abs() < 1e-15);
        assert_eq!(mean_reciprocal_rank(&[21, 40, 99], 20), 0.0);
    }

    #[test]
    fn update_boundary_and_exclusivity() {
        let v = vocab(&["s1", "s2", "x", "y"]);
        let id = |t| v.id(t).unwrap();
        let rankings = vec![
            CategoryRanking {
                entries: vec![entry(id("s1"), 1.0), entry(id("x"), 0.4), entry(id("y"), 0.1)],
            },
            CategoryRanking {
                entries: vec![entry(id("s2"), 1.0), entry(id("x"), 0.3), entry(id("y"), 0.05)],
            },
        ];
        let seeds = [id("s1"), id("s2")];
        let ex = update_terms(&rankings, &seeds, 0.1, true, &v);
        assert_eq!(ex[0], [id("s1"), id("x"), id("y")]);
        assert_eq!(ex[1], [id("s2")]);
        let overlap = update_terms(&rankings, &seeds, 0.1, false, &v);
        assert_eq!(overlap[1], [id("s2"), id("x")]);
    }

    #[test]
    fn exclusivity_tie_goes_to_lowest_category() {
        let v = vocab(&["s1", "s2", "x"]);
        let id = |t| v.id(t).unwrap();
        let rankings = vec![
            CategoryRanking {
                entries: vec![entry(id("x"), 0.5)],
            },
            CategoryRanking {
                entries: vec![entry(id("x"), 0.5)],
            },
        ];
        let t = update_terms(&rankings, &[id("s1"), id("s2")], 0.1, true, &v);
        assert_eq!(t[0], [id("s1"), id("x")]);
        assert_eq!(t[1], [id("s2")]);
    }

    #[test]
    fn rank_order_breaks_ties_by_term() {
        let v = vocab(&["b", "a", "c"]);
        let ids: Vec<TermId> = ["c", "b", "a"].iter().map(|t| v.id(t).unwrap()).collect();
        let order = rank_order(&ids, |_| 0.5, &v);
        let names: Vec<&str> = order.iter().map(|&w| v.term(w)).collect();
        assert_eq!(names, ["a", "b", "c"]);
    }
}
