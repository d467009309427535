//! Term–category affinity from retrieved topic-indicative sentences.
//!
//! Each category owns a pool of sentences. A term is close to a category
//! when it is popular in that pool (`ln(1 + tf)`) and distinctive for it:
//! its BM25 relevance to the pool, softmaxed against every pool with an
//! extra `1` in the denominator. For BM25 each pool is one pseudo-document
//! and the collection is the set of pools.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::{IndexedCorpus, SentenceRef, TermId};
use crate::error::{Error, Result};

/// Max-shift applied to the softmax once any BM25 score exceeds this.
const SOFTMAX_SHIFT_THRESHOLD: f64 = 30.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 1.2, b: 0.75 }
    }
}

impl Bm25Params {
    pub fn validate(&self) -> Result<()> {
        if !(self.k1 > 0.0 && self.k1.is_finite()) || !(0.0..=1.0).contains(&self.b) {
            return Err(Error::Config(format!(
                "bm25: need k1 > 0 and 0 <= b <= 1, got k1 = {}, b = {}",
                self.k1, self.b
            )));
        }
        Ok(())
    }
}

/// The sentences of one category with cached term frequencies.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SentencePool {
    refs: Vec<SentenceRef>,
    tf: HashMap<TermId, u64>,
    sentence_lengths: Vec<usize>,
    length: u64,
}

impl SentencePool {
    /// Duplicate references are counted once. Lengths count every token,
    /// including out-of-vocabulary ones.
    pub fn build(corpus: &IndexedCorpus, refs: impl IntoIterator<Item = SentenceRef>) -> Self {
        let refs: Vec<SentenceRef> = refs.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
        let mut tf = HashMap::new();
        let mut sentence_lengths = Vec::with_capacity(refs.len());
        for &r in &refs {
            let sentence = corpus.sentence(r);
            sentence_lengths.push(sentence.len());
            for w in sentence.iter().flatten() {
                *tf.entry(*w).or_insert(0) += 1;
            }
        }
        let length = sentence_lengths.iter().sum::<usize>() as u64;
        SentencePool {
            refs,
            tf,
            sentence_lengths,
            length,
        }
    }

    pub fn refs(&self) -> &[SentenceRef] {
        &self.refs
    }

    pub fn len(&self) -> usize {
        self.refs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.refs.is_empty()
    }

    /// `tf(w, Θ) = Σ_θ tf(w, θ)`.
    pub fn tf(&self, w: TermId) -> u64 {
        self.tf.get(&w).copied().unwrap_or(0)
    }

    /// Pool length in tokens.
    pub fn length(&self) -> u64 {
        self.length
    }

    pub fn sentence_lengths(&self) -> &[usize] {
        &self.sentence_lengths
    }

    pub fn terms(&self) -> impl Iterator<Item = TermId> + '_ {
        self.tf.keys().copied()
    }
}

/// One pool per category plus the collection statistics BM25 needs.
#[derive(Clone, Debug, Default)]
pub struct SentencePools {
    pools: Vec<SentencePool>,
    avg_length: f64,
}

impl SentencePools {
    pub fn new(pools: Vec<SentencePool>) -> Self {
        let avg_length = if pools.is_empty() {
            0.0
        } else {
            pools.iter().map(|p| p.length as f64).sum::<f64>() / pools.len() as f64
        };
        SentencePools { pools, avg_length }
    }

    pub fn pools(&self) -> &[SentencePool] {
        &self.pools
    }

    pub fn pool(&self, i: usize) -> &SentencePool {
        &self.pools[i]
    }

    pub fn len(&self) -> usize {
        self.pools.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pools.is_empty()
    }

    pub fn avg_length(&self) -> f64 {
        self.avg_length
    }

    /// Number of pools containing `w`.
    pub fn pool_frequency(&self, w: TermId) -> usize {
        self.pools.iter().filter(|p| p.tf(w) > 0).count()
    }

    /// BM25 score of `w` against every pool.
    pub fn bm25_all(&self, w: TermId, params: &Bm25Params) -> Vec<f64> {
        let n = self.pool_frequency(w);
        (0..self.pools.len()).map(|i| self.bm25_with(w, i, n, params)).collect()
    }

    fn bm25_with(&self, w: TermId, i: usize, pool_freq: usize, params: &Bm25Params) -> f64 {
        let tf = self.pools[i].tf(w) as f64;
        if tf == 0.0 {
            return 0.0;
        }
        let big_n = self.pools.len() as f64;
        let n = pool_freq as f64;
        let idf = (1.0 + (big_n - n + 0.5) / (n + 0.5)).ln();
        let len_ratio = if self.avg_length > 0.0 {
            self.pools[i].length as f64 / self.avg_length
        } else {
            1.0
        };
        let norm = params.k1 * (1.0 - params.b + params.b * len_ratio);
        idf * tf * (params.k1 + 1.0) / (tf + norm)
    }
}

/// `ln(1 + tf(w, Θ_i))`.
pub fn popularity(w: TermId, pool: &SentencePool) -> f64 {
    (pool.tf(w) as f64).ln_1p()
}

/// Okapi BM25 of the single-term query `w` against pseudo-document `Θ_i`,
/// with the non-negative `ln(1 + (N − n + 0.5)/(n + 0.5))` IDF.
pub fn bm25(w: TermId, pools: &SentencePools, i: usize, params: &Bm25Params) -> f64 {
    pools.bm25_with(w, i, pools.pool_frequency(w), params)
}

/// `exp(BM25_i) / (1 + Σ_i' exp(BM25_i'))` from precomputed scores.
pub fn distinctiveness_from_scores(scores: &[f64], i: usize) -> f64 {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max > SOFTMAX_SHIFT_THRESHOLD {
        // exp(s - m) / (exp(-m) + Σ exp(s' - m))
        let denom: f64 = (-max).exp() + scores.iter().map(|s| (s - max).exp()).sum::<f64>();
        (scores[i] - max).exp() / denom
    } else {
        let denom: f64 = 1.0 + scores.iter().map(|s| s.exp()).sum::<f64>();
        scores[i].exp() / denom
    }
}

pub fn distinctiveness(w: TermId, pools: &SentencePools, i: usize, params: &Bm25Params) -> f64 {
    distinctiveness_from_scores(&pools.bm25_all(w, params), i)
}

/// `pop^α · dist^(1−α)`; zero whenever the term is absent from the pool.
pub fn sim_sntn_from_parts(pop: f64, dist: f64, alpha: f64) -> f64 {
    if pop == 0.0 {
        return 0.0;
    }
    pop.powf(alpha) * dist.powf(1.0 - alpha)
}

pub fn sim_sntn(w: TermId, pools: &SentencePools, i: usize, alpha: f64, params: &Bm25Params) -> f64 {
    let pop = popularity(w, pools.pool(i));
    if pop == 0.0 {
        return 0.0;
    }
    sim_sntn_from_parts(pop, distinctiveness(w, pools, i, params), alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Corpus, Vocabulary};

    struct Fixture {
        corpus: IndexedCorpus,
        vocab: Vocabulary,
        pools: SentencePools,
    }

    // pool 0: doc 0 sentences 0 and 1; pool 1: doc 1 sentence 0
    fn fixture() -> Fixture {
        let c = Corpus::from_tokens(&[
            vec![
                vec!["sushi", "rolls", "sushi", "fresh"],
                vec!["sashimi", "fresh", "rolls"],
            ],
            vec![vec!["steak", "grilled", "fresh", "steak", "beef"]],
        ]);
        let vocab = Vocabulary::build(&c, 1);
        let corpus = IndexedCorpus::new(&c, &vocab);
        let pools = SentencePools::new(vec![
            SentencePool::build(&corpus, [SentenceRef::new(0, 0), SentenceRef::new(0, 1)]),
            SentencePool::build(&corpus, [SentenceRef::new(1, 0)]),
        ]);
        Fixture { corpus, vocab, pools }
    }

    #[test]
    fn popularity_values() {
        let f = fixture();
        let id = |t| f.vocab.id(t).unwrap();
        assert_eq!(popularity(id("steak"), f.pools.pool(0)), 0.0);
        assert!((popularity(id("sushi"), f.pools.pool(0)) - 3f64.ln()).abs() < 1e-15);
        assert_eq!(f.pools.pool(0).tf(id("rolls")), 2);
        assert_eq!(f.pools.pool(0).length(), 7);
    }

    #[test]
    fn popularity_of_three_occurrences() {
        let c = Corpus::from_tokens(&[vec![vec!["w", "x", "w"], vec!["w"]]]);
        let v = Vocabulary::build(&c, 1);
        let ic = IndexedCorpus::new(&c, &v);
        let pool = SentencePool::build(&ic, [SentenceRef::new(0, 0), SentenceRef::new(0, 1)]);
        let w = v.id("w").unwrap();
        assert_eq!(pool.tf(w), 3);
        assert!((popularity(w, &pool) - 1.386294).abs() < 1e-6);
    }

    #[test]
    fn bm25_matches_reference_values() {
        // reference values from an independent arbitrary-precision script
        let f = fixture();
        let p = Bm25Params::default();
        let id = |t| f.vocab.id(t).unwrap();
        let cases = [
            ("sushi", 0, 0.91040226700410727207),
            ("fresh", 0, 0.23946711937116428517),
            ("fresh", 1, 0.19566215851058545252),
            ("steak", 1, 0.9999500309717243808),
            ("beef", 1, 0.74386526694238033206),
            ("steak", 0, 0.0),
        ];
        for (t, i, expected) in cases {
            assert!((bm25(id(t), &f.pools, i, &p) - expected).abs() < 1e-9, "{t} {i}");
        }
    }

    #[test]
    fn bm25_edge_cases() {
        let f = fixture();
        let p = Bm25Params::default();
        let id = |t| f.vocab.id(t).unwrap();
        // in every pool: N = n = 2
        let fresh = id("fresh");
        let idf = (1.0f64 + 0.5 / 2.5).ln();
        let tf = 1.0;
        let norm = 1.2 * (1.0 - 0.75 + 0.75 * 5.0 / 6.0);
        assert!((bm25(fresh, &f.pools, 1, &p) - idf * tf * 2.2 / (tf + norm)).abs() < 1e-12);
        // b = 0 disables length normalization: same tf gives the same score
        let flat = Bm25Params { k1: 1.2, b: 0.0 };
        let sushi = bm25(id("sushi"), &f.pools, 0, &flat);
        let steak = bm25(id("steak"), &f.pools, 1, &flat);
        assert!((sushi - steak).abs() < 1e-15);
    }

    #[test]
    fn distinctiveness_values() {
        assert!((distinctiveness_from_scores(&[0.0, 0.0], 0) - 1.0 / 3.0).abs() < 1e-15);
        assert!((distinctiveness_from_scores(&[2.0, 0.0], 0) - 0.786986042162).abs() < 1e-12);
        let near_one = distinctiveness_from_scores(&[700.0, 1.0], 0);
        assert!((near_one - 1.0).abs() < 1e-12);
        let shifted = distinctiveness_from_scores(&[35.0, 30.0], 0);
        let direct = 35f64.exp() / (1.0 + 35f64.exp() + 30f64.exp());
        assert!((shifted - direct).abs() < 1e-15);
        assert!(shifted < 1.0);
        assert!(distinctiveness_from_scores(&[700.0, 1.0], 1) < 1e-12);

        let f = fixture();
        let p = Bm25Params::default();
        let sushi = f.vocab.id("sushi").unwrap();
        assert!((distinctiveness(sushi, &f.pools, 0, &p) - 0.55410114202247292773).abs() < 1e-9);
    }

    #[test]
    fn shifted_softmax_matches_direct_form() {
        let scores = [31.0, 29.5, 0.25];
        let shifted = distinctiveness_from_scores(&scores, 1);
        let direct = scores[1].exp() / (1.0 + scores.iter().map(|s| s.exp()).sum::<f64>());
        assert!((shifted - direct).abs() < 1e-14);
    }

    #[test]
    fn sim_sntn_values() {
        assert_eq!(sim_sntn_from_parts(0.0, 0.9, 0.2), 0.0);
        assert!((sim_sntn_from_parts(1.0, 0.3, 0.2) - 0.3f64.powf(0.8)).abs() < 1e-15);
        let v = sim_sntn_from_parts(4f64.ln(), 1.0 / 3.0, 0.2);
        assert!((v - 0.443275866648).abs() < 1e-11);

        let f = fixture();
        let p = Bm25Params::default();
        let id = |t| f.vocab.id(t).unwrap();
        assert!((sim_sntn(id("sushi"), &f.pools, 0, 0.2, &p) - 0.63538963608376267978).abs() < 1e-9);
        assert!((sim_sntn(id("beef"), &f.pools, 1, 0.2, &p) - 0.54455283961020317374).abs() < 1e-9);
        assert_eq!(sim_sntn(id("sushi"), &f.pools, 1, 0.2, &p), 0.0);
    }

    #[test]
    fn pool_deduplicates_refs() {
        let f = fixture();
        let pool = SentencePool::build(&f.corpus, [SentenceRef::new(1, 0), SentenceRef::new(1, 0)]);
        assert_eq!(pool.len(), 1);
        assert_eq!(pool.length(), 5);
    }

    #[test]
    fn params_validation() {
        assert!(Bm25Params::default().validate().is_ok());
        assert!(Bm25Params { k1: 0.0, b: 0.5 }.validate().is_err());
        assert!(Bm25Params { k1: 1.0, b: 1.5 }.validate().is_err());
    }
}
