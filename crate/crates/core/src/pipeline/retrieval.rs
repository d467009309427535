//! Anchor and neighbor sentence retrieval.

use std::collections::{BTreeSet, HashMap};

use crate::corpus::{IndexedCorpus, SentenceRef, TermId};

/// `count(θ, 𝒯) = Σ_{w∈𝒯} tf(w, θ)`.
pub fn count_indicative(sentence: &[Option<TermId>], terms: &[TermId]) -> usize {
    sentence.iter().flatten().filter(|w| terms.contains(w)).count()
}

/// Per-sentence, per-category indicative-term counts over a whole corpus.
#[derive(Clone, Debug)]
pub struct SentenceCounts {
    n_categories: usize,
    // first flat sentence index of each document, plus a final sentinel
    doc_offsets: Vec<usize>,
    counts: Vec<u32>,
}

impl SentenceCounts {
    pub fn compute(corpus: &IndexedCorpus, topic_terms: &[Vec<TermId>]) -> Self {
        let n_categories = topic_terms.len();
        let mut membership: HashMap<TermId, Vec<usize>> = HashMap::new();
        for (c, terms) in topic_terms.iter().enumerate() {
            // a term listed twice in one set still counts once per occurrence
            let unique: BTreeSet<TermId> = terms.iter().copied().collect();
            for t in unique {
                membership.entry(t).or_default().push(c);
            }
        }
        let mut doc_offsets = Vec::with_capacity(corpus.len() + 1);
        let mut counts = Vec::new();
        let mut n_sent = 0;
        for doc in corpus.docs() {
            doc_offsets.push(n_sent);
            for sentence in doc.sentences() {
                let base = counts.len();
                counts.resize(base + n_categories, 0u32);
                for w in sentence.iter().flatten() {
                    if let Some(cats) = membership.get(w) {
                        for &c in cats {
                            counts[base + c] += 1;
                        }
                    }
                }
                n_sent += 1;
            }
        }
        doc_offsets.push(n_sent);
        SentenceCounts {
            n_categories,
            doc_offsets,
            counts,
        }
    }

    pub fn num_categories(&self) -> usize {
        self.n_categories
    }

    pub fn num_sentences_in(&self, doc: u32) -> usize {
        let d = doc as usize;
        self.doc_offsets[d + 1] - self.doc_offsets[d]
    }

    pub fn get(&self, r: SentenceRef) -> &[u32] {
        let flat = self.doc_offsets[r.doc as usize] + r.sent as usize;
        &self.counts[flat * self.n_categories..(flat + 1) * self.n_categories]
    }

    fn refs(&self) -> impl Iterator<Item = SentenceRef> + '_ {
        (0..self.doc_offsets.len() - 1)
            .flat_map(move |d| (0..self.num_sentences_in(d as u32) as u32).map(move |s| SentenceRef::new(d as u32, s)))
    }

    /// True when no category other than `i` has an indicative term in `r`.
    pub fn exclusive_to(&self, r: SentenceRef, i: usize) -> bool {
        self.get(r).iter().enumerate().all(|(c, &n)| c == i || n == 0)
    }
}

/// Sentences with at least one term of category `i` and none of any other
/// category, by count descending then `(doc, sent)` ascending, truncated to
/// `limit`.
pub fn anchors_from_counts(counts: &SentenceCounts, i: usize, limit: usize) -> Vec<SentenceRef> {
    let mut eligible: Vec<(u32, SentenceRef)> = counts
        .refs()
        .filter(|&r| counts.exclusive_to(r, i))
        .filter_map(|r| {
            let n = counts.get(r)[i];
            (n > 0).then_some((n, r))
        })
        .collect();
    eligible.sort_unstable_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    eligible.truncate(limit);
    eligible.into_iter().map(|(_, r)| r).collect()
}

pub fn retrieve_anchors(
    corpus: &IndexedCorpus,
    topic_terms: &[Vec<TermId>],
    i: usize,
    limit: usize,
) -> Vec<SentenceRef> {
    anchors_from_counts(&SentenceCounts::compute(corpus, topic_terms), i, limit)
}

/// For every anchor, walk `+1..+y` and then `−1..−y` inside its document,
/// admitting sentences free of other categories' terms and stopping a
/// direction at the first sentence that is not. Returns the deduplicated
/// union in `(doc, sent)` order.
pub fn neighbors_from_counts(
    counts: &SentenceCounts,
    anchors: &[SentenceRef],
    i: usize,
    window: usize,
) -> Vec<SentenceRef> {
    let mut out = BTreeSet::new();
    for &anchor in anchors {
        let n_sent = counts.num_sentences_in(anchor.doc) as i64;
        for step in [1i64, -1] {
            for k in 1..=window as i64 {
                let pos = anchor.sent as i64 + step * k;
                if pos < 0 || pos >= n_sent {
                    break;
                }
                let r = SentenceRef::new(anchor.doc, pos as u32);
                if !counts.exclusive_to(r, i) {
                    break;
                }
                out.insert(r);
            }
        }
    }
    out.into_iter().collect()
}

pub fn expand_neighbors(
    corpus: &IndexedCorpus,
    anchors: &[SentenceRef],
    topic_terms: &[Vec<TermId>],
    i: usize,
    window: usize,
) -> Vec<SentenceRef> {
    neighbors_from_counts(&SentenceCounts::compute(corpus, topic_terms), anchors, i, window)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Corpus, Vocabulary};

    fn setup(docs: &[Vec<Vec<&str>>], topics: &[&[&str]]) -> (IndexedCorpus, Vec<Vec<TermId>>) {
        let c = Corpus::from_tokens(docs);
        let v = Vocabulary::build(&c, 1);
        let ic = IndexedCorpus::new(&c, &v);
        let t = topics
            .iter()
            .map(|ts| ts.iter().map(|t| v.id(t).unwrap()).collect())
            .collect();
        (ic, t)
    }

    #[test]
    fn count_examples() {
        let c = Corpus::from_tokens(&[vec![vec!["sushi", "rolls", "sushi"], vec!["a", "b", "c"]]]);
        let v = Vocabulary::build(&c, 1);
        let ic = IndexedCorpus::new(&c, &v);
        let id = |t| v.id(t).unwrap();
        let s0 = ic.sentence(SentenceRef::new(0, 0));
        let s1 = ic.sentence(SentenceRef::new(0, 1));
        assert_eq!(count_indicative(s0, &[id("sushi")]), 2);
        assert_eq!(count_indicative(s0, &[]), 0);
        assert_eq!(count_indicative(s1, &[id("a"), id("b"), id("c")]), 3);
    }

    #[test]
    fn anchors_respect_exclusivity_and_order() {
        let (ic, t) = setup(
            &[
                vec![vec!["a1", "a2", "a3"], vec!["a1", "b1"], vec!["a2", "x"]],
                vec![vec!["x"], vec!["a1", "a2", "x"], vec!["b1", "b2"]],
            ],
            &[&["a1", "a2", "a3"], &["b1", "b2"]],
        );
        let a = retrieve_anchors(&ic, &t, 0, 10);
        assert_eq!(
            a,
            [SentenceRef::new(0, 0), SentenceRef::new(1, 1), SentenceRef::new(0, 2)]
        );
        assert_eq!(retrieve_anchors(&ic, &t, 0, 2).len(), 2);
        assert_eq!(retrieve_anchors(&ic, &t, 1, 10), [SentenceRef::new(1, 2)]);
    }

    #[test]
    fn neighbors_stop_at_document_boundary() {
        let docs = vec![vec![vec!["x"]; 6]];
        let (ic, t) = setup(&docs, &[&["x"], &[]]);
        let counts = SentenceCounts::compute(&ic, &t);
        let n = neighbors_from_counts(&counts, &[SentenceRef::new(0, 4)], 0, 4);
        let plus: Vec<_> = n.iter().filter(|r| r.sent > 4).collect();
        assert_eq!(plus, [&SentenceRef::new(0, 5)]);
        assert_eq!(n.len(), 5);
    }

    #[test]
    fn neighbors_stop_at_first_foreign_sentence() {
        let (ic, t) = setup(
            &[vec![vec!["a"], vec!["z"], vec!["a"], vec!["b"], vec!["z"], vec!["z"]]],
            &[&["a"], &["b"]],
        );
        let counts = SentenceCounts::compute(&ic, &t);
        let n = neighbors_from_counts(&counts, &[SentenceRef::new(0, 2)], 0, 4);
        // +1 is foreign, so +2 and +3 are never examined; -1 and -2 pass
        assert_eq!(n, [SentenceRef::new(0, 0), SentenceRef::new(0, 1)]);
    }
}
