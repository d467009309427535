//! Planted-topic corpora with known gold terms and synthetic encoder
//! mentions, for end-to-end checks without a real encoder.
//!
//! Topic `k` owns terms named by a letter and an index (`a00`, `a01`, …);
//! the `00` term is the most frequent one and serves as the seed.
//! Background terms (`w000`, …) appear in every document. A document has a
//! dominant topic; its topic sentences mix a few topic terms into
//! background filler and an occasional stray sentence comes from another
//! topic.
//!
//! Mention vectors live in `dimension` coordinates. The first `topics`
//! axes are topic directions; the rest carry term-specific offsets and
//! per-mention noise. Background terms have no topic component.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Vocabulary};
use crate::plm::{MentionHeader, MentionRecord, FORMAT_VERSION};

const LETTERS: &[u8] = b"abcdefghijklmnopqrstuv";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlantedSpec {
    pub topics: usize,
    pub terms_per_topic: usize,
    pub background_terms: usize,
    pub documents: usize,
    pub sentences_per_doc: (usize, usize),
    pub sentence_length: (usize, usize),
    pub topic_terms_per_sentence: (usize, usize),
    /// Probability that a sentence is about the document's topic.
    pub topic_sentence_prob: f64,
    /// Probability that a sentence is about some other topic.
    pub stray_sentence_prob: f64,
    pub seed: u64,
}

impl Default for PlantedSpec {
    fn default() -> Self {
        PlantedSpec {
            topics: 2,
            terms_per_topic: 24,
            background_terms: 60,
            documents: 160,
            sentences_per_doc: (5, 8),
            sentence_length: (6, 9),
            topic_terms_per_sentence: (2, 3),
            topic_sentence_prob: 0.55,
            stray_sentence_prob: 0.05,
            seed: 11,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MentionSpec {
    pub dimension: usize,
    /// Weight of the term-specific offset relative to the topic axis.
    pub term_spread: f64,
    /// Standard deviation of per-mention noise per coordinate.
    pub noise: f64,
    pub seed: u64,
}

impl Default for MentionSpec {
    fn default() -> Self {
        MentionSpec {
            dimension: 16,
            term_spread: 0.5,
            noise: 0.08,
            seed: 5,
        }
    }
}

#[derive(Clone, Debug)]
pub struct PlantedCorpus {
    pub spec: PlantedSpec,
    pub corpus: Corpus,
    /// Per topic, its terms with the seed first.
    pub topics: Vec<Vec<String>>,
    pub background: Vec<String>,
}

fn zipf_weights(n: usize, exponent: f64) -> Vec<f64> {
    (0..n).map(|j| 1.0 / ((j + 1) as f64).powf(exponent)).collect()
}

impl PlantedCorpus {
    pub fn generate(spec: &PlantedSpec) -> Self {
        assert!(spec.topics >= 1 && spec.topics <= LETTERS.len());
        let topics: Vec<Vec<String>> = (0..spec.topics)
            .map(|k| {
                (0..spec.terms_per_topic)
                    .map(|j| format!("{}{j:02}", LETTERS[k] as char))
                    .collect()
            })
            .collect();
        let background: Vec<String> = (0..spec.background_terms).map(|j| format!("w{j:03}")).collect();
        let topic_dist = WeightedIndex::new(zipf_weights(spec.terms_per_topic, 0.6)).expect("weights");
        let bg_dist = WeightedIndex::new(zipf_weights(spec.background_terms, 0.8)).expect("weights");

        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let mut docs = Vec::with_capacity(spec.documents);
        for d in 0..spec.documents {
            let dominant = d % spec.topics;
            let n_sent = rng.random_range(spec.sentences_per_doc.0..=spec.sentences_per_doc.1);
            let mut doc = Vec::with_capacity(n_sent);
            for _ in 0..n_sent {
                let len = rng.random_range(spec.sentence_length.0..=spec.sentence_length.1);
                let roll: f64 = rng.random();
                let topic = if roll < spec.topic_sentence_prob {
                    Some(dominant)
                } else if roll < spec.topic_sentence_prob + spec.stray_sentence_prob && spec.topics > 1 {
                    let other = rng.random_range(0..spec.topics - 1);
                    Some(if other >= dominant { other + 1 } else { other })
                } else {
                    None
                };
                let mut sentence: Vec<String> = Vec::with_capacity(len);
                if let Some(k) = topic {
                    let n_topic = rng.random_range(spec.topic_terms_per_sentence.0..=spec.topic_terms_per_sentence.1);
                    for _ in 0..n_topic.min(len) {
                        sentence.push(topics[k][topic_dist.sample(&mut rng)].clone());
                    }
                }
                while sentence.len() < len {
                    sentence.push(background[bg_dist.sample(&mut rng)].clone());
                }
                sentence.shuffle(&mut rng);
                doc.push(sentence);
            }
            docs.push(doc);
        }
        PlantedCorpus {
            spec: spec.clone(),
            corpus: Corpus::from_tokens(&docs),
            topics,
            background,
        }
    }

    pub fn seeds(&self) -> Vec<String> {
        self.topics.iter().map(|t| t[0].clone()).collect()
    }

    /// Seeds file contents.
    pub fn seeds_text(&self) -> String {
        self.seeds().iter().map(|s| format!("{s}\n")).collect()
    }

    /// Gold file contents: every planted term of a topic, seed included.
    pub fn gold_text(&self) -> String {
        let mut s = String::new();
        for terms in &self.topics {
            s.push_str(&format!("[{}]\n", terms[0]));
            for t in terms {
                s.push_str(t);
                s.push('\n');
            }
        }
        s
    }

    /// Topic index of a planted term; `None` for background terms.
    pub fn topic_of(&self, term: &str) -> Option<usize> {
        self.topics.iter().position(|t| t.iter().any(|x| x == term))
    }

    /// One record per occurrence of every vocabulary term of `corpus` (the
    /// split the mentions are exported for), in document, sentence and
    /// token order.
    pub fn mentions(
        &self,
        corpus: &Corpus,
        vocab: &Vocabulary,
        spec: &MentionSpec,
    ) -> (MentionHeader, Vec<MentionRecord>) {
        assert!(spec.dimension > self.spec.topics);
        let q = spec.dimension;
        let k = self.spec.topics;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

        // term base vectors in vocabulary order
        let mut base: Vec<Vec<f64>> = Vec::with_capacity(vocab.len());
        for id in vocab.ids() {
            let mut offset: Vec<f64> = (0..q - k).map(|_| rng.sample(StandardNormal)).collect();
            let n = offset.iter().map(|x| x * x).sum::<f64>().sqrt();
            offset.iter_mut().for_each(|x| *x /= n);
            let mut v = vec![0.0; q];
            match self.topic_of(vocab.term(id)) {
                Some(t) => {
                    v[t] = 1.0;
                    for (x, o) in v[k..].iter_mut().zip(&offset) {
                        *x = spec.term_spread * o;
                    }
                }
                None => v[k..].copy_from_slice(&offset),
            }
            base.push(v);
        }

        let mut records = Vec::new();
        for (d, doc) in corpus.documents().iter().enumerate() {
            for (s, sentence) in doc.sentences.iter().enumerate() {
                for token in &sentence.tokens {
                    let Some(id) = vocab.id(token) else { continue };
                    let vector = base[id.index()]
                        .iter()
                        .map(|&b| {
                            let e: f64 = rng.sample(StandardNormal);
                            // three decimals keep fixture files small
                            ((b + spec.noise * e) * 1000.0).round() as f32 / 1000.0
                        })
                        .collect();
                    records.push(MentionRecord {
                        term: token.clone(),
                        sentence: crate::corpus::SentenceRef::new(d as u32, s as u32),
                        vector,
                    });
                }
            }
        }
        let header = MentionHeader {
            version: FORMAT_VERSION,
            dimension: q,
            encoder: format!("synthetic-planted-q{q}"),
            corpus_checksum: corpus.checksum(),
        };
        (header, records)
    }
}
