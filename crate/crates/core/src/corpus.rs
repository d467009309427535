//! Corpus loading, splitting and vocabulary statistics.
//!
//! The on-disk corpus format is one document per line. Tokens are separated
//! by single spaces and sentences end at a delimiter token (default `.`).
//! Multi-word terms arrive already joined with `_`. Tokens are lowercased on
//! load.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Dense vocabulary index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TermId(pub u32);

impl TermId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Address of one sentence: document id, then document-local sentence id.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SentenceRef {
    pub doc: u32,
    pub sent: u32,
}

impl SentenceRef {
    pub fn new(doc: u32, sent: u32) -> Self {
        SentenceRef { doc, sent }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sentence {
    pub tokens: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Document {
    pub sentences: Vec<Sentence>,
}

impl Document {
    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.sentences.iter().flat_map(|s| s.tokens.iter().map(String::as_str))
    }
}

/// Documents in id order. Document and sentence ids are positions, so they
/// are dense by construction.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Corpus {
    documents: Vec<Document>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusFormat {
    pub sentence_delimiter: String,
    pub lowercase: bool,
}

impl Default for CorpusFormat {
    fn default() -> Self {
        CorpusFormat {
            sentence_delimiter: ".".to_string(),
            lowercase: true,
        }
    }
}

impl Corpus {
    pub fn new(documents: Vec<Document>) -> Self {
        Corpus { documents }
    }

    /// Builds a corpus from nested token lists; handy for fixtures.
    pub fn from_tokens<S: AsRef<str>>(docs: &[Vec<Vec<S>>]) -> Self {
        let documents = docs
            .iter()
            .map(|doc| Document {
                sentences: doc
                    .iter()
                    .map(|s| Sentence {
                        tokens: s.iter().map(|t| t.as_ref().to_string()).collect(),
                    })
                    .collect(),
            })
            .collect();
        Corpus { documents }
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn sentence(&self, r: SentenceRef) -> Option<&Sentence> {
        self.documents
            .get(r.doc as usize)
            .and_then(|d| d.sentences.get(r.sent as usize))
    }

    pub fn num_sentences(&self) -> usize {
        self.documents.iter().map(|d| d.sentences.len()).sum()
    }

    pub fn num_tokens(&self) -> usize {
        self.documents
            .iter()
            .flat_map(|d| &d.sentences)
            .map(|s| s.tokens.len())
            .sum()
    }

    /// Parses the line format from a string. `origin` names the source in
    /// error messages.
    pub fn parse(text: &str, format: &CorpusFormat, origin: &str) -> Result<Self> {
        let mut documents = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.strip_suffix('\r').unwrap_or(raw);
            documents.push(parse_document(line, format, origin, i + 1)?);
        }
        if documents.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        Ok(Corpus { documents })
    }

    /// Writes the canonical line format: every sentence followed by the
    /// delimiter token.
    pub fn write<W: Write>(&self, mut out: W, delimiter: &str) -> std::io::Result<()> {
        for doc in &self.documents {
            let mut first = true;
            for sentence in &doc.sentences {
                for token in sentence.tokens.iter().map(String::as_str).chain([delimiter]) {
                    if !first {
                        out.write_all(b" ")?;
                    }
                    out.write_all(token.as_bytes())?;
                    first = false;
                }
            }
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_text(&self, delimiter: &str) -> String {
        let mut buf = Vec::new();
        self.write(&mut buf, delimiter).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("tokens are UTF-8")
    }

    /// SHA-256 over an unambiguous encoding of the token structure (tokens
    /// joined by spaces, sentences by tabs, documents terminated by
    /// newlines), hex encoded. Independent of the sentence delimiter; this
    /// is the checksum carried by mention-vector files.
    pub fn checksum(&self) -> String {
        let mut hasher = Sha256::new();
        for doc in &self.documents {
            for (k, sentence) in doc.sentences.iter().enumerate() {
                if k > 0 {
                    hasher.update(b"\t");
                }
                for (i, token) in sentence.tokens.iter().enumerate() {
                    if i > 0 {
                        hasher.update(b" ");
                    }
                    hasher.update(token.as_bytes());
                }
            }
            hasher.update(b"\n");
        }
        hex::encode(hasher.finalize())
    }
}

fn parse_document(line: &str, format: &CorpusFormat, origin: &str, lineno: usize) -> Result<Document> {
    if line.is_empty() {
        return Err(Error::parse(origin, lineno, "document has no tokens"));
    }
    let mut sentences = Vec::new();
    let mut current = Vec::new();
    for token in line.split(' ') {
        if token.is_empty() {
            return Err(Error::parse(
                origin,
                lineno,
                "empty token (tokens must be separated by single spaces)",
            ));
        }
        if token.chars().any(char::is_whitespace) {
            return Err(Error::parse(
                origin,
                lineno,
                format!("token {token:?} contains whitespace"),
            ));
        }
        if token == format.sentence_delimiter {
            if !current.is_empty() {
                sentences.push(Sentence {
                    tokens: std::mem::take(&mut current),
                });
            }
            continue;
        }
        current.push(if format.lowercase {
            token.to_lowercase()
        } else {
            token.to_string()
        });
    }
    if !current.is_empty() {
        sentences.push(Sentence { tokens: current });
    }
    if sentences.is_empty() {
        return Err(Error::parse(origin, lineno, "document has no tokens"));
    }
    Ok(Document { sentences })
}

pub fn load_corpus(path: &Path, format: &CorpusFormat) -> Result<Corpus> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Corpus::parse(&text, format, &path.display().to_string())
}

/// Document-level random partition. The train part takes
/// `floor(train_fraction * n)` documents of a seeded permutation; both parts
/// keep the original relative document order and get fresh dense ids.
pub fn split_corpus(corpus: &Corpus, train_fraction: f64, rng_seed: u64) -> Result<(Corpus, Corpus)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let n = corpus.len();
    let n_train = (train_fraction * n as f64).floor() as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::Config(format!(
            "splitting {n} documents at {train_fraction} leaves an empty part"
        )));
    }
    let mut ids: Vec<usize> = (0..n).collect();
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(rng_seed));
    let (train_ids, test_ids) = ids.split_at_mut(n_train);
    train_ids.sort_unstable();
    test_ids.sort_unstable();
    let pick = |ids: &[usize]| Corpus::new(ids.iter().map(|&i| corpus.documents[i].clone()).collect());
    Ok((pick(train_ids), pick(test_ids)))
}

/// Term universe with corpus and document frequencies. Term ids follow the
/// lexicographic order of the terms.
#[derive(Clone, Debug, Default)]
pub struct Vocabulary {
    terms: Vec<String>,
    index: HashMap<String, TermId>,
    frequency: Vec<u64>,
    doc_frequency: Vec<u64>,
}

impl Vocabulary {
    pub fn build(corpus: &Corpus, min_count: u64) -> Self {
        let mut counts: HashMap<&str, (u64, u64, usize)> = HashMap::new();
        for (d, doc) in corpus.documents().iter().enumerate() {
            for token in doc.tokens() {
                let entry = counts.entry(token).or_insert((0, 0, usize::MAX));
                entry.0 += 1;
                if entry.2 != d {
                    entry.1 += 1;
                    entry.2 = d;
                }
            }
        }
        let mut kept: Vec<(&str, u64, u64)> = counts
            .into_iter()
            .filter(|(_, (freq, _, _))| *freq >= min_count)
            .map(|(t, (freq, df, _))| (t, freq, df))
            .collect();
        kept.sort_unstable_by(|a, b| a.0.cmp(b.0));

        let mut vocab = Vocabulary::default();
        for (i, (term, freq, df)) in kept.into_iter().enumerate() {
            vocab.index.insert(term.to_string(), TermId(i as u32));
            vocab.terms.push(term.to_string());
            vocab.frequency.push(freq);
            vocab.doc_frequency.push(df);
        }
        vocab
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn id(&self, term: &str) -> Option<TermId> {
        self.index.get(term).copied()
    }

    pub fn term(&self, id: TermId) -> &str {
        &self.terms[id.index()]
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn frequency(&self, id: TermId) -> u64 {
        self.frequency[id.index()]
    }

    pub fn doc_frequency(&self, id: TermId) -> u64 {
        self.doc_frequency[id.index()]
    }

    pub fn total_frequency(&self) -> u64 {
        self.frequency.iter().sum()
    }

    pub fn ids(&self) -> impl Iterator<Item = TermId> {
        (0..self.terms.len() as u32).map(TermId)
    }
}

/// Ordered, distinct seeds. Seed `i` names category `i`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedSet {
    seeds: Vec<String>,
}

impl SeedSet {
    pub fn new<S: AsRef<str>>(seeds: &[S]) -> Result<Self> {
        let seeds: Vec<String> = seeds.iter().map(|s| s.as_ref().to_lowercase()).collect();
        if seeds.len() < 2 {
            return Err(Error::Seeds(format!(
                "at least 2 seeds are required, got {}",
                seeds.len()
            )));
        }
        for (i, seed) in seeds.iter().enumerate() {
            if seed.is_empty() || seed.chars().any(char::is_whitespace) {
                return Err(Error::Seeds(format!("seed {seed:?} is not a single token")));
            }
            if seeds[..i].contains(seed) {
                return Err(Error::Seeds(format!("duplicate seed `{seed}`")));
            }
        }
        Ok(SeedSet { seeds })
    }

    /// One seed per line; blank lines are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let seeds: Vec<&str> = text
            .lines()
            .map(|l| l.trim_end_matches('\r'))
            .filter(|l| !l.trim().is_empty())
            .collect();
        Self::new(&seeds)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn len(&self) -> usize {
        self.seeds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seeds.is_empty()
    }

    pub fn seeds(&self) -> &[String] {
        &self.seeds
    }

    pub fn to_text(&self) -> String {
        self.seeds.iter().map(|s| format!("{s}\n")).collect()
    }

    /// Resolves every seed against the vocabulary.
    pub fn resolve(&self, vocab: &Vocabulary) -> Result<Vec<TermId>> {
        self.seeds
            .iter()
            .map(|s| vocab.id(s).ok_or_else(|| Error::UnknownSeed(s.clone())))
            .collect()
    }
}

/// A document as a flat id sequence; out-of-vocabulary tokens keep their
/// position as `None`.
#[derive(Clone, Debug)]
pub struct IndexedDocument {
    tokens: Vec<Option<TermId>>,
    // sentence k spans bounds[k]..bounds[k + 1]
    bounds: Vec<usize>,
}

impl IndexedDocument {
    pub fn tokens(&self) -> &[Option<TermId>] {
        &self.tokens
    }

    pub fn num_sentences(&self) -> usize {
        self.bounds.len() - 1
    }

    pub fn sentence(&self, k: usize) -> &[Option<TermId>] {
        &self.tokens[self.bounds[k]..self.bounds[k + 1]]
    }

    pub fn sentences(&self) -> impl Iterator<Item = &[Option<TermId>]> {
        self.bounds.windows(2).map(|w| &self.tokens[w[0]..w[1]])
    }
}

#[derive(Clone, Debug)]
pub struct IndexedCorpus {
    docs: Vec<IndexedDocument>,
}

impl IndexedCorpus {
    pub fn new(corpus: &Corpus, vocab: &Vocabulary) -> Self {
        let docs = corpus
            .documents()
            .iter()
            .map(|doc| {
                let mut tokens = Vec::new();
                let mut bounds = vec![0];
                for sentence in &doc.sentences {
                    tokens.extend(sentence.tokens.iter().map(|t| vocab.id(t)));
                    bounds.push(tokens.len());
                }
                IndexedDocument { tokens, bounds }
            })
            .collect();
        IndexedCorpus { docs }
    }

    pub fn docs(&self) -> &[IndexedDocument] {
        &self.docs
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn sentence(&self, r: SentenceRef) -> &[Option<TermId>] {
        self.docs[r.doc as usize].sentence(r.sent as usize)
    }

    pub fn sentence_refs(&self) -> impl Iterator<Item = SentenceRef> + '_ {
        self.docs
            .iter()
            .enumerate()
            .flat_map(|(d, doc)| (0..doc.num_sentences() as u32).map(move |s| SentenceRef::new(d as u32, s)))
    }
}

/// Every (center, context) pair within `window` positions of each other in
/// the same document. Windows cross sentence boundaries but not documents;
/// out-of-vocabulary tokens occupy positions and never appear in pairs.
pub fn skipgram_pairs(corpus: &IndexedCorpus, window: usize) -> impl Iterator<Item = (TermId, TermId)> + '_ {
    corpus
        .docs()
        .iter()
        .flat_map(move |doc| document_pairs(doc.tokens(), window))
}

pub(crate) fn document_pairs(tokens: &[Option<TermId>], window: usize) -> impl Iterator<Item = (TermId, TermId)> + '_ {
    (0..tokens.len()).flat_map(move |i| {
        let lo = i.saturating_sub(window);
        let hi = (i + window).min(tokens.len() - 1);
        (lo..=hi)
            .filter(move |&j| j != i)
            .filter_map(move |j| Some((tokens[i]?, tokens[j]?)))
    })
}
