//! Corpus bundles on disk and assembly of pipeline inputs.
//!
//! A bundle directory holds:
//!
//! ```text
//! train.txt      training split, canonical corpus text
//! test.txt       held-out split used for coherence
//! seeds.txt      one seed per line
//! vocab.tsv      term, frequency, document frequency over the training split
//! manifest.json  checksums and counts
//! ```
//!
//! Encoder mentions are exported against `train.txt`; their header carries
//! the training split's checksum.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::corpus::{split_corpus, Corpus, CorpusFormat, IndexedCorpus, SeedSet, TermId, Vocabulary};
use crate::error::{Error, Result};
use crate::pipeline::{Pipeline, TopicResult};
use crate::plm::{MentionStore, TermRepresentations};

pub const MANIFEST_FORMAT: &str = "topicseed-bundle";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: u32,
    pub config_hash: String,
    pub source_checksum: String,
    pub train_checksum: String,
    pub test_checksum: String,
    pub train_documents: usize,
    pub test_documents: usize,
    pub vocabulary_size: usize,
    pub seeds: Vec<String>,
    /// SHA-256 of each bundle file's bytes.
    pub files: BTreeMap<String, String>,
}

#[derive(Clone, Debug)]
pub struct Bundle {
    pub train: Corpus,
    pub test: Corpus,
    pub seeds: SeedSet,
    pub manifest: Manifest,
}

/// The canonical on-disk text of a corpus.
fn corpus_text(corpus: &Corpus, format: &CorpusFormat) -> String {
    corpus.to_text(&format.sentence_delimiter)
}

fn vocab_text(vocab: &Vocabulary) -> String {
    let mut s = String::new();
    for id in vocab.ids() {
        writeln!(
            s,
            "{}\t{}\t{}",
            vocab.term(id),
            vocab.frequency(id),
            vocab.doc_frequency(id)
        )
        .unwrap();
    }
    s
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Bundle {
    /// Splits the corpus and checks that every seed survives in the
    /// training vocabulary.
    pub fn prepare(corpus: &Corpus, seeds: SeedSet, config: &RunConfig) -> Result<Bundle> {
        config.validate()?;
        let (train, test) = split_corpus(corpus, config.corpus.train_fraction, config.corpus.split_seed)?;
        let vocab = Vocabulary::build(&train, config.corpus.min_count);
        seeds.resolve(&vocab)?;
        let manifest = Manifest {
            format: MANIFEST_FORMAT.into(),
            version: 1,
            config_hash: config.hash(),
            source_checksum: corpus.checksum(),
            train_checksum: train.checksum(),
            test_checksum: test.checksum(),
            train_documents: train.len(),
            test_documents: test.len(),
            vocabulary_size: vocab.len(),
            seeds: seeds.seeds().to_vec(),
            files: BTreeMap::new(),
        };
        Ok(Bundle {
            train,
            test,
            seeds,
            manifest,
        })
    }

    fn files(&self, config: &RunConfig) -> Vec<(&'static str, String)> {
        let format = config.corpus.format();
        let vocab = Vocabulary::build(&self.train, config.corpus.min_count);
        vec![
            ("train.txt", corpus_text(&self.train, &format)),
            ("test.txt", corpus_text(&self.test, &format)),
            ("seeds.txt", self.seeds.to_text()),
            ("vocab.tsv", vocab_text(&vocab)),
        ]
    }

    pub fn write(&mut self, dir: &Path, config: &RunConfig) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut checksums = BTreeMap::new();
        for (name, text) in self.files(config) {
            let path = dir.join(name);
            fs::write(&path, &text).map_err(|e| Error::io(&path, e))?;
            checksums.insert(name.to_string(), sha256_hex(text.as_bytes()));
        }
        self.manifest.files = checksums;
        let path = dir.join("manifest.json");
        let json = serde_json::to_string_pretty(&self.manifest)? + "\n";
        fs::write(&path, json).map_err(|e| Error::io(&path, e))
    }

    /// Loads a bundle and verifies every file against the manifest.
    pub fn read(dir: &Path, config: &RunConfig) -> Result<Bundle> {
        let read = |name: &str| -> Result<String> {
            let path = dir.join(name);
            fs::read_to_string(&path).map_err(|e| Error::io(&path, e))
        };
        let manifest: Manifest = serde_json::from_str(&read("manifest.json")?)?;
        if manifest.format != MANIFEST_FORMAT {
            return Err(Error::Format(format!("{}: not a corpus bundle", dir.display())));
        }
        for (name, expected) in &manifest.files {
            let found = sha256_hex(read(name)?.as_bytes());
            if &found != expected {
                return Err(Error::ChecksumMismatch {
                    expected: format!("{name} {expected}"),
                    found,
                });
            }
        }
        let format = config.corpus.format();
        let origin = |n: &str| dir.join(n).display().to_string();
        let train = Corpus::parse(&read("train.txt")?, &format, &origin("train.txt"))?;
        let test = Corpus::parse(&read("test.txt")?, &format, &origin("test.txt"))?;
        let seeds = SeedSet::parse(&read("seeds.txt")?)?;
        if train.checksum() != manifest.train_checksum {
            return Err(Error::ChecksumMismatch {
                expected: manifest.train_checksum.clone(),
                found: train.checksum(),
            });
        }
        Ok(Bundle {
            train,
            test,
            seeds,
            manifest,
        })
    }
}

/// Vocabulary, indexed corpus, resolved seeds and term representations of
/// one training corpus.
pub struct Prepared {
    pub vocab: Vocabulary,
    pub indexed: IndexedCorpus,
    pub seeds: Vec<TermId>,
    pub representations: Option<TermRepresentations>,
}

impl Prepared {
    pub fn new(train: &Corpus, seeds: &SeedSet, mentions: Option<&MentionStore>, config: &RunConfig) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let vocab = Vocabulary::build(train, config.corpus.min_count);
        let ids = seeds.resolve(&vocab)?;
        let representations =
            mentions.map(|m| TermRepresentations::build(m, &vocab, config.plm.cap(), config.plm.seed));
        Ok(Prepared {
            indexed: IndexedCorpus::new(train, &vocab),
            vocab,
            seeds: ids,
            representations,
        })
    }

    pub fn pipeline<'a>(&'a self, config: &'a RunConfig) -> Result<Pipeline<'a>> {
        Pipeline::new(
            &self.indexed,
            &self.vocab,
            self.seeds.clone(),
            self.representations.as_ref(),
            config,
        )
    }
}

/// Sizes the global scoring thread pool; 0 keeps the default of one
/// thread per core. Only the first call has an effect.
pub fn init_threads(threads: usize) {
    if threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            log::debug!("thread pool already initialized: {e}");
        }
    }
}

/// Runs the whole loop on a training corpus.
pub fn discover_topics(
    train: &Corpus,
    seeds: &SeedSet,
    mentions: Option<&MentionStore>,
    config: &RunConfig,
) -> Result<TopicResult> {
    Prepared::new(train, seeds, mentions, config)?.pipeline(config)?.run()
}
