//! Shared loaders for the checked-in planted fixtures.
#![allow(dead_code)]

use std::path::PathBuf;

use topicseed::config::RunConfig;
use topicseed::corpus::{load_corpus, split_corpus, Corpus, SeedSet};
use topicseed::eval::GoldLabels;
use topicseed::plm::{load_mentions, MentionStore};
use topicseed::synthetic::{MentionSpec, PlantedSpec};

pub fn fixture_dir(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

#[derive(serde::Deserialize, serde::Serialize)]
pub struct FixtureSpec {
    pub corpus: PlantedSpec,
    pub mentions: MentionSpec,
    pub mention_file: String,
}

pub struct Fixture {
    pub dir: PathBuf,
    pub spec: FixtureSpec,
    pub corpus: Corpus,
    pub train: Corpus,
    pub test: Corpus,
    pub seeds: SeedSet,
    pub gold: GoldLabels,
    pub mentions: MentionStore,
}

pub fn load(name: &str) -> Fixture {
    let dir = fixture_dir(name);
    let spec: FixtureSpec = serde_json::from_str(&std::fs::read_to_string(dir.join("planted.json")).unwrap()).unwrap();
    let config = RunConfig::default();
    let corpus = load_corpus(&dir.join("corpus.txt"), &config.corpus.format()).unwrap();
    let (train, test) = split_corpus(&corpus, config.corpus.train_fraction, config.corpus.split_seed).unwrap();
    let mentions = load_mentions(&dir.join(&spec.mention_file), &train).unwrap();
    Fixture {
        seeds: SeedSet::load(&dir.join("seeds.txt")).unwrap(),
        gold: GoldLabels::load(&dir.join("gold.txt")).unwrap(),
        dir,
        spec,
        corpus,
        train,
        test,
        mentions,
    }
}
