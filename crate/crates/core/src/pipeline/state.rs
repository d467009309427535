//! Run-state checkpoints and final topic files.
//!
//! A run state is one JSON object written after every iteration:
//!
//! ```json
//! {"format":"topicseed-run-state","version":1,"config_hash":"…","resume_key":"…",
//!  "iteration":2,"topics":[{"seed":"sports","terms":[{"term":"sports","mrr":1.0,
//!  "r_all":1,"r_emb":1,"r_plm":1}],"anchors":[{"doc":0,"sent":3}],"neighbors":[]}]}
//! ```
//!
//! `terms` lists the current term set, seed first, then by MRR. The
//! pools of the iteration are the union of `anchors` and `neighbors`.
//!
//! The topics text file has a `# config_hash:` line, then per seed a
//! `[seed]` header followed by `rank term mrr r_all r_emb r_plm` rows; a
//! rank of a disabled signal is written as `-`.

use std::fmt::Write as _;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::corpus::{SentenceRef, TermId, Vocabulary};
use crate::error::{Error, Result};

use super::IterationRecord;

const STATE_FORMAT: &str = "topicseed-run-state";
const STATE_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredTerm {
    pub term: String,
    pub mrr: f64,
    pub r_all: u32,
    pub r_emb: Option<u32>,
    pub r_plm: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopicState {
    pub seed: String,
    pub terms: Vec<ScoredTerm>,
    pub anchors: Vec<SentenceRef>,
    pub neighbors: Vec<SentenceRef>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunState {
    pub format: String,
    pub version: u32,
    pub config_hash: String,
    pub resume_key: String,
    /// Completed iterations.
    pub iteration: usize,
    pub topics: Vec<TopicState>,
}

impl RunState {
    pub(crate) fn empty(config: &RunConfig, seeds: impl IntoIterator<Item = String>) -> Self {
        RunState {
            format: STATE_FORMAT.into(),
            version: STATE_VERSION,
            config_hash: config.hash(),
            resume_key: config.resume_key(),
            iteration: 0,
            topics: seeds
                .into_iter()
                .map(|seed| TopicState {
                    terms: vec![ScoredTerm {
                        term: seed.clone(),
                        mrr: 1.0,
                        r_all: 1,
                        r_emb: None,
                        r_plm: None,
                    }],
                    seed,
                    anchors: Vec::new(),
                    neighbors: Vec::new(),
                })
                .collect(),
        }
    }

    pub(crate) fn from_record(
        record: &IterationRecord,
        vocab: &Vocabulary,
        seeds: &[TermId],
        config: &RunConfig,
    ) -> Self {
        let topics = record
            .terms
            .iter()
            .enumerate()
            .map(|(i, terms)| {
                let ranking = &record.rankings[i];
                let scored: Vec<ScoredTerm> = terms
                    .iter()
                    .map(|&w| match ranking.get(w) {
                        Some(e) => ScoredTerm {
                            term: vocab.term(w).to_string(),
                            mrr: e.mrr,
                            r_all: e.r_all,
                            r_emb: e.r_emb,
                            r_plm: e.r_plm,
                        },
                        None => ScoredTerm {
                            term: vocab.term(w).to_string(),
                            mrr: 0.0,
                            r_all: 0,
                            r_emb: None,
                            r_plm: None,
                        },
                    })
                    .collect();
                TopicState {
                    seed: vocab.term(seeds[i]).to_string(),
                    terms: scored,
                    anchors: record.anchors[i].clone(),
                    neighbors: record.neighbors[i].clone(),
                }
            })
            .collect();
        RunState {
            format: STATE_FORMAT.into(),
            version: STATE_VERSION,
            config_hash: config.hash(),
            resume_key: config.resume_key(),
            iteration: record.iteration,
            topics,
        }
    }

    /// Term sets by seed order, seeds included.
    pub fn term_sets(&self) -> Vec<Vec<String>> {
        self.topics
            .iter()
            .map(|t| t.terms.iter().map(|s| s.term.clone()).collect())
            .collect()
    }
}

pub fn write_run_state<W: Write>(out: W, state: &RunState) -> Result<()> {
    serde_json::to_writer_pretty(out, state)?;
    Ok(())
}

pub fn read_run_state<R: Read>(input: R) -> Result<RunState> {
    let state: RunState = serde_json::from_reader(input)?;
    if state.format != STATE_FORMAT || state.version != STATE_VERSION {
        return Err(Error::Format(format!(
            "unsupported run state {} version {}",
            state.format, state.version
        )));
    }
    Ok(state)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopicTerm {
    pub term: String,
    pub mrr: f64,
    pub r_all: u32,
    pub r_emb: Option<u32>,
    pub r_plm: Option<u32>,
    /// Anchor sentences of the last iteration that contain the term.
    #[serde(default)]
    pub anchors: Vec<SentenceRef>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FinalTopic {
    pub seed: String,
    pub terms: Vec<TopicTerm>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopicResult {
    pub config_hash: String,
    pub iterations: usize,
    pub topics: Vec<FinalTopic>,
}

impl TopicResult {
    pub fn topic(&self, seed: &str) -> Option<&FinalTopic> {
        self.topics.iter().find(|t| t.seed == seed)
    }

    /// Term lists in seed order.
    pub fn term_lists(&self) -> Vec<Vec<String>> {
        self.topics
            .iter()
            .map(|t| t.terms.iter().map(|x| x.term.clone()).collect())
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let rank = |r: Option<u32>| r.map_or("-".to_string(), |r| r.to_string());
        writeln!(s, "# config_hash: {}", self.config_hash).unwrap();
        writeln!(s, "# iterations: {}", self.iterations).unwrap();
        for topic in &self.topics {
            writeln!(s, "[{}]", topic.seed).unwrap();
            for (k, t) in topic.terms.iter().enumerate() {
                writeln!(
                    s,
                    "{} {} {:.6} {} {} {}",
                    k + 1,
                    t.term,
                    t.mrr,
                    t.r_all,
                    rank(t.r_emb),
                    rank(t.r_plm)
                )
                .unwrap();
            }
        }
        s
    }

    /// Reads the text format back. Supporting anchors are not part of it.
    pub fn parse_text(text: &str, origin: &str) -> Result<Self> {
        let mut config_hash = None;
        let mut iterations = 0;
        let mut topics: Vec<FinalTopic> = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let err = |m: &str| Error::parse(origin, n + 1, m);
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if let Some((key, value)) = rest.split_once(':') {
                    match key.trim() {
                        "config_hash" => config_hash = Some(value.trim().to_string()),
                        "iterations" => iterations = value.trim().parse().map_err(|_| err("bad iteration count"))?,
                        _ => {}
                    }
                }
                continue;
            }
            if let Some(seed) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                topics.push(FinalTopic {
                    seed: seed.trim().to_string(),
                    terms: Vec::new(),
                });
                continue;
            }
            let topic = topics
                .last_mut()
                .ok_or_else(|| err("term row before any [seed] header"))?;
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 6 {
                return Err(err("expected `rank term mrr r_all r_emb r_plm`"));
            }
            let opt = |s: &str| -> Result<Option<u32>> {
                if s == "-" {
                    Ok(None)
                } else {
                    s.parse().map(Some).map_err(|_| err("bad rank"))
                }
            };
            topic.terms.push(TopicTerm {
                term: f[1].to_string(),
                mrr: f[2].parse().map_err(|_| err("bad mrr"))?,
                r_all: f[3].parse().map_err(|_| err("bad rank"))?,
                r_emb: opt(f[4])?,
                r_plm: opt(f[5])?,
                anchors: Vec::new(),
            });
        }
        Ok(TopicResult {
            config_hash: config_hash.ok_or_else(|| Error::parse(origin, 1, "missing `# config_hash:` line"))?,
            iterations,
            topics,
        })
    }
}
