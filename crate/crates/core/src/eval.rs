//! Topic coherence (NPMI over test documents) and term accuracy (P@k,
//! NDCG@k) against gold labels.
//!
//! Gold label files are UTF-8, one section per seed:
//!
//! ```text
//! [sports]
//! football
//! tennis
//! # comments and blank lines are ignored
//! [food]
//! sushi
//! ```

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::pipeline::TopicResult;

/// A topic as evaluated: its seed and ranked terms.
pub type SeededList = (String, Vec<String>);

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GoldLabels {
    sections: Vec<(String, BTreeSet<String>)>,
}

impl GoldLabels {
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut sections: Vec<(String, BTreeSet<String>)> = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(seed) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                let seed = seed.trim().to_lowercase();
                if seed.is_empty() {
                    return Err(Error::parse(origin, n + 1, "empty section name"));
                }
                if sections.iter().any(|(s, _)| *s == seed) {
                    return Err(Error::parse(origin, n + 1, format!("duplicate section [{seed}]")));
                }
                sections.push((seed, BTreeSet::new()));
                continue;
            }
            if line.contains(char::is_whitespace) {
                return Err(Error::parse(origin, n + 1, "one term per line expected"));
            }
            let (_, terms) = sections
                .last_mut()
                .ok_or_else(|| Error::parse(origin, n + 1, "term before any [seed] header"))?;
            terms.insert(line.to_lowercase());
        }
        if let Some((seed, _)) = sections.iter().find(|(_, t)| t.is_empty()) {
            return Err(Error::EmptyGold(seed.clone()));
        }
        Ok(GoldLabels { sections })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn seeds(&self) -> impl Iterator<Item = &str> {
        self.sections.iter().map(|(s, _)| s.as_str())
    }

    pub fn get(&self, seed: &str) -> Result<&BTreeSet<String>> {
        self.sections
            .iter()
            .find(|(s, _)| s == seed)
            .map(|(_, t)| t)
            .ok_or_else(|| Error::MissingGold(seed.to_string()))
    }
}

/// Document frequencies of single terms and term pairs.
#[derive(Clone, Debug, Default)]
pub struct CooccurrenceStats {
    num_docs: usize,
    // ascending document ids per term
    postings: HashMap<String, Vec<u32>>,
}

impl CooccurrenceStats {
    pub fn build(corpus: &Corpus) -> Self {
        let mut postings: HashMap<String, Vec<u32>> = HashMap::new();
        for (d, doc) in corpus.documents().iter().enumerate() {
            let terms: BTreeSet<&str> = doc.tokens().collect();
            for t in terms {
                postings.entry(t.to_string()).or_default().push(d as u32);
            }
        }
        CooccurrenceStats {
            num_docs: corpus.len(),
            postings,
        }
    }

    pub fn num_docs(&self) -> usize {
        self.num_docs
    }

    pub fn doc_frequency(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, Vec::len)
    }

    pub fn joint_frequency(&self, a: &str, b: &str) -> usize {
        let (Some(pa), Some(pb)) = (self.postings.get(a), self.postings.get(b)) else {
            return 0;
        };
        let (mut i, mut j, mut n) = (0, 0, 0);
        while i < pa.len() && j < pb.len() {
            match pa[i].cmp(&pb[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    n += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        n
    }

    /// NPMI of one pair, or `None` when either term never occurs. A pair
    /// that never co-occurs scores −1; a pair present in every document
    /// scores 1.
    pub fn npmi_pair(&self, a: &str, b: &str) -> Option<f64> {
        let (fa, fb) = (self.doc_frequency(a), self.doc_frequency(b));
        if fa == 0 || fb == 0 {
            return None;
        }
        let fab = self.joint_frequency(a, b);
        if fab == 0 {
            return Some(-1.0);
        }
        let n = self.num_docs as f64;
        let (pa, pb, pab) = (fa as f64 / n, fb as f64 / n, fab as f64 / n);
        if pab == 1.0 {
            return Some(1.0);
        }
        Some(((pab / (pa * pb)).ln() / -pab.ln()).clamp(-1.0, 1.0))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NpmiReport {
    /// Mean over topics with at least one evaluated pair.
    pub value: f64,
    pub per_topic: Vec<Option<f64>>,
    pub pairs_evaluated: usize,
    pub pairs_skipped: usize,
}

impl NpmiReport {
    /// Fraction of term pairs whose terms both occur in the test corpus.
    pub fn coverage(&self) -> f64 {
        let total = self.pairs_evaluated + self.pairs_skipped;
        if total == 0 {
            0.0
        } else {
            self.pairs_evaluated as f64 / total as f64
        }
    }
}

/// Mean over topics of the mean NPMI over unordered term pairs. Pairs with
/// a term absent from the statistics are skipped and counted.
pub fn npmi(topics: &[Vec<String>], stats: &CooccurrenceStats) -> Result<NpmiReport> {
    let mut report = NpmiReport::default();
    for (i, terms) in topics.iter().enumerate() {
        if terms.len() < 2 {
            return Err(Error::TooFewTerms(format!(
                "topic {} has {} term(s)",
                i + 1,
                terms.len()
            )));
        }
        let (mut sum, mut n) = (0.0, 0usize);
        for (j, a) in terms.iter().enumerate() {
            for b in &terms[j + 1..] {
                match stats.npmi_pair(a, b) {
                    Some(v) => {
                        sum += v;
                        n += 1;
                    }
                    None => report.pairs_skipped += 1,
                }
            }
        }
        report.pairs_evaluated += n;
        report.per_topic.push((n > 0).then(|| sum / n as f64));
    }
    let scored: Vec<f64> = report.per_topic.iter().flatten().copied().collect();
    if !scored.is_empty() {
        report.value = scored.iter().sum::<f64>() / scored.len() as f64;
    }
    Ok(report)
}

fn judged<'a>(topic: &'a SeededList, gold: &'a GoldLabels, k: usize) -> Result<Vec<bool>> {
    let (seed, terms) = topic;
    let labels = gold.get(seed)?;
    if terms.len() < k {
        log::warn!(
            "topic `{seed}` has {} terms, evaluating the prefix instead of the top {k}",
            terms.len()
        );
    }
    Ok(terms.iter().take(k).map(|t| labels.contains(t)).collect())
}

fn precision_one(hits: &[bool]) -> f64 {
    if hits.is_empty() {
        return 0.0;
    }
    hits.iter().filter(|&&h| h).count() as f64 / hits.len() as f64
}

fn ndcg_one(hits: &[bool]) -> f64 {
    let discount = |j: usize| 1.0 / ((j + 2) as f64).log2();
    let idcg: f64 = (0..hits.len()).map(discount).sum();
    if idcg == 0.0 {
        return 0.0;
    }
    let dcg: f64 = hits
        .iter()
        .enumerate()
        .filter(|(_, &h)| h)
        .map(|(j, _)| discount(j))
        .sum();
    dcg / idcg
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Mean over categories of the fraction of correct terms among the top `k`
/// (or the whole list when it is shorter).
pub fn precision_at_k(topics: &[SeededList], gold: &GoldLabels, k: usize) -> Result<f64> {
    let per: Vec<f64> = topics
        .iter()
        .map(|t| judged(t, gold, k).map(|h| precision_one(&h)))
        .collect::<Result<_>>()?;
    Ok(mean(&per))
}

/// Mean over categories of DCG/IDCG with a `log2(j + 1)` discount, over
/// the same prefix as [`precision_at_k`].
pub fn ndcg_at_k(topics: &[SeededList], gold: &GoldLabels, k: usize) -> Result<f64> {
    let per: Vec<f64> = topics
        .iter()
        .map(|t| judged(t, gold, k).map(|h| ndcg_one(&h)))
        .collect::<Result<_>>()?;
    Ok(mean(&per))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopicMetrics {
    pub seed: String,
    pub length: usize,
    pub npmi: Option<f64>,
    pub precision: f64,
    pub ndcg: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub config_hash: String,
    pub k: usize,
    pub npmi: f64,
    pub npmi_coverage: f64,
    pub precision: f64,
    pub ndcg: f64,
    pub topics: Vec<TopicMetrics>,
}

/// All three metrics over the top `k` terms of every topic. NPMI uses the
/// documents of `test`.
pub fn evaluate(result: &TopicResult, test: &Corpus, gold: &GoldLabels, k: usize) -> Result<MetricsReport> {
    if k == 0 {
        return Err(Error::Config("k must be positive".into()));
    }
    let lists: Vec<SeededList> = result
        .topics
        .iter()
        .map(|t| (t.seed.clone(), t.terms.iter().take(k).map(|x| x.term.clone()).collect()))
        .collect();
    let stats = CooccurrenceStats::build(test);
    let coherence = npmi(&lists.iter().map(|(_, t)| t.clone()).collect::<Vec<_>>(), &stats)?;
    let mut topics = Vec::with_capacity(lists.len());
    for (i, list) in lists.iter().enumerate() {
        let hits = judged(list, gold, k)?;
        topics.push(TopicMetrics {
            seed: list.0.clone(),
            length: list.1.len(),
            npmi: coherence.per_topic[i],
            precision: precision_one(&hits),
            ndcg: ndcg_one(&hits),
        });
    }
    Ok(MetricsReport {
        config_hash: result.config_hash.clone(),
        k,
        npmi: coherence.value,
        npmi_coverage: coherence.coverage(),
        precision: mean(&topics.iter().map(|t| t.precision).collect::<Vec<_>>()),
        ndcg: mean(&topics.iter().map(|t| t.ndcg).collect::<Vec<_>>()),
        topics,
    })
}

impl MetricsReport {
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let k = self.k;
        writeln!(s, "# config_hash: {}", self.config_hash).unwrap();
        writeln!(
            s,
            "{:<20} {:>6} {:>8} {:>8} {:>8}",
            "seed",
            "terms",
            "NPMI",
            format!("P@{k}"),
            format!("NDCG@{k}")
        )
        .unwrap();
        for t in &self.topics {
            let npmi = t.npmi.map_or("-".to_string(), |v| format!("{v:.4}"));
            writeln!(
                s,
                "{:<20} {:>6} {:>8} {:>8.4} {:>8.4}",
                t.seed, t.length, npmi, t.precision, t.ndcg
            )
            .unwrap();
        }
        writeln!(
            s,
            "{:<20} {:>6} {:>8.4} {:>8.4} {:>8.4}",
            "mean", "", self.npmi, self.precision, self.ndcg
        )
        .unwrap();
        writeln!(s, "NPMI pair coverage: {:.4}", self.npmi_coverage).unwrap();
        s
    }
}
