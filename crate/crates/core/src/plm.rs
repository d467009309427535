//! Contextualized mention vectors and the per-term representations averaged
//! from them.
//!
//! Mention vectors are produced outside this crate by an encoder exporter,
//! one vector per occurrence of a term in a sentence (word pieces already
//! averaged). Two interchangeable containers are accepted.
//!
//! Text container: the first line is a JSON header
//! `{"version":1,"dimension":q,"encoder":"...","corpus_checksum":"..."}`,
//! then one record per line: `term doc_id sent_id x_1 ... x_q`, fields
//! separated by single spaces, floats in plain decimal notation.
//!
//! Binary container, little-endian:
//!
//! ```text
//! magic        8 bytes  "TSMENT\0\0"
//! header_len   u32
//! header       header_len bytes, the same JSON header as the text container
//! n_records    u64
//! records      n_records × (u16 term length, term UTF-8 bytes,
//!                           u32 doc_id, u32 sent_id, q × f32)
//! ```
//!
//! The header checksum is [`Corpus::checksum`] of the corpus the mentions
//! were extracted from; loading against any other corpus fails.

use std::collections::HashMap;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, SentenceRef, TermId, Vocabulary};
use crate::error::{Error, Result};
use crate::util::{self, KahanVec};

const BINARY_MAGIC: &[u8; 8] = b"TSMENT\0\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MentionHeader {
    pub version: u32,
    pub dimension: usize,
    pub encoder: String,
    pub corpus_checksum: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MentionRecord {
    pub term: String,
    pub sentence: SentenceRef,
    pub vector: Vec<f32>,
}

#[derive(Clone, Debug)]
pub struct MentionStore {
    header: MentionHeader,
    records: Vec<MentionRecord>,
    by_term: HashMap<String, Vec<usize>>,
}

impl MentionStore {
    /// Validates records against the corpus and indexes them by term.
    pub fn new(header: MentionHeader, records: Vec<MentionRecord>, corpus: &Corpus) -> Result<Self> {
        if header.version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported mention format version {}",
                header.version
            )));
        }
        let checksum = corpus.checksum();
        if header.corpus_checksum != checksum {
            return Err(Error::ChecksumMismatch {
                expected: checksum,
                found: header.corpus_checksum,
            });
        }
        let mut by_term: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, rec) in records.iter().enumerate() {
            if rec.vector.len() != header.dimension {
                return Err(Error::DimensionMismatch {
                    expected: header.dimension,
                    found: rec.vector.len(),
                    record: i + 1,
                });
            }
            let sentence = corpus.sentence(rec.sentence).ok_or(Error::DanglingMention {
                record: i + 1,
                doc: rec.sentence.doc,
                sent: rec.sentence.sent,
            })?;
            if !sentence.tokens.contains(&rec.term) {
                return Err(Error::TermNotInSentence {
                    record: i + 1,
                    term: rec.term.clone(),
                    doc: rec.sentence.doc,
                    sent: rec.sentence.sent,
                });
            }
            by_term.entry(rec.term.clone()).or_default().push(i);
        }
        Ok(MentionStore {
            header,
            records,
            by_term,
        })
    }

    pub fn header(&self) -> &MentionHeader {
        &self.header
    }

    pub fn dimension(&self) -> usize {
        self.header.dimension
    }

    pub fn records(&self) -> &[MentionRecord] {
        &self.records
    }

    pub fn mention_count(&self, term: &str) -> usize {
        self.by_term.get(term).map_or(0, Vec::len)
    }

    /// Record indices for a term, in file order.
    pub fn mentions(&self, term: &str) -> &[usize] {
        self.by_term.get(term).map_or(&[], Vec::as_slice)
    }

    /// Exact (compensated) mean of a term's mention vectors.
    pub fn term_representation(&self, term: &str) -> Result<Vec<f64>> {
        let idx = self.mentions(term);
        if idx.is_empty() {
            return Err(Error::NoRepresentation(term.to_string()));
        }
        Ok(self.mean_of(idx))
    }

    fn mean_of(&self, idx: &[usize]) -> Vec<f64> {
        let mut acc = KahanVec::new(self.dimension());
        for &i in idx {
            acc.add(&self.records[i].vector);
        }
        let m = idx.len() as f64;
        acc.into_sum().into_iter().map(|x| x / m).collect()
    }
}

pub fn load_mentions(path: &Path, corpus: &Corpus) -> Result<MentionStore> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let origin = path.display().to_string();
    let (header, records) = if bytes.starts_with(BINARY_MAGIC) {
        parse_binary(&bytes)?
    } else {
        let text = String::from_utf8(bytes)
            .map_err(|_| Error::Format(format!("{origin}: neither UTF-8 text nor a binary mention container")))?;
        parse_text(&text, &origin)?
    };
    MentionStore::new(header, records, corpus)
}

pub fn parse_text(text: &str, origin: &str) -> Result<(MentionHeader, Vec<MentionRecord>)> {
    let mut lines = text.lines().enumerate();
    let (_, first) = lines
        .next()
        .ok_or_else(|| Error::parse(origin, 1, "missing header line"))?;
    let header: MentionHeader =
        serde_json::from_str(first).map_err(|e| Error::parse(origin, 1, format!("bad header: {e}")))?;
    let mut records = Vec::new();
    for (i, line) in lines {
        let lineno = i + 1;
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(' ');
        let term = fields.next().unwrap_or_default().to_string();
        let mut int = |name: &str| -> Result<u32> {
            fields
                .next()
                .and_then(|f| f.parse().ok())
                .ok_or_else(|| Error::parse(origin, lineno, format!("bad or missing {name}")))
        };
        let doc = int("doc_id")?;
        let sent = int("sent_id")?;
        let vector = fields
            .map(|f| {
                f.parse::<f32>()
                    .map_err(|_| Error::parse(origin, lineno, format!("bad float {f:?}")))
            })
            .collect::<Result<Vec<f32>>>()?;
        records.push(MentionRecord {
            term,
            sentence: SentenceRef::new(doc, sent),
            vector,
        });
    }
    Ok((header, records))
}

fn parse_binary(bytes: &[u8]) -> Result<(MentionHeader, Vec<MentionRecord>)> {
    let mut cur = Cursor {
        bytes,
        pos: BINARY_MAGIC.len(),
    };
    let header_len = cur.u32()? as usize;
    let header: MentionHeader = serde_json::from_slice(cur.take(header_len)?)?;
    let n = cur.u64()? as usize;
    let mut records = Vec::with_capacity(n.min(1 << 20));
    for i in 0..n {
        let len = cur.u16()? as usize;
        let term = std::str::from_utf8(cur.take(len)?)
            .map_err(|_| Error::Format(format!("record {}: term is not UTF-8", i + 1)))?
            .to_string();
        let doc = cur.u32()?;
        let sent = cur.u32()?;
        let vector = cur
            .take(4 * header.dimension)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("chunk of 4")))
            .collect();
        records.push(MentionRecord {
            term,
            sentence: SentenceRef::new(doc, sent),
            vector,
        });
    }
    if cur.pos != bytes.len() {
        return Err(Error::Format("trailing bytes after the last mention record".into()));
    }
    Ok((header, records))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Format("truncated binary mention container".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn write_text<W: Write>(mut out: W, header: &MentionHeader, records: &[MentionRecord]) -> io::Result<()> {
    writeln!(out, "{}", serde_json::to_string(header).map_err(io::Error::other)?)?;
    for rec in records {
        write!(out, "{} {} {}", rec.term, rec.sentence.doc, rec.sentence.sent)?;
        for x in &rec.vector {
            write!(out, " {x}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn write_binary<W: Write>(mut out: W, header: &MentionHeader, records: &[MentionRecord]) -> io::Result<()> {
    let json = serde_json::to_vec(header).map_err(io::Error::other)?;
    out.write_all(BINARY_MAGIC)?;
    out.write_all(&(json.len() as u32).to_le_bytes())?;
    out.write_all(&json)?;
    out.write_all(&(records.len() as u64).to_le_bytes())?;
    for rec in records {
        let term = rec.term.as_bytes();
        let len = u16::try_from(term.len())
            .map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "term longer than 65535 bytes"))?;
        out.write_all(&len.to_le_bytes())?;
        out.write_all(term)?;
        out.write_all(&rec.sentence.doc.to_le_bytes())?;
        out.write_all(&rec.sentence.sent.to_le_bytes())?;
        for x in &rec.vector {
            out.write_all(&x.to_le_bytes())?;
        }
    }
    Ok(())
}

/// Corpus-level term vectors `h_w`, indexed by vocabulary id.
#[derive(Clone, Debug)]
pub struct TermRepresentations {
    dimension: usize,
    vectors: Vec<Option<Vec<f64>>>,
    counts: Vec<usize>,
}

impl TermRepresentations {
    /// Averages each vocabulary term's mentions. With `cap = Some(k)`, terms
    /// with more than `k` mentions are represented by a seeded uniform
    /// reservoir sample of `k` of them, summed in file order.
    pub fn build(store: &MentionStore, vocab: &Vocabulary, cap: Option<usize>, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut vectors = Vec::with_capacity(vocab.len());
        let mut counts = Vec::with_capacity(vocab.len());
        for id in vocab.ids() {
            let idx = store.mentions(vocab.term(id));
            counts.push(idx.len());
            if idx.is_empty() {
                vectors.push(None);
                continue;
            }
            let chosen = match cap {
                Some(k) if idx.len() > k => reservoir(idx, k, &mut rng),
                _ => idx.to_vec(),
            };
            vectors.push(Some(store.mean_of(&chosen)));
        }
        TermRepresentations {
            dimension: store.dimension(),
            vectors,
            counts,
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Number of mentions `M` recorded for the term (before any cap).
    pub fn mention_count(&self, w: TermId) -> usize {
        self.counts.get(w.index()).copied().unwrap_or(0)
    }

    pub fn get(&self, w: TermId) -> Option<&[f64]> {
        self.vectors.get(w.index()).and_then(|v| v.as_deref())
    }

    pub fn term_representation(&self, w: TermId) -> Result<&[f64]> {
        self.get(w).ok_or_else(|| Error::NoRepresentation(format!("#{}", w.0)))
    }

    /// Representation similarity `cos(h_w, h_t)`.
    pub fn sim_plm(&self, w: TermId, t: TermId) -> Result<f64> {
        let a = self.term_representation(w)?;
        let b = self.term_representation(t)?;
        for (id, v) in [(w, a), (t, b)] {
            if util::norm(v) == 0.0 {
                return Err(Error::ZeroNorm(format!("#{}", id.0)));
            }
        }
        if w == t {
            return Ok(1.0);
        }
        Ok(util::cosine(a, b).expect("norms checked"))
    }

    /// Unit-normalized copies of the representations; missing or zero
    /// vectors stay `None`.
    pub fn normalized(&self) -> Vec<Option<Vec<f64>>> {
        self.vectors
            .iter()
            .map(|v| {
                v.as_ref().filter(|v| util::norm(v) > 0.0).map(|v| {
                    let mut v = v.clone();
                    util::normalize(&mut v);
                    v
                })
            })
            .collect()
    }
}

fn reservoir(idx: &[usize], k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut out: Vec<usize> = idx[..k].to_vec();
    for (i, &x) in idx.iter().enumerate().skip(k) {
        let j = rng.random_range(0..=i);
        if j < k {
            out[j] = x;
        }
    }
    out.sort_unstable();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus() -> Corpus {
        Corpus::from_tokens(&[
            vec![vec!["sushi", "rolls"], vec!["more", "sushi"]],
            vec![vec!["steak", "sushi"]],
        ])
    }

    fn header(c: &Corpus, dim: usize) -> MentionHeader {
        MentionHeader {
            version: FORMAT_VERSION,
            dimension: dim,
            encoder: "test".into(),
            corpus_checksum: c.checksum(),
        }
    }

    fn rec(term: &str, doc: u32, sent: u32, v: &[f32]) -> MentionRecord {
        MentionRecord {
            term: term.into(),
            sentence: SentenceRef::new(doc, sent),
            vector: v.to_vec(),
        }
    }

    #[test]
    fn counts_and_means() {
        let c = corpus();
        let store = MentionStore::new(
            header(&c, 2),
            vec![rec("sushi", 0, 0, &[1.0, 0.0]), rec("sushi", 0, 1, &[0.0, 1.0])],
            &c,
        )
        .unwrap();
        assert_eq!(store.mention_count("sushi"), 2);
        assert_eq!(store.term_representation("sushi").unwrap(), [0.5, 0.5]);
        assert!(matches!(
            store.term_representation("steak"),
            Err(Error::NoRepresentation(_))
        ));
    }

    #[test]
    fn mean_of_identical_vectors_is_the_vector() {
        let c = corpus();
        let v = [0.1f32, -0.3, 0.7];
        let records = vec![
            rec("sushi", 0, 0, &v),
            rec("sushi", 0, 1, &v),
            rec("sushi", 1, 0, &v),
            rec("sushi", 0, 0, &v),
        ];
        let store = MentionStore::new(header(&c, 3), records, &c).unwrap();
        let h = store.term_representation("sushi").unwrap();
        for (a, b) in h.iter().zip(v) {
            assert_eq!(*a, b as f64);
        }
    }

    #[test]
    fn integrity_errors() {
        let c = corpus();
        let err = MentionStore::new(header(&c, 2), vec![rec("sushi", 99, 0, &[1.0, 0.0])], &c).unwrap_err();
        assert!(matches!(err, Error::DanglingMention { doc: 99, .. }));
        assert!(err.to_string().contains("dangling mention"));
        let err = MentionStore::new(header(&c, 2), vec![rec("steak", 0, 0, &[1.0, 0.0])], &c).unwrap_err();
        assert!(matches!(err, Error::TermNotInSentence { .. }));
        let err = MentionStore::new(
            header(&c, 768),
            vec![rec("sushi", 0, 0, &[0.0; 768]), rec("sushi", 0, 1, &[0.0; 512])],
            &c,
        )
        .unwrap_err();
        assert!(matches!(
            err,
            Error::DimensionMismatch {
                expected: 768,
                found: 512,
                record: 2
            }
        ));
        assert!(err.to_string().contains("dimension mismatch"));
        let mut h = header(&c, 2);
        h.corpus_checksum = "00".into();
        assert!(matches!(
            MentionStore::new(h, vec![], &c),
            Err(Error::ChecksumMismatch { .. })
        ));
    }

    #[test]
    fn text_and_binary_containers_agree() {
        let c = corpus();
        let h = header(&c, 2);
        let records = vec![rec("sushi", 0, 0, &[1.5, -0.25]), rec("steak", 1, 0, &[0.0, 3.0])];
        let dir = tempfile::tempdir().unwrap();
        let tp = dir.path().join("m.txt");
        let bp = dir.path().join("m.bin");
        write_text(fs::File::create(&tp).unwrap(), &h, &records).unwrap();
        write_binary(fs::File::create(&bp).unwrap(), &h, &records).unwrap();
        let a = load_mentions(&tp, &c).unwrap();
        let b = load_mentions(&bp, &c).unwrap();
        assert_eq!(a.records(), records.as_slice());
        assert_eq!(b.records(), records.as_slice());
        assert_eq!(a.header(), b.header());
    }

    #[test]
    fn text_parse_errors_carry_line_numbers() {
        let c = corpus();
        let text = format!(
            "{}\nsushi 0 0 1 0\nsushi 0 x 1 0\n",
            serde_json::to_string(&header(&c, 2)).unwrap()
        );
        assert!(matches!(parse_text(&text, "m"), Err(Error::Parse { line: 3, .. })));
    }

    #[test]
    fn sim_plm_cases() {
        let c = corpus();
        let records = vec![
            rec("sushi", 0, 0, &[1.0, 0.0]),
            rec("rolls", 0, 0, &[0.0, 1.0]),
            rec("steak", 1, 0, &[-1.0, 0.0]),
            rec("more", 0, 1, &[0.0, 0.0]),
        ];
        let store = MentionStore::new(header(&c, 2), records, &c).unwrap();
        let v = Vocabulary::build(&c, 1);
        let reps = TermRepresentations::build(&store, &v, None, 0);
        let id = |t: &str| v.id(t).unwrap();
        assert_eq!(reps.sim_plm(id("sushi"), id("sushi")).unwrap(), 1.0);
        assert_eq!(reps.sim_plm(id("sushi"), id("rolls")).unwrap(), 0.0);
        assert_eq!(reps.sim_plm(id("sushi"), id("steak")).unwrap(), -1.0);
        assert!(matches!(reps.sim_plm(id("sushi"), id("more")), Err(Error::ZeroNorm(_))));
        assert_eq!(reps.mention_count(id("sushi")), 1);
    }

    #[test]
    fn cap_limits_averaged_mentions() {
        let c = corpus();
        let records: Vec<_> = (0..50).map(|i| rec("sushi", 0, 0, &[i as f32, 1.0])).collect();
        let store = MentionStore::new(header(&c, 2), records, &c).unwrap();
        let v = Vocabulary::build(&c, 1);
        let capped = TermRepresentations::build(&store, &v, Some(10), 3);
        let full = TermRepresentations::build(&store, &v, None, 3);
        let id = v.id("sushi").unwrap();
        assert_eq!(full.get(id).unwrap()[0], 24.5);
        assert_ne!(capped.get(id).unwrap()[0], 24.5);
        assert_eq!(capped.get(id).unwrap()[1], 1.0);
        assert_eq!(capped.mention_count(id), 50);
        let again = TermRepresentations::build(&store, &v, Some(10), 3);
        assert_eq!(capped.get(id), again.get(id));
    }
}
