use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    /// A malformed line in one of the text formats. `line` is 1-based.
    #[error("{file}:{line}: {message}")]
    Parse { file: String, line: usize, message: String },

    #[error("empty corpus")]
    EmptyCorpus,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid seed set: {0}")]
    Seeds(String),

    #[error("seed `{0}` is not in the vocabulary")]
    UnknownSeed(String),

    #[error("seed `{0}` has no encoder mentions")]
    SeedWithoutMentions(String),

    #[error("term `{0}` is not in the vocabulary")]
    UnknownTerm(String),

    #[error("dimension mismatch: expected {expected}, found {found} (record {record})")]
    DimensionMismatch {
        expected: usize,
        found: usize,
        record: usize,
    },

    #[error("dangling mention: record {record} cites doc {doc} sentence {sent}")]
    DanglingMention { record: usize, doc: u32, sent: u32 },

    #[error("term `{term}` does not occur in doc {doc} sentence {sent} (record {record})")]
    TermNotInSentence {
        record: usize,
        term: String,
        doc: u32,
        sent: u32,
    },

    #[error("corpus checksum mismatch: expected {expected}, found {found}")]
    ChecksumMismatch { expected: String, found: String },

    #[error("no representation for term `{0}`")]
    NoRepresentation(String),

    #[error("zero-norm representation for term `{0}`")]
    ZeroNorm(String),

    #[error("non-finite loss in {component} sample (term {term}, context {context})")]
    NonFiniteLoss {
        component: &'static str,
        term: u32,
        context: usize,
    },

    #[error("invalid format: {0}")]
    Format(String),

    #[error("gold labels have no section for seed `{0}`")]
    MissingGold(String),

    #[error("gold section for seed `{0}` is empty")]
    EmptyGold(String),

    #[error("topic `{0}` has fewer than 2 terms")]
    TooFewTerms(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(file: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            file: file.into(),
            line,
            message: message.into(),
        }
    }

    /// True for errors caused by bad inputs or configuration rather than
    /// failures while doing the work.
    pub fn is_validation(&self) -> bool {
        !matches!(self, Error::NonFiniteLoss { .. })
            && !matches!(self, Error::Io { source, .. } if source.kind() != io::ErrorKind::NotFound)
    }
}
