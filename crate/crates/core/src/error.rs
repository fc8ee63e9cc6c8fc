use alloc::string::String;
use alloc::vec::Vec;

/// Errors raised by the core algorithms and parsers.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("{source_name}:{line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },
    #[error("concept phrase {phrase:?} mapped to both {first:?} and {second:?}")]
    ConflictingConceptType {
        phrase: String,
        first: String,
        second: String,
    },
    #[error("vocabulary is empty after applying min_count={min_count}")]
    EmptyVocabulary { min_count: u64 },
    #[error("vector length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("cannot train on an empty sample set")]
    EmptySampleSet,
    #[error("phrase {0:?} does not occur in the corpus")]
    PhraseNotInCorpus(String),
    #[error("feature schema is for {schema_n}-grams but the collocate has {collocate_n} tokens")]
    SchemaMismatch { schema_n: usize, collocate_n: usize },
    #[error("verbatim {verbatim_id}: {found} tags for {expected} tokens")]
    TagLengthMismatch {
        verbatim_id: String,
        expected: usize,
        found: usize,
    },
    #[error("no tags available for verbatim {0}")]
    MissingTags(String),
    #[error("scoring requires at least one prediction")]
    EmptyInput,
    #[error("{} selected samples have no label: {}", .0.len(), .0.join(", "))]
    UnlabeledSamples(Vec<String>),
    #[error("unknown verbatim id {0}")]
    UnknownVerbatim(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = core::result::Result<T, Error>;
