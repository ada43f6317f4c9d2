use alloc::string::String;

use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("bias type {type_id} is not defined for the {axis} axis")]
    InvalidBiasSpec { axis: &'static str, type_id: u8 },

    #[error("invalid value {value:?} for {field}")]
    InvalidValue { field: &'static str, value: String },

    #[error("bias type {type_id}: missing required slot `{slot}`")]
    MissingSlot { slot: String, type_id: u8 },

    #[error("template has unknown placeholder `[{0}]`")]
    UnknownPlaceholder(String),

    #[error("template for {0} is not defined in the catalog")]
    MissingTemplate(String),

    #[error("hiring prompt needs exactly 8 candidates, got {0}")]
    CandidateCount(usize),

    #[error("cannot sample {k} items from a pool of {len}")]
    SampleTooLarge { k: usize, len: usize },

    #[error("duplicate record id {id:?} at positions {first} and {second}")]
    DuplicateId { id: String, first: usize, second: usize },

    #[error("record {id:?}: {reason}")]
    InvalidRecord { id: String, reason: String },

    #[error("{pool} pool too small: need {needed}, have {available} (short by {})", needed - available)]
    InsufficientPool { pool: &'static str, needed: u64, available: u64 },

    #[error("replace policy requires a total size")]
    MissingTotal,

    #[error("append policy cannot reach a bias ratio of 1")]
    AppendFullRatio,

    #[error("invalid bias ratio {0:?}: expected a value in [0, 1]")]
    InvalidRatio(String),

    #[error("culture-axis generation requires source questions")]
    MissingSources,

    #[error("token guard applies to augmented records only; record {0:?} is original")]
    GuardOnOriginal(String),

    #[error("embedding dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("embedding set is empty")]
    EmptyEmbeddings,

    #[error("ids and vectors are not aligned ({ids} ids, {vectors} vectors)")]
    MisalignedIds { ids: usize, vectors: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("no input rows")]
    EmptyInput,

    #[error("no dollar amount found in response")]
    NoSalary,

    #[error("every salary response was unparsable ({0} rows)")]
    AllUnparsed(usize),

    #[error("duplicate candidate name {0:?}")]
    DuplicateCandidate(String),

    #[error("question {question:?}: option {option} out of range (0..{len})")]
    OptionOutOfRange { question: String, option: usize, len: usize },

    #[error("question {0:?} has no human answer distribution")]
    MissingHumanDistribution(String),

    #[error("projection needs at least {needed} {what}, got {got}")]
    TooFewForProjection { what: &'static str, needed: usize, got: usize },

    #[error("row {index}: missing `{field}` label required for slicing")]
    MissingGroupLabel { index: usize, field: &'static str },

    #[error("human distribution for {0:?} must be finite, non-negative and not all zero")]
    InvalidDistribution(String),

    #[error("lexicon entry {0:?} must be lowercase and unique")]
    InvalidLexiconEntry(String),
}
