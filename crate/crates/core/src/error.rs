//! Error types, one enum per pipeline stage.
//!
//! Each stage reports failures in its own vocabulary; [`Error`] is the
//! crate-wide umbrella used where stages compose (prediction, explanation,
//! the CLI).

use thiserror::Error;

/// SMILES tokenizer and parser failures. Offsets are byte positions into the
/// input string.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("empty SMILES input")]
    EmptyInput,
    #[error("unexpected character {found:?} at offset {offset}")]
    UnexpectedChar { offset: usize, found: char },
    #[error("unknown element symbol {symbol:?} at offset {offset}")]
    UnknownElement { offset: usize, symbol: String },
    #[error("unbalanced parenthesis at offset {offset}")]
    UnbalancedParen { offset: usize },
    #[error("ring bond {label} opened but never closed")]
    UnclosedRing { label: u16 },
    #[error("ring bond {label} reopened at offset {offset} while already open on the same atom")]
    SelfRingBond { label: u16, offset: usize },
    #[error("bond at offset {offset} has no preceding atom")]
    DanglingBond { offset: usize },
    #[error("unterminated bracket atom starting at offset {offset}")]
    UnterminatedBracket { offset: usize },
    #[error("bracket atom at offset {offset} is malformed: {reason}")]
    MalformedBracket { offset: usize, reason: String },
    #[error(
        "atom {index} ({element}) has bond order sum {order_sum} exceeding any supported valence"
    )]
    ValenceExceeded {
        index: usize,
        element: String,
        order_sum: String,
    },
    #[error("duplicate bond between atoms {a} and {b}")]
    DuplicateBond { a: usize, b: usize },
    #[error("ring bond {label} declares conflicting bond orders at its two ends")]
    RingBondConflict { label: u16 },
}

/// Featurizer failures.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FeatureError {
    #[error("molecule has {atoms} atoms but the padded node budget is {max_nodes}")]
    TooManyAtoms { atoms: usize, max_nodes: usize },
    #[error("atom {index} has degree {degree}, above the supported maximum of {max}")]
    DegreeOverflow {
        index: usize,
        degree: usize,
        max: usize,
    },
    #[error("atom {index} carries {count} hydrogens, above the supported maximum of {max}")]
    HydrogenOverflow {
        index: usize,
        count: usize,
        max: usize,
    },
}

/// Tensor and tape failures.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TensorError {
    #[error("{op}: shape mismatch ({detail})")]
    ShapeMismatch { op: &'static str, detail: String },
    #[error("{op}: mask excludes every entry")]
    AllMasked { op: &'static str },
    #[error("{op}: produced a non-finite value")]
    NonFinite { op: &'static str },
    #[error("{op}: invalid argument ({detail})")]
    InvalidArgument { op: &'static str, detail: String },
}

/// Model construction, serialization, and inference failures.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("model file is corrupt: {reason}")]
    CorruptFile { reason: String },
    #[error("model file format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("model hyperparameters are incompatible: {reason}")]
    IncompatibleHyperparameters { reason: String },
    #[error("model i/o failed: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Dataset loading, splitting, and negative-sampling failures.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("dataset file not found: {path}")]
    FileNotFound { path: String },
    #[error("row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },
    #[error("dataset i/o failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("dataset contains only one class; both labels are required")]
    SingleClass,
    #[error("dataset is empty")]
    EmptyInput,
    #[error(
        "negative sampling requested {requested} pairs but only {available} unseen pairs exist"
    )]
    PoolExhausted { requested: usize, available: usize },
    #[error("invalid split fraction {fraction}; must lie strictly between 0 and 1")]
    BadSplitFraction { fraction: f64 },
    #[error("fold count {folds} is invalid for {rows} rows")]
    BadFoldCount { folds: usize, rows: usize },
    #[error("scores and labels disagree in length: {scores} vs {labels}")]
    LengthMismatch { scores: usize, labels: usize },
}

/// Explanation rendering failures.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExplainError {
    #[error("unsupported output format {found:?}; expected one of: svg, dot")]
    UnsupportedFormat { found: String },
    #[error("intensity list length {intensities} does not match atom count {atoms}")]
    IntensityMismatch { intensities: usize, atoms: usize },
}

/// Umbrella error for cross-stage entry points.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Explain(#[from] ExplainError),
    #[error("invalid configuration: {0}")]
    Config(String),
}
