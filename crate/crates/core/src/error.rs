use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("alphabet size {0} outside supported range 2..=64")]
    AlphabetSize(usize),
    #[error("symbol {symbol} outside alphabet of size {k}")]
    SymbolOutOfRange { symbol: usize, k: usize },
    #[error("word length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty word where a nonempty one is required")]
    EmptyWord,
    #[error("{k}^{m} cylinders exceed the exact integer range")]
    IndexOverflow { k: usize, m: usize },

    #[error("invalid model: {invariant}: {detail}")]
    InvalidModel { invariant: &'static str, detail: String },
    #[error("transition matrix is not irreducible")]
    Reducible,
    #[error("chain is periodic with period {0}")]
    Periodic(usize),
    #[error("eigen-solver did not converge after {iterations} iterations (last change {change:e})")]
    NoConvergence { iterations: usize, change: f64 },
    #[error("singular linear system")]
    Singular,
    #[error("operation requires an ergodic model; mixtures are not supported here")]
    MixtureUnsupported,
    #[error("model is not fully supported: {0}")]
    NotFullySupported(String),

    #[error("prefix has zero measure; minimeasure undefined")]
    ZeroMeasurePrefix,
    #[error("generating-set word of length {word} deeper than fingerprint depth {depth}")]
    WordTooDeep { word: usize, depth: usize },
    #[error("invalid interval ({a}, {b})")]
    InvalidInterval { a: f64, b: f64 },
    #[error("depth mismatch: {0} vs {1}")]
    DepthMismatch(usize, usize),
    #[error("{0} atoms remain after merging; cap is {1}")]
    TooManyAtoms(usize, usize),
    #[error("trajectory of length {have} shorter than requested {want}")]
    TrajectoryTooShort { have: usize, want: usize },
    #[error("degenerate generating set: Q(U) = {0}")]
    DegenerateQ(f64),
    #[error("past window of length {have} shorter than model memory {need}")]
    WindowTooShort { have: usize, need: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("optimal transport failed: {0}")]
    Transport(String),
}

pub type Result<T> = std::result::Result<T, Error>;
