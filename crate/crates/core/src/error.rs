use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("parse error at line {line}, column {col}: {msg}")]
    Parse {
        line: usize,
        col: usize,
        msg: String,
    },
    #[error("symbol `{symbol}` used with arity {found}, declared rank {expected}")]
    RankMismatch {
        symbol: String,
        expected: usize,
        found: usize,
    },
    #[error("undeclared symbol `{0}`")]
    Undeclared(String),
    #[error("arity mismatch: expected {expected} parts, got {found}")]
    Arity { expected: usize, found: usize },
    #[error("hole index {index} out of range (context has {holes} holes)")]
    HoleIndex { index: usize, holes: usize },
    #[error("expected an affine context, found {0} holes")]
    NotAffine(usize),
    #[error("enumeration budget of {0} items exceeded")]
    Budget(usize),
    #[error("grammar has empty-language nonterminals: {0}")]
    Unpruned(String),
    #[error("every nonterminal has an empty language")]
    AllEmpty,
    #[error("no nonterminal has an infinite language")]
    NoInfinite,
    #[error("unknown nonterminal `{0}`")]
    UnknownNonterminal(String),
    #[error("size {size} beyond table bound {bound}")]
    OutOfRange { size: usize, bound: usize },
    #[error("empty slice: no tree of size {size} for `{nt}`")]
    EmptySlice { nt: String, size: usize },
    #[error("grammar is not canonical: {0}")]
    NotCanonical(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("period validation failed: {0}")]
    PeriodCheck(String),
    #[error("hole {hole}: {msg}")]
    HoleMismatch { hole: usize, msg: String },
    #[error("tree is not in the language of `{0}`")]
    NotInLanguage(String),
    #[error("ambiguity detected: {0}")]
    Ambiguous(String),
    #[error("type error: {0}")]
    Type(String),
    #[error("renaming needs more than {0} variables")]
    TooManyVariables(usize),
    #[error("invalid argument: {0}")]
    Domain(String),
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
