use thiserror::Error;

use crate::corpus::Symbol;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown alphabet profile `{0}`")]
    UnknownProfile(String),

    #[error("custom alphabet is empty")]
    EmptyAlphabet,

    #[error("alphabet needs at least 2 symbols, got {0}")]
    AlphabetTooSmall(usize),

    #[error("duplicate symbol byte 0x{0:02x} in custom alphabet")]
    DuplicateSymbol(u8),

    #[error("symbol {symbol} out of range for alphabet of size {size}")]
    SymbolOutOfRange { symbol: Symbol, size: usize },

    #[error("context has c(w) = 0 and #(w) = 0; no estimate exists")]
    DegenerateContext,

    #[error("binomial domain error: k = {k} > n = {n}")]
    BinomialDomain { n: u64, k: u64 },

    #[error("inconsistent tree shape: {0}")]
    InconsistentShape(String),

    #[error("unsupported model file version `{0}`")]
    VersionMismatch(String),

    #[error("malformed model file at line {line}: {reason}")]
    MalformedModel { line: usize, reason: String },

    #[error("model violates validity constraints: {0}")]
    InvalidModel(String),

    #[error("bad stream magic")]
    BadMagic,

    #[error("model digest does not match the stream header")]
    DigestMismatch,

    #[error("payload truncated: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },

    #[error("payload has {extra} trailing bytes")]
    TrailingPayload { extra: usize },

    #[error("test sequence is empty")]
    EmptyTest,

    #[error("no input files")]
    NoInput,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable short name for machine-readable error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::UnknownProfile(_) => "unknown-profile",
            Error::EmptyAlphabet => "empty-alphabet",
            Error::AlphabetTooSmall(_) => "alphabet-too-small",
            Error::DuplicateSymbol(_) => "duplicate-symbol",
            Error::SymbolOutOfRange { .. } => "symbol-out-of-range",
            Error::DegenerateContext => "degenerate-context",
            Error::BinomialDomain { .. } => "binomial-domain",
            Error::InconsistentShape(_) => "inconsistent-shape",
            Error::VersionMismatch(_) => "version-mismatch",
            Error::MalformedModel { .. } => "malformed-model",
            Error::InvalidModel(_) => "invalid-model",
            Error::BadMagic => "bad-magic",
            Error::DigestMismatch => "digest-mismatch",
            Error::TruncatedPayload { .. } => "truncated-payload",
            Error::TrailingPayload { .. } => "trailing-payload",
            Error::EmptyTest => "empty-test",
            Error::NoInput => "no-input",
            Error::InvalidConfig(_) => "invalid-config",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
