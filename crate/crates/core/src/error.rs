use thiserror::Error;

/// Errors raised by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("modulus {modulus} is reducible: divisible by {factor}")]
    ReducibleModulus { modulus: String, factor: String },

    #[error("{what}: parse error at line {line}, column {column}: {message}")]
    Parse {
        what: &'static str,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("{op} requires prime characteristic (got characteristic {characteristic})")]
    UnsupportedCharacteristic { op: &'static str, characteristic: u64 },

    #[error("domain exhausted: {0}")]
    DomainExhausted(String),

    #[error("window {inner} is not contained in {outer}")]
    OutOfWindow { inner: String, outer: String },

    #[error("ring mismatch: {left} vs {right}")]
    RingMismatch { left: String, right: String },

    #[error("window mismatch: {0}")]
    WindowMismatch(String),

    #[error("inconsistent pinning at site {site}: {first} vs {second}")]
    InfeasiblePin {
        site: String,
        first: String,
        second: String,
    },

    #[error("invalid coset representative: {0}")]
    InvalidCoset(String),

    #[error("character based on {character} exceeds measure window {window}")]
    CharacterOutsideWindow { character: String, window: String },

    #[error("coefficient list does not include the trivial character")]
    MissingTrivialCharacter,

    #[error("{what} needs {size} items, above the limit of {limit} (use --force to override)")]
    ResourceLimit {
        what: String,
        size: u128,
        limit: u128,
    },

    #[error("component index {index} out of range for {count} components")]
    ComponentOutOfRange { index: usize, count: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn parse(what: &'static str, line: usize, column: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            what,
            line,
            column,
            message: message.into(),
        }
    }
}
