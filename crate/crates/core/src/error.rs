use alloc::string::String;
use alloc::vec::Vec;

/// Errors raised by the core engine.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("index {index} out of range for length {len}")]
    Index { index: usize, len: usize },
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("missing item key in embedding data: {0}")]
    MissingKey(String),
    #[error("unknown item keys: {}", format_unknown(.0))]
    UnknownItems(Vec<(usize, String)>),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("non-finite value in {tensor}")]
    NonFinite { tensor: String },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("aborted: {0}")]
    Aborted(String),
}

fn format_unknown(items: &[(usize, String)]) -> String {
    use core::fmt::Write;
    let mut out = String::new();
    for (i, (line, key)) in items.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        let _ = write!(out, "{key:?} (line {line})");
    }
    out
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True for errors caused by numerical blow-up during training.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NonFinite { .. })
    }
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
