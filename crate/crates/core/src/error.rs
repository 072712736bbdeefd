use crate::model::TokenId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("byte 0x{byte:02x} at offset {offset} is not covered by the base alphabet")]
    UnknownByte { byte: u8, offset: usize },

    #[error("token id {0} is out of range")]
    UnknownId(u32),

    #[error("operation not supported for {0} flavor")]
    UnsupportedFlavor(&'static str),

    #[error("token {0} is a base token and cannot be split")]
    CannotSplit(TokenId),

    #[error("({left}, {right}) is not a parent pair of token {token}")]
    InvalidParent {
        token: TokenId,
        left: TokenId,
        right: TokenId,
    },

    #[error("model hash mismatch: expected {expected}, found {found}")]
    HashMismatch { expected: String, found: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by corrupt or mismatched data rather than by
    /// the environment.
    pub fn is_integrity(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. }
                | Error::Integrity(_)
                | Error::HashMismatch { .. }
                | Error::InvalidParent { .. }
                | Error::Json(_)
        )
    }
}
