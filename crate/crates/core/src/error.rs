use thiserror::Error;

use crate::model::Status;
use crate::schema::ValidationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("title must not be empty")]
    InvalidTitle,
    #[error("invalid model key {0:?}")]
    InvalidKey(String),
    #[error("no free key derivable from {0:?}")]
    DuplicateKey(String),
    #[error("model is {0} and cannot be edited")]
    ForbiddenState(Status),
    #[error("operation not allowed while model is {0}")]
    IllegalState(Status),
    #[error("document failed validation with {} violation(s)", .0.violations.len())]
    ValidationFailed(Box<ValidationReport>),
    #[error("permission denied")]
    Forbidden,
    #[error("review text must not be empty")]
    EmptyReviewText,
    #[error("password must have at least {} characters", crate::access::MIN_PASSWORD_LEN)]
    WeakPassword,
    #[error("password hash is malformed")]
    MalformedHash,
    #[error("bad credentials")]
    BadCredentials,
    #[error("authentication required")]
    Unauthenticated,
    #[error("unknown user {0:?}")]
    UnknownUser(String),
    #[error("invalid user record: {0}")]
    InvalidUser(String),
    #[error("schema version {0} is not registered")]
    UnknownSchema(u32),
    #[error("malformed document: {0}")]
    Malformed(String),
    #[error("password hashing failed: {0}")]
    Hashing(String),
}

impl Error {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidTitle => "INVALID_TITLE",
            Error::InvalidKey(_) => "INVALID_KEY",
            Error::DuplicateKey(_) => "DUPLICATE_KEY",
            Error::ForbiddenState(_) => "FORBIDDEN_STATE",
            Error::IllegalState(_) => "ILLEGAL_STATE",
            Error::ValidationFailed(_) => "VALIDATION_FAILED",
            Error::Forbidden => "FORBIDDEN",
            Error::EmptyReviewText => "EMPTY_REVIEW_TEXT",
            Error::WeakPassword => "WEAK_PASSWORD",
            Error::MalformedHash => "MALFORMED_HASH",
            Error::BadCredentials => "BAD_CREDENTIALS",
            Error::Unauthenticated => "UNAUTHENTICATED",
            Error::UnknownUser(_) => "UNKNOWN_USER",
            Error::InvalidUser(_) => "INVALID_USER",
            Error::UnknownSchema(_) => "UNKNOWN_SCHEMA",
            Error::Malformed(_) => "MALFORMED_DOCUMENT",
            Error::Hashing(_) => "INTERNAL",
        }
    }
}
