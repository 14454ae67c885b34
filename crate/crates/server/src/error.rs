use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use gallery_core::xml::Element;
use gallery_store::StoreError;

use crate::XML;

/// An error as sent to clients: `<error status="403" code="FORBIDDEN">message</error>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self { status, code, message: message.into() }
    }

    pub fn unauthenticated() -> Self {
        Self::new(StatusCode::UNAUTHORIZED, "UNAUTHENTICATED", "authentication required")
    }

    pub fn not_found(what: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "NOT_FOUND", format!("{} not found", what.into()))
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "BAD_REQUEST", message)
    }

    pub fn too_large(limit: u64) -> Self {
        Self::new(StatusCode::PAYLOAD_TOO_LARGE, "PAYLOAD_TOO_LARGE", format!("uploads are limited to {limit} bytes"))
    }

    pub fn to_xml(&self) -> String {
        Element::new("error")
            .with_attr("status", self.status.as_u16().to_string())
            .with_attr("code", self.code)
            .with_text(self.message.clone())
            .to_canonical_string()
    }
}

/// HTTP status for a service error code.
pub fn status_for(code: &str) -> StatusCode {
    match code {
        "UNAUTHENTICATED" | "BAD_CREDENTIALS" => StatusCode::UNAUTHORIZED,
        "FORBIDDEN" => StatusCode::FORBIDDEN,
        "NOT_FOUND" | "INVALID_KEY" => StatusCode::NOT_FOUND,
        "INVALID_TITLE" | "VALIDATION_FAILED" | "EMPTY_REVIEW_TEXT" | "WEAK_PASSWORD" | "MALFORMED_DOCUMENT"
        | "INVALID_USER" | "UNKNOWN_USER" | "BAD_REQUEST" => StatusCode::BAD_REQUEST,
        "DUPLICATE_KEY" | "FORBIDDEN_STATE" | "ILLEGAL_STATE" | "VERSION_CONFLICT" => StatusCode::CONFLICT,
        "PAYLOAD_TOO_LARGE" => StatusCode::PAYLOAD_TOO_LARGE,
        "SERVICE_MIGRATING" => StatusCode::SERVICE_UNAVAILABLE,
        _ => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let code = e.code();
        let status = status_for(code);
        if status.is_server_error() {
            tracing::error!(code, error = %e, "request failed");
        }
        let message = match &e {
            StoreError::Domain(gallery_core::Error::ValidationFailed(report)) => report.to_string(),
            _ => e.to_string(),
        };
        Self::new(status, code, message)
    }
}

impl From<gallery_core::Error> for ApiError {
    fn from(e: gallery_core::Error) -> Self {
        StoreError::from(e).into()
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, [XML], self.to_xml()).into_response()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn error_document() {
        let e = ApiError::from(gallery_core::Error::Forbidden);
        assert_eq!(e.status, StatusCode::FORBIDDEN);
        assert_eq!(
            e.to_xml(),
            "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n<error status=\"403\" code=\"FORBIDDEN\">permission denied</error>\n"
        );
    }

    #[test]
    fn statuses() {
        let cases = [
            (StoreError::ServiceMigrating, 503),
            (StoreError::VersionConflict { expected: 1, found: 2 }, 409),
            (StoreError::NotFound("x".into()), 404),
            (gallery_core::Error::EmptyReviewText.into(), 400),
            (gallery_core::Error::BadCredentials.into(), 401),
            (gallery_core::Error::IllegalState(gallery_core::Status::Edit).into(), 409),
            (StoreError::Corrupt("x".into()), 500),
        ];
        for (e, status) in cases {
            assert_eq!(ApiError::from(e).status.as_u16(), status);
        }
    }
}
