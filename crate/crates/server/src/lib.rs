//! HTTP interface to the gallery. Model payloads are the canonical XML
//! documents, files travel as raw bytes, errors are small XML documents.

use std::future::Future;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::http::header::{HeaderName, CONTENT_TYPE};
use axum::routing::{get, post};
use axum::Router;
use gallery_store::{Gallery, StoreError};
use tokio::net::TcpListener;

pub mod auth;
pub mod config;
pub mod error;
mod routes;

pub use config::Config;
pub use error::ApiError;

pub const XML: (HeaderName, &str) = (CONTENT_TYPE, "application/xml; charset=utf-8");
pub const LICENSE_HEADER: &str = "x-license";

#[derive(Clone)]
pub struct AppState {
    pub gallery: Arc<Gallery>,
    pub max_upload_bytes: u64,
}

impl AppState {
    pub fn new(gallery: Arc<Gallery>, max_upload_bytes: u64) -> Self {
        Self { gallery, max_upload_bytes }
    }
}

/// Run blocking service work (disk, bcrypt) off the async workers.
pub(crate) async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, StoreError> + Send + 'static,
) -> Result<T, ApiError> {
    match tokio::task::spawn_blocking(f).await {
        Ok(result) => result.map_err(ApiError::from),
        Err(e) => Err(ApiError::new(axum::http::StatusCode::INTERNAL_SERVER_ERROR, "INTERNAL", e.to_string())),
    }
}

pub fn router(state: AppState) -> Router {
    use routes::*;
    Router::new()
        .route("/api/login", post(login))
        .route("/api/logout", post(logout))
        .route("/api/models", post(create_model).get(list_models))
        .route("/api/models/:key", get(get_model).put(put_model).delete(delete_model))
        .route("/api/models/:key/versions/:n", get(get_version))
        .route("/api/models/:key/submit", post(submit))
        .route("/api/models/:key/review", post(review))
        .route("/api/models/:key/reopen", post(reopen))
        .route("/api/models/:key/permissions", post(grant))
        .route("/api/models/:key/media", post(upload))
        .route("/api/files/:blob", get(file))
        .route("/api/notifications", get(notifications))
        .route("/api/notifications/:id/read", post(mark_read))
        .route("/api/admin/gc", post(collect_garbage))
        .route("/api/admin/audit", get(audit))
        .route("/models/:key", get(public_model))
        .route("/models/:key/versions/:n", get(public_version))
        .fallback(|| async { ApiError::not_found("route") })
        .with_state(state)
}

/// Serve until `shutdown` resolves. Peer addresses are recorded so that
/// password credentials can be limited to loopback clients.
pub async fn serve(listener: TcpListener, state: AppState, shutdown: impl Future<Output = ()> + Send + 'static) -> std::io::Result<()> {
    axum::serve(listener, router(state).into_make_service_with_connect_info::<SocketAddr>())
        .with_graceful_shutdown(shutdown)
        .await
}
