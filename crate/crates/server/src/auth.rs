//! Who is calling. A request carries either the session cookie or, from a
//! loopback peer only, HTTP Basic credentials.

use std::net::SocketAddr;

use axum::async_trait;
use axum::extract::{ConnectInfo, FromRequestParts};
use axum::http::header::{AUTHORIZATION, COOKIE};
use axum::http::request::Parts;
use axum::http::{HeaderMap, StatusCode};
use base64::engine::general_purpose::STANDARD;
use base64::Engine as _;
use gallery_core::access::{Credentials, User};

use crate::error::ApiError;
use crate::AppState;

pub const SESSION_COOKIE: &str = "gallery_session";

pub fn session_cookie(token: &str, max_age_secs: i64) -> String {
    format!("{SESSION_COOKIE}={token}; HttpOnly; Secure; Path=/; SameSite=Strict; Max-Age={max_age_secs}")
}

pub fn clear_cookie() -> String {
    format!("{SESSION_COOKIE}=; HttpOnly; Secure; Path=/; SameSite=Strict; Max-Age=0")
}

pub fn session_token(headers: &HeaderMap) -> Option<String> {
    headers
        .get_all(COOKIE)
        .iter()
        .filter_map(|v| v.to_str().ok())
        .flat_map(|v| v.split(';'))
        .filter_map(|pair| pair.trim().split_once('='))
        .find(|(name, _)| *name == SESSION_COOKIE)
        .map(|(_, value)| value.to_owned())
}

fn basic_credentials(headers: &HeaderMap) -> Option<Result<(String, String), ApiError>> {
    let value = headers.get(AUTHORIZATION)?;
    let parsed = value
        .to_str()
        .ok()
        .and_then(|v| v.strip_prefix("Basic "))
        .and_then(|b64| STANDARD.decode(b64.trim()).ok())
        .and_then(|raw| String::from_utf8(raw).ok())
        .and_then(|s| s.split_once(':').map(|(u, p)| (u.to_owned(), p.to_owned())));
    Some(parsed.ok_or_else(ApiError::unauthenticated))
}

fn is_loopback(parts: &Parts) -> bool {
    // No peer address means the router was driven in-process.
    parts.extensions.get::<ConnectInfo<SocketAddr>>().map_or(true, |ConnectInfo(addr)| addr.ip().is_loopback())
}

/// Resolve the caller. `Ok(None)` when the request carries no credentials.
async fn resolve(parts: &Parts, state: &AppState) -> Result<Option<User>, ApiError> {
    if let Some(token) = session_token(&parts.headers) {
        let gallery = state.gallery.clone();
        return crate::blocking(move || gallery.authenticate(Credentials::Session(&token))).await.map(Some);
    }
    match basic_credentials(&parts.headers) {
        None => Ok(None),
        Some(Err(e)) => Err(e),
        Some(Ok(_)) if !is_loopback(parts) => Err(ApiError::new(
            StatusCode::UNAUTHORIZED,
            "UNAUTHENTICATED",
            "password credentials are only accepted from loopback; log in for a session",
        )),
        Some(Ok((username, password))) => {
            let gallery = state.gallery.clone();
            crate::blocking(move || gallery.authenticate(Credentials::Password { username: &username, password: &password }))
                .await
                .map(Some)
        }
    }
}

/// A signed-in caller; anything else is rejected with 401.
pub struct Authed(pub User);

#[async_trait]
impl FromRequestParts<AppState> for Authed {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &AppState) -> Result<Self, Self::Rejection> {
        resolve(parts, state).await?.map(Authed).ok_or_else(ApiError::unauthenticated)
    }
}

/// The caller on routes that also serve the public. Credentials that are
/// present but wrong still fail with 401, except a stale session cookie,
/// which a browser keeps sending after expiry and which reads as anonymous.
pub struct Viewer(pub Option<User>);

#[async_trait]
impl FromRequestParts<AppState> for Viewer {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &AppState) -> Result<Self, Self::Rejection> {
        match resolve(parts, state).await {
            Ok(user) => Ok(Viewer(user)),
            Err(_) if session_token(&parts.headers).is_some() => Ok(Viewer(None)),
            Err(e) => Err(e),
        }
    }
}
