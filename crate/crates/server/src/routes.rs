use axum::body::Body;
use axum::extract::rejection::FormRejection;
use axum::extract::{Path, Query, State};
use axum::http::header::{CONTENT_DISPOSITION, CONTENT_LENGTH, CONTENT_TYPE, LOCATION, SET_COOKIE};
use axum::http::{HeaderMap, HeaderName, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Form;
use serde::Deserialize;

use gallery_core::access::ModelRole;
use gallery_core::document;
use gallery_core::model::DEFAULT_LICENSE;
use gallery_core::time::format_timestamp;
use gallery_core::workflow::{AuditEvent, Verdict, VerdictKind};
use gallery_core::xml::Element;
use gallery_core::{BlobId, ModelVersion};

use crate::auth::{clear_cookie, session_cookie, session_token, Authed, Viewer};
use crate::error::ApiError;
use crate::{blocking, AppState, LICENSE_HEADER, XML};

type ApiResult = Result<Response, ApiError>;

fn xml(status: StatusCode, body: String) -> Response {
    (status, [XML], body).into_response()
}

fn doc(v: &ModelVersion) -> Response {
    xml(StatusCode::OK, document::serialize(v))
}

fn form<T>(f: Result<Form<T>, FormRejection>) -> Result<T, ApiError> {
    f.map(|Form(t)| t).map_err(|e| ApiError::bad_request(e.body_text()))
}

fn version_number(n: &str) -> Result<u32, ApiError> {
    n.parse().map_err(|_| ApiError::not_found(format!("version {n}")))
}

fn event_element(e: &AuditEvent) -> Element {
    Element::new("event")
        .with_attr("key", e.key.as_str())
        .with_attr("version", e.version.to_string())
        .with_attr("actor", e.actor.clone())
        .with_attr("from", e.from_status.as_str())
        .with_attr("to", e.to_status.as_str())
        .with_attr("at", format_timestamp(&e.at))
        .with_text(e.review_text.clone().unwrap_or_default())
}

fn event(e: &AuditEvent) -> Response {
    xml(StatusCode::OK, event_element(e).to_canonical_string())
}

pub fn permalink(key: &str) -> String {
    format!("/models/{key}")
}

/// A published version wrapped with its license and permanent address.
fn publication(v: &ModelVersion) -> Response {
    let license = v.description.license.clone().unwrap_or_else(|| DEFAULT_LICENSE.to_owned());
    let body = Element::new("publication")
        .with_attr("license", license.clone())
        .with_attr("url", permalink(v.key.as_str()))
        .with_child(document::to_element(v))
        .to_canonical_string();
    let mut response = xml(StatusCode::OK, body);
    if let Ok(value) = license.parse() {
        response.headers_mut().insert(LICENSE_HEADER, value);
    }
    response
}

// ---- sessions

#[derive(Deserialize)]
pub struct LoginForm {
    user: String,
    pass: String,
}

pub async fn login(State(s): State<AppState>, f: Result<Form<LoginForm>, FormRejection>) -> ApiResult {
    let LoginForm { user, pass } = form(f)?;
    let g = s.gallery.clone();
    let session = blocking(move || g.login(&user, &pass)).await?;
    let max_age = (session.expires_at - session.created_at).num_seconds();
    let body = Element::new("session")
        .with_attr("user", session.username.clone())
        .with_attr("expires", format_timestamp(&session.expires_at))
        .to_canonical_string();
    let mut response = xml(StatusCode::OK, body);
    response.headers_mut().insert(SET_COOKIE, session_cookie(&session.token, max_age).parse().expect("token is header-safe"));
    Ok(response)
}

pub async fn logout(State(s): State<AppState>, Authed(_): Authed, headers: HeaderMap) -> ApiResult {
    if let Some(token) = session_token(&headers) {
        s.gallery.logout(&token);
    }
    Ok((StatusCode::NO_CONTENT, [(SET_COOKIE, clear_cookie())]).into_response())
}

// ---- models

#[derive(Deserialize)]
pub struct CreateForm {
    title: String,
}

pub async fn create_model(State(s): State<AppState>, Authed(u): Authed, f: Result<Form<CreateForm>, FormRejection>) -> ApiResult {
    let CreateForm { title } = form(f)?;
    let g = s.gallery.clone();
    let v = blocking(move || g.create_model(&u, &title)).await?;
    let mut response = xml(StatusCode::CREATED, document::serialize(&v));
    response.headers_mut().insert(LOCATION, permalink(v.key.as_str()).parse().expect("keys are header-safe"));
    Ok(response)
}

pub async fn list_models(State(s): State<AppState>, Viewer(u): Viewer) -> ApiResult {
    let mut root = Element::new("models");
    for m in s.gallery.list_models(u.as_ref()) {
        root.children.push(
            Element::new("model")
                .with_attr("key", m.key.as_str())
                .with_attr("version", m.version.to_string())
                .with_attr("status", m.status.as_str())
                .with_attr("title", m.title),
        );
    }
    Ok(xml(StatusCode::OK, root.to_canonical_string()))
}

pub async fn get_model(State(s): State<AppState>, Viewer(u): Viewer, Path(key): Path<String>) -> ApiResult {
    Ok(doc(&s.gallery.get_model(u.as_ref(), &key)?))
}

pub async fn get_version(State(s): State<AppState>, Viewer(u): Viewer, Path((key, n)): Path<(String, String)>) -> ApiResult {
    Ok(doc(&s.gallery.get_version(u.as_ref(), &key, version_number(&n)?)?))
}

/// Replace the content with the document in the body. Its `version`
/// attribute names the version the client edited.
pub async fn put_model(State(s): State<AppState>, Authed(u): Authed, Path(key): Path<String>, body: String) -> ApiResult {
    let submitted = document::parse(&body)?;
    if submitted.key.as_str() != key {
        return Err(gallery_core::Error::Malformed(format!("document is for {}, not {key}", submitted.key)).into());
    }
    let g = s.gallery.clone();
    let v = blocking(move || g.update_model(&u, &key, Some(submitted.version), submitted.content())).await?;
    Ok(doc(&v))
}

pub async fn delete_model(State(s): State<AppState>, Authed(u): Authed, Path(key): Path<String>) -> ApiResult {
    let g = s.gallery.clone();
    let k = key.clone();
    let freed = blocking(move || g.delete_model(&u, &k)).await?;
    let mut root = Element::new("deleted").with_attr("key", key);
    for id in freed {
        root.children.push(Element::new("blob").with_attr("id", id.as_str()));
    }
    Ok(xml(StatusCode::OK, root.to_canonical_string()))
}

// ---- workflow

pub async fn submit(State(s): State<AppState>, Authed(u): Authed, Path(key): Path<String>) -> ApiResult {
    let g = s.gallery.clone();
    Ok(event(&blocking(move || g.submit(&u, &key)).await?))
}

#[derive(Deserialize)]
pub struct ReviewForm {
    verdict: String,
    #[serde(default)]
    review_text: String,
}

pub async fn review(
    State(s): State<AppState>,
    Authed(u): Authed,
    Path(key): Path<String>,
    f: Result<Form<ReviewForm>, FormRejection>,
) -> ApiResult {
    let ReviewForm { verdict, review_text } = form(f)?;
    let kind: VerdictKind = verdict.parse().map_err(|_| ApiError::bad_request(format!("unknown verdict {verdict:?}")))?;
    let g = s.gallery.clone();
    Ok(event(&blocking(move || g.review(&u, &key, Verdict::new(kind, review_text))).await?))
}

pub async fn reopen(State(s): State<AppState>, Authed(u): Authed, Path(key): Path<String>) -> ApiResult {
    let g = s.gallery.clone();
    let (_, e) = blocking(move || g.reopen(&u, &key)).await?;
    Ok(event(&e))
}

#[derive(Deserialize)]
pub struct GrantForm {
    user: String,
    role: String,
}

pub async fn grant(
    State(s): State<AppState>,
    Authed(u): Authed,
    Path(key): Path<String>,
    f: Result<Form<GrantForm>, FormRejection>,
) -> ApiResult {
    let GrantForm { user, role } = form(f)?;
    let parsed: ModelRole = role.parse().map_err(|_| ApiError::bad_request(format!("unknown role {role:?}")))?;
    let g = s.gallery.clone();
    let (k, target) = (key.clone(), user.clone());
    blocking(move || g.grant(&u, &k, &target, parsed)).await?;
    let body = Element::new("member")
        .with_attr("key", key)
        .with_attr("user", user)
        .with_attr("role", parsed.as_str())
        .to_canonical_string();
    Ok(xml(StatusCode::OK, body))
}

// ---- files

#[derive(Deserialize)]
pub struct UploadQuery {
    filename: Option<String>,
}

pub async fn upload(
    State(s): State<AppState>,
    Authed(u): Authed,
    Path(key): Path<String>,
    Query(q): Query<UploadQuery>,
    headers: HeaderMap,
    body: Body,
) -> ApiResult {
    let limit = s.max_upload_bytes;
    let declared = headers.get(CONTENT_LENGTH).and_then(|v| v.to_str().ok()).and_then(|v| v.parse::<u64>().ok());
    if declared.is_some_and(|n| n > limit) {
        return Err(ApiError::too_large(limit));
    }
    let filename = q.filename.filter(|f| !f.trim().is_empty()).ok_or_else(|| ApiError::bad_request("filename is required"))?;
    let media_type = headers
        .get(CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .unwrap_or("application/octet-stream")
        .to_owned();
    let bytes = axum::body::to_bytes(body, usize::try_from(limit).unwrap_or(usize::MAX))
        .await
        .map_err(|_| ApiError::too_large(limit))?;
    let g = s.gallery.clone();
    let f = blocking(move || g.upload(&u, &key, &filename, &media_type, &bytes)).await?;
    Ok(xml(StatusCode::CREATED, document::file_element("file", &f).to_canonical_string()))
}

pub async fn file(State(s): State<AppState>, Viewer(u): Viewer, Path(blob): Path<String>) -> ApiResult {
    let id = BlobId::new(&blob).map_err(|_| ApiError::not_found(format!("blob {blob}")))?;
    let g = s.gallery.clone();
    let content = blocking(move || g.read_blob(u.as_ref(), &id)).await?;
    let (media_type, filename) = match &content.file {
        Some(f) => (f.media_type.clone(), f.filename.replace(['"', '\\', '\r', '\n'], "_")),
        None => ("application/octet-stream".to_owned(), content.id.to_string()),
    };
    let headers = [
        (CONTENT_TYPE, media_type),
        (CONTENT_DISPOSITION, format!("inline; filename=\"{filename}\"")),
        (HeaderName::from_static("x-content-type-options"), "nosniff".to_owned()),
    ];
    Ok((StatusCode::OK, headers, content.bytes).into_response())
}

// ---- notifications

pub async fn notifications(State(s): State<AppState>, Authed(u): Authed) -> ApiResult {
    let mut root = Element::new("notifications");
    for n in s.gallery.notifications(&u) {
        root.children.push(
            Element::new("notification")
                .with_attr("id", n.id.to_string())
                .with_attr("event", n.event.as_str())
                .with_attr("key", n.key.as_str())
                .with_attr("version", n.version.to_string())
                .with_attr("at", format_timestamp(&n.at))
                .with_attr("read", n.read.to_string())
                .with_text(n.review_text.unwrap_or_default()),
        );
    }
    Ok(xml(StatusCode::OK, root.to_canonical_string()))
}

pub async fn mark_read(State(s): State<AppState>, Authed(u): Authed, Path(id): Path<String>) -> ApiResult {
    let id: u64 = id.parse().map_err(|_| ApiError::not_found(format!("notification {id}")))?;
    let g = s.gallery.clone();
    blocking(move || g.mark_read(&u, id)).await?;
    Ok(StatusCode::NO_CONTENT.into_response())
}

// ---- administration

pub async fn collect_garbage(State(s): State<AppState>, Authed(u): Authed) -> ApiResult {
    let g = s.gallery.clone();
    let freed = blocking(move || g.collect_garbage(&u)).await?;
    let mut root = Element::new("gc");
    for id in freed {
        root.children.push(Element::new("blob").with_attr("id", id.as_str()));
    }
    Ok(xml(StatusCode::OK, root.to_canonical_string()))
}

pub async fn audit(State(s): State<AppState>, Authed(u): Authed) -> ApiResult {
    let g = s.gallery.clone();
    let events = blocking(move || g.audit(&u)).await?;
    let mut root = Element::new("audit");
    root.children.extend(events.iter().map(event_element));
    Ok(xml(StatusCode::OK, root.to_canonical_string()))
}

// ---- public permalinks, always the anonymous view

pub async fn public_model(State(s): State<AppState>, Path(key): Path<String>) -> ApiResult {
    Ok(publication(&s.gallery.get_public(&key)?))
}

pub async fn public_version(State(s): State<AppState>, Path((key, n)): Path<(String, String)>) -> ApiResult {
    Ok(publication(&s.gallery.get_version(None, &key, version_number(&n)?)?))
}
