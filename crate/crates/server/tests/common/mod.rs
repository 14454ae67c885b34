#![allow(dead_code)]

use std::path::Path;
use std::sync::Arc;

use chrono::Duration;
use gallery_core::access::GlobalRole;
use gallery_core::time::{parse_timestamp, ManualClock};
use gallery_server::AppState;
use gallery_store::{Gallery, GalleryOptions};
use reqwest::header::{COOKIE, SET_COOKIE};
use sha2::{Digest, Sha256};

pub const PASSWORD: &str = "correct horse battery";

pub fn clock() -> Arc<ManualClock> {
    Arc::new(ManualClock::new(parse_timestamp("2024-05-01T09:00:00Z").unwrap()))
}

pub fn gallery(root: &Path, clock: Arc<ManualClock>) -> Arc<Gallery> {
    Arc::new(Gallery::open(root, GalleryOptions { session_ttl: Duration::hours(24), clock }).unwrap())
}

/// Register the usual cast: an admin, two authors and two reviewers.
pub fn cast(g: &Gallery) {
    for (name, role) in [
        ("admin", GlobalRole::Admin),
        ("olga", GlobalRole::Author),
        ("ed", GlobalRole::Author),
        ("rita", GlobalRole::Reviewer),
        ("rex", GlobalRole::Reviewer),
    ] {
        g.add_user(name, name, &format!("{name}@example.org"), role, PASSWORD).unwrap();
    }
}

/// SHA-256 over every file path and its bytes, in path order.
pub fn tree_hash(root: &Path) -> String {
    let mut files: Vec<_> = walkdir::WalkDir::new(root)
        .into_iter()
        .map(|e| e.unwrap())
        .filter(|e| e.file_type().is_file())
        .map(|e| e.path().to_owned())
        .collect();
    files.sort();
    let mut h = Sha256::new();
    for f in files {
        h.update(f.strip_prefix(root).unwrap().to_string_lossy().as_bytes());
        h.update([0]);
        h.update(std::fs::read(&f).unwrap());
        h.update([0]);
    }
    hex::encode(h.finalize())
}

pub struct Server {
    pub base: String,
    pub gallery: Arc<Gallery>,
    pub http: reqwest::Client,
}

/// Serve `gallery` on an ephemeral loopback port for the rest of the
/// runtime's life.
pub async fn serve(gallery: Arc<Gallery>, max_upload_bytes: u64) -> Server {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let state = AppState::new(gallery.clone(), max_upload_bytes);
    tokio::spawn(gallery_server::serve(listener, state, std::future::pending()));
    Server { base: format!("http://{addr}"), gallery, http: reqwest::Client::new() }
}

impl Server {
    pub fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    /// Log in through the API and return the `Cookie` header value.
    pub async fn login(&self, user: &str) -> String {
        let r = self.http.post(self.url("/api/login")).form(&[("user", user), ("pass", PASSWORD)]).send().await.unwrap();
        assert_eq!(r.status(), 200, "login {user}");
        let set = r.headers().get(SET_COOKIE).unwrap().to_str().unwrap().to_owned();
        set.split(';').next().unwrap().to_owned()
    }

    pub fn get(&self, path: &str, cookie: Option<&str>) -> reqwest::RequestBuilder {
        self.with(self.http.get(self.url(path)), cookie)
    }

    pub fn post(&self, path: &str, cookie: Option<&str>) -> reqwest::RequestBuilder {
        self.with(self.http.post(self.url(path)), cookie)
    }

    pub fn put(&self, path: &str, cookie: Option<&str>) -> reqwest::RequestBuilder {
        self.with(self.http.put(self.url(path)), cookie)
    }

    fn with(&self, rb: reqwest::RequestBuilder, cookie: Option<&str>) -> reqwest::RequestBuilder {
        match cookie {
            Some(c) => rb.header(COOKIE, c),
            None => rb,
        }
    }
}

/// The `code` attribute of an error document.
pub fn error_code(body: &str) -> String {
    let el = gallery_core::xml::Element::parse(body).unwrap();
    assert_eq!(el.name, "error", "{body}");
    el.attr("code").unwrap().to_owned()
}
