mod common;

use std::net::SocketAddr;

use axum::body::Body;
use axum::extract::ConnectInfo;
use axum::http::{header, Request, StatusCode};
use base64::engine::general_purpose::STANDARD;
use base64::Engine as _;
use gallery_core::document;
use gallery_core::xml::Element;
use gallery_core::{fixtures, Status};
use gallery_server::{router, AppState};
use http_body_util::BodyExt;
use tower::ServiceExt;

use common::{cast, clock, error_code, gallery, serve, PASSWORD};

fn basic(user: &str) -> String {
    format!("Basic {}", STANDARD.encode(format!("{user}:{PASSWORD}")))
}

async fn body_text(r: axum::response::Response) -> String {
    String::from_utf8(r.into_body().collect().await.unwrap().to_bytes().to_vec()).unwrap()
}

#[tokio::test]
async fn basic_credentials_only_from_loopback() {
    let dir = tempfile::tempdir().unwrap();
    let g = gallery(dir.path(), clock());
    cast(&g);
    let app = router(AppState::new(g, 1024));
    let request = |peer: [u8; 4]| {
        let mut r = Request::get("/api/notifications").header(header::AUTHORIZATION, basic("olga")).body(Body::empty()).unwrap();
        r.extensions_mut().insert(ConnectInfo(SocketAddr::from((peer, 40000))));
        r
    };
    assert_eq!(app.clone().oneshot(request([127, 0, 0, 1])).await.unwrap().status(), StatusCode::OK);
    let remote = app.clone().oneshot(request([192, 0, 2, 7])).await.unwrap();
    assert_eq!(remote.status(), StatusCode::UNAUTHORIZED);
    assert_eq!(error_code(&body_text(remote).await), "UNAUTHENTICATED");

    let wrong = Request::get("/api/notifications")
        .header(header::AUTHORIZATION, format!("Basic {}", STANDARD.encode("olga:nope")))
        .body(Body::empty())
        .unwrap();
    assert_eq!(app.oneshot(wrong).await.unwrap().status(), StatusCode::UNAUTHORIZED);
}

#[tokio::test]
async fn upload_limits() {
    let dir = tempfile::tempdir().unwrap();
    let g = gallery(dir.path(), clock());
    cast(&g);
    let olga = g.user("olga").unwrap();
    let key = g.create_model(&olga, "Big data").unwrap().key.to_string();

    // a declared length over the limit is refused before any body is read
    let app = router(AppState::new(g.clone(), 512 * 1024 * 1024));
    let declared = Request::post(format!("/api/models/{key}/media?filename=huge.obj"))
        .header(header::AUTHORIZATION, basic("olga"))
        .header(header::CONTENT_LENGTH, (600u64 * 1024 * 1024).to_string())
        .body(Body::empty())
        .unwrap();
    let r = app.oneshot(declared).await.unwrap();
    assert_eq!(r.status(), StatusCode::PAYLOAD_TOO_LARGE);
    assert_eq!(error_code(&body_text(r).await), "PAYLOAD_TOO_LARGE");

    // an undeclared body is cut off at the limit
    let app = router(AppState::new(g.clone(), 1000));
    let send = |n: usize| {
        Request::post(format!("/api/models/{key}/media?filename=a.obj"))
            .header(header::AUTHORIZATION, basic("olga"))
            .header(header::CONTENT_TYPE, "model/obj")
            .body(Body::from(vec![b'v'; n]))
            .unwrap()
    };
    assert_eq!(app.clone().oneshot(send(1001)).await.unwrap().status(), StatusCode::PAYLOAD_TOO_LARGE);
    let ok = app.clone().oneshot(send(1000)).await.unwrap();
    assert_eq!(ok.status(), StatusCode::CREATED);
    let file = Element::parse(&body_text(ok).await).unwrap();
    assert_eq!(file.attr("blob").unwrap().len(), 64);
    assert_eq!((file.attr("type"), file.attr("size")), (Some("model/obj"), Some("1000")));
    assert!(g.store().blobs().contains(&gallery_core::BlobId::digest(&[b'v'; 1000])));

    let nameless = Request::post(format!("/api/models/{key}/media"))
        .header(header::AUTHORIZATION, basic("olga"))
        .body(Body::from("x"))
        .unwrap();
    assert_eq!(app.oneshot(nameless).await.unwrap().status(), StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn create_and_read_models() {
    let dir = tempfile::tempdir().unwrap();
    let g = gallery(dir.path(), clock());
    cast(&g);
    let s = serve(g.clone(), 1 << 20).await;
    let olga = s.login("olga").await;
    let ed = s.login("ed").await;

    let r = s.post("/api/models", Some(&olga)).form(&[("title", "Koebe Polyhedra")]).send().await.unwrap();
    assert_eq!(r.status(), 201);
    assert_eq!(r.headers()[header::LOCATION.as_str()], "/models/koebe_polyhedra");
    let v1 = document::parse(&r.text().await.unwrap()).unwrap();
    assert_eq!((v1.key.as_str(), v1.version, v1.status), ("koebe_polyhedra", 1, Status::Edit));

    let r = s.post("/api/models", Some(&olga)).form(&[("title", "  ")]).send().await.unwrap();
    assert_eq!(r.status(), 400);
    assert_eq!(error_code(&r.text().await.unwrap()), "INVALID_TITLE");
    let r = s.post("/api/models", None).form(&[("title", "Anything")]).send().await.unwrap();
    assert_eq!(r.status(), 401);
    let r = s.post("/api/models", Some(&olga)).body("title=").send().await.unwrap();
    assert_eq!(r.status(), 400);

    // drafts are private; anonymous callers cannot tell them from nothing
    let anon = s.get("/api/models/koebe_polyhedra", None).send().await.unwrap();
    let absent = s.get("/api/models/no_such_model", None).send().await.unwrap();
    assert_eq!((anon.status(), absent.status()), (reqwest::StatusCode::NOT_FOUND, reqwest::StatusCode::NOT_FOUND));
    assert_eq!(error_code(&anon.text().await.unwrap()), "NOT_FOUND");
    assert_eq!(s.get("/api/models/koebe_polyhedra", Some(&ed)).send().await.unwrap().status(), 403);
    assert_eq!(s.get("/api/models/koebe_polyhedra/versions/1", Some(&ed)).send().await.unwrap().status(), 403);
    assert_eq!(s.get("/api/models/koebe_polyhedra/versions/x", Some(&olga)).send().await.unwrap().status(), 404);
    assert_eq!(s.get("/models/koebe_polyhedra", None).send().await.unwrap().status(), 404);
    let own = s.get("/api/models/koebe_polyhedra", Some(&olga)).send().await.unwrap();
    assert_eq!(document::parse(&own.text().await.unwrap()).unwrap(), v1);

    let list = Element::parse(&s.get("/api/models", Some(&olga)).send().await.unwrap().text().await.unwrap()).unwrap();
    assert_eq!(list.children.len(), 1);
    assert_eq!(list.children[0].attr("status"), Some("edit"));
    let public = Element::parse(&s.get("/api/models", None).send().await.unwrap().text().await.unwrap()).unwrap();
    assert!(public.children.is_empty());

    // PUT: stale base version and foreign documents are refused
    let mut c = v1.clone();
    c.description.text = "Circle packings.".into();
    let r = s.put("/api/models/koebe_polyhedra", Some(&olga)).body(document::serialize(&c)).send().await.unwrap();
    assert_eq!(r.status(), 200);
    assert_eq!(document::parse(&r.text().await.unwrap()).unwrap().version, 2);
    let r = s.put("/api/models/koebe_polyhedra", Some(&olga)).body(document::serialize(&c)).send().await.unwrap();
    assert_eq!(r.status(), 409);
    assert_eq!(error_code(&r.text().await.unwrap()), "VERSION_CONFLICT");
    let r = s.put("/api/models/other", Some(&olga)).body(document::serialize(&c)).send().await.unwrap();
    assert_eq!(r.status(), 400);
    let r = s.put("/api/models/koebe_polyhedra", Some(&olga)).body("<model").send().await.unwrap();
    assert_eq!(error_code(&r.text().await.unwrap()), "MALFORMED_DOCUMENT");
    let r = s.put("/api/models/koebe_polyhedra", Some(&ed)).body(document::serialize(&c)).send().await.unwrap();
    assert_eq!(r.status(), 409, "version check comes first");
    assert_eq!(g.history("koebe_polyhedra").unwrap().versions.len(), 2);

    let r = s.get("/api/nothing/here", None).send().await.unwrap();
    assert_eq!(r.status(), 404);
    assert_eq!(error_code(&r.text().await.unwrap()), "NOT_FOUND");
}

#[tokio::test]
async fn workflow_over_http() {
    let dir = tempfile::tempdir().unwrap();
    let g = gallery(dir.path(), clock());
    cast(&g);
    let s = serve(g.clone(), 1 << 20).await;
    let (olga, rita, ed, admin) = (s.login("olga").await, s.login("rita").await, s.login("ed").await, s.login("admin").await);
    s.post("/api/models", Some(&olga)).form(&[("title", "Lawson surface")]).send().await.unwrap();
    let k = "/api/models/lawson_surface";

    let r = s.post(&format!("{k}/permissions"), Some(&olga)).form(&[("user", "ed"), ("role", "editor")]).send().await.unwrap();
    assert_eq!(r.status(), 200);
    let r = s.post(&format!("{k}/permissions"), Some(&ed)).form(&[("user", "rex"), ("role", "editor")]).send().await.unwrap();
    assert_eq!(r.status(), 403);
    let r = s.post(&format!("{k}/permissions"), Some(&olga)).form(&[("user", "zed"), ("role", "editor")]).send().await.unwrap();
    assert_eq!(error_code(&r.text().await.unwrap()), "UNKNOWN_USER");
    let r = s.post(&format!("{k}/permissions"), Some(&olga)).form(&[("user", "ed"), ("role", "boss")]).send().await.unwrap();
    assert_eq!(r.status(), 400);
    assert!(g.history("lawson_surface").unwrap().editors.contains("ed"));

    assert_eq!(s.post(&format!("{k}/submit"), Some(&ed)).send().await.unwrap().status(), 403);
    let r = s.post(&format!("{k}/submit"), Some(&olga)).send().await.unwrap();
    assert_eq!(r.status(), 200);
    let e = Element::parse(&r.text().await.unwrap()).unwrap();
    assert_eq!((e.attr("from"), e.attr("to")), (Some("edit"), Some("pending")));
    assert_eq!(s.post(&format!("{k}/submit"), Some(&olga)).send().await.unwrap().status(), 409);
    let r = s.post(&format!("{k}/media?filename=x.obj"), Some(&olga)).body("v 1 2 3").send().await.unwrap();
    assert_eq!(r.status(), 403, "owners are read-only while pending");

    let r = s.post(&format!("{k}/review"), Some(&rita)).form(&[("verdict", "send_back"), ("review_text", "")]).send().await.unwrap();
    assert_eq!(r.status(), 400);
    assert_eq!(error_code(&r.text().await.unwrap()), "EMPTY_REVIEW_TEXT");
    let r = s.post(&format!("{k}/review"), Some(&rita)).form(&[("verdict", "maybe"), ("review_text", "x")]).send().await.unwrap();
    assert_eq!(r.status(), 400);
    let r = s.post(&format!("{k}/review"), Some(&olga)).form(&[("verdict", "approve"), ("review_text", "mine")]).send().await.unwrap();
    assert_eq!(r.status(), 403);
    let r = s.post(&format!("{k}/review"), Some(&rita)).form(&[("verdict", "send_back"), ("review_text", "fix units")]).send().await.unwrap();
    assert_eq!(r.status(), 200);
    assert_eq!(g.history("lawson_surface").unwrap().latest().status, Status::Edit);

    let inbox = Element::parse(&s.get("/api/notifications", Some(&ed)).send().await.unwrap().text().await.unwrap()).unwrap();
    let n = &inbox.children[0];
    assert_eq!((n.attr("event"), n.text.as_str(), n.attr("read")), (Some("sent_back"), "fix units", Some("false")));
    let id = n.attr("id").unwrap();
    assert_eq!(s.post(&format!("/api/notifications/{id}/read"), Some(&olga)).send().await.unwrap().status(), 404);
    assert_eq!(s.post(&format!("/api/notifications/{id}/read"), Some(&ed)).send().await.unwrap().status(), 204);
    assert_eq!(s.post("/api/notifications/abc/read", Some(&ed)).send().await.unwrap().status(), 404);
    assert!(g.notifications(&g.user("ed").unwrap())[0].read);

    s.post(&format!("{k}/submit"), Some(&olga)).send().await.unwrap();
    let r = s.post(&format!("{k}/review"), Some(&rita)).form(&[("verdict", "reject"), ("review_text", "out of scope")]).send().await.unwrap();
    assert_eq!(r.status(), 200);
    assert_eq!(s.post(&format!("{k}/reopen"), Some(&olga)).send().await.unwrap().status(), 409);

    assert_eq!(s.get("/api/admin/audit", Some(&olga)).send().await.unwrap().status(), 403);
    let audit = Element::parse(&s.get("/api/admin/audit", Some(&admin)).send().await.unwrap().text().await.unwrap()).unwrap();
    let edges: Vec<_> = audit.children.iter().map(|e| format!("{}>{}", e.attr("from").unwrap(), e.attr("to").unwrap())).collect();
    assert_eq!(edges, ["edit>pending", "pending>edit", "edit>pending", "pending>rejected"]);

    // owners may delete what was never published
    let r = s.http.delete(s.url(k)).header(header::COOKIE.as_str(), &olga).send().await.unwrap();
    assert_eq!(r.status(), 200);
    assert!(g.history("lawson_surface").is_err());
    assert_eq!(s.post("/api/admin/gc", Some(&rita)).send().await.unwrap().status(), 403);
    assert_eq!(s.post("/api/admin/gc", Some(&admin)).send().await.unwrap().status(), 200);
}

#[tokio::test]
async fn public_permalinks_and_files() {
    let dir = tempfile::tempdir().unwrap();
    let g = gallery(dir.path(), clock());
    cast(&g);
    g.seed(Some("olga"), "admin").unwrap();
    let s = serve(g.clone(), 1 << 20).await;

    let r = s.get("/models/sc-catenoid", None).send().await.unwrap();
    assert_eq!(r.status(), 200);
    assert_eq!(r.headers()["x-license"], "CC BY-SA 4.0");
    let env = Element::parse(&r.text().await.unwrap()).unwrap();
    assert_eq!((env.name.as_str(), env.attr("license"), env.attr("url")), ("publication", Some("CC BY-SA 4.0"), Some("/models/sc-catenoid")));
    let v = document::from_element(&env.children[0]).unwrap();
    assert_eq!(v, g.get_public("sc-catenoid").unwrap());
    assert_eq!(s.get("/models/sc-catenoid/versions/1", None).send().await.unwrap().status(), 200);
    assert_eq!(s.get("/models/sc-catenoid/versions/2", None).send().await.unwrap().status(), 404);

    let png = gallery_core::BlobId::digest(fixtures::PLACEHOLDER_PNG);
    let r = s.get(&format!("/api/files/{png}"), None).send().await.unwrap();
    assert_eq!(r.status(), 200);
    assert_eq!(r.headers()["content-type"], "image/png");
    assert_eq!(r.bytes().await.unwrap().as_ref(), fixtures::PLACEHOLDER_PNG);
    assert_eq!(s.get("/api/files/not-a-blob", None).send().await.unwrap().status(), 404);

    // a stale cookie on a public read is treated as no cookie
    let r = s.get("/api/models/sc-catenoid", Some("gallery_session=expired")).send().await.unwrap();
    assert_eq!(r.status(), 200);
    assert_eq!(s.get("/api/notifications", Some("gallery_session=expired")).send().await.unwrap().status(), 401);

    let olga = s.login("olga").await;
    let r = s.post("/api/logout", Some(&olga)).send().await.unwrap();
    assert_eq!(r.status(), 204);
    assert!(r.headers()["set-cookie"].to_str().unwrap().contains("Max-Age=0"));
    assert_eq!(s.get("/api/notifications", Some(&olga)).send().await.unwrap().status(), 401);
}

#[tokio::test]
async fn writes_wait_out_a_migration() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("store");
    let g = gallery(&root, clock());
    cast(&g);
    g.seed(None, "admin").unwrap();
    let s = serve(g.clone(), 1 << 20).await;
    let olga = s.login("olga").await;

    let registry = gallery_store::migrate::MigrationRegistry::builtin();
    g.migrate(&registry, 2, false).unwrap();
    let r = s.post("/api/models", Some(&olga)).form(&[("title", "After migration")]).send().await.unwrap();
    assert_eq!(r.status(), 201);
    let v = document::parse(&r.text().await.unwrap()).unwrap();
    assert_eq!(v.schema_version, 2);
    let env = s.get("/models/koebe_polyhedra", None).send().await.unwrap().text().await.unwrap();
    assert!(env.contains("<license>CC BY-SA 4.0</license>"));
}
