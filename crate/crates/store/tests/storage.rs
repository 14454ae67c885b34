mod common;

use std::fs;

use gallery_core::fixtures;
use gallery_core::model::ModelKey;
use gallery_core::BlobId;
use gallery_store::fsutil::{FailPoints, BEFORE_RENAME};
use gallery_store::records::AuditRecord;
use gallery_store::store::{Store, META};
use gallery_store::StoreError;

// Digests computed with sha256sum.
const SHA256_EMPTY: &str = "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855";
const SHA256_ABC: &str = "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad";

fn fresh() -> (tempfile::TempDir, Store) {
    let dir = tempfile::tempdir().unwrap();
    let store = Store::open_or_init(dir.path().join("store"), 1).unwrap();
    (dir, store)
}

#[test]
fn blob_ids_are_sha256() {
    let (_d, store) = fresh();
    assert_eq!(store.blobs().put(b"").unwrap().as_str(), SHA256_EMPTY);
    assert_eq!(store.blobs().put(b"abc").unwrap().as_str(), SHA256_ABC);
    let path = store.blobs().path_of(&BlobId::new(SHA256_ABC).unwrap());
    assert!(path.ends_with(format!("blobs/ba/{SHA256_ABC}")));
    assert_eq!(store.blobs().get(&BlobId::new(SHA256_EMPTY).unwrap()).unwrap(), b"");
}

#[test]
fn blob_puts_dedupe() {
    let (_d, store) = fresh();
    let a = store.blobs().put(fixtures::PLACEHOLDER_PNG).unwrap();
    let b = store.blobs().put(fixtures::PLACEHOLDER_PNG).unwrap();
    assert_eq!(a, b);
    assert_eq!(store.blobs().list().unwrap().len(), 1);
    assert_eq!(store.blobs().get(&a).unwrap(), fixtures::PLACEHOLDER_PNG);
}

#[test]
fn missing_and_tampered_blobs() {
    let (_d, store) = fresh();
    let unknown = BlobId::digest(b"never stored");
    assert!(matches!(store.blobs().get(&unknown), Err(StoreError::NotFound(_))));

    let id = store.blobs().put(b"original").unwrap();
    fs::write(store.blobs().path_of(&id), b"tampered").unwrap();
    let err = store.blobs().get(&id).unwrap_err();
    assert_eq!(err.code(), "CORRUPT_BLOB");
    // a fresh put repairs the file
    store.blobs().put(b"original").unwrap();
    assert_eq!(store.blobs().get(&id).unwrap(), b"original");
}

#[test]
fn histories_round_trip() {
    let (_d, store) = fresh();
    assert!(store.list_keys().unwrap().is_empty());
    for f in fixtures::all() {
        for b in &f.blobs {
            store.blobs().put(b).unwrap();
        }
        store.save_history(&f.history).unwrap();
        assert_eq!(store.load_history(&f.history.key).unwrap(), f.history);
    }
    let keys: Vec<String> = store.list_keys().unwrap().iter().map(|k| k.to_string()).collect();
    assert_eq!(
        keys,
        [
            "koebe_polyhedra",
            "lawsons_surface_uniformization",
            "sc-catenoid",
            "tropical_grassmannian_gr26",
            "zalpha_circle_pattern"
        ]
    );
    assert!(store.check_integrity().unwrap().is_empty());
}

#[test]
fn save_checks_schema_and_validity() {
    let (_d, store) = fresh();
    let f = fixtures::koebe_polyhedra();
    for b in &f.blobs {
        store.blobs().put(b).unwrap();
    }
    let mut v = f.history.latest().clone();
    fs::write(store.root().join(META), gallery_store::records::meta_to_xml(2)).unwrap();
    let err = store.save_version(&v).unwrap_err();
    assert!(matches!(err, StoreError::SchemaMismatch { expected: 2, found: 1 }), "{err}");
    assert_eq!(err.code(), "SCHEMA_MISMATCH");

    fs::write(store.root().join(META), gallery_store::records::meta_to_xml(1)).unwrap();
    v.description.text.push_str(" \\media{nowhere}");
    assert_eq!(store.save_version(&v).unwrap_err().code(), "VALIDATION_FAILED");

    // a file reference to a blob the store does not have
    let (_d2, empty) = fresh();
    assert_eq!(empty.save_version(f.history.latest()).unwrap_err().code(), "VALIDATION_FAILED");
}

#[test]
fn interrupted_save_keeps_the_old_document() {
    let (_d, store) = fresh();
    let f = fixtures::koebe_polyhedra();
    for b in &f.blobs {
        store.blobs().put(b).unwrap();
    }
    store.save_history(&f.history).unwrap();
    let path = store.version_path(&f.history.key, 1);
    let before = fs::read(&path).unwrap();

    let mut changed = f.history.latest().clone();
    changed.description.title = "Koebe Polyhedra, revised".into();
    store.fail_points().arm(BEFORE_RENAME, 0);
    assert_eq!(store.save_version(&changed).unwrap_err().code(), "IO_FAILURE");
    assert_eq!(fs::read(&path).unwrap(), before);
    assert_eq!(store.load_history(&f.history.key).unwrap(), f.history);

    // the temp file left by the crash is ignored and later saves work
    let leftovers = fs::read_dir(path.parent().unwrap()).unwrap().count();
    assert_eq!(leftovers, 3);
    store.save_version(&changed).unwrap();
    assert_eq!(store.load_history(&f.history.key).unwrap().latest().description.title, changed.description.title);
}

#[test]
fn interrupted_blob_put_leaves_no_blob() {
    let fail = FailPoints::default();
    let dir = tempfile::tempdir().unwrap();
    let blobs = gallery_store::blobs::BlobStore::new(dir.path(), fail.clone());
    fail.arm(BEFORE_RENAME, 0);
    assert!(blobs.put(b"payload").is_err());
    assert!(blobs.list().unwrap().is_empty());
    assert!(!blobs.contains(&BlobId::digest(b"payload")));
    blobs.put(b"payload").unwrap();
    assert_eq!(blobs.list().unwrap().len(), 1);
}

#[test]
fn gc_removes_exactly_the_unreferenced() {
    let (_d, store) = fresh();
    let f = fixtures::koebe_polyhedra();
    for b in &f.blobs {
        store.blobs().put(b).unwrap();
    }
    store.save_history(&f.history).unwrap();
    let stray = store.blobs().put(b"nobody links me").unwrap();
    let referenced = store.referenced_blob_ids().unwrap();
    assert_eq!(referenced.len(), 3);
    assert!(!referenced.contains(&stray));

    let deleted = store.collect_garbage().unwrap();
    assert_eq!(deleted.into_iter().collect::<Vec<_>>(), vec![stray]);
    assert_eq!(store.blobs().list().unwrap(), referenced);
    assert!(store.collect_garbage().unwrap().is_empty());

    store.delete_model(&f.history.key).unwrap();
    assert_eq!(store.collect_garbage().unwrap(), referenced);
    assert!(store.blobs().list().unwrap().is_empty());
}

#[test]
fn shared_blobs_survive_deleting_one_model() {
    let (_d, store) = fresh();
    let a = fixtures::koebe_polyhedra();
    let b = fixtures::sc_catenoid();
    for f in [&a, &b] {
        for bytes in &f.blobs {
            store.blobs().put(bytes).unwrap();
        }
        store.save_history(&f.history).unwrap();
    }
    let png = BlobId::digest(fixtures::PLACEHOLDER_PNG);
    store.delete_model(&a.history.key).unwrap();
    let deleted = store.collect_garbage().unwrap();
    assert!(!deleted.contains(&png));
    assert_eq!(deleted.len(), 2);
    assert!(store.blobs().get(&png).is_ok());
}

#[test]
fn gc_failure_is_safe_to_repeat() {
    let (_d, store) = fresh();
    for i in 0..4 {
        store.blobs().put(format!("junk {i}").as_bytes()).unwrap();
    }
    store.fail_points().arm("blob.delete", 2);
    assert_eq!(store.collect_garbage().unwrap_err().code(), "IO_FAILURE");
    assert_eq!(store.blobs().list().unwrap().len(), 2);
    assert_eq!(store.collect_garbage().unwrap().len(), 2);
    assert!(store.blobs().list().unwrap().is_empty());
}

#[test]
fn audit_log_appends() {
    let (_d, store) = fresh();
    let key = ModelKey::new("abc").unwrap();
    let at = fixtures::seed_time();
    let rec = AuditRecord::Deleted { key, actor: "root".into(), at };
    store.append_audit(&rec).unwrap();
    store.append_audit(&rec).unwrap();
    assert_eq!(store.read_audit().unwrap(), vec![rec.clone(), rec]);
    let text = fs::read_to_string(store.root().join("audit.log")).unwrap();
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn stale_model_directory_is_replaced() {
    let (_d, store) = fresh();
    let f = fixtures::koebe_polyhedra();
    for b in &f.blobs {
        store.blobs().put(b).unwrap();
    }
    let dir = store.root().join("models/koebe_polyhedra");
    fs::create_dir_all(&dir).unwrap();
    fs::write(dir.join("v2.xml"), "half").unwrap();
    assert!(store.list_keys().unwrap().is_empty());
    store.save_history(&f.history).unwrap();
    assert_eq!(store.load_history(&f.history.key).unwrap(), f.history);
}
