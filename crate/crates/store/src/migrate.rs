//! Schema migrations.
//!
//! Every stored version goes through validate, transform, validate for each
//! step of the chain. The work happens on a copy of the store next to it;
//! only when every document made it through are the directories swapped.
//! The old tree is kept as a backup sibling.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use gallery_core::model::DEFAULT_LICENSE;
use gallery_core::schema::{validate_document, BlobCatalog, SchemaSet, ValidationReport, Violation, ViolationCode};
use gallery_core::xml::Element;

use crate::error::{Result, StoreError};
use crate::fsutil;
use crate::records;
use crate::store::{Store, BLOBS, META};

pub type Transform = Arc<dyn Fn(Element) -> Result<Element, String> + Send + Sync>;

#[derive(Clone)]
pub struct Migration {
    pub from: u32,
    pub to: u32,
    pub description: String,
    pub transform: Transform,
}

impl Migration {
    pub fn new(
        from: u32,
        to: u32,
        description: impl Into<String>,
        transform: impl Fn(Element) -> Result<Element, String> + Send + Sync + 'static,
    ) -> Self {
        Self { from, to, description: description.into(), transform: Arc::new(transform) }
    }
}

impl fmt::Debug for Migration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Migration({} -> {}: {})", self.from, self.to, self.description)
    }
}

/// Adds the license element that schema 2 requires.
pub fn add_license(mut doc: Element) -> Result<Element, String> {
    let d = doc.child_mut("description").ok_or("no <description>")?;
    if d.child("license").is_none() {
        d.children.push(Element::new("license").with_text(DEFAULT_LICENSE));
    }
    Ok(doc)
}

#[derive(Clone)]
pub struct MigrationRegistry {
    steps: BTreeMap<u32, Migration>,
    schemas: SchemaSet,
}

impl fmt::Debug for MigrationRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.steps.values()).finish()
    }
}

impl MigrationRegistry {
    pub fn new(schemas: SchemaSet) -> Self {
        Self { steps: BTreeMap::new(), schemas }
    }

    /// The shipped schemas and the 1 -> 2 license migration.
    pub fn builtin() -> Self {
        let mut r = Self::new(SchemaSet::builtin());
        r.register(Migration::new(1, 2, "add mandatory license, defaulting to CC BY-SA 4.0", add_license))
            .expect("builtin chain is well formed");
        r
    }

    pub fn schemas(&self) -> &SchemaSet {
        &self.schemas
    }

    pub fn schemas_mut(&mut self) -> &mut SchemaSet {
        &mut self.schemas
    }

    pub fn register(&mut self, m: Migration) -> Result<()> {
        if m.to != m.from + 1 {
            return Err(StoreError::NonadjacentStep { from: m.from, to: m.to });
        }
        if self.steps.contains_key(&m.from) {
            return Err(StoreError::DuplicateStep(m.from));
        }
        self.steps.insert(m.from, m);
        Ok(())
    }

    /// The steps leading from `from` to `to`.
    pub fn chain(&self, from: u32, to: u32) -> Result<Vec<&Migration>> {
        (from..to).map(|s| self.steps.get(&s).ok_or(StoreError::ChainGap(s))).collect()
    }
}

/// What happened to one stored document: one report per schema it was
/// validated against, in order.
#[derive(Debug, Clone)]
pub struct DocumentOutcome {
    pub path: PathBuf,
    pub reports: Vec<ValidationReport>,
}

impl DocumentOutcome {
    pub fn succeeded(&self) -> bool {
        self.reports.iter().all(ValidationReport::is_valid)
    }

    pub fn failure(&self) -> Option<&ValidationReport> {
        self.reports.iter().find(|r| !r.is_valid())
    }
}

#[derive(Debug, Clone)]
pub struct MigrationReport {
    pub from: u32,
    pub to: u32,
    pub dry_run: bool,
    pub documents: Vec<DocumentOutcome>,
    /// Where the pre-migration tree was kept.
    pub backup: Option<PathBuf>,
}

impl MigrationReport {
    pub fn succeeded(&self) -> bool {
        self.documents.iter().all(DocumentOutcome::succeeded)
    }
}

impl fmt::Display for MigrationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mode = if self.dry_run { " (dry run)" } else { "" };
        writeln!(f, "schema {} -> {}{mode}: {} document(s)", self.from, self.to, self.documents.len())?;
        for d in &self.documents {
            match d.failure() {
                None => writeln!(f, "  ok     {}", d.path.display())?,
                Some(r) => writeln!(f, "  FAILED {}\n  {r}", d.path.display())?,
            }
        }
        Ok(())
    }
}

pub const FAIL_COPY: &str = "migrate.copy";
pub const FAIL_WRITE: &str = "migrate.write";
pub const FAIL_SWAP: &str = "migrate.swap";

fn single(path: &Path, code: ViolationCode, message: String) -> ValidationReport {
    let key = path.parent().and_then(Path::file_name).and_then(|n| n.to_str()).unwrap_or_default();
    let version = path
        .file_name()
        .and_then(|n| n.to_str())
        .and_then(|n| n.strip_prefix('v')?.strip_suffix(".xml")?.parse().ok());
    ValidationReport {
        key: key.to_owned(),
        version,
        violations: vec![Violation { code, path: "/model".into(), message }],
    }
}

/// Run one document through the chain. Returns the final tree, if any,
/// along with the reports gathered on the way.
fn migrate_document(
    rel: &Path,
    text: &str,
    current: u32,
    chain: &[&Migration],
    schemas: &SchemaSet,
    blobs: &dyn BlobCatalog,
) -> Result<(Option<Element>, DocumentOutcome)> {
    let mut outcome = DocumentOutcome { path: rel.to_owned(), reports: Vec::new() };
    let mut doc = match Element::parse(text) {
        Ok(d) => d,
        Err(e) => {
            outcome.reports.push(single(rel, ViolationCode::NotWellFormed, e.to_string()));
            return Ok((None, outcome));
        }
    };
    let report = validate_document(&doc, current, schemas, blobs)?;
    let ok = report.is_valid();
    outcome.reports.push(report);
    if !ok {
        return Ok((None, outcome));
    }
    for step in chain {
        doc = match (step.transform)(doc) {
            Ok(d) => d,
            Err(msg) => {
                outcome.reports.push(single(rel, ViolationCode::TransformFailed, format!("{step:?}: {msg}")));
                return Ok((None, outcome));
            }
        };
        doc.set_attr("schema", step.to.to_string());
        let report = validate_document(&doc, step.to, schemas, blobs)?;
        let ok = report.is_valid();
        outcome.reports.push(report);
        if !ok {
            return Ok((None, outcome));
        }
    }
    Ok((Some(doc), outcome))
}

fn sibling(root: &Path, suffix: &str) -> PathBuf {
    let name = root.file_name().and_then(|n| n.to_str()).unwrap_or("store");
    root.with_file_name(format!("{name}.{suffix}"))
}

fn free_sibling(root: &Path, suffix: &str) -> PathBuf {
    let first = sibling(root, suffix);
    if !first.exists() {
        return first;
    }
    (2..).map(|n| sibling(root, &format!("{suffix}-{n}"))).find(|p| !p.exists()).expect("unbounded")
}

/// Migrate every stored version to `target`.
///
/// With `dry_run` nothing is written and the report says what would happen.
/// Otherwise any failing document aborts the run with
/// [`StoreError::MigrationFailed`] and the store is left exactly as it was.
pub fn migrate_store(store: &Store, registry: &MigrationRegistry, target: u32, dry_run: bool) -> Result<MigrationReport> {
    let current = store.schema_version()?;
    if target < current {
        return Err(StoreError::Downgrade { current, target });
    }
    let chain = registry.chain(current, target)?;
    let mut report = MigrationReport { from: current, to: target, dry_run, documents: Vec::new(), backup: None };
    if chain.is_empty() {
        return Ok(report);
    }

    let root = store.root();
    let blobs = store.blobs().list()?;
    let mut migrated: Vec<(PathBuf, String)> = Vec::new();
    for key in store.list_keys()? {
        let mut numbers: Vec<u32> = Vec::new();
        let dir = root.join(crate::store::MODELS).join(key.as_str());
        for entry in fs::read_dir(&dir).map_err(StoreError::io(&dir))? {
            let entry = entry.map_err(StoreError::io(&dir))?;
            if let Some(n) = entry.file_name().to_str().and_then(|s| s.strip_prefix('v')?.strip_suffix(".xml")?.parse().ok()) {
                numbers.push(n);
            }
        }
        numbers.sort_unstable();
        for n in numbers {
            let path = store.version_path(&key, n);
            let rel = path.strip_prefix(root).expect("under root").to_owned();
            let text = fsutil::read_string(&path)?;
            let (doc, outcome) = migrate_document(&rel, &text, current, &chain, registry.schemas(), &blobs)?;
            if let Some(doc) = doc {
                migrated.push((rel, doc.to_canonical_string()));
            }
            report.documents.push(outcome);
        }
    }

    if dry_run {
        return Ok(report);
    }
    if !report.succeeded() {
        let failures = report.documents.iter().filter_map(|d| d.failure().cloned()).collect();
        return Err(StoreError::MigrationFailed(failures));
    }

    let fail = store.fail_points();
    let staging = sibling(root, "migrating");
    if staging.exists() {
        fs::remove_dir_all(&staging).map_err(StoreError::io(&staging))?;
    }
    let built = (|| {
        fsutil::copy_tree(root, &staging, &root.join(BLOBS))?;
        fail.check(FAIL_COPY).map_err(StoreError::io(&staging))?;
        for (rel, text) in &migrated {
            fsutil::atomic_write(&staging.join(rel), text.as_bytes(), fail)?;
        }
        fsutil::atomic_write(&staging.join(META), records::meta_to_xml(target).as_bytes(), fail)?;
        fail.check(FAIL_WRITE).map_err(StoreError::io(&staging))
    })();
    if let Err(e) = built {
        let _ = fs::remove_dir_all(&staging);
        return Err(e);
    }

    let backup = free_sibling(root, &format!("backup-schema{current}"));
    fs::rename(root, &backup).map_err(|e| {
        let _ = fs::remove_dir_all(&staging);
        StoreError::io(root)(e)
    })?;
    let swapped = fail.check(FAIL_SWAP).and_then(|_| fs::rename(&staging, root));
    if let Err(e) = swapped {
        let restored = fs::rename(&backup, root);
        let _ = fs::remove_dir_all(&staging);
        restored.map_err(StoreError::io(root))?;
        return Err(StoreError::io(root)(e));
    }
    report.backup = Some(backup);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_rejects_bad_steps() {
        let mut r = MigrationRegistry::new(SchemaSet::builtin());
        let id = |d: Element| Ok(d);
        assert!(matches!(r.register(Migration::new(1, 3, "skip", id)), Err(StoreError::NonadjacentStep { .. })));
        r.register(Migration::new(1, 2, "a", id)).unwrap();
        assert!(matches!(r.register(Migration::new(1, 2, "b", id)), Err(StoreError::DuplicateStep(1))));
        r.register(Migration::new(2, 3, "c", id)).unwrap();
        assert_eq!(r.chain(1, 3).unwrap().len(), 2);
        assert!(matches!(r.chain(1, 4), Err(StoreError::ChainGap(3))));
        assert!(r.chain(2, 2).unwrap().is_empty());
    }

    #[test]
    fn license_is_added_once() {
        let doc = Element::new("model").with_child(Element::new("description"));
        let once = add_license(doc).unwrap();
        let twice = add_license(once.clone()).unwrap();
        assert_eq!(once, twice);
        assert_eq!(once.child("description").unwrap().child("license").unwrap().text, DEFAULT_LICENSE);
        assert!(add_license(Element::new("model")).is_err());
    }
}
