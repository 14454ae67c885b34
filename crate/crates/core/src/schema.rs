//! Declarative structural rules for model documents, one rule set per schema
//! version, plus the cross-field checks every schema shares.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::sync::LazyLock;

use crate::access::is_username;
use crate::document::to_element;
use crate::error::{Error, Result};
use crate::model::{is_blob_id, is_model_key, BlobId, ModelVersion, Status};
use crate::richtext::{is_ident, parse_rich_text, TokenKind};
use crate::time::{parse_date, parse_timestamp};
use crate::xml::Element;

/// Lookup of stored blobs, used to catch dangling file references.
pub trait BlobCatalog {
    fn contains_blob(&self, id: &BlobId) -> bool;
}

/// Catalog that accepts every id; for checks that do not involve storage.
#[derive(Debug, Clone, Copy, Default)]
pub struct AnyBlob;

impl BlobCatalog for AnyBlob {
    fn contains_blob(&self, _: &BlobId) -> bool {
        true
    }
}

impl BlobCatalog for HashSet<BlobId> {
    fn contains_blob(&self, id: &BlobId) -> bool {
        self.contains(id)
    }
}

impl BlobCatalog for BTreeSet<BlobId> {
    fn contains_blob(&self, id: &BlobId) -> bool {
        self.contains(id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ViolationCode {
    MissingElement,
    MissingAttribute,
    UnexpectedElement,
    UnexpectedAttribute,
    UnexpectedText,
    OutOfOrder,
    TooMany,
    EmptyValue,
    BadEnum,
    BadKey,
    BadIdent,
    BadBlobId,
    BadInteger,
    BadDate,
    BadTimestamp,
    BadUsername,
    BadFilename,
    BadMediaType,
    SchemaVersionMismatch,
    UnknownSchema,
    EmptyAuthors,
    EmptyMediaFiles,
    AuthorPositions,
    DuplicateRefKey,
    DuplicateMediaId,
    DuplicateKeyword,
    DanglingCite,
    DanglingMedia,
    DanglingBlob,
    NotWellFormed,
    TransformFailed,
}

impl ViolationCode {
    pub fn as_str(self) -> &'static str {
        use ViolationCode::*;
        match self {
            MissingElement => "MISSING_ELEMENT",
            MissingAttribute => "MISSING_ATTRIBUTE",
            UnexpectedElement => "UNEXPECTED_ELEMENT",
            UnexpectedAttribute => "UNEXPECTED_ATTRIBUTE",
            UnexpectedText => "UNEXPECTED_TEXT",
            OutOfOrder => "OUT_OF_ORDER",
            TooMany => "TOO_MANY",
            EmptyValue => "EMPTY_VALUE",
            BadEnum => "BAD_ENUM",
            BadKey => "BAD_KEY",
            BadIdent => "BAD_IDENT",
            BadBlobId => "BAD_BLOB_ID",
            BadInteger => "BAD_INTEGER",
            BadDate => "BAD_DATE",
            BadTimestamp => "BAD_TIMESTAMP",
            BadUsername => "BAD_USERNAME",
            BadFilename => "BAD_FILENAME",
            BadMediaType => "BAD_MEDIA_TYPE",
            SchemaVersionMismatch => "SCHEMA_VERSION_MISMATCH",
            UnknownSchema => "UNKNOWN_SCHEMA",
            EmptyAuthors => "EMPTY_AUTHORS",
            EmptyMediaFiles => "EMPTY_MEDIA_FILES",
            AuthorPositions => "AUTHOR_POSITIONS",
            DuplicateRefKey => "DUPLICATE_REF_KEY",
            DuplicateMediaId => "DUPLICATE_MEDIA_ID",
            DuplicateKeyword => "DUPLICATE_KEYWORD",
            DanglingCite => "DANGLING_CITE",
            DanglingMedia => "DANGLING_MEDIA",
            DanglingBlob => "DANGLING_BLOB",
            NotWellFormed => "NOT_WELL_FORMED",
            TransformFailed => "TRANSFORM_FAILED",
        }
    }
}

impl fmt::Display for ViolationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub code: ViolationCode,
    pub path: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationReport {
    pub key: String,
    pub version: Option<u32>,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, code: ViolationCode) -> bool {
        self.violations.iter().any(|v| v.code == code)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.version {
            Some(v) => write!(f, "{} v{}:", self.key, v)?,
            None => write!(f, "{}:", self.key)?,
        }
        if self.violations.is_empty() {
            return write!(f, " ok");
        }
        for v in &self.violations {
            write!(f, "\n  {} {} {}", v.code, v.path, v.message)?;
        }
        Ok(())
    }
}

#[derive(Clone)]
pub enum ValueRule {
    Any,
    /// Must be empty; used for elements that only carry attributes.
    Empty,
    NonEmpty,
    Enum(Vec<String>),
    Check { code: ViolationCode, what: &'static str, pred: fn(&str) -> bool },
}

impl ValueRule {
    fn check(&self, value: &str) -> Option<(ViolationCode, String)> {
        match self {
            ValueRule::Any => None,
            ValueRule::Empty => {
                (!value.is_empty()).then(|| (ViolationCode::UnexpectedText, "no content allowed".to_owned()))
            }
            ValueRule::NonEmpty => value
                .trim()
                .is_empty()
                .then(|| (ViolationCode::EmptyValue, "value must not be empty".to_owned())),
            ValueRule::Enum(domain) => (!domain.iter().any(|d| d == value))
                .then(|| (ViolationCode::BadEnum, format!("{value:?} is not one of {}", domain.join(", ")))),
            ValueRule::Check { code, what, pred } => {
                (!pred(value)).then(|| (*code, format!("{value:?} is not {what}")))
            }
        }
    }
}

#[derive(Clone)]
pub struct AttrRule {
    pub name: String,
    pub required: bool,
    pub value: ValueRule,
}

#[derive(Clone)]
pub struct ChildRule {
    pub element: ElementRule,
    pub min: usize,
    pub max: Option<usize>,
    /// Reported when fewer than `min` occurrences are present.
    pub missing: ViolationCode,
}

#[derive(Clone)]
pub enum ContentRule {
    Text(ValueRule),
    /// Children in this order.
    Children(Vec<ChildRule>),
}

#[derive(Clone)]
pub struct ElementRule {
    pub name: String,
    pub attrs: Vec<AttrRule>,
    pub content: ContentRule,
}

impl ElementRule {
    pub fn text(name: &str, value: ValueRule) -> Self {
        Self { name: name.to_owned(), attrs: Vec::new(), content: ContentRule::Text(value) }
    }

    pub fn parent(name: &str, children: Vec<ChildRule>) -> Self {
        Self { name: name.to_owned(), attrs: Vec::new(), content: ContentRule::Children(children) }
    }

    pub fn attr(mut self, name: &str, required: bool, value: ValueRule) -> Self {
        self.attrs.push(AttrRule { name: name.to_owned(), required, value });
        self
    }

    pub fn once(self) -> ChildRule {
        ChildRule { element: self, min: 1, max: Some(1), missing: ViolationCode::MissingElement }
    }

    pub fn optional(self) -> ChildRule {
        ChildRule { element: self, min: 0, max: Some(1), missing: ViolationCode::MissingElement }
    }

    pub fn many(self, min: usize, missing: ViolationCode) -> ChildRule {
        ChildRule { element: self, min, max: None, missing }
    }

    pub fn children_mut(&mut self) -> Option<&mut Vec<ChildRule>> {
        match &mut self.content {
            ContentRule::Children(c) => Some(c),
            ContentRule::Text(_) => None,
        }
    }

    /// Follow a path of child element names below this rule.
    pub fn descendant_mut(&mut self, path: &[&str]) -> Option<&mut ElementRule> {
        let Some((first, rest)) = path.split_first() else { return Some(self) };
        let child = self.children_mut()?.iter_mut().find(|c| c.element.name == *first)?;
        child.element.descendant_mut(rest)
    }
}

/// One schema version: a grammar for the document tree and the locations of
/// rich-text fields for the cross-field checks.
#[derive(Clone)]
pub struct SchemaDef {
    pub version: u32,
    pub root: ElementRule,
    /// Element paths below the root whose text is rich text.
    pub rich_text: Vec<Vec<String>>,
}

fn is_uint(s: &str) -> bool {
    !s.is_empty() && s.len() <= 19 && s.bytes().all(|b| b.is_ascii_digit()) && (s == "0" || !s.starts_with('0'))
}

fn is_positive(s: &str) -> bool {
    is_uint(s) && s != "0" && s.len() <= 9
}

fn is_filename(s: &str) -> bool {
    !s.is_empty() && s != "." && s != ".." && !s.contains(['/', '\\', '\0'])
}

fn is_media_type(s: &str) -> bool {
    let token = |t: &str| {
        !t.is_empty() && t.bytes().all(|b| b.is_ascii_alphanumeric() || b"!#$&^_.+-".contains(&b))
    };
    matches!(s.split_once('/'), Some((a, b)) if token(a) && token(b))
}

fn check(code: ViolationCode, what: &'static str, pred: fn(&str) -> bool) -> ValueRule {
    ValueRule::Check { code, what, pred }
}

fn file_rule(name: &str) -> ElementRule {
    ElementRule::text(name, ValueRule::Empty)
        .attr("blob", true, check(ViolationCode::BadBlobId, "a SHA-256 hex digest", is_blob_id))
        .attr("name", true, check(ViolationCode::BadFilename, "a plain file name", is_filename))
        .attr("type", true, check(ViolationCode::BadMediaType, "a media type", is_media_type))
        .attr("size", true, check(ViolationCode::BadInteger, "a non-negative integer", is_uint))
}

impl SchemaDef {
    /// The original document format.
    pub fn v1() -> Self {
        use ViolationCode as C;
        let author = ElementRule::text("author", ValueRule::NonEmpty)
            .attr("position", true, check(C::BadInteger, "a non-negative integer", is_uint))
            .attr("affiliation", false, ValueRule::Any);
        let reference = ElementRule::parent(
            "reference",
            vec![ElementRule::text("attr", ValueRule::Any)
                .attr("name", true, ValueRule::NonEmpty)
                .many(0, C::MissingElement)],
        )
        .attr("key", true, check(C::BadIdent, "a reference key", is_ident))
        .attr("type", true, ValueRule::NonEmpty);
        let description = ElementRule::parent(
            "description",
            vec![
                ElementRule::text("title", ValueRule::NonEmpty).once(),
                ElementRule::parent("authors", vec![author.many(1, C::EmptyAuthors)]).once(),
                ElementRule::text("text", ValueRule::Any).once(),
                ElementRule::parent(
                    "keywords",
                    vec![ElementRule::text("keyword", ValueRule::NonEmpty).many(0, C::MissingElement)],
                )
                .once(),
                ElementRule::parent("references", vec![reference.many(0, C::MissingElement)]).once(),
                ElementRule::text("date", check(C::BadDate, "an ISO-8601 date", |s| parse_date(s).is_some())).once(),
            ],
        );
        let media_object = ElementRule::parent(
            "media-object",
            vec![
                ElementRule::text("title", ValueRule::Any).once(),
                ElementRule::text("text", ValueRule::Any).once(),
                file_rule("file").many(1, C::EmptyMediaFiles),
                file_rule("preview").optional(),
            ],
        )
        .attr("id", true, check(C::BadIdent, "a media id", is_ident));
        let root = ElementRule::parent(
            "model",
            vec![
                description.once(),
                ElementRule::parent("media-objects", vec![media_object.many(0, C::MissingElement)]).once(),
            ],
        )
        .attr("key", true, check(C::BadKey, "a model key", is_model_key))
        .attr("version", true, check(C::BadInteger, "a positive integer", is_positive))
        .attr("status", true, ValueRule::Enum(Status::ALL.iter().map(|s| s.as_str().to_owned()).collect()))
        .attr("edited-by", true, check(C::BadUsername, "a username", is_username))
        .attr("schema", true, check(C::BadInteger, "a positive integer", is_positive))
        .attr("created", true, check(C::BadTimestamp, "a UTC timestamp", |s| parse_timestamp(s).is_some()));
        Self {
            version: 1,
            root,
            rich_text: vec![
                vec!["description".into(), "text".into()],
                vec!["media-objects".into(), "media-object".into(), "text".into()],
            ],
        }
    }

    /// Schema 1 plus a mandatory `license` element closing the description.
    pub fn v2() -> Self {
        let mut def = Self::v1();
        def.version = 2;
        def.root
            .descendant_mut(&["description"])
            .and_then(ElementRule::children_mut)
            .expect("description rule")
            .push(ElementRule::text("license", ValueRule::NonEmpty).once());
        def
    }
}

/// Registered schema rule sets by version.
#[derive(Clone, Default)]
pub struct SchemaSet {
    defs: BTreeMap<u32, SchemaDef>,
}

static BUILTIN: LazyLock<SchemaSet> = LazyLock::new(SchemaSet::builtin);

impl SchemaSet {
    pub fn builtin() -> Self {
        let mut set = Self::default();
        set.register(SchemaDef::v1());
        set.register(SchemaDef::v2());
        set
    }

    pub fn shared() -> &'static SchemaSet {
        &BUILTIN
    }

    pub fn register(&mut self, def: SchemaDef) {
        self.defs.insert(def.version, def);
    }

    pub fn get(&self, version: u32) -> Option<&SchemaDef> {
        self.defs.get(&version)
    }

    pub fn latest(&self) -> u32 {
        self.defs.keys().next_back().copied().unwrap_or(1)
    }
}

struct Walker<'a> {
    blobs: &'a dyn BlobCatalog,
    out: Vec<Violation>,
}

impl Walker<'_> {
    fn push(&mut self, code: ViolationCode, path: String, message: impl Into<String>) {
        self.out.push(Violation { code, path, message: message.into() });
    }

    fn element(&mut self, el: &Element, rule: &ElementRule, path: &str) {
        for ar in &rule.attrs {
            let apath = format!("{path}/@{}", ar.name);
            match el.attr(&ar.name) {
                None if ar.required => self.push(ViolationCode::MissingAttribute, apath, "required attribute"),
                None => {}
                Some(v) => {
                    if let Some((code, msg)) = ar.value.check(v) {
                        self.push(code, apath, msg);
                    }
                }
            }
        }
        for (name, _) in &el.attrs {
            if !rule.attrs.iter().any(|a| &a.name == name) {
                self.push(ViolationCode::UnexpectedAttribute, format!("{path}/@{name}"), "attribute not allowed");
            }
        }
        match &rule.content {
            ContentRule::Text(vr) => {
                for c in &el.children {
                    self.push(ViolationCode::UnexpectedElement, format!("{path}/{}", c.name), "text-only element");
                }
                if let Some((code, msg)) = vr.check(&el.text) {
                    self.push(code, path.to_owned(), msg);
                }
            }
            ContentRule::Children(rules) => {
                if !el.text.trim().is_empty() {
                    self.push(ViolationCode::UnexpectedText, path.to_owned(), "text not allowed here");
                }
                let mut counts = vec![0usize; rules.len()];
                let mut furthest = 0usize;
                for (cpath, child) in child_paths(el, path) {
                    let Some(idx) = rules.iter().position(|r| r.element.name == child.name) else {
                        self.push(ViolationCode::UnexpectedElement, cpath, "element not allowed here");
                        continue;
                    };
                    if idx < furthest {
                        self.push(ViolationCode::OutOfOrder, cpath.clone(), "element out of order");
                    }
                    furthest = furthest.max(idx);
                    counts[idx] += 1;
                    if rules[idx].max.is_some_and(|m| counts[idx] > m) {
                        self.push(ViolationCode::TooMany, cpath, "element occurs too often");
                        continue;
                    }
                    self.element(child, &rules[idx].element, &cpath);
                }
                for (r, &n) in rules.iter().zip(&counts) {
                    if n < r.min {
                        let what = if r.min == 1 { "required element".to_owned() } else { format!("at least {} required", r.min) };
                        self.push(r.missing, format!("{path}/{}", r.element.name), what);
                    }
                }
            }
        }
    }
}

/// Children of `el` with their paths; same-name siblings get 1-based indexes.
fn child_paths<'a>(el: &'a Element, path: &str) -> Vec<(String, &'a Element)> {
    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    el.children
        .iter()
        .map(|c| {
            let n = seen.entry(c.name.as_str()).or_default();
            *n += 1;
            let repeated = el.children.iter().filter(|o| o.name == c.name).count() > 1;
            let p = if repeated { format!("{path}/{}[{n}]", c.name) } else { format!("{path}/{}", c.name) };
            (p, c)
        })
        .collect()
}

fn named_paths<'a>(el: &'a Element, path: &str, name: &str) -> Vec<(String, &'a Element)> {
    child_paths(el, path).into_iter().filter(|(_, c)| c.name == name).collect()
}

/// Elements reached by following `names` from `el`.
fn descend<'a>(el: &'a Element, path: &str, names: &[String]) -> Vec<(String, &'a Element)> {
    let Some((first, rest)) = names.split_first() else { return vec![(path.to_owned(), el)] };
    named_paths(el, path, first)
        .into_iter()
        .flat_map(|(p, c)| descend(c, &p, rest))
        .collect()
}

fn cross_checks(w: &mut Walker<'_>, root: &Element, def: &SchemaDef) {
    let rp = format!("/{}", root.name);
    let mut ref_keys = HashSet::new();
    let mut media_ids = HashSet::new();

    for (dpath, d) in named_paths(root, &rp, "description") {
        for (apath, authors) in named_paths(d, &dpath, "authors") {
            for (i, (p, a)) in named_paths(authors, &apath, "author").into_iter().enumerate() {
                if let Some(pos) = a.attr("position").filter(|s| is_uint(s)) {
                    if pos != i.to_string() {
                        w.push(ViolationCode::AuthorPositions, format!("{p}/@position"), format!("expected position {i}"));
                    }
                }
            }
        }
        for (kpath, kw) in named_paths(d, &dpath, "keywords") {
            let mut seen = HashSet::new();
            for (p, k) in named_paths(kw, &kpath, "keyword") {
                if !seen.insert(k.text.as_str()) {
                    w.push(ViolationCode::DuplicateKeyword, p, format!("keyword {:?} repeated", k.text));
                }
            }
        }
        for (rpath, refs) in named_paths(d, &dpath, "references") {
            for (p, r) in named_paths(refs, &rpath, "reference") {
                if let Some(k) = r.attr("key") {
                    if !ref_keys.insert(k.to_owned()) {
                        w.push(ViolationCode::DuplicateRefKey, format!("{p}/@key"), format!("reference key {k:?} repeated"));
                    }
                }
            }
        }
    }

    for (mpath, mos) in named_paths(root, &rp, "media-objects") {
        for (p, m) in named_paths(mos, &mpath, "media-object") {
            if let Some(id) = m.attr("id") {
                if !media_ids.insert(id.to_owned()) {
                    w.push(ViolationCode::DuplicateMediaId, format!("{p}/@id"), format!("media id {id:?} repeated"));
                }
            }
            for (fp, f) in child_paths(m, &p) {
                if f.name != "file" && f.name != "preview" {
                    continue;
                }
                if let Some(blob) = f.attr("blob").and_then(|b| BlobId::new(b).ok()) {
                    if !w.blobs.contains_blob(&blob) {
                        w.push(ViolationCode::DanglingBlob, format!("{fp}/@blob"), format!("blob {blob} is not stored"));
                    }
                }
            }
        }
    }

    for names in &def.rich_text {
        for (p, el) in descend(root, &rp, names) {
            for tok in parse_rich_text(&el.text) {
                match tok.kind {
                    TokenKind::Cite if !ref_keys.contains(&tok.payload) => w.push(
                        ViolationCode::DanglingCite,
                        p.clone(),
                        format!("no reference with key {:?}", tok.payload),
                    ),
                    TokenKind::Media if !media_ids.contains(&tok.payload) => w.push(
                        ViolationCode::DanglingMedia,
                        p.clone(),
                        format!("no media object with id {:?}", tok.payload),
                    ),
                    _ => {}
                }
            }
        }
    }
}

/// Sort key that orders `a[2]` before `a[10]`.
fn path_key(path: &str) -> Vec<(String, u64)> {
    path.split('/')
        .map(|seg| match seg.split_once('[') {
            Some((name, idx)) => (name.to_owned(), idx.trim_end_matches(']').parse().unwrap_or(0)),
            None => (seg.to_owned(), 0),
        })
        .collect()
}

fn cmp_paths(a: &str, b: &str) -> Ordering {
    path_key(a).cmp(&path_key(b))
}

/// Validate a document tree against the rule set registered for `schema`.
pub fn validate_document(
    doc: &Element,
    schema: u32,
    schemas: &SchemaSet,
    blobs: &dyn BlobCatalog,
) -> Result<ValidationReport> {
    let def = schemas.get(schema).ok_or(Error::UnknownSchema(schema))?;
    let mut w = Walker { blobs, out: Vec::new() };
    if doc.name != def.root.name {
        w.push(ViolationCode::UnexpectedElement, format!("/{}", doc.name), format!("expected <{}>", def.root.name));
    } else {
        let rp = format!("/{}", doc.name);
        w.element(doc, &def.root, &rp);
        if let Some(declared) = doc.attr("schema").filter(|s| is_positive(s)) {
            if declared != schema.to_string() {
                w.push(
                    ViolationCode::SchemaVersionMismatch,
                    format!("{rp}/@schema"),
                    format!("document declares schema {declared}, validated against {schema}"),
                );
            }
        }
        cross_checks(&mut w, doc, def);
    }
    let mut violations = w.out;
    violations.sort_by(|a, b| cmp_paths(&a.path, &b.path));
    Ok(ValidationReport {
        key: doc.attr("key").unwrap_or_default().to_owned(),
        version: doc.attr("version").and_then(|v| v.parse().ok()),
        violations,
    })
}

/// Validate a typed version against its own declared schema. Never fails;
/// an unregistered schema shows up as a violation.
pub fn validate_version(v: &ModelVersion, blobs: &dyn BlobCatalog) -> ValidationReport {
    let doc = to_element(v);
    match validate_document(&doc, v.schema_version, SchemaSet::shared(), blobs) {
        Ok(report) => report,
        Err(_) => ValidationReport {
            key: v.key.to_string(),
            version: Some(v.version),
            violations: vec![Violation {
                code: ViolationCode::UnknownSchema,
                path: "/model/@schema".into(),
                message: format!("schema {} is not registered", v.schema_version),
            }],
        },
    }
}
