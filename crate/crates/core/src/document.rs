//! Canonical XML form of a [`ModelVersion`].
//!
//! ```text
//! <model key version status edited-by schema created>
//!   <description>
//!     <title/> <authors><author position affiliation?/></authors> <text/>
//!     <keywords><keyword/></keywords>
//!     <references><reference key type><attr name/></reference></references>
//!     <date/> <license/>?
//!   </description>
//!   <media-objects>
//!     <media-object id><title/><text/><file blob name type size/>+<preview .../>?</media-object>
//!   </media-objects>
//! </model>
//! ```

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::model::{AuthorRef, BlobId, Description, FileRef, MediaObject, ModelKey, ModelVersion, Reference};
use crate::time::{format_date, format_timestamp, parse_date, parse_timestamp};
use crate::xml::Element;

pub fn to_element(v: &ModelVersion) -> Element {
    let d = &v.description;
    let mut authors = Element::new("authors");
    for a in &d.authors {
        let mut el = Element::new("author").with_attr("position", a.position.to_string());
        if let Some(aff) = &a.affiliation {
            el = el.with_attr("affiliation", aff.clone());
        }
        authors.children.push(el.with_text(a.name.clone()));
    }
    let mut keywords = Element::new("keywords");
    for k in &d.keywords {
        keywords.children.push(Element::new("keyword").with_text(k.clone()));
    }
    let mut references = Element::new("references");
    for r in &d.references {
        let mut el = Element::new("reference")
            .with_attr("key", r.ref_key.clone())
            .with_attr("type", r.entry_type.clone());
        for (name, value) in &r.attributes {
            el.children.push(Element::new("attr").with_attr("name", name.clone()).with_text(value.clone()));
        }
        references.children.push(el);
    }
    let mut description = Element::new("description")
        .with_child(Element::new("title").with_text(d.title.clone()))
        .with_child(authors)
        .with_child(Element::new("text").with_text(d.text.clone()))
        .with_child(keywords)
        .with_child(references)
        .with_child(Element::new("date").with_text(format_date(&d.date)));
    if let Some(license) = &d.license {
        description.children.push(Element::new("license").with_text(license.clone()));
    }

    let mut media = Element::new("media-objects");
    for m in &v.media {
        let mut el = Element::new("media-object")
            .with_attr("id", m.media_id.clone())
            .with_child(Element::new("title").with_text(m.title.clone()))
            .with_child(Element::new("text").with_text(m.text.clone()));
        for f in &m.files {
            el.children.push(file_element("file", f));
        }
        if let Some(p) = &m.preview {
            el.children.push(file_element("preview", p));
        }
        media.children.push(el);
    }

    Element::new("model")
        .with_attr("key", v.key.as_str())
        .with_attr("version", v.version.to_string())
        .with_attr("status", v.status.as_str())
        .with_attr("edited-by", v.edited_by.clone())
        .with_attr("schema", v.schema_version.to_string())
        .with_attr("created", format_timestamp(&v.created_at))
        .with_child(description)
        .with_child(media)
}

pub fn file_element(name: &str, f: &FileRef) -> Element {
    Element::new(name)
        .with_attr("blob", f.blob_id.as_str())
        .with_attr("name", f.filename.clone())
        .with_attr("type", f.media_type.clone())
        .with_attr("size", f.size_bytes.to_string())
}

pub fn serialize(v: &ModelVersion) -> String {
    to_element(v).to_canonical_string()
}

pub fn parse(input: &str) -> Result<ModelVersion> {
    from_element(&Element::parse(input)?)
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Malformed(msg.into())
}

fn req_attr<'a>(el: &'a Element, name: &str) -> Result<&'a str> {
    el.attr(name).ok_or_else(|| bad(format!("<{}> lacks @{name}", el.name)))
}

fn req_child<'a>(el: &'a Element, name: &str) -> Result<&'a Element> {
    el.child(name).ok_or_else(|| bad(format!("<{}> lacks <{name}>", el.name)))
}

fn num<T: std::str::FromStr>(s: &str, what: &str) -> Result<T> {
    s.parse().map_err(|_| bad(format!("{what} is not a number: {s:?}")))
}

pub fn file_from_element(el: &Element) -> Result<FileRef> {
    Ok(FileRef {
        blob_id: BlobId::new(req_attr(el, "blob")?)?,
        filename: req_attr(el, "name")?.to_owned(),
        media_type: req_attr(el, "type")?.to_owned(),
        size_bytes: num(req_attr(el, "size")?, "file size")?,
    })
}

/// Decode a model element. Only shape is checked here; content rules live in
/// [`crate::schema`].
pub fn from_element(root: &Element) -> Result<ModelVersion> {
    if root.name != "model" {
        return Err(bad(format!("root element is <{}>, expected <model>", root.name)));
    }
    let d = req_child(root, "description")?;
    let authors = req_child(d, "authors")?
        .children_named("author")
        .map(|a| {
            Ok(AuthorRef {
                name: a.text.clone(),
                affiliation: a.attr("affiliation").map(str::to_owned),
                position: num(req_attr(a, "position")?, "author position")?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let keywords: BTreeSet<String> = req_child(d, "keywords")?
        .children_named("keyword")
        .map(|k| k.text.clone())
        .collect();
    let references = req_child(d, "references")?
        .children_named("reference")
        .map(|r| {
            let attributes: BTreeMap<String, String> = r
                .children_named("attr")
                .map(|a| Ok((req_attr(a, "name")?.to_owned(), a.text.clone())))
                .collect::<Result<_>>()?;
            Ok(Reference {
                ref_key: req_attr(r, "key")?.to_owned(),
                entry_type: req_attr(r, "type")?.to_owned(),
                attributes,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let date_text = &req_child(d, "date")?.text;
    let description = Description {
        title: req_child(d, "title")?.text.clone(),
        authors,
        text: req_child(d, "text")?.text.clone(),
        keywords,
        references,
        date: parse_date(date_text).ok_or_else(|| bad(format!("bad date {date_text:?}")))?,
        license: d.child("license").map(|l| l.text.clone()),
    };

    let media = req_child(root, "media-objects")?
        .children_named("media-object")
        .map(|m| {
            Ok(MediaObject {
                media_id: req_attr(m, "id")?.to_owned(),
                title: req_child(m, "title")?.text.clone(),
                text: req_child(m, "text")?.text.clone(),
                files: m.children_named("file").map(file_from_element).collect::<Result<_>>()?,
                preview: m.child("preview").map(file_from_element).transpose()?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let created = req_attr(root, "created")?;
    Ok(ModelVersion {
        key: ModelKey::new(req_attr(root, "key")?)?,
        version: num(req_attr(root, "version")?, "version")?,
        status: req_attr(root, "status")?.parse()?,
        edited_by: req_attr(root, "edited-by")?.to_owned(),
        schema_version: num(req_attr(root, "schema")?, "schema")?,
        description,
        media,
        created_at: parse_timestamp(created).ok_or_else(|| bad(format!("bad timestamp {created:?}")))?,
    })
}
