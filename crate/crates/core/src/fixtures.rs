//! The five seed models shipped with the gallery, with placeholder data files.

use std::collections::{BTreeMap, BTreeSet};

use crate::model::{
    AuthorRef, BlobId, Description, FileRef, MediaObject, ModelHistory, ModelKey, ModelVersion, Reference, Status,
};
use crate::time::{parse_timestamp, Timestamp};

/// A 1x1 RGB PNG, shared by every seed preview.
pub const PLACEHOLDER_PNG: &[u8] = &[
    0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a, 0x00, 0x00, 0x00, 0x0d, 0x49, 0x48, 0x44, 0x52, 0x00, 0x00,
    0x00, 0x01, 0x00, 0x00, 0x00, 0x01, 0x08, 0x02, 0x00, 0x00, 0x00, 0x90, 0x77, 0x53, 0xde, 0x00, 0x00, 0x00,
    0x0c, 0x49, 0x44, 0x41, 0x54, 0x78, 0x9c, 0x63, 0xd0, 0x88, 0x5a, 0x00, 0x00, 0x01, 0xd0, 0x01, 0x23, 0x1c,
    0x12, 0xb6, 0x2c, 0x00, 0x00, 0x00, 0x00, 0x49, 0x45, 0x4e, 0x44, 0xae, 0x42, 0x60, 0x82,
];

#[derive(Debug, Clone)]
pub struct Fixture {
    pub history: ModelHistory,
    /// Bytes of every blob the history references.
    pub blobs: Vec<Vec<u8>>,
}

pub fn seed_time() -> Timestamp {
    parse_timestamp("2016-01-15T12:00:00Z").unwrap()
}

struct Builder {
    blobs: Vec<Vec<u8>>,
}

impl Builder {
    fn file(&mut self, name: &str, media_type: &str, bytes: Vec<u8>) -> FileRef {
        let f = FileRef {
            blob_id: BlobId::digest(&bytes),
            filename: name.to_owned(),
            media_type: media_type.to_owned(),
            size_bytes: bytes.len() as u64,
        };
        if !self.blobs.contains(&bytes) {
            self.blobs.push(bytes);
        }
        f
    }

    fn png(&mut self, name: &str) -> FileRef {
        self.file(name, "image/png", PLACEHOLDER_PNG.to_vec())
    }

    fn text_file(&mut self, key: &str, name: &str, media_type: &str) -> FileRef {
        self.file(name, media_type, format!("# placeholder for {key}/{name}\n").into_bytes())
    }

    fn media(&mut self, key: &str, id: &str, title: &str, data: &[(&str, &str)]) -> MediaObject {
        let files = data.iter().map(|(name, ty)| self.text_file(key, name, ty)).collect();
        MediaObject {
            media_id: id.to_owned(),
            title: title.to_owned(),
            text: String::new(),
            files,
            preview: Some(self.png(&format!("{id}.png"))),
        }
    }
}

fn authors(names: &[&str]) -> Vec<AuthorRef> {
    names
        .iter()
        .enumerate()
        .map(|(i, n)| AuthorRef { name: (*n).to_owned(), affiliation: None, position: i as u32 })
        .collect()
}

fn reference(key: &str, entry_type: &str, attrs: &[(&str, &str)]) -> Reference {
    Reference {
        ref_key: key.to_owned(),
        entry_type: entry_type.to_owned(),
        attributes: attrs.iter().map(|(k, v)| ((*k).to_owned(), (*v).to_owned())).collect::<BTreeMap<_, _>>(),
    }
}

struct Spec<'a> {
    key: &'a str,
    owner: &'a str,
    title: &'a str,
    authors: &'a [&'a str],
    text: &'a str,
    keywords: &'a [&'a str],
    references: Vec<Reference>,
}

fn build(spec: Spec<'_>, media: impl FnOnce(&mut Builder) -> Vec<MediaObject>) -> Fixture {
    let mut b = Builder { blobs: Vec::new() };
    let media = media(&mut b);
    let key = ModelKey::new(spec.key).expect("fixture keys are valid");
    let created = seed_time();
    let v1 = ModelVersion {
        key: key.clone(),
        version: 1,
        status: Status::Edit,
        edited_by: spec.owner.to_owned(),
        schema_version: 1,
        description: Description {
            title: spec.title.to_owned(),
            authors: authors(spec.authors),
            text: spec.text.to_owned(),
            keywords: spec.keywords.iter().map(|k| (*k).to_owned()).collect(),
            references: spec.references,
            date: created.date_naive(),
            license: None,
        },
        media,
        created_at: created,
    };
    Fixture {
        history: ModelHistory {
            key,
            versions: vec![v1],
            owners: BTreeSet::from([spec.owner.to_owned()]),
            editors: BTreeSet::new(),
        },
        blobs: b.blobs,
    }
}

pub fn sc_catenoid() -> Fixture {
    build(
        Spec {
            key: "sc-catenoid",
            owner: "sechel",
            title: "Discrete S-Conical Catenoid and Helicoid",
            authors: &["Alexander Bobenko", "Tim Hoffmann", "Benno König", "Stefan Sechelmann"],
            text: "Quad surfaces whose faces at every vertex touch a common cone of revolution \\cite{BHKS15}.\n\
                   \\media{catenoid}\n\\media{associate}",
            keywords: &["minimal surface", "s-conical"],
            references: vec![reference(
                "BHKS15",
                "article",
                &[
                    ("author", "A. I. Bobenko, T. Hoffmann, B. König, S. Sechelmann"),
                    ("title", "S-conical minimal surfaces"),
                    ("year", "2015"),
                ],
            )],
        },
        |b| {
            vec![
                b.media("sc-catenoid", "catenoid", "S-conical catenoid", &[("catenoid.obj", "model/obj")]),
                b.media("sc-catenoid", "associate", "Associate family", &[("associate.mp4", "video/mp4")]),
            ]
        },
    )
}

pub fn zalpha_circle_pattern() -> Fixture {
    build(
        Spec {
            key: "zalpha_circle_pattern",
            owner: "techter",
            title: "z^a Circle Pattern",
            authors: &["Jan Techter", "Jürgen Richter-Gebert"],
            text: "Square-grid circle pattern for $z \\mapsto z^a$ \\cite{S97}. \\media{applet}",
            keywords: &["circle pattern", "discrete holomorphic"],
            references: vec![reference(
                "S97",
                "article",
                &[
                    ("author", "O. Schramm"),
                    ("title", "Circle patterns with the combinatorics of the square grid"),
                    ("journal", "Duke Math. J."),
                    ("year", "1997"),
                ],
            )],
        },
        |b| vec![b.media("zalpha_circle_pattern", "applet", "Interactive pattern", &[("zalpha.cdy", "application/octet-stream")])],
    )
}

pub fn koebe_polyhedra() -> Fixture {
    build(
        Spec {
            key: "koebe_polyhedra",
            owner: "sechel",
            title: "Koebe Polyhedra",
            authors: &["Stefan Sechelmann"],
            text: "Polytopes with all edges tangent to the unit sphere. \\media{cube} \\media{dodecahedron}",
            keywords: &["circle pattern", "polytope"],
            references: Vec::new(),
        },
        |b| {
            vec![
                b.media("koebe_polyhedra", "cube", "Koebe cube", &[("cube.obj", "model/obj")]),
                b.media("koebe_polyhedra", "dodecahedron", "Koebe dodecahedron", &[("dodecahedron.obj", "model/obj")]),
            ]
        },
    )
}

pub fn lawsons_surface_uniformization() -> Fixture {
    build(
        Spec {
            key: "lawsons_surface_uniformization",
            owner: "sechel",
            title: "Lawson's Surface Uniformization",
            authors: &["Stefan Sechelmann", "Alexander Bobenko", "Boris Springborn"],
            text: "Discrete uniformization of a genus 2 surface. \\media{tiling}",
            keywords: &["uniformization", "hyperbolic tiling"],
            references: Vec::new(),
        },
        |b| {
            vec![b.media(
                "lawsons_surface_uniformization",
                "tiling",
                "Hyperbolic tiling",
                &[("uniformization.xml", "application/xml"), ("tiling.pdf", "application/pdf")],
            )]
        },
    )
}

pub fn tropical_grassmannian_gr26() -> Fixture {
    build(
        Spec {
            key: "tropical_grassmannian_gr26",
            owner: "joswig",
            title: "Tropical Grassmannian TropGr(2,6)",
            authors: &["Michael Joswig", "Benjamin Schröter"],
            text: "Two views of a tropical variety. \\media{fan} \\media{link}",
            keywords: &["tropical geometry"],
            references: Vec::new(),
        },
        |b| {
            vec![
                b.media("tropical_grassmannian_gr26", "fan", "Fan", &[("fan.poly", "application/x-polymake")]),
                b.media("tropical_grassmannian_gr26", "link", "Spherical link", &[("link.obj", "model/obj")]),
            ]
        },
    )
}

pub fn all() -> Vec<Fixture> {
    vec![
        sc_catenoid(),
        zalpha_circle_pattern(),
        koebe_polyhedra(),
        lawsons_surface_uniformization(),
        tropical_grassmannian_gr26(),
    ]
}

pub fn koebe_polyhedra_v1() -> ModelVersion {
    koebe_polyhedra().history.versions.remove(0)
}
