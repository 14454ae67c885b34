//! Plain bibliography style for model references.
//!
//! `Author. Title. Venue, Volume(Number):Pages, Publisher, Year.` with absent
//! fields skipped.

use crate::model::Reference;

fn field<'a>(r: &'a Reference, name: &str) -> Option<&'a str> {
    r.attributes.get(name).map(|s| s.trim()).filter(|s| !s.is_empty())
}

fn push_sentence(out: &mut String, s: &str) {
    if !out.is_empty() {
        out.push(' ');
    }
    out.push_str(s);
    if !s.ends_with('.') {
        out.push('.');
    }
}

pub fn render_reference(r: &Reference) -> String {
    let mut out = String::new();
    if let Some(author) = field(r, "author") {
        push_sentence(&mut out, author);
    }
    if let Some(title) = field(r, "title") {
        push_sentence(&mut out, title);
    }

    let mut venue = String::new();
    let mut append = |sep: &str, part: &str| {
        if !venue.is_empty() {
            venue.push_str(sep);
        }
        venue.push_str(part);
    };
    if let Some(v) = field(r, "journal").or_else(|| field(r, "booktitle")) {
        append("", v);
    }
    let volume = match (field(r, "volume"), field(r, "number")) {
        (Some(v), Some(n)) => Some(format!("{v}({n})")),
        (Some(v), None) => Some(v.to_owned()),
        (None, Some(n)) => Some(format!("({n})")),
        (None, None) => None,
    };
    if let Some(v) = volume {
        append(", ", &v);
    }
    if let Some(p) = field(r, "pages") {
        append(":", p);
    }
    if let Some(p) = field(r, "publisher") {
        append(", ", p);
    }
    if let Some(y) = field(r, "year") {
        append(", ", y);
    }
    if !venue.is_empty() {
        push_sentence(&mut out, &venue);
    }

    if out.is_empty() {
        format!("[{}].", r.ref_key)
    } else {
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference(key: &str, attrs: &[(&str, &str)]) -> Reference {
        Reference {
            ref_key: key.into(),
            entry_type: "article".into(),
            attributes: attrs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
        }
    }

    #[test]
    fn article_with_journal_and_year() {
        let r = reference(
            "S97",
            &[
                ("author", "O. Schramm"),
                ("title", "Circle patterns with the combinatorics of the square grid"),
                ("journal", "Duke Math. J."),
                ("year", "1997"),
            ],
        );
        assert_eq!(
            render_reference(&r),
            "O. Schramm. Circle patterns with the combinatorics of the square grid. Duke Math. J., 1997."
        );
    }

    #[test]
    fn no_attributes_renders_key() {
        assert_eq!(render_reference(&reference("x1", &[])), "[x1].");
        assert_eq!(render_reference(&reference("x1", &[("note", "ignored")])), "[x1].");
    }

    #[test]
    fn title_and_year_only() {
        assert_eq!(render_reference(&reference("t", &[("title", "T"), ("year", "2020")])), "T. 2020.");
    }

    #[test]
    fn full_template_order() {
        let r = reference(
            "B99",
            &[
                ("year", "1999"),
                ("pages", "117--130"),
                ("number", "2"),
                ("volume", "16"),
                ("booktitle", "Lett. Math. Phys."),
                ("publisher", "Springer"),
                ("title", "Discrete conformal maps"),
                ("author", "A. I. Bobenko"),
            ],
        );
        assert_eq!(
            render_reference(&r),
            "A. I. Bobenko. Discrete conformal maps. Lett. Math. Phys., 16(2):117--130, Springer, 1999."
        );
    }

    #[test]
    fn journal_preferred_over_booktitle() {
        let r = reference("k", &[("journal", "J"), ("booktitle", "B")]);
        assert_eq!(render_reference(&r), "J.");
    }
}
