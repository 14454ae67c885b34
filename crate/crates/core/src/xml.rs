//! A minimal element tree with a canonical, byte-stable writer.
//!
//! Elements carry either text or child elements, never both. Whitespace
//! between child elements is formatting and is dropped on read; text of a
//! leaf element is kept verbatim.

use std::fmt::Write as _;

use quick_xml::events::Event;
use quick_xml::Reader;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Element {
    pub name: String,
    pub attrs: Vec<(String, String)>,
    pub children: Vec<Element>,
    pub text: String,
}

impl Element {
    pub fn new(name: impl Into<String>) -> Self {
        Self { name: name.into(), ..Default::default() }
    }

    pub fn with_attr(mut self, name: impl Into<String>, value: impl Into<String>) -> Self {
        self.attrs.push((name.into(), value.into()));
        self
    }

    pub fn with_text(mut self, text: impl Into<String>) -> Self {
        self.text = text.into();
        self
    }

    pub fn with_child(mut self, child: Element) -> Self {
        self.children.push(child);
        self
    }

    pub fn attr(&self, name: &str) -> Option<&str> {
        self.attrs.iter().find(|(k, _)| k == name).map(|(_, v)| v.as_str())
    }

    pub fn set_attr(&mut self, name: &str, value: impl Into<String>) {
        let value = value.into();
        match self.attrs.iter_mut().find(|(k, _)| k == name) {
            Some(slot) => slot.1 = value,
            None => self.attrs.push((name.to_owned(), value)),
        }
    }

    pub fn child(&self, name: &str) -> Option<&Element> {
        self.children.iter().find(|c| c.name == name)
    }

    pub fn child_mut(&mut self, name: &str) -> Option<&mut Element> {
        self.children.iter_mut().find(|c| c.name == name)
    }

    pub fn children_named<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Element> + 'a {
        self.children.iter().filter(move |c| c.name == name)
    }

    /// Canonical serialization: XML declaration, two-space indent, LF endings,
    /// attributes in insertion order, trailing newline.
    pub fn to_canonical_string(&self) -> String {
        let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
        self.write_into(&mut out, 0);
        out
    }

    fn write_into(&self, out: &mut String, depth: usize) {
        for _ in 0..depth {
            out.push_str("  ");
        }
        out.push('<');
        out.push_str(&self.name);
        for (k, v) in &self.attrs {
            let _ = write!(out, " {k}=\"");
            escape_attr(v, out);
            out.push('"');
        }
        if self.children.is_empty() {
            if self.text.is_empty() {
                out.push_str("/>\n");
            } else {
                out.push('>');
                escape_text(&self.text, out);
                let _ = writeln!(out, "</{}>", self.name);
            }
            return;
        }
        out.push_str(">\n");
        for c in &self.children {
            c.write_into(out, depth + 1);
        }
        for _ in 0..depth {
            out.push_str("  ");
        }
        let _ = writeln!(out, "</{}>", self.name);
    }

    pub fn parse(input: &str) -> Result<Element> {
        let mut reader = Reader::from_str(input);
        reader.config_mut().trim_text(false);

        let mut stack: Vec<Element> = Vec::new();
        let mut root: Option<Element> = None;
        loop {
            let ev = reader.read_event().map_err(|e| malformed(&reader, e))?;
            match ev {
                Event::Start(start) => {
                    let el = open_element(&reader, &start)?;
                    if root.is_some() {
                        return Err(Error::Malformed("content after root element".into()));
                    }
                    stack.push(el);
                }
                Event::Empty(start) => {
                    let el = open_element(&reader, &start)?;
                    close_into(&mut stack, &mut root, el)?;
                }
                Event::End(_) => {
                    let mut el = stack.pop().ok_or_else(|| Error::Malformed("unbalanced end tag".into()))?;
                    if !el.children.is_empty() {
                        if !el.text.trim().is_empty() {
                            return Err(Error::Malformed(format!("mixed content in <{}>", el.name)));
                        }
                        el.text.clear();
                    }
                    close_into(&mut stack, &mut root, el)?;
                }
                Event::Text(t) => {
                    let text = t.unescape().map_err(|e| malformed(&reader, e))?;
                    match stack.last_mut() {
                        Some(top) => top.text.push_str(&text),
                        None if text.trim().is_empty() => {}
                        None => return Err(Error::Malformed("text outside root element".into())),
                    }
                }
                Event::CData(c) => {
                    let raw = c.into_inner();
                    let text = std::str::from_utf8(&raw).map_err(|e| Error::Malformed(e.to_string()))?;
                    match stack.last_mut() {
                        Some(top) => top.text.push_str(text),
                        None => return Err(Error::Malformed("CDATA outside root element".into())),
                    }
                }
                Event::Decl(_) | Event::Comment(_) | Event::PI(_) => {}
                Event::DocType(_) => return Err(Error::Malformed("DOCTYPE is not supported".into())),
                Event::Eof => break,
            }
        }
        if !stack.is_empty() {
            return Err(Error::Malformed("unexpected end of input".into()));
        }
        root.ok_or_else(|| Error::Malformed("no root element".into()))
    }
}

fn malformed(reader: &Reader<&[u8]>, e: impl std::fmt::Display) -> Error {
    Error::Malformed(format!("at byte {}: {e}", reader.buffer_position()))
}

fn open_element(reader: &Reader<&[u8]>, start: &quick_xml::events::BytesStart<'_>) -> Result<Element> {
    let name = std::str::from_utf8(start.name().as_ref())
        .map_err(|e| Error::Malformed(e.to_string()))?
        .to_owned();
    let mut el = Element::new(name);
    for attr in start.attributes() {
        let attr = attr.map_err(|e| malformed(reader, e))?;
        let key = std::str::from_utf8(attr.key.as_ref())
            .map_err(|e| Error::Malformed(e.to_string()))?
            .to_owned();
        let value = attr.unescape_value().map_err(|e| malformed(reader, e))?.into_owned();
        el.attrs.push((key, value));
    }
    Ok(el)
}

fn close_into(stack: &mut [Element], root: &mut Option<Element>, el: Element) -> Result<()> {
    match stack.last_mut() {
        Some(parent) => parent.children.push(el),
        None if root.is_none() => *root = Some(el),
        None => return Err(Error::Malformed("more than one root element".into())),
    }
    Ok(())
}

fn escape_text(s: &str, out: &mut String) {
    for ch in s.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '\r' => out.push_str("&#13;"),
            c => out.push(c),
        }
    }
}

fn escape_attr(s: &str, out: &mut String) {
    for ch in s.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\t' => out.push_str("&#9;"),
            '\n' => out.push_str("&#10;"),
            '\r' => out.push_str("&#13;"),
            c => out.push(c),
        }
    }
}
