//! A minimal XML tree for `.xosc` documents: deterministic writer, loader
//! with positioned errors, and a schema-subset checker.

mod project;
mod schema;

use std::fmt::Write as _;

use quick_xml::events::Event;
use quick_xml::Reader;
use thiserror::Error;

use crate::text::xml_escape;

pub use project::project;
pub use schema::{attribute_order, verify, Finding, FindingSeverity, ELEMENT_NAMES};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum XmlNode {
    Element(XmlElement),
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct XmlElement {
    pub name: String,
    pub attributes: Vec<(String, String)>,
    pub children: Vec<XmlNode>,
}

impl XmlElement {
    pub fn new(name: impl Into<String>) -> Self {
        XmlElement {
            name: name.into(),
            attributes: Vec::new(),
            children: Vec::new(),
        }
    }

    /// Builder-style attribute setter.
    pub fn attr(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.set_attr(key, value);
        self
    }

    pub fn set_attr(&mut self, key: impl Into<String>, value: impl Into<String>) {
        let key = key.into();
        let value = value.into();
        match self.attributes.iter_mut().find(|(k, _)| *k == key) {
            Some(slot) => slot.1 = value,
            None => self.attributes.push((key, value)),
        }
    }

    /// Builder-style child append.
    pub fn child(mut self, child: XmlElement) -> Self {
        self.children.push(XmlNode::Element(child));
        self
    }

    pub fn push(&mut self, child: XmlElement) {
        self.children.push(XmlNode::Element(child));
    }

    pub fn get_attr(&self, key: &str) -> Option<&str> {
        self.attributes.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn elements(&self) -> impl Iterator<Item = &XmlElement> {
        self.children.iter().filter_map(|c| match c {
            XmlNode::Element(e) => Some(e),
            XmlNode::Text(_) => None,
        })
    }

    pub fn elements_mut(&mut self) -> impl Iterator<Item = &mut XmlElement> {
        self.children.iter_mut().filter_map(|c| match c {
            XmlNode::Element(e) => Some(e),
            XmlNode::Text(_) => None,
        })
    }

    pub fn find(&self, name: &str) -> Option<&XmlElement> {
        self.elements().find(|e| e.name == name)
    }

    pub fn find_all<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a XmlElement> + 'a {
        self.elements().filter(move |e| e.name == name)
    }

    /// Follows a `/`-separated chain of first-matching children.
    pub fn path(&self, path: &str) -> Option<&XmlElement> {
        path.split('/')
            .filter(|p| !p.is_empty())
            .try_fold(self, |node, part| node.find(part))
    }

    /// Depth-first search for the first descendant (or self) named `name`.
    pub fn descendant(&self, name: &str) -> Option<&XmlElement> {
        if self.name == name {
            return Some(self);
        }
        self.elements().find_map(|e| e.descendant(name))
    }

    /// Visits every element depth-first, self included.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a XmlElement)) {
        f(self);
        for child in self.elements() {
            child.walk(f);
        }
    }

    pub fn text(&self) -> String {
        self.children
            .iter()
            .filter_map(|c| match c {
                XmlNode::Text(t) => Some(t.as_str()),
                XmlNode::Element(_) => None,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct XoscDocument {
    pub root: XmlElement,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("XML read error at line {line}, column {column}: {message}")]
pub struct ReadError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl XoscDocument {
    pub fn new(root: XmlElement) -> Self {
        XoscDocument { root }
    }

    /// Serializes with a fixed declaration, two-space indentation and
    /// attributes in schema order. Equal trees give equal bytes.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
        write_element(&mut out, &self.root, 0);
        out.into_bytes()
    }

    pub fn to_xml_string(&self) -> String {
        String::from_utf8(self.to_bytes()).expect("writer produces UTF-8")
    }

    pub fn load(bytes: &[u8]) -> Result<Self, ReadError> {
        let root = parse_root(bytes)?;
        Ok(XoscDocument { root })
    }

    /// Equality up to attribute order and surrounding whitespace in text.
    pub fn structurally_eq(&self, other: &XoscDocument) -> bool {
        canonical(&self.root) == canonical(&other.root)
    }
}

fn canonical(el: &XmlElement) -> XmlElement {
    XmlElement {
        name: el.name.clone(),
        attributes: ordered_attributes(el)
            .into_iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect(),
        children: el
            .children
            .iter()
            .filter_map(|c| match c {
                XmlNode::Element(e) => Some(XmlNode::Element(canonical(e))),
                XmlNode::Text(t) if t.trim().is_empty() => None,
                XmlNode::Text(t) => Some(XmlNode::Text(t.trim().to_string())),
            })
            .collect(),
    }
}

/// Parses a single-rooted XML fragment (fragment templates use this).
pub fn parse_fragment(text: &str) -> Result<XmlElement, ReadError> {
    parse_root(text.as_bytes())
}

fn write_element(out: &mut String, el: &XmlElement, depth: usize) {
    let indent = "  ".repeat(depth);
    let _ = write!(out, "{indent}<{}", el.name);
    for (k, v) in ordered_attributes(el) {
        let _ = write!(out, " {k}=\"{}\"", xml_escape(v));
    }
    if el.children.is_empty() {
        out.push_str("/>\n");
        return;
    }
    let only_text = el.children.iter().all(|c| matches!(c, XmlNode::Text(_)));
    if only_text {
        let _ = writeln!(out, ">{}</{}>", xml_escape(&el.text()), el.name);
        return;
    }
    out.push_str(">\n");
    for child in &el.children {
        match child {
            XmlNode::Element(e) => write_element(out, e, depth + 1),
            XmlNode::Text(t) => {
                let _ = writeln!(out, "{indent}  {}", xml_escape(t.trim()));
            }
        }
    }
    let _ = writeln!(out, "{indent}</{}>", el.name);
}

fn ordered_attributes(el: &XmlElement) -> Vec<(&str, &str)> {
    let order = attribute_order(&el.name);
    let mut attrs: Vec<(&str, &str)> = el.attributes.iter().map(|(k, v)| (k.as_str(), v.as_str())).collect();
    attrs.sort_by_key(|(k, _)| {
        order
            .iter()
            .position(|o| o == k)
            .map(|p| (0, p, ""))
            .unwrap_or((1, 0, *k))
    });
    attrs
}

fn line_col(bytes: &[u8], pos: usize) -> (usize, usize) {
    let pos = pos.min(bytes.len());
    let before = &bytes[..pos];
    let line = before.iter().filter(|b| **b == b'\n').count() + 1;
    let col = before.iter().rev().take_while(|b| **b != b'\n').count() + 1;
    (line, col)
}

fn parse_root(bytes: &[u8]) -> Result<XmlElement, ReadError> {
    let err_at = |pos: usize, message: String| {
        let (line, column) = line_col(bytes, pos);
        ReadError { line, column, message }
    };
    if let Err(e) = std::str::from_utf8(bytes) {
        return Err(err_at(e.valid_up_to(), "invalid UTF-8".into()));
    }
    let mut reader = Reader::from_reader(bytes);
    reader.config_mut().trim_text(true);
    let mut stack: Vec<(XmlElement, usize)> = Vec::new();
    let mut root: Option<XmlElement> = None;
    let mut buf = Vec::new();

    loop {
        let mut event_start = reader.buffer_position() as usize;
        while bytes.get(event_start).is_some_and(|b| b.is_ascii_whitespace()) {
            event_start += 1;
        }
        let event = reader
            .read_event_into(&mut buf)
            .map_err(|e| err_at(reader.error_position() as usize, e.to_string()))?;
        match event {
            ev @ (Event::Start(_) | Event::Empty(_)) => {
                let is_empty = matches!(ev, Event::Empty(_));
                let (Event::Start(start) | Event::Empty(start)) = ev else {
                    unreachable!()
                };
                let name = String::from_utf8_lossy(start.name().as_ref()).into_owned();
                let mut el = XmlElement::new(name);
                for attr in start.attributes() {
                    let attr = attr.map_err(|e| err_at(event_start, e.to_string()))?;
                    let key = String::from_utf8_lossy(attr.key.as_ref()).into_owned();
                    let value = attr
                        .unescape_value()
                        .map_err(|e| err_at(event_start, e.to_string()))?
                        .into_owned();
                    if el.get_attr(&key).is_some() {
                        return Err(err_at(event_start, format!("duplicate attribute `{key}`")));
                    }
                    el.attributes.push((key, value));
                }
                if is_empty {
                    attach(&mut stack, &mut root, el, event_start, &err_at)?;
                } else {
                    stack.push((el, event_start));
                }
            }
            Event::End(_) => {
                let (el, _) = stack
                    .pop()
                    .ok_or_else(|| err_at(event_start, "unexpected closing tag".into()))?;
                attach(&mut stack, &mut root, el, event_start, &err_at)?;
            }
            Event::Text(t) => {
                let text = t
                    .unescape()
                    .map_err(|e| err_at(event_start, e.to_string()))?
                    .into_owned();
                if text.trim().is_empty() {
                    continue;
                }
                match stack.last_mut() {
                    Some((parent, _)) => parent.children.push(XmlNode::Text(text)),
                    None => return Err(err_at(event_start, "text outside the root element".into())),
                }
            }
            Event::CData(c) => {
                let text = String::from_utf8_lossy(&c).into_owned();
                match stack.last_mut() {
                    Some((parent, _)) => parent.children.push(XmlNode::Text(text)),
                    None => return Err(err_at(event_start, "CDATA outside the root element".into())),
                }
            }
            Event::Decl(_) | Event::Comment(_) | Event::PI(_) | Event::DocType(_) => {}
            Event::Eof => {
                if let Some((open, pos)) = stack.last() {
                    let (line, column) = line_col(bytes, *pos);
                    return Err(ReadError {
                        line,
                        column,
                        message: format!("unexpected end of input: <{}> is never closed", open.name),
                    });
                }
                break;
            }
        }
        buf.clear();
    }
    root.ok_or_else(|| err_at(bytes.len(), "document has no root element".into()))
}

fn attach(
    stack: &mut [(XmlElement, usize)],
    root: &mut Option<XmlElement>,
    el: XmlElement,
    pos: usize,
    err_at: &impl Fn(usize, String) -> ReadError,
) -> Result<(), ReadError> {
    match stack.last_mut() {
        Some((parent, _)) => {
            parent.children.push(XmlNode::Element(el));
            Ok(())
        }
        None if root.is_none() => {
            *root = Some(el);
            Ok(())
        }
        None => Err(err_at(pos, "more than one root element".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> XoscDocument {
        XoscDocument::new(
            XmlElement::new("OpenSCENARIO")
                .child(
                    XmlElement::new("FileHeader")
                        .attr("author", "t")
                        .attr("revMajor", "1")
                        .attr("description", "a < b & \"c\""),
                )
                .child(XmlElement::new("Entities")),
        )
    }

    #[test]
    fn write_load_round_trip() {
        let doc = sample();
        let bytes = doc.to_bytes();
        let back = XoscDocument::load(&bytes).unwrap();
        assert_eq!(back.to_bytes(), bytes);
        assert_eq!(
            back.root.path("FileHeader").unwrap().get_attr("description"),
            Some("a < b & \"c\"")
        );
    }

    #[test]
    fn structural_equality_ignores_attribute_order() {
        let doc = sample();
        let mut shuffled = doc.clone();
        let header = shuffled.root.elements_mut().next().unwrap();
        header.attributes.reverse();
        assert_ne!(shuffled, doc);
        assert!(shuffled.structurally_eq(&doc));
        let mut changed = doc.clone();
        changed.root.elements_mut().next().unwrap().set_attr("author", "u");
        assert!(!changed.structurally_eq(&doc));
    }

    #[test]
    fn attributes_follow_schema_order() {
        let text = sample().to_xml_string();
        let line = text.lines().find(|l| l.contains("FileHeader")).unwrap();
        let rev = line.find("revMajor").unwrap();
        let author = line.find("author").unwrap();
        assert!(rev < author, "{line}");
    }

    #[test]
    fn unclosed_element_reports_position() {
        let err = XoscDocument::load(b"<?xml version=\"1.0\"?>\n<A>\n  <B>\n</A>").unwrap_err();
        assert!(err.line >= 2, "{err:?}");
        let err = XoscDocument::load(b"<A>\n  <B>\n").unwrap_err();
        assert_eq!(err.line, 2);
        assert!(err.message.contains("<B>"));
    }

    #[test]
    fn rejects_two_roots_and_garbage() {
        assert!(XoscDocument::load(b"<A/><B/>").is_err());
        assert!(XoscDocument::load(b"").is_err());
        assert!(XoscDocument::load(&[0x3c, 0xff, 0xfe]).is_err());
    }

    #[test]
    fn text_nodes_survive() {
        let doc = XoscDocument::load(b"<A><B>hello &amp; bye</B></A>").unwrap();
        assert_eq!(doc.root.find("B").unwrap().text(), "hello & bye");
        let again = XoscDocument::load(&doc.to_bytes()).unwrap();
        assert_eq!(again, doc);
    }
}
