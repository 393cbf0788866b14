//! JSON-lines readers for documents and queries.

use std::cmp::Ordering;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde_json::Value;

use crate::error::{Error, Result};

/// Publication date at year, month or day precision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct PubDate {
    pub year: u16,
    pub month: Option<u8>,
    pub day: Option<u8>,
}

impl PubDate {
    /// Accepts `YYYY`, `YYYY-MM` and `YYYY-MM-DD` (any trailing time part is ignored).
    pub fn parse(s: &str) -> Option<Self> {
        let s = s.trim();
        let s = s.split(['T', ' ']).next()?;
        let mut parts = s.split('-');
        let year = parts.next()?.parse().ok()?;
        let month = match parts.next() {
            Some(m) => Some(m.parse().ok().filter(|m| (1..=12).contains(m))?),
            None => None,
        };
        let day = match parts.next() {
            Some(d) => Some(d.parse().ok().filter(|d| (1..=31).contains(d))?),
            None => None,
        };
        if parts.next().is_some() {
            return None;
        }
        Some(Self { year, month, day })
    }

    /// True when `self` falls strictly after `cutoff`, comparing only at the
    /// cutoff's precision (a 2015-06 document is not after a 2015 cutoff).
    pub fn is_after(&self, cutoff: &PubDate) -> bool {
        let ord = self.year.cmp(&cutoff.year).then_with(|| match (cutoff.month, self.month) {
            (Some(cm), Some(m)) => m.cmp(&cm).then_with(|| match (cutoff.day, self.day) {
                (Some(cd), Some(d)) => d.cmp(&cd),
                _ => Ordering::Equal,
            }),
            _ => Ordering::Equal,
        });
        ord == Ordering::Greater
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawDocument {
    pub id: String,
    pub text: String,
    pub date: Option<PubDate>,
}

impl RawDocument {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
            date: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawQuery {
    pub id: String,
    pub text: String,
    pub cutoff: Option<PubDate>,
}

fn read_lines(path: &Path) -> Result<Vec<(u64, String)>> {
    let f = File::open(path).map_err(|e| Error::file(path, e))?;
    let mut out = Vec::new();
    let mut offset = 0u64;
    for line in BufReader::new(f).lines() {
        let line = line.map_err(|e| Error::file(path, e))?;
        let len = line.len() as u64 + 1;
        if !line.trim().is_empty() {
            out.push((offset, line));
        }
        offset += len;
    }
    Ok(out)
}

fn id_of(v: &Value) -> Option<String> {
    match v.get("id")? {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

fn str_field<'a>(v: &'a Value, key: &str) -> Option<&'a str> {
    v.get(key).and_then(Value::as_str)
}

fn date_field(v: &Value, key: &str, what: &str, offset: u64) -> Result<Option<PubDate>> {
    let s = match v.get(key) {
        None | Some(Value::Null) => return Ok(None),
        Some(Value::String(s)) => s.clone(),
        Some(Value::Number(n)) => n.to_string(),
        Some(_) => return Err(Error::parse(what, offset, format!("field {key} is not a date"))),
    };
    PubDate::parse(&s)
        .map(Some)
        .ok_or_else(|| Error::parse(what, offset, format!("unparseable date {s:?}")))
}

/// Reads a corpus where each line is `{"id", "title", "abstract"}` (text is
/// title, a space, then abstract) or `{"id", "text"}`. An optional `date`
/// field enables cutoff filtering.
pub fn read_corpus(path: impl AsRef<Path>) -> Result<Vec<RawDocument>> {
    let path = path.as_ref();
    let mut docs = Vec::new();
    for (offset, line) in read_lines(path)? {
        let v: Value = serde_json::from_str(&line)
            .map_err(|e| Error::parse("corpus", offset, e.to_string()))?;
        let id = id_of(&v).ok_or_else(|| Error::parse("corpus", offset, "missing id"))?;
        let text = match (str_field(&v, "text"), str_field(&v, "title"), str_field(&v, "abstract")) {
            (Some(t), _, _) => t.to_string(),
            (None, Some(t), Some(a)) => format!("{t} {a}"),
            (None, Some(t), None) => t.to_string(),
            (None, None, Some(a)) => a.to_string(),
            (None, None, None) => {
                return Err(Error::parse("corpus", offset, format!("document {id} has no text")))
            }
        };
        let date = date_field(&v, "date", "corpus", offset)?;
        docs.push(RawDocument { id, text, date });
    }
    Ok(docs)
}

/// Reads queries as `{"id", "text"}` (`body` and `title` are accepted in
/// place of `text`). `cutoff_field`, when set, names an optional date field.
pub fn read_queries(path: impl AsRef<Path>, cutoff_field: Option<&str>) -> Result<Vec<RawQuery>> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for (offset, line) in read_lines(path)? {
        let v: Value = serde_json::from_str(&line)
            .map_err(|e| Error::parse("queries", offset, e.to_string()))?;
        let id = id_of(&v).ok_or_else(|| Error::parse("queries", offset, "missing id"))?;
        let text = ["text", "body", "title"]
            .iter()
            .find_map(|k| str_field(&v, k))
            .ok_or_else(|| Error::parse("queries", offset, format!("query {id} has no text")))?
            .to_string();
        let cutoff = match cutoff_field {
            Some(f) => date_field(&v, f, "queries", offset)?,
            None => None,
        };
        out.push(RawQuery { id, text, cutoff });
    }
    Ok(out)
}
