use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};

/// Binary relevance judgments, `query_id -> doc_id -> relevant`.
/// Grades above zero count as relevant.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Qrels {
    judged: BTreeMap<String, BTreeMap<String, bool>>,
}

impl Qrels {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a judgment; a repeated pair is an error.
    pub fn insert(&mut self, qid: &str, doc_id: &str, relevant: bool) -> Result<()> {
        let q = self.judged.entry(qid.to_string()).or_default();
        if q.insert(doc_id.to_string(), relevant).is_some() {
            return Err(Error::Ingest(format!("duplicate judgment for ({qid}, {doc_id})")));
        }
        Ok(())
    }

    pub fn is_relevant(&self, qid: &str, doc_id: &str) -> bool {
        self.judged
            .get(qid)
            .and_then(|q| q.get(doc_id))
            .copied()
            .unwrap_or(false)
    }

    pub fn num_relevant(&self, qid: &str) -> usize {
        self.judged
            .get(qid)
            .map_or(0, |q| q.values().filter(|&&r| r).count())
    }

    pub fn relevant_docs(&self, qid: &str) -> impl Iterator<Item = &str> {
        self.judged
            .get(qid)
            .into_iter()
            .flat_map(|q| q.iter().filter(|(_, &r)| r).map(|(d, _)| d.as_str()))
    }

    pub fn queries(&self) -> impl Iterator<Item = &str> {
        self.judged.keys().map(String::as_str)
    }

    pub fn contains_query(&self, qid: &str) -> bool {
        self.judged.contains_key(qid)
    }

    /// Parses TREC qrels lines `query_id iteration doc_id relevance`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut q = Self::new();
        let mut offset = 0u64;
        for line in text.split_inclusive('\n') {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if !fields.is_empty() {
                if fields.len() != 4 {
                    return Err(Error::parse("qrels", offset, format!("expected 4 fields, got {}", fields.len())));
                }
                let rel: i64 = fields[3]
                    .parse()
                    .map_err(|_| Error::parse("qrels", offset, format!("bad relevance {:?}", fields[3])))?;
                q.insert(fields[0], fields[2], rel > 0)
                    .map_err(|e| Error::parse("qrels", offset, e.to_string()))?;
            }
            offset += line.len() as u64;
        }
        Ok(q)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = File::open(path).map_err(|e| Error::file(path, e))?;
        let mut text = String::new();
        for line in BufReader::new(f).lines() {
            text.push_str(&line.map_err(|e| Error::file(path, e))?);
            text.push('\n');
        }
        Self::parse(&text)
    }

    /// TREC qrels text, sorted by query then document.
    pub fn to_trec(&self) -> String {
        let mut s = String::new();
        for (qid, docs) in &self.judged {
            for (d, &r) in docs {
                s.push_str(&format!("{qid} 0 {d} {}\n", u8::from(r)));
            }
        }
        s
    }

    /// Restricts to the given query ids.
    pub fn subset<'a>(&self, qids: impl IntoIterator<Item = &'a str>) -> Self {
        let mut out = Self::new();
        for q in qids {
            if let Some(m) = self.judged.get(q) {
                out.judged.insert(q.to_string(), m.clone());
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_query() {
        let q = Qrels::parse("q1 0 d1 1\nq1 0 d2 0\n\nq2 0 d9 2\n").unwrap();
        assert!(q.is_relevant("q1", "d1"));
        assert!(!q.is_relevant("q1", "d2"));
        assert!(!q.is_relevant("q3", "d1"));
        assert_eq!(q.num_relevant("q1"), 1);
        assert_eq!(q.num_relevant("q2"), 1);
        assert_eq!(Qrels::parse(&q.to_trec()).unwrap(), q);
    }

    #[test]
    fn duplicates_rejected() {
        assert!(Qrels::parse("q 0 d 1\nq 0 d 0\n").is_err());
    }

    #[test]
    fn malformed_line_offset() {
        match Qrels::parse("q 0 d 1\nq d\n") {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, 8),
            other => panic!("{other:?}"),
        }
    }
}
