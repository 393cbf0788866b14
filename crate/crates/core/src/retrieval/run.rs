use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::RankedList;
use crate::error::{Error, Result};

/// Writes `query_id Q0 doc_id rank score tag` lines. Scores use the
/// shortest round-trip decimal form, so reading a run back is lossless.
pub fn write_run<W: Write>(w: &mut W, lists: &[RankedList], tag: &str) -> Result<()> {
    for l in lists {
        for c in &l.entries {
            writeln!(w, "{} Q0 {} {} {} {}", l.query_id, c.doc_id, c.rank, c.score, tag)?;
        }
    }
    Ok(())
}

pub fn save_run(path: impl AsRef<Path>, lists: &[RankedList], tag: &str) -> Result<()> {
    let path = path.as_ref();
    let f = File::create(path).map_err(|e| Error::file(path, e))?;
    let mut w = BufWriter::new(f);
    write_run(&mut w, lists, tag)?;
    w.flush().map_err(|e| Error::file(path, e))
}

/// Parses a TREC run. Queries keep first-appearance order; within a query
/// entries are re-sorted by score descending then `doc_id` ascending and
/// re-ranked, ignoring the rank column.
pub fn read_run(text: &str) -> Result<Vec<RankedList>> {
    let mut order: Vec<String> = Vec::new();
    let mut by_q: HashMap<String, Vec<(String, f64)>> = HashMap::new();
    let mut seen: HashSet<(String, String)> = HashSet::new();
    let mut offset = 0u64;
    for line in text.split_inclusive('\n') {
        let f: Vec<&str> = line.split_whitespace().collect();
        if !f.is_empty() {
            if f.len() != 6 {
                return Err(Error::parse("run", offset, format!("expected 6 fields, got {}", f.len())));
            }
            let score: f64 = f[4]
                .parse()
                .ok()
                .filter(|s: &f64| s.is_finite())
                .ok_or_else(|| Error::parse("run", offset, format!("bad score {:?}", f[4])))?;
            if !seen.insert((f[0].to_string(), f[2].to_string())) {
                return Err(Error::parse("run", offset, format!("document {} repeated for query {}", f[2], f[0])));
            }
            let entry = by_q.entry(f[0].to_string()).or_insert_with(|| {
                order.push(f[0].to_string());
                Vec::new()
            });
            entry.push((f[2].to_string(), score));
        }
        offset += line.len() as u64;
    }
    Ok(order
        .into_iter()
        .map(|q| {
            let scored = by_q.remove(&q).unwrap_or_default();
            RankedList::from_scores(q, scored)
        })
        .collect())
}

pub fn load_run(path: impl AsRef<Path>) -> Result<Vec<RankedList>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    read_run(&text)
}
