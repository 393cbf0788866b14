//! Inverted index, BM25 candidate retrieval, oracle re-ranking and TREC
//! run files.

mod bm25;
mod index;
mod persist;
mod run;

use std::collections::HashSet;

pub use bm25::{bm25_score, bm25_score_doc, retrieve_top_n, score_all, Bm25Params};
pub use index::{corpus_idf, IndexMeta, InvertedIndex, Posting, StoredDocument};
pub use persist::{load_index, read_index, save_index, write_index, INDEX_MAGIC, INDEX_VERSION};
pub use run::{read_run, write_run, load_run, save_run};

use crate::error::{Error, Result};
use crate::eval::Qrels;

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub doc_id: String,
    pub score: f64,
    /// 1-based.
    pub rank: usize,
}

/// Candidates for one query, best first.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedList {
    pub query_id: String,
    pub entries: Vec<Candidate>,
}

impl RankedList {
    /// Builds a list from `(doc_id, score)` pairs, sorting by score
    /// descending then `doc_id` ascending and assigning ranks.
    pub fn from_scores(query_id: impl Into<String>, mut scored: Vec<(String, f64)>) -> Self {
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        Self {
            query_id: query_id.into(),
            entries: scored
                .into_iter()
                .enumerate()
                .map(|(i, (doc_id, score))| Candidate { doc_id, score, rank: i + 1 })
                .collect(),
        }
    }

    pub fn doc_ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|c| c.doc_id.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Ranks are `1..=len`, scores nonincreasing and doc ids unique.
    pub fn check_invariants(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for (i, c) in self.entries.iter().enumerate() {
            if c.rank != i + 1 {
                return Err(Error::Contract(format!("{}: rank {} at position {}", self.query_id, c.rank, i + 1)));
            }
            if !seen.insert(c.doc_id.as_str()) {
                return Err(Error::Contract(format!("{}: duplicate doc {}", self.query_id, c.doc_id)));
            }
            if i > 0 && self.entries[i - 1].score < c.score {
                return Err(Error::Contract(format!("{}: scores increase at rank {}", self.query_id, c.rank)));
            }
        }
        Ok(())
    }
}

/// Moves judged-relevant candidates to the top, keeping relative order in
/// both groups. Scores are rewritten as `len - rank + 1`.
pub fn oracle_rerank(list: &RankedList, qrels: &Qrels) -> RankedList {
    let (rel, non): (Vec<&Candidate>, Vec<&Candidate>) = list
        .entries
        .iter()
        .partition(|c| qrels.is_relevant(&list.query_id, &c.doc_id));
    let n = list.entries.len();
    RankedList {
        query_id: list.query_id.clone(),
        entries: rel
            .into_iter()
            .chain(non)
            .enumerate()
            .map(|(i, c)| Candidate {
                doc_id: c.doc_id.clone(),
                score: (n - i) as f64,
                rank: i + 1,
            })
            .collect(),
    }
}
