use super::index::InvertedIndex;
use super::{Candidate, RankedList};
use crate::error::{Error, Result};
use crate::text::{ProcessedQuery, PubDate};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Self { k1: 1.2, b: 0.75 }
    }
}

#[inline]
fn term_weight(idf: f64, tf: f64, dl: f64, avgdl: f64, p: Bm25Params) -> f64 {
    idf * tf * (p.k1 + 1.0) / (tf + p.k1 * (1.0 - p.b + p.b * dl / avgdl))
}

/// BM25 of one document by internal number. Query terms are summed in
/// query order; repeated query terms count once per occurrence.
pub fn bm25_score_doc(query: &ProcessedQuery, doc: usize, index: &InvertedIndex, p: Bm25Params) -> f64 {
    let dl = index.doc_length(doc) as f64;
    let terms = &index.doc(doc).terms;
    let mut s = 0.0;
    for &t in &query.terms {
        if t.is_oov() {
            continue;
        }
        let tf = terms.iter().filter(|&&x| x == t).count();
        if tf > 0 {
            s += term_weight(index.idf().idf(t), tf as f64, dl, index.avg_doc_length(), p);
        }
    }
    s
}

pub fn bm25_score(query: &ProcessedQuery, doc_id: &str, index: &InvertedIndex, p: Bm25Params) -> Result<f64> {
    let n = index
        .doc_number(doc_id)
        .ok_or_else(|| Error::Lookup(format!("unknown doc_id {doc_id}")))?;
    Ok(bm25_score_doc(query, n, index, p))
}

/// Scores every document through the posting lists.
pub fn score_all(query: &ProcessedQuery, index: &InvertedIndex, p: Bm25Params) -> Vec<f64> {
    let mut acc = vec![0.0; index.num_docs()];
    let avgdl = index.avg_doc_length();
    for &t in &query.terms {
        let idf = index.idf().idf(t);
        for post in index.postings(t) {
            let d = post.doc as usize;
            acc[d] += term_weight(idf, post.tf as f64, index.doc_length(d) as f64, avgdl, p);
        }
    }
    acc
}

/// The `n` highest-scoring documents, ties broken by ascending `doc_id`.
/// Documents dated after `cutoff` are skipped, so lower-ranked ones take
/// their place. When fewer than `n` documents match, zero-score documents
/// fill the list in `doc_id` order.
pub fn retrieve_top_n(
    query: &ProcessedQuery,
    index: &InvertedIndex,
    n: usize,
    p: Bm25Params,
    cutoff: Option<&PubDate>,
) -> RankedList {
    let scores = score_all(query, index, p);
    let eligible = |d: usize| match (cutoff, &index.doc(d).date) {
        (Some(c), Some(date)) => !date.is_after(c),
        _ => true,
    };
    let mut hits: Vec<usize> = (0..scores.len()).filter(|&d| scores[d] > 0.0 && eligible(d)).collect();
    hits.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    hits.truncate(n);
    if hits.len() < n {
        let fill: Vec<usize> = (0..scores.len())
            .filter(|&d| scores[d] == 0.0 && eligible(d))
            .take(n - hits.len())
            .collect();
        hits.extend(fill);
    }
    RankedList {
        query_id: query.query_id.clone(),
        entries: hits
            .into_iter()
            .enumerate()
            .map(|(r, d)| Candidate {
                doc_id: index.doc(d).doc_id.clone(),
                score: scores[d],
                rank: r + 1,
            })
            .collect(),
    }
}
