//! Candidate lists prepared for re-ranking: document terms plus the extra
//! features computed against the query's BM25 candidates.

use crate::error::{Error, Result};
use crate::models::{compute_extra_features, ExtraFeatures, PairInput, Ranker, Resources, ScoreStats};
use crate::retrieval::{InvertedIndex, RankedList};
use crate::text::ProcessedQuery;

#[derive(Debug, Clone, PartialEq)]
pub struct RerankCandidate {
    pub doc_id: String,
    /// Position in the index's document store.
    pub doc: usize,
    pub bm25: f64,
    pub extra: ExtraFeatures,
}

/// A query with its BM25 candidates, in BM25 rank order.
#[derive(Debug, Clone, PartialEq)]
pub struct RerankQuery {
    pub query: ProcessedQuery,
    pub candidates: Vec<RerankCandidate>,
}

impl RerankQuery {
    /// Resolves each candidate in the index and computes its features.
    /// The candidate scores are taken as the BM25 scores.
    pub fn prepare(index: &InvertedIndex, query: ProcessedQuery, list: &RankedList) -> Result<Self> {
        if list.query_id != query.query_id {
            return Err(Error::Contract(format!(
                "candidate list for {} given for query {}",
                list.query_id, query.query_id
            )));
        }
        if list.is_empty() {
            return Err(Error::Contract(format!("query {} has no candidates", query.query_id)));
        }
        let scores: Vec<f64> = list.entries.iter().map(|c| c.score).collect();
        let stats = ScoreStats::from_scores(&scores);
        let mut candidates = Vec::with_capacity(list.len());
        for c in &list.entries {
            let doc = index
                .doc_number(&c.doc_id)
                .ok_or_else(|| Error::Lookup(format!("document {} not in the index", c.doc_id)))?;
            let extra = compute_extra_features(&query.terms, &index.doc(doc).terms, c.score, &stats, index.idf());
            candidates.push(RerankCandidate { doc_id: c.doc_id.clone(), doc, bm25: c.score, extra });
        }
        Ok(Self { query, candidates })
    }

    pub fn query_id(&self) -> &str {
        &self.query.query_id
    }

    pub fn pair<'a>(&'a self, index: &'a InvertedIndex, i: usize) -> PairInput<'a> {
        let c = &self.candidates[i];
        PairInput { query: &self.query.terms, doc: &index.doc(c.doc).terms, extra: c.extra }
    }

    pub fn bm25_list(&self) -> RankedList {
        RankedList::from_scores(
            self.query.query_id.clone(),
            self.candidates.iter().map(|c| (c.doc_id.clone(), c.bm25)).collect(),
        )
    }
}

/// Scores every candidate with `ranker` and sorts by the new scores
/// (ties by `doc_id`).
pub fn rerank(ranker: &Ranker, res: &Resources<'_>, index: &InvertedIndex, q: &RerankQuery) -> RankedList {
    let scored = (0..q.candidates.len())
        .map(|i| (q.candidates[i].doc_id.clone(), ranker.score(res, &q.pair(index, i))))
        .collect();
    RankedList::from_scores(q.query.query_id.clone(), scored)
}

pub fn rerank_all(ranker: &Ranker, res: &Resources<'_>, index: &InvertedIndex, queries: &[RerankQuery]) -> Vec<RankedList> {
    queries.iter().map(|q| rerank(ranker, res, index, q)).collect()
}
