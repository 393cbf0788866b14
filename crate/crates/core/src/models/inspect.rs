//! Interaction dumps: per-view similarity matrices and the per-q-term
//! document-aware encodings of one query-document pair.

use serde::{Deserialize, Serialize};

use super::{Ranker, Resources};
use crate::autodiff::{Array, Graph};
use crate::embed::exact_match_matrix;
use crate::text::{TermId, Vocabulary};

/// A similarity matrix between q-terms (rows) and d-terms (columns).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewMatrix {
    pub view: String,
    pub values: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InspectDump {
    pub architecture: String,
    pub query_id: String,
    pub doc_id: String,
    pub query_terms: Vec<String>,
    pub doc_terms: Vec<String>,
    /// Cosine similarities per view: `context` (encoder models only),
    /// `embedding` and `exact`.
    pub views: Vec<ViewMatrix>,
    /// One row per q-term; empty for the features-only baseline.
    pub encodings: Vec<Vec<f64>>,
}

fn rows(a: &Array) -> Vec<Vec<f64>> {
    let cols = a.shape().get(1).copied().unwrap_or(1);
    a.data().chunks(cols).map(<[f64]>::to_vec).collect()
}

fn names(vocab: &Vocabulary, terms: &[TermId]) -> Vec<String> {
    terms
        .iter()
        .map(|&t| vocab.token(t).unwrap_or("<oov>").to_string())
        .collect()
}

/// Builds the dump for one pair. The document is cut to `max_doc_terms`
/// like at scoring time.
pub fn inspect_pair(
    ranker: &Ranker,
    res: &Resources<'_>,
    vocab: &Vocabulary,
    query_id: &str,
    doc_id: &str,
    query: &[TermId],
    doc: &[TermId],
) -> InspectDump {
    let doc = &doc[..doc.len().min(ranker.config.max_doc_terms)];
    let mut g = Graph::new();
    let bound = ranker.bind(&mut g);
    let mut views = Vec::new();
    let qe = ranker.embed(&mut g, res, query);
    let de = ranker.embed(&mut g, res, doc);
    if ranker.architecture().uses_encoder() {
        let cq = ranker.encode(&mut g, &bound, qe, None);
        let cd = ranker.encode(&mut g, &bound, de, None);
        let a = g.cosine_similarity(cq, cd);
        views.push(ViewMatrix { view: "context".into(), values: rows(&g.array(a)) });
    }
    let b = g.cosine_similarity(qe, de);
    views.push(ViewMatrix { view: "embedding".into(), values: rows(&g.array(b)) });
    views.push(ViewMatrix { view: "exact".into(), values: rows(&exact_match_matrix(query, doc)) });
    let encodings = match ranker.doc_aware(&mut g, &bound, res, query, doc, None) {
        Some(t) => rows(&g.array(t)),
        None => Vec::new(),
    };
    InspectDump {
        architecture: ranker.architecture().name().to_string(),
        query_id: query_id.to_string(),
        doc_id: doc_id.to_string(),
        query_terms: names(vocab, query),
        doc_terms: names(vocab, doc),
        views,
        encodings,
    }
}
