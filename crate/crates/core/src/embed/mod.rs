//! Pre-trained word embeddings aligned to the index vocabulary, and the
//! term views used by the multi-view models.

mod w2v;

use std::path::Path;

pub use w2v::{
    parse_binary, parse_text, read_word_vectors, save_word_vectors, write_binary, write_text, EmbeddingFormat,
    WordVectors,
};

use crate::autodiff::Array;
use crate::error::{Error, Result};
use crate::text::{Analyzer, TermId, Vocabulary};

/// One row per vocabulary term plus a fallback for terms without a vector.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    dim: usize,
    rows: Vec<f64>,
    present: Vec<bool>,
    oov: Vec<f64>,
}

impl EmbeddingMatrix {
    /// Aligns file vectors to `vocab`. File tokens are normalised with
    /// `analyzer`; the first file token mapping to a term wins. Terms with
    /// no vector, and the OOV sentinel, get the mean of all file vectors.
    pub fn align(wv: &WordVectors, vocab: &Vocabulary, analyzer: &Analyzer) -> Result<Self> {
        if wv.dim == 0 {
            return Err(Error::Config("embedding dimension must be positive".into()));
        }
        let dim = wv.dim;
        let mut oov = vec![0.0; dim];
        if !wv.tokens.is_empty() {
            for i in 0..wv.tokens.len() {
                for (o, &x) in oov.iter_mut().zip(wv.row(i)) {
                    *o += x as f64;
                }
            }
            let n = wv.tokens.len() as f64;
            oov.iter_mut().for_each(|o| *o /= n);
        }
        let mut rows = vec![0.0; vocab.len() * dim];
        let mut present = vec![false; vocab.len()];
        for (i, tok) in wv.tokens.iter().enumerate() {
            let Some(norm) = analyzer.normalize_token(tok) else { continue };
            let t = vocab.lookup(&norm);
            if t.is_oov() || present[t.index()] {
                continue;
            }
            present[t.index()] = true;
            for (r, &x) in rows[t.index() * dim..(t.index() + 1) * dim].iter_mut().zip(wv.row(i)) {
                *r = x as f64;
            }
        }
        for (k, p) in present.iter().enumerate() {
            if !p {
                rows[k * dim..(k + 1) * dim].copy_from_slice(&oov);
            }
        }
        Ok(Self { dim, rows, present, oov })
    }

    /// Builds directly from rows (one per term id) and an OOV vector.
    pub fn from_rows(dim: usize, rows: Vec<f64>, oov: Vec<f64>) -> Self {
        assert!(dim > 0 && rows.len().is_multiple_of(dim) && oov.len() == dim);
        let n = rows.len() / dim;
        Self { dim, rows, present: vec![true; n], oov }
    }

    pub fn load(path: impl AsRef<Path>, format: EmbeddingFormat, vocab: &Vocabulary, analyzer: &Analyzer) -> Result<Self> {
        Self::align(&read_word_vectors(path, format)?, vocab, analyzer)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_terms(&self) -> usize {
        self.present.len()
    }

    pub fn vector(&self, t: TermId) -> &[f64] {
        if t.is_oov() || t.index() >= self.present.len() {
            &self.oov
        } else {
            &self.rows[t.index() * self.dim..(t.index() + 1) * self.dim]
        }
    }

    pub fn oov_vector(&self) -> &[f64] {
        &self.oov
    }

    /// Whether the file supplied a vector for `t`.
    pub fn has_vector(&self, t: TermId) -> bool {
        !t.is_oov() && self.present.get(t.index()).copied().unwrap_or(false)
    }

    pub fn coverage(&self) -> usize {
        self.present.iter().filter(|&&p| p).count()
    }

    /// Stacks the vectors of `terms` into a `[len, dim]` array.
    pub fn lookup_rows(&self, terms: &[TermId]) -> Array {
        let mut data = Vec::with_capacity(terms.len() * self.dim);
        for &t in terms {
            data.extend_from_slice(self.vector(t));
        }
        Array::new(vec![terms.len(), self.dim], data)
    }

    /// Full matrix as an array with the OOV vector appended as the last
    /// row, for fine-tuning. Row index of a term is [`Self::row_index`].
    pub fn to_table(&self) -> Array {
        let mut data = self.rows.clone();
        data.extend_from_slice(&self.oov);
        Array::new(vec![self.present.len() + 1, self.dim], data)
    }

    pub fn row_index(&self, t: TermId) -> usize {
        if t.is_oov() || t.index() >= self.present.len() {
            self.present.len()
        } else {
            t.index()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViewTag {
    ContextSensitive,
    ContextInsensitive,
    ExactMatch,
}

/// Per-position vectors of one view.
#[derive(Debug, Clone, PartialEq)]
pub struct TermView {
    pub tag: ViewTag,
    pub vectors: Vec<Vec<f64>>,
}

/// One-hot vectors over the local vocabulary of a query-document pair,
/// assigned in first-occurrence order (query first).
pub fn exact_match_vectors(query: &[TermId], doc: &[TermId]) -> (TermView, TermView) {
    let mut local: Vec<TermId> = Vec::new();
    for &t in query.iter().chain(doc) {
        if !local.contains(&t) {
            local.push(t);
        }
    }
    let one_hot = |t: &TermId| {
        let mut v = vec![0.0; local.len()];
        v[local.iter().position(|x| x == t).expect("term in local vocabulary")] = 1.0;
        v
    };
    (
        TermView { tag: ViewTag::ExactMatch, vectors: query.iter().map(one_hot).collect() },
        TermView { tag: ViewTag::ExactMatch, vectors: doc.iter().map(one_hot).collect() },
    )
}

/// Term-equality matrix `[n, m]`: 1 where `query[i] == doc[j]`, else 0.
/// Equal to the cosine matrix of [`exact_match_vectors`].
pub fn exact_match_matrix(query: &[TermId], doc: &[TermId]) -> Array {
    let mut data = Vec::with_capacity(query.len() * doc.len());
    for q in query {
        for d in doc {
            data.push(if q == d { 1.0 } else { 0.0 });
        }
    }
    Array::new(vec![query.len(), doc.len()], data)
}

/// Fixed-width exact-match encodings for summation with `width`-wide views.
/// Each distinct query term gets its own slot (wrapping modulo `width` when
/// there are more distinct terms than slots); document terms absent from
/// the query map to the zero vector.
pub fn hashed_exact_match(query: &[TermId], doc: &[TermId], width: usize) -> (Array, Array) {
    assert!(width > 0);
    let mut distinct: Vec<TermId> = Vec::new();
    for &t in query {
        if !distinct.contains(&t) {
            distinct.push(t);
        }
    }
    let encode = |terms: &[TermId]| {
        let mut data = vec![0.0; terms.len() * width];
        for (i, t) in terms.iter().enumerate() {
            if let Some(s) = distinct.iter().position(|x| x == t) {
                data[i * width + s % width] = 1.0;
            }
        }
        Array::new(vec![terms.len(), width], data)
    };
    (encode(query), encode(doc))
}
