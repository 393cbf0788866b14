//! Inverted index with a forward document store.
//!
//! Documents are numbered in ascending `doc_id` order, so posting lists
//! sorted by document number are also sorted by `doc_id` and ties broken by
//! document number follow the declared `doc_id` tie-break.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::text::{compute_idf, IdfTable, ProcessedDocument, PubDate, TermId, Vocabulary};

/// Provenance recorded in the persisted index header.
#[derive(Debug, Clone, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct IndexMeta {
    pub stemmer: String,
    pub stopword_hash: String,
    pub corpus_hash: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Posting {
    pub doc: u32,
    pub tf: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoredDocument {
    pub doc_id: String,
    pub terms: Vec<TermId>,
    pub date: Option<PubDate>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvertedIndex {
    pub(crate) meta: IndexMeta,
    pub(crate) vocab: Vocabulary,
    pub(crate) docs: Vec<StoredDocument>,
    pub(crate) postings: Vec<Vec<Posting>>,
    pub(crate) idf: IdfTable,
    pub(crate) avg_doc_length: f64,
}

impl InvertedIndex {
    /// Builds from analysed documents. `dates`, when given, is parallel to `docs`.
    pub fn build(
        docs: Vec<ProcessedDocument>,
        dates: Option<Vec<Option<PubDate>>>,
        vocab: Vocabulary,
        meta: IndexMeta,
    ) -> Result<Self> {
        if docs.is_empty() {
            return Err(Error::Config("cannot index an empty corpus".into()));
        }
        let dates = dates.unwrap_or_else(|| vec![None; docs.len()]);
        if dates.len() != docs.len() {
            return Err(Error::Contract("dates and documents differ in length".into()));
        }
        let mut seen = HashSet::new();
        for d in &docs {
            if !seen.insert(d.doc_id.as_str()) {
                return Err(Error::Ingest(format!("duplicate doc_id {}", d.doc_id)));
            }
            if d.terms.is_empty() {
                return Err(Error::Ingest(format!("document {} has no terms", d.doc_id)));
            }
            if let Some(t) = d.terms.iter().find(|t| t.index() >= vocab.len()) {
                return Err(Error::Contract(format!(
                    "document {} has term id {} outside the vocabulary",
                    d.doc_id, t.0
                )));
            }
        }
        let mut stored: Vec<StoredDocument> = docs
            .into_iter()
            .zip(dates)
            .map(|(d, date)| StoredDocument {
                doc_id: d.doc_id,
                terms: d.terms,
                date,
            })
            .collect();
        stored.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
        Self::from_parts(meta, vocab, stored)
    }

    /// Derives postings, IDF and average length from the forward store,
    /// which must already be sorted by `doc_id`.
    pub(crate) fn from_parts(meta: IndexMeta, vocab: Vocabulary, docs: Vec<StoredDocument>) -> Result<Self> {
        let mut postings: Vec<Vec<Posting>> = vec![Vec::new(); vocab.len()];
        let mut counts: Vec<u32> = vec![0; vocab.len()];
        let mut touched = Vec::new();
        let mut total = 0u64;
        for (n, d) in docs.iter().enumerate() {
            for &t in &d.terms {
                let k = t.index();
                if counts[k] == 0 {
                    touched.push(k);
                }
                counts[k] += 1;
            }
            touched.sort_unstable();
            for &k in &touched {
                postings[k].push(Posting { doc: n as u32, tf: counts[k] });
                counts[k] = 0;
            }
            touched.clear();
            total += d.terms.len() as u64;
        }
        let df: Vec<u32> = postings.iter().map(|p| p.len() as u32).collect();
        let idf = IdfTable::from_df(df, docs.len() as u64);
        let avg_doc_length = total as f64 / docs.len() as f64;
        Ok(Self {
            meta,
            vocab,
            docs,
            postings,
            idf,
            avg_doc_length,
        })
    }

    pub fn meta(&self) -> &IndexMeta {
        &self.meta
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn idf(&self) -> &IdfTable {
        &self.idf
    }

    pub fn num_docs(&self) -> usize {
        self.docs.len()
    }

    pub fn avg_doc_length(&self) -> f64 {
        self.avg_doc_length
    }

    pub fn postings(&self, t: TermId) -> &[Posting] {
        if t.is_oov() {
            return &[];
        }
        self.postings.get(t.index()).map_or(&[], Vec::as_slice)
    }

    /// Document by internal number (position in `doc_id` order).
    pub fn doc(&self, n: usize) -> &StoredDocument {
        &self.docs[n]
    }

    pub fn docs(&self) -> &[StoredDocument] {
        &self.docs
    }

    pub fn doc_number(&self, doc_id: &str) -> Option<usize> {
        self.docs.binary_search_by(|d| d.doc_id.as_str().cmp(doc_id)).ok()
    }

    pub fn doc_length(&self, n: usize) -> usize {
        self.docs[n].terms.len()
    }

    /// Looks up a document by id, failing with a lookup error.
    pub fn document(&self, doc_id: &str) -> Result<&StoredDocument> {
        self.doc_number(doc_id)
            .map(|n| &self.docs[n])
            .ok_or_else(|| Error::Lookup(format!("unknown doc_id {doc_id}")))
    }
}

/// Convenience wrapper computing IDF directly, for callers that do not need
/// the index.
pub fn corpus_idf(docs: &[ProcessedDocument], vocab: &Vocabulary) -> Result<IdfTable> {
    compute_idf(docs, vocab.len())
}
