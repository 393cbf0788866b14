//! Tokenization, stopword removal, stemming, vocabulary and IDF.

mod corpus;
mod idf;
mod stem;
mod vocab;

use std::collections::HashSet;
use std::path::Path;

use sha2::{Digest, Sha256};

pub use corpus::{read_corpus, read_queries, PubDate, RawDocument, RawQuery};
pub use idf::{bm25_idf, compute_idf, IdfTable};
pub use stem::{IdentityStemmer, PorterStemmer, Stemmer};
pub use vocab::{build_vocabulary, TermId, Vocabulary};

use crate::error::{Error, Result};

const ENGLISH_STOPWORDS: &str = include_str!("stopwords_en.txt");

/// Fixed stopword list with a content hash recorded in index metadata.
#[derive(Debug, Clone)]
pub struct Stopwords {
    words: HashSet<String>,
    hash: String,
}

impl Stopwords {
    /// The English list shipped with the crate.
    pub fn english() -> Self {
        Self::parse(ENGLISH_STOPWORDS)
    }

    pub fn empty() -> Self {
        Self::parse("")
    }

    /// One token per line; blank lines and surrounding whitespace ignored.
    pub fn parse(text: &str) -> Self {
        let words: HashSet<String> = text
            .lines()
            .map(|l| l.trim().to_lowercase())
            .filter(|l| !l.is_empty())
            .collect();
        let mut sorted: Vec<&str> = words.iter().map(String::as_str).collect();
        sorted.sort_unstable();
        let hash = hex_sha256(sorted.join("\n").as_bytes());
        Self { words, hash }
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Ok(Self::parse(&text))
    }

    pub fn contains(&self, w: &str) -> bool {
        self.words.contains(w)
    }

    /// SHA-256 over the sorted, newline-joined list.
    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Lowercase hex SHA-256.
pub fn hex_sha256(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Lowercases, splits on non-alphanumeric characters, drops stopwords and
/// stems. Single-character alphanumerics are kept. Stopwords are checked
/// both before and after stemming so the output is a fixed point.
pub fn tokenize_and_normalize(text: &str, stopwords: &Stopwords, stemmer: &dyn Stemmer) -> Vec<String> {
    let lower = text.to_lowercase();
    lower
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty() && !stopwords.contains(t))
        .map(|t| stemmer.stem(t))
        .filter(|t| !t.is_empty() && !stopwords.contains(t))
        .collect()
}

/// Stopwords plus stemmer, shared by corpus and query processing.
pub struct Analyzer {
    pub stopwords: Stopwords,
    pub stemmer: Box<dyn Stemmer + Send + Sync>,
}

impl std::fmt::Debug for Analyzer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Analyzer")
            .field("stemmer", &self.stemmer.id())
            .field("stopwords", &self.stopwords.hash())
            .finish()
    }
}

impl Default for Analyzer {
    fn default() -> Self {
        Self {
            stopwords: Stopwords::english(),
            stemmer: Box::new(PorterStemmer::new()),
        }
    }
}

impl Analyzer {
    pub fn new(stopwords: Stopwords, stemmer: Box<dyn Stemmer + Send + Sync>) -> Self {
        Self { stopwords, stemmer }
    }

    /// Builds an analyzer from a stemmer id (`porter` or `none`).
    pub fn from_ids(stemmer: &str, stopwords: Stopwords) -> Result<Self> {
        let stemmer: Box<dyn Stemmer + Send + Sync> = match stemmer {
            "porter" => Box::new(PorterStemmer::new()),
            "none" => Box::new(IdentityStemmer),
            other => return Err(Error::Config(format!("unknown stemmer {other:?}"))),
        };
        Ok(Self::new(stopwords, stemmer))
    }

    pub fn analyze(&self, text: &str) -> Vec<String> {
        tokenize_and_normalize(text, &self.stopwords, self.stemmer.as_ref())
    }

    /// Normalises a single surface token (used to align embedding files
    /// with the index vocabulary). Returns `None` for stopwords and tokens
    /// that split into several pieces.
    pub fn normalize_token(&self, token: &str) -> Option<String> {
        let mut toks = self.analyze(token);
        if toks.len() == 1 {
            toks.pop()
        } else {
            None
        }
    }
}

/// A document after analysis, with its terms mapped to vocabulary ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProcessedDocument {
    pub doc_id: String,
    pub terms: Vec<TermId>,
}

impl ProcessedDocument {
    /// Number of kept terms.
    pub fn raw_length(&self) -> usize {
        self.terms.len()
    }
}

/// A query after analysis. Terms are never empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProcessedQuery {
    pub query_id: String,
    pub terms: Vec<TermId>,
}

impl ProcessedQuery {
    /// Maps analysed tokens through `vocab`; unseen tokens become
    /// [`TermId::OOV`]. Errors if no tokens survive analysis.
    pub fn new(query_id: impl Into<String>, tokens: &[String], vocab: &Vocabulary) -> Result<Self> {
        let query_id = query_id.into();
        if tokens.is_empty() {
            return Err(Error::Ingest(format!(
                "query {query_id} has no terms after analysis"
            )));
        }
        Ok(Self {
            terms: tokens.iter().map(|t| vocab.lookup(t)).collect(),
            query_id,
        })
    }
}

/// Analyses raw documents and interns their tokens. Documents that end up
/// with no terms are skipped with a warning; their ids are returned.
pub fn process_corpus<'a, I>(docs: I, analyzer: &Analyzer, vocab: &mut Vocabulary) -> (Vec<ProcessedDocument>, Vec<String>)
where
    I: IntoIterator<Item = &'a RawDocument>,
{
    let mut out = Vec::new();
    let mut skipped = Vec::new();
    for d in docs {
        let toks = analyzer.analyze(&d.text);
        if toks.is_empty() {
            log::warn!("document {} is empty after analysis; excluded", d.id);
            skipped.push(d.id.clone());
            continue;
        }
        out.push(ProcessedDocument {
            doc_id: d.id.clone(),
            terms: toks.iter().map(|t| vocab.intern(t)).collect(),
        });
    }
    (out, skipped)
}
