//! Document re-ranking with BM25 candidate generation and neural
//! term-interaction models (DRMM, PACRR, PACRR-DRMM, ABEL-DRMM, POSIT-DRMM and
//! multi-view variants), plus training, TREC-style evaluation and
//! significance testing.

pub mod autodiff;
pub mod embed;
pub mod encoder;
mod binio;
pub mod error;
pub mod eval;
pub mod models;
pub mod retrieval;
pub mod synth;
pub mod text;
pub mod training;

pub use error::{Error, Result};
