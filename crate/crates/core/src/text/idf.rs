use super::{ProcessedDocument, TermId};
use crate::error::{Error, Result};

/// `ln(1 + (n - df + 0.5) / (df + 0.5))`, always positive.
pub fn bm25_idf(df: u64, n: u64) -> f64 {
    let (df, n) = (df as f64, n as f64);
    (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
}

/// Document frequencies and IDF per term id.
#[derive(Debug, Clone, PartialEq)]
pub struct IdfTable {
    df: Vec<u32>,
    idf: Vec<f64>,
    num_docs: u64,
}

impl IdfTable {
    pub fn from_df(df: Vec<u32>, num_docs: u64) -> Self {
        let idf = df.iter().map(|&d| bm25_idf(d as u64, num_docs)).collect();
        Self { df, idf, num_docs }
    }

    /// IDF of `t`; terms never seen in the corpus get the `df = 0` value.
    pub fn idf(&self, t: TermId) -> f64 {
        match self.idf.get(t.index()) {
            Some(&v) if !t.is_oov() => v,
            _ => bm25_idf(0, self.num_docs),
        }
    }

    pub fn df(&self, t: TermId) -> u32 {
        if t.is_oov() {
            return 0;
        }
        self.df.get(t.index()).copied().unwrap_or(0)
    }

    pub fn num_docs(&self) -> u64 {
        self.num_docs
    }

    pub fn num_terms(&self) -> usize {
        self.df.len()
    }

    pub fn dfs(&self) -> &[u32] {
        &self.df
    }
}

pub fn compute_idf<'a, I>(corpus: I, vocab_size: usize) -> Result<IdfTable>
where
    I: IntoIterator<Item = &'a ProcessedDocument>,
{
    let mut df = vec![0u32; vocab_size];
    let mut seen = vec![usize::MAX; vocab_size];
    let mut n = 0u64;
    for (i, doc) in corpus.into_iter().enumerate() {
        n += 1;
        for &t in &doc.terms {
            let k = t.index();
            if k >= vocab_size {
                return Err(Error::Contract(format!(
                    "document {} has term id {} outside vocabulary of {}",
                    doc.doc_id, t.0, vocab_size
                )));
            }
            if seen[k] != i {
                seen[k] = i;
                df[k] += 1;
            }
        }
    }
    if n == 0 {
        return Err(Error::Config("cannot compute IDF over an empty corpus".into()));
    }
    Ok(IdfTable::from_df(df, n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn doc(id: &str, terms: &[u32]) -> ProcessedDocument {
        ProcessedDocument {
            doc_id: id.into(),
            terms: terms.iter().map(|&t| TermId(t)).collect(),
        }
    }

    #[test]
    fn formula_values() {
        let corpus = [doc("1", &[0, 1]), doc("2", &[0]), doc("3", &[0, 0])];
        let t = compute_idf(&corpus, 2).unwrap();
        assert_abs_diff_eq!(t.idf(TermId(0)), (1.0f64 + 0.5 / 3.5).ln(), epsilon = 1e-15);
        assert_abs_diff_eq!(t.idf(TermId(0)), 0.1335, epsilon = 5e-5);
        assert_abs_diff_eq!(t.idf(TermId(1)), 0.9808, epsilon = 5e-5);
        assert_eq!(t.df(TermId(0)), 3);
        assert_eq!(t.num_docs(), 3);
    }

    #[test]
    fn empty_corpus_is_an_error() {
        assert!(matches!(compute_idf(&[], 0), Err(Error::Config(_))));
    }

    #[test]
    fn oov_gets_max_idf() {
        let t = compute_idf(&[doc("1", &[0])], 1).unwrap();
        assert!(t.idf(TermId::OOV) > t.idf(TermId(0)));
    }

    #[test]
    fn strictly_decreasing_in_df_on_random_corpus() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let corpus: Vec<_> = (0..100)
            .map(|i| {
                let len = rng.random_range(1..30);
                let terms: Vec<u32> = (0..len).map(|_| rng.random_range(0..60)).collect();
                doc(&i.to_string(), &terms)
            })
            .collect();
        let t = compute_idf(&corpus, 60).unwrap();
        // brute-force df recount
        for k in 0..60u32 {
            let df = corpus.iter().filter(|d| d.terms.contains(&TermId(k))).count() as u32;
            assert_eq!(t.df(TermId(k)), df);
        }
        for a in 0..60u32 {
            for b in 0..60u32 {
                let (da, db) = (t.df(TermId(a)), t.df(TermId(b)));
                if da < db {
                    assert!(t.idf(TermId(a)) > t.idf(TermId(b)));
                }
            }
        }
    }
}
