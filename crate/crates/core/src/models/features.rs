use serde::{Deserialize, Serialize};

use crate::text::{IdfTable, TermId};

/// Hand-crafted features combined linearly with the neural score.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ExtraFeatures {
    pub bm25_z: f64,
    pub exact_overlap: f64,
    pub idf_weighted_overlap: f64,
    pub bigram_overlap: f64,
}

impl ExtraFeatures {
    pub fn to_vec(&self) -> Vec<f64> {
        vec![self.bm25_z, self.exact_overlap, self.idf_weighted_overlap, self.bigram_overlap]
    }
}

/// Mean and population standard deviation of one query's candidate BM25 scores.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreStats {
    pub mean: f64,
    pub std: f64,
}

impl ScoreStats {
    pub fn from_scores(scores: &[f64]) -> Self {
        assert!(!scores.is_empty(), "z-scores need at least one candidate");
        let n = scores.len() as f64;
        let mean = scores.iter().sum::<f64>() / n;
        let var = scores.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n;
        Self { mean, std: var.sqrt() }
    }

    /// `(x - mean) / std`, or 0 when the scores do not vary.
    pub fn z(&self, x: f64) -> f64 {
        if self.std > 0.0 {
            (x - self.mean) / self.std
        } else {
            0.0
        }
    }
}

pub fn compute_extra_features(query: &[TermId], doc: &[TermId], bm25: f64, stats: &ScoreStats, idf: &IdfTable) -> ExtraFeatures {
    let n = query.len();
    let in_doc = |t: &TermId| doc.contains(t);
    let matched = query.iter().filter(|t| in_doc(t)).count();
    let idf_all: f64 = query.iter().map(|&t| idf.idf(t)).sum();
    let idf_hit: f64 = query.iter().filter(|t| in_doc(t)).map(|&t| idf.idf(t)).sum();
    let bigram_overlap = if n < 2 {
        0.0
    } else {
        let hits = query
            .windows(2)
            .filter(|w| doc.windows(2).any(|d| d[0] == w[0] && d[1] == w[1]))
            .count();
        hits as f64 / (n - 1) as f64
    };
    ExtraFeatures {
        bm25_z: stats.z(bm25),
        exact_overlap: if n == 0 { 0.0 } else { matched as f64 / n as f64 },
        idf_weighted_overlap: if idf_all > 0.0 { idf_hit / idf_all } else { 0.0 },
        bigram_overlap,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn t(xs: &[u32]) -> Vec<TermId> {
        xs.iter().map(|&x| TermId(x)).collect()
    }

    fn idf() -> IdfTable {
        IdfTable::from_df(vec![1, 2, 3, 1, 5, 2, 1, 1], 10)
    }

    #[test]
    fn full_match() {
        let f = compute_extra_features(&t(&[0, 1]), &t(&[1, 5, 0]), 3.0, &ScoreStats::from_scores(&[3.0]), &idf());
        assert_eq!(f.exact_overlap, 1.0);
        assert_eq!(f.idf_weighted_overlap, 1.0);
        assert_eq!(f.bm25_z, 0.0);
    }

    #[test]
    fn bigram_half() {
        // query a b c, doc has "a b" adjacent but never "b c"
        let f = compute_extra_features(&t(&[0, 1, 2]), &t(&[4, 0, 1, 5, 2]), 0.0, &ScoreStats::from_scores(&[0.0, 1.0]), &idf());
        assert_eq!(f.bigram_overlap, 0.5);
        let single = compute_extra_features(&t(&[0]), &t(&[0]), 0.0, &ScoreStats::from_scores(&[0.0]), &idf());
        assert_eq!(single.bigram_overlap, 0.0);
    }

    #[test]
    fn z_score() {
        let s = ScoreStats::from_scores(&[1.0, 3.0]);
        assert_eq!(s.z(3.0), 1.0);
        assert_eq!(s.z(1.0), -1.0);
    }

    #[test]
    fn bigram_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..200 {
            let q = t(&(0..rng.random_range(1..6)).map(|_| rng.random_range(0..6)).collect::<Vec<_>>());
            let d = t(&(0..rng.random_range(1..20)).map(|_| rng.random_range(0..6)).collect::<Vec<_>>());
            let f = compute_extra_features(&q, &d, 0.0, &ScoreStats::from_scores(&[0.0]), &idf());
            let mut hits = 0;
            for i in 0..q.len().saturating_sub(1) {
                let mut found = false;
                for j in 0..d.len().saturating_sub(1) {
                    if d[j] == q[i] && d[j + 1] == q[i + 1] {
                        found = true;
                    }
                }
                hits += found as usize;
            }
            let want = if q.len() < 2 { 0.0 } else { hits as f64 / (q.len() - 1) as f64 };
            assert_eq!(f.bigram_overlap, want);
            for v in [f.exact_overlap, f.idf_weighted_overlap, f.bigram_overlap] {
                assert!((0.0..=1.0).contains(&v));
            }
        }
    }
}
