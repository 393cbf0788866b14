//! Bucketed cosine histograms and term gating.

use serde::{Deserialize, Serialize};

use crate::autodiff::{Array, Graph, Tensor};

/// Partition of `[-1, 1]` into half-open buckets `[e_k, e_{k+1})`, the last
/// one closed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Buckets {
    edges: Vec<f64>,
}

impl Buckets {
    pub fn equal_width(count: usize) -> Self {
        assert!(count >= 1);
        let edges = (0..=count).map(|k| -1.0 + 2.0 * k as f64 / count as f64).collect();
        Self { edges }
    }

    /// Explicit boundaries; must start at -1, end at 1 and increase strictly.
    pub fn from_edges(edges: Vec<f64>) -> Option<Self> {
        let ok = edges.len() >= 2
            && edges[0] == -1.0
            && *edges.last().unwrap() == 1.0
            && edges.windows(2).all(|w| w[0] < w[1]);
        ok.then_some(Self { edges })
    }

    pub fn len(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    /// Bucket index of `x`, clamped into `[-1, 1]` first.
    pub fn index(&self, x: f64) -> usize {
        let x = x.clamp(-1.0, 1.0);
        let interior = &self.edges[1..self.edges.len() - 1];
        interior.partition_point(|&e| e <= x)
    }
}

/// Cosine similarity, defined as 0 when either vector is zero.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na.sqrt() * nb.sqrt())
    }
}

/// Raw counts of d-term cosines to `q_vec` per bucket.
pub fn drmm_histogram(q_vec: &[f64], d_vecs: &[&[f64]], buckets: &Buckets) -> Vec<u32> {
    let mut h = vec![0u32; buckets.len()];
    for d in d_vecs {
        h[buckets.index(cosine(q_vec, d))] += 1;
    }
    h
}

/// `[n, buckets]` matrix of `ln(1 + count)` histograms, one row per q-term.
pub fn histogram_features(q_vecs: &[&[f64]], d_vecs: &[&[f64]], buckets: &Buckets) -> Array {
    let mut data = Vec::with_capacity(q_vecs.len() * buckets.len());
    for q in q_vecs {
        data.extend(drmm_histogram(q, d_vecs, buckets).iter().map(|&c| (c as f64).ln_1p()));
    }
    Array::new(vec![q_vecs.len(), buckets.len()], data)
}

/// Softmax over q-terms of `w_g . [e(q_i); idf(q_i)]`.
/// `q_emb` is `[n, d]`, `idf` is `[n]` and `w_g` is `[d + 1]`.
pub fn term_gate(g: &mut Graph, q_emb: Tensor, idf: &[f64], w_g: Tensor) -> Tensor {
    let n = g.shape(q_emb)[0];
    assert_eq!(idf.len(), n, "one IDF per q-term");
    let idf_col = g.constant(Array::new(vec![n, 1], idf.to_vec()));
    let feats = g.concat(&[q_emb, idf_col], 1);
    let logits = g.matvec(feats, w_g);
    g.softmax(logits, 0)
}
