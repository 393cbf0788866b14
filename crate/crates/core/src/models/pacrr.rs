//! PACRR similarity matrix, convolution and row-wise pooling.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Array, Graph, ParamId, ParameterSet, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PacrrConfig {
    /// Maximum q-terms; longer queries are truncated, shorter ones padded.
    pub l_q: usize,
    /// Document terms kept.
    pub l_d: usize,
    /// Largest kernel size; kernels are `n x n` for `n = 2..=l_g`.
    pub l_g: usize,
    pub filters: usize,
    /// Row-wise k-max.
    pub k: usize,
    pub dense: Vec<usize>,
}

impl Default for PacrrConfig {
    fn default() -> Self {
        Self {
            l_q: 30,
            l_d: 300,
            l_g: 3,
            filters: 16,
            k: 2,
            dense: vec![32, 32],
        }
    }
}

impl PacrrConfig {
    pub fn validate(&self) -> Result<()> {
        if self.l_g < 2 || self.l_g > self.l_q {
            return Err(Error::Config(format!("PACRR needs 2 <= l_g <= l_q, got l_g={} l_q={}", self.l_g, self.l_q)));
        }
        if self.k == 0 || self.k > self.l_d {
            return Err(Error::Config(format!("PACRR needs 1 <= k <= l_d, got k={} l_d={}", self.k, self.l_d)));
        }
        if self.filters == 0 {
            return Err(Error::Config("PACRR needs at least one filter".into()));
        }
        Ok(())
    }

    /// Width of each document-aware row: `l_g * k` pooled values plus the IDF.
    pub fn row_width(&self) -> usize {
        self.l_g * self.k + 1
    }
}

/// Kernels `[filters, n, n]` and biases `[filters]` for `n = 2..=l_g`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PacrrParams {
    pub convs: Vec<(ParamId, ParamId)>,
}

impl PacrrParams {
    pub fn init<R: Rng>(ps: &mut ParameterSet, prefix: &str, cfg: &PacrrConfig, rng: &mut R) -> Self {
        let convs = (2..=cfg.l_g)
            .map(|n| {
                let b = (6.0 / (2 * n * n) as f64).sqrt();
                let k = Array::new(
                    vec![cfg.filters, n, n],
                    (0..cfg.filters * n * n).map(|_| rng.random_range(-b..b)).collect(),
                );
                (
                    ps.insert(format!("{prefix}.conv{n}.w"), k),
                    ps.insert(format!("{prefix}.conv{n}.b"), Array::zeros(vec![cfg.filters])),
                )
            })
            .collect();
        Self { convs }
    }
}

/// Cosine matrix of the first `l_q` q-terms against the first `l_d`
/// d-terms, zero-padded to `[l_q, l_d]`.
pub fn pacrr_sim_matrix(g: &mut Graph, q_emb: Tensor, d_emb: Tensor, l_q: usize, l_d: usize) -> Tensor {
    let n = g.shape(q_emb)[0].min(l_q);
    let m = g.shape(d_emb)[0].min(l_d);
    let q = g.slice(q_emb, 0, 0, n);
    let d = g.slice(d_emb, 0, 0, m);
    let sim = g.cosine_similarity(q, d);
    g.pad2d(sim, 0, l_q - n, 0, l_d - m)
}

/// Softmax over the IDFs of the real q-terms, zeros for padded rows.
pub fn idf_softmax_column(idf: &[f64], l_q: usize) -> Array {
    let n = idf.len().min(l_q);
    let mx = idf[..n].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut col = vec![0.0; l_q];
    let mut z = 0.0;
    for i in 0..n {
        col[i] = (idf[i] - mx).exp();
        z += col[i];
    }
    for c in col.iter_mut().take(n) {
        *c /= z;
    }
    Array::new(vec![l_q, 1], col)
}

/// Document-aware rows `[l_q, l_g * k + 1]`: the raw matrix's row k-max,
/// then for each kernel size the row k-max of the filter-wise max of the
/// relu'd convolution, then the softmax-normalised IDF.
pub fn pacrr_rows(g: &mut Graph, bound: &[Tensor], p: &PacrrParams, sim: Tensor, idf: &[f64], cfg: &PacrrConfig) -> Tensor {
    let mut parts = vec![g.k_max_pool(sim, 1, cfg.k)];
    for (i, (w, b)) in p.convs.iter().enumerate() {
        let n = i + 2;
        let (lo, hi) = ((n - 1) / 2, n - 1 - (n - 1) / 2);
        let padded = g.pad2d(sim, lo, hi, lo, hi);
        let conv = g.conv2d(padded, bound[w.0], bound[b.0]);
        let act = g.relu(conv);
        let best = g.max_pool(act, 0);
        parts.push(g.k_max_pool(best, 1, cfg.k));
    }
    parts.push(g.constant(idf_softmax_column(idf, cfg.l_q)));
    g.concat(&parts, 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small() -> PacrrConfig {
        PacrrConfig { l_q: 3, l_d: 6, l_g: 2, filters: 1, k: 1, dense: vec![2] }
    }

    #[test]
    fn validation() {
        assert!(PacrrConfig::default().validate().is_ok());
        assert!(PacrrConfig { l_g: 1, ..small() }.validate().is_err());
        assert!(PacrrConfig { k: 7, ..small() }.validate().is_err());
        assert_eq!(PacrrConfig::default().row_width(), 7);
    }

    #[test]
    fn sim_matrix_layout() {
        let mut g = Graph::new();
        let q = g.constant(Array::from_rows(&[[1.0, 0.0], [0.0, 2.0]], 2));
        let d = g.constant(Array::from_rows(&[[3.0, 0.0], [1.0, 1.0], [0.0, 0.0]], 2));
        let s = pacrr_sim_matrix(&mut g, q, d, 3, 4);
        let v = g.array(s);
        assert_eq!(v.shape(), [3, 4]);
        assert!((v.row(0)[0] - 1.0).abs() < 1e-15);
        assert!((v.row(1)[1] - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(v.row(0)[2], 0.0);
        assert_eq!(v.row(0)[3], 0.0);
        assert_eq!(v.row(2), [0.0; 4]);
    }

    #[test]
    fn idf_column() {
        let c = idf_softmax_column(&[1.0, 1.0], 3);
        assert_eq!(c.data(), [0.5, 0.5, 0.0]);
    }

    #[test]
    fn k1_raw_signal_is_row_max_and_column_order_free() {
        let cfg = small();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut ps = ParameterSet::new();
        let p = PacrrParams::init(&mut ps, "p", &cfg, &mut rng);
        let rows = [[0.1, 0.9, -0.3, 0.2, 0.0, 0.4], [0.5, 0.5, 0.1, -1.0, 0.3, 0.2], [0.0; 6]];
        let perm = [3usize, 0, 5, 1, 4, 2];
        let permuted: Vec<Vec<f64>> = rows.iter().map(|r| perm.iter().map(|&j| r[j]).collect()).collect();
        let mut g = Graph::new();
        let bound = g.bind_all(&ps);
        let s = g.constant(Array::from_rows(&rows, 6));
        let sp = g.constant(Array::from_rows(&permuted, 6));
        let a = pacrr_rows(&mut g, &bound, &p, s, &[1.0, 2.0], &cfg);
        let b = pacrr_rows(&mut g, &bound, &p, sp, &[1.0, 2.0], &cfg);
        let (a, b) = (g.array(a), g.array(b));
        assert_eq!(a.shape(), [3, cfg.row_width()]);
        for i in 0..3 {
            let mx = rows[i].iter().copied().fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(a.row(i)[0], mx);
            assert_eq!(b.row(i)[0], a.row(i)[0]);
        }
    }
}
