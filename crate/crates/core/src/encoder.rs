//! Bidirectional LSTM term encoder with residual embedding addition:
//! `c(t_i) = [h_fwd(t_i) + e(t_i); h_bwd(t_i) + e(t_i)]`.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::autodiff::{Array, Graph, ParamId, ParameterSet, Tensor};

/// Gate blocks are laid out along the columns as input, forget, cell, output.
const GATES: usize = 4;

/// Parameter ids of one LSTM direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LstmParams {
    /// `[dim, 4 * dim]`
    pub w_x: ParamId,
    /// `[dim, 4 * dim]`
    pub w_h: ParamId,
    /// `[4 * dim]`
    pub b: ParamId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BiRnnParams {
    pub fwd: LstmParams,
    pub bwd: LstmParams,
    pub dim: usize,
}

/// Orthonormal `n x n` matrix by Gram-Schmidt on a Gaussian draw.
fn orthogonal<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    while rows.len() < n {
        let mut v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        for r in &rows {
            let d: f64 = v.iter().zip(r).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(r).for_each(|(a, b)| *a -= d * b);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            v.iter_mut().for_each(|x| *x /= norm);
            rows.push(v);
        }
    }
    rows.concat()
}

fn init_direction<R: Rng>(ps: &mut ParameterSet, prefix: &str, dim: usize, rng: &mut R) -> LstmParams {
    let bound = 1.0 / (dim as f64).sqrt();
    let w_x: Vec<f64> = (0..dim * GATES * dim).map(|_| rng.random_range(-bound..bound)).collect();
    let mut w_h = vec![0.0; dim * GATES * dim];
    for gate in 0..GATES {
        let q = orthogonal(rng, dim);
        for r in 0..dim {
            for c in 0..dim {
                w_h[r * GATES * dim + gate * dim + c] = q[r * dim + c];
            }
        }
    }
    let mut b = vec![0.0; GATES * dim];
    b[dim..2 * dim].iter_mut().for_each(|x| *x = 1.0);
    LstmParams {
        w_x: ps.insert(format!("{prefix}.w_x"), Array::new(vec![dim, GATES * dim], w_x)),
        w_h: ps.insert(format!("{prefix}.w_h"), Array::new(vec![dim, GATES * dim], w_h)),
        b: ps.insert(format!("{prefix}.b"), Array::vector(b)),
    }
}

impl BiRnnParams {
    /// Registers `{prefix}.fwd.*` and `{prefix}.bwd.*`: uniform input
    /// weights in `±1/sqrt(dim)`, orthogonal recurrent blocks, forget-gate
    /// bias 1 and other biases 0.
    pub fn init<R: Rng>(ps: &mut ParameterSet, prefix: &str, dim: usize, rng: &mut R) -> Self {
        assert!(dim > 0);
        let fwd = init_direction(ps, &format!("{prefix}.fwd"), dim, rng);
        let bwd = init_direction(ps, &format!("{prefix}.bwd"), dim, rng);
        Self { fwd, bwd, dim }
    }

    pub fn bind(&self, g: &mut Graph, ps: &ParameterSet) -> BoundBiRnn {
        let b = |g: &mut Graph, p: &LstmParams| BoundLstm {
            w_x: g.param(ps, p.w_x),
            w_h: g.param(ps, p.w_h),
            b: g.param(ps, p.b),
        };
        BoundBiRnn {
            fwd: b(g, &self.fwd),
            bwd: b(g, &self.bwd),
            dim: self.dim,
        }
    }
}

/// Encoder weights bound into a graph.
#[derive(Debug, Clone, Copy)]
pub struct BoundLstm {
    pub w_x: Tensor,
    pub w_h: Tensor,
    pub b: Tensor,
}

#[derive(Debug, Clone, Copy)]
pub struct BoundBiRnn {
    pub fwd: BoundLstm,
    pub bwd: BoundLstm,
    pub dim: usize,
}

/// Hidden states of one direction as `[m, dim]`, in position order.
fn run_direction(g: &mut Graph, emb: Tensor, p: &BoundLstm, dim: usize, reverse: bool) -> Tensor {
    let m = g.shape(emb)[0];
    let xw = g.matmul(emb, p.w_x);
    let xw = g.add_bias(xw, p.b);
    let mut h = g.constant(Array::zeros(vec![1, dim]));
    let mut c = g.constant(Array::zeros(vec![1, dim]));
    let mut out = vec![h; m];
    let order: Vec<usize> = if reverse { (0..m).rev().collect() } else { (0..m).collect() };
    for t in order {
        let x_t = g.slice(xw, 0, t, 1);
        let rec = g.matmul(h, p.w_h);
        let z = g.add(x_t, rec);
        let i = g.slice(z, 1, 0, dim);
        let f = g.slice(z, 1, dim, dim);
        let gg = g.slice(z, 1, 2 * dim, dim);
        let o = g.slice(z, 1, 3 * dim, dim);
        let i = g.sigmoid(i);
        let f = g.sigmoid(f);
        let gg = g.tanh(gg);
        let o = g.sigmoid(o);
        let fc = g.mul(f, c);
        let ig = g.mul(i, gg);
        c = g.add(fc, ig);
        let tc = g.tanh(c);
        h = g.mul(o, tc);
        out[t] = h;
    }
    g.concat(&out, 0)
}

/// Inverted-dropout mask applied to the hidden states during training.
pub struct Dropout<'a, R: Rng> {
    pub rate: f64,
    pub rng: &'a mut R,
}

/// Encodes `emb` (`[m, dim]`, `m >= 1`) to `[m, 2 * dim]`.
///
/// Panics when `emb` is empty or its width differs from the hidden size,
/// since the residual addition needs equal widths.
pub fn encode_sequence<R: Rng>(g: &mut Graph, emb: Tensor, p: &BoundBiRnn, dropout: Option<Dropout<'_, R>>) -> Tensor {
    let s = g.shape(emb).to_vec();
    assert!(s.len() == 2 && s[0] >= 1, "encode_sequence needs a nonempty [m, dim] sequence, got {s:?}");
    assert_eq!(s[1], p.dim, "embedding width {} differs from encoder hidden size {}", s[1], p.dim);
    let mut hf = run_direction(g, emb, &p.fwd, p.dim, false);
    let mut hb = run_direction(g, emb, &p.bwd, p.dim, true);
    if let Some(d) = dropout {
        if d.rate > 0.0 {
            let keep = 1.0 - d.rate;
            let mut mask = |g: &mut Graph, h: Tensor| {
                let data = (0..s[0] * s[1])
                    .map(|_| if d.rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 })
                    .collect();
                let m = g.constant(Array::new(s.clone(), data));
                g.mul(h, m)
            };
            hf = mask(g, hf);
            hb = mask(g, hb);
        }
    }
    let left = g.add(hf, emb);
    let right = g.add(hb, emb);
    g.concat(&[left, right], 1)
}

/// Convenience wrapper without dropout.
pub fn encode(g: &mut Graph, emb: Tensor, p: &BoundBiRnn) -> Tensor {
    encode_sequence::<rand_chacha::ChaCha8Rng>(g, emb, p, None)
}
