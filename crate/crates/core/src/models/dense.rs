use rand::Rng;

use crate::autodiff::{Array, Graph, ParamId, ParameterSet, Tensor};

/// Stack of dense layers: relu after every hidden layer, linear output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mlp {
    pub layers: Vec<(ParamId, ParamId)>,
    pub input: usize,
}

/// Glorot-uniform `[fan_in, fan_out]` matrix.
pub(crate) fn glorot<R: Rng>(rng: &mut R, fan_in: usize, fan_out: usize) -> Array {
    let b = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Array::new(
        vec![fan_in, fan_out],
        (0..fan_in * fan_out).map(|_| rng.random_range(-b..b)).collect(),
    )
}

impl Mlp {
    /// `input -> hidden[0] -> ... -> output`.
    pub fn init<R: Rng>(ps: &mut ParameterSet, prefix: &str, input: usize, hidden: &[usize], output: usize, rng: &mut R) -> Self {
        let mut layers = Vec::new();
        let mut fan_in = input;
        for (i, &h) in hidden.iter().chain(std::iter::once(&output)).enumerate() {
            let w = ps.insert(format!("{prefix}.{i}.w"), glorot(rng, fan_in, h));
            let b = ps.insert(format!("{prefix}.{i}.b"), Array::zeros(vec![h]));
            layers.push((w, b));
            fan_in = h;
        }
        Self { layers, input }
    }

    /// Applies the stack to every row of `x` (`[n, input]` -> `[n, output]`).
    pub fn forward(&self, g: &mut Graph, bound: &[Tensor], x: Tensor) -> Tensor {
        let mut h = x;
        let last = self.layers.len() - 1;
        for (i, (w, b)) in self.layers.iter().enumerate() {
            let z = g.matmul(h, bound[w.0]);
            h = g.add_bias(z, bound[b.0]);
            if i < last {
                h = g.relu(h);
            }
        }
        h
    }

    /// Row-wise scalar output flattened to `[n]`. The output width must be 1.
    pub fn score_rows(&self, g: &mut Graph, bound: &[Tensor], x: Tensor) -> Tensor {
        let n = g.shape(x)[0];
        let out = self.forward(g, bound, x);
        assert_eq!(g.shape(out)[1], 1, "score_rows needs a scalar head");
        g.reshape(out, vec![n])
    }
}
