//! Tape of dense tensor operations with reverse-mode gradients.
//!
//! Every operation appends a node holding its forward value; [`Graph::backward`]
//! walks the tape in reverse and accumulates gradients into every node that
//! depends on an input or a parameter. Nodes built only from constants carry
//! no gradient and are skipped.
//!
//! Shapes are explicit. The only implicit broadcast is scalar-with-tensor in
//! [`Graph::add`], [`Graph::sub`] and [`Graph::mul`].

use super::array::{numel, Array};
use super::params::{ParamGrads, ParamId, ParameterSet};

/// Handle to a node of a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Tensor(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Add(Tensor, Tensor),
    Sub(Tensor, Tensor),
    Mul(Tensor, Tensor),
    Scale(Tensor, f64),
    AddConst(Tensor),
    MatMul(Tensor, Tensor),
    MatVec(Tensor, Tensor),
    Transpose(Tensor),
    Concat {
        parts: Vec<Tensor>,
        axis: usize,
    },
    Stack(Vec<Tensor>),
    Slice {
        a: Tensor,
        axis: usize,
        start: usize,
    },
    Row(Tensor, usize),
    Reshape(Tensor),
    Sigmoid(Tensor),
    Tanh(Tensor),
    Relu(Tensor),
    Softmax {
        a: Tensor,
        axis: usize,
    },
    L2Normalize {
        a: Tensor,
        axis: usize,
        norms: Vec<f64>,
    },
    Dot(Tensor, Tensor),
    Sum(Tensor),
    Mean(Tensor),
    SumAxis {
        a: Tensor,
        axis: usize,
    },
    MeanAxis {
        a: Tensor,
        axis: usize,
    },
    /// `picked` holds source positions along `axis`, laid out `[outer, k, inner]`.
    Select {
        a: Tensor,
        axis: usize,
        picked: Vec<usize>,
        k: usize,
        keep_axis: bool,
    },
    Conv2d {
        input: Tensor,
        kernels: Tensor,
        bias: Tensor,
    },
    Pad2d {
        a: Tensor,
        top: usize,
        left: usize,
    },
    AddBias(Tensor, Tensor),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::Scale(..) => "scale",
            Op::AddConst(..) => "add_const",
            Op::MatMul(..) => "matmul",
            Op::MatVec(..) => "matvec",
            Op::Transpose(..) => "transpose",
            Op::Concat { .. } => "concat",
            Op::Stack(..) => "stack",
            Op::Slice { .. } => "slice",
            Op::Row(..) => "row",
            Op::Reshape(..) => "reshape",
            Op::Sigmoid(..) => "sigmoid",
            Op::Tanh(..) => "tanh",
            Op::Relu(..) => "relu",
            Op::Softmax { .. } => "softmax",
            Op::L2Normalize { .. } => "l2_normalize",
            Op::Dot(..) => "dot",
            Op::Sum(..) => "sum",
            Op::Mean(..) => "mean",
            Op::SumAxis { .. } => "sum_axis",
            Op::MeanAxis { .. } => "mean_axis",
            Op::Select { keep_axis: false, .. } => "max_pool",
            Op::Select { .. } => "k_max_pool",
            Op::Conv2d { .. } => "conv2d",
            Op::Pad2d { .. } => "pad2d",
            Op::AddBias(..) => "add_bias",
        }
    }
}

#[derive(Debug, Clone)]
struct Node {
    shape: Vec<usize>,
    value: Vec<f64>,
    op: Op,
    needs_grad: bool,
}

#[derive(Debug, Clone)]
struct ParamBinding {
    param: ParamId,
    tensor: Tensor,
    rows: Option<Vec<usize>>,
}

/// Computation tape. One graph per training example or scoring call.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    grads: Vec<Option<Vec<f64>>>,
    bindings: Vec<ParamBinding>,
}

/// Splits `shape` around `axis` into (outer, axis length, inner).
fn layout(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    assert!(axis < shape.len(), "axis {axis} out of range for {shape:?}");
    let outer = numel(&shape[..axis]);
    let inner = numel(&shape[axis + 1..]);
    (outer, shape[axis], inner)
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Distance of the recorded values from the nearest switch point of a
    /// non-smooth op (relu input from 0, gaps between consecutive top
    /// values of a max or k-max selection), over ops whose input depends on
    /// a gradient-tracked leaf. Exact ties and exact zeros are skipped: they
    /// arise from padding or repeated inputs that move together. Finite
    /// differences with step `h` are only meaningful when this exceeds the
    /// change `h` induces in those values.
    pub fn kink_margin(&self) -> f64 {
        let mut margin = f64::INFINITY;
        for node in &self.nodes {
            match &node.op {
                Op::Relu(a) if self.nodes[a.0].needs_grad => {
                    for &x in &self.nodes[a.0].value {
                        if x != 0.0 {
                            margin = margin.min(x.abs());
                        }
                    }
                }
                Op::Select { a, axis, k, .. } if self.nodes[a.0].needs_grad => {
                    let src = &self.nodes[a.0];
                    let (outer, n, inner) = layout(&src.shape, *axis);
                    let mut col = Vec::with_capacity(n);
                    for o in 0..outer {
                        for r in 0..inner {
                            col.clear();
                            col.extend((0..n).map(|i| src.value[o * n * inner + i * inner + r]));
                            col.sort_by(|x, y| y.total_cmp(x));
                            for j in 0..(*k).min(n - 1) {
                                let gap = col[j] - col[j + 1];
                                if gap != 0.0 {
                                    margin = margin.min(gap);
                                }
                            }
                        }
                    }
                }
                _ => {}
            }
        }
        margin
    }

    fn push(&mut self, shape: Vec<usize>, value: Vec<f64>, op: Op, needs_grad: bool) -> Tensor {
        debug_assert_eq!(numel(&shape), value.len());
        self.nodes.push(Node {
            shape,
            value,
            op,
            needs_grad,
        });
        Tensor(self.nodes.len() - 1)
    }

    fn node(&self, t: Tensor) -> &Node {
        &self.nodes[t.0]
    }

    fn ng(&self, ts: &[Tensor]) -> bool {
        ts.iter().any(|t| self.nodes[t.0].needs_grad)
    }

    pub fn value(&self, t: Tensor) -> &[f64] {
        &self.node(t).value
    }

    pub fn shape(&self, t: Tensor) -> &[usize] {
        &self.node(t).shape
    }

    pub fn array(&self, t: Tensor) -> Array {
        let n = self.node(t);
        Array::new(n.shape.clone(), n.value.clone())
    }

    /// Value of a one-element tensor.
    pub fn scalar(&self, t: Tensor) -> f64 {
        let v = self.value(t);
        assert_eq!(v.len(), 1, "scalar() on tensor of shape {:?}", self.shape(t));
        v[0]
    }

    /// Name of the operation that produced `t`.
    pub fn op_name(&self, t: Tensor) -> &'static str {
        self.node(t).op.name()
    }

    pub fn requires_grad(&self, t: Tensor) -> bool {
        self.node(t).needs_grad
    }

    // ---- leaves -------------------------------------------------------

    /// Constant leaf: never receives a gradient.
    pub fn constant(&mut self, a: Array) -> Tensor {
        let shape = a.shape().to_vec();
        self.push(shape, a.into_data(), Op::Leaf, false)
    }

    pub fn constant_scalar(&mut self, v: f64) -> Tensor {
        self.constant(Array::scalar(v))
    }

    /// Differentiable leaf not tied to a parameter set.
    pub fn input(&mut self, a: Array) -> Tensor {
        let shape = a.shape().to_vec();
        self.push(shape, a.into_data(), Op::Leaf, true)
    }

    /// Leaf holding a copy of parameter `id`; its gradient is collected by
    /// [`Graph::accumulate_param_grads`].
    pub fn param(&mut self, params: &ParameterSet, id: ParamId) -> Tensor {
        let a = params.get(id);
        let t = self.push(a.shape().to_vec(), a.data().to_vec(), Op::Leaf, true);
        self.bindings.push(ParamBinding {
            param: id,
            tensor: t,
            rows: None,
        });
        t
    }

    /// Leaf holding selected rows of a matrix parameter; gradients scatter
    /// back to those rows.
    pub fn param_rows(&mut self, params: &ParameterSet, id: ParamId, rows: &[usize]) -> Tensor {
        let a = params.get(id);
        assert_eq!(a.shape().len(), 2, "param_rows needs a matrix parameter");
        let cols = a.shape()[1];
        let mut data = Vec::with_capacity(rows.len() * cols);
        for &r in rows {
            data.extend_from_slice(a.row(r));
        }
        let t = self.push(vec![rows.len(), cols], data, Op::Leaf, true);
        self.bindings.push(ParamBinding {
            param: id,
            tensor: t,
            rows: Some(rows.to_vec()),
        });
        t
    }

    /// Binds every parameter of the set, in id order.
    pub fn bind_all(&mut self, params: &ParameterSet) -> Vec<Tensor> {
        params.ids().map(|id| self.param(params, id)).collect()
    }

    // ---- elementwise --------------------------------------------------

    fn binary_shape(&self, a: Tensor, b: Tensor, what: &str) -> Vec<usize> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa == sb {
            sa.to_vec()
        } else if self.value(a).len() == 1 && sa.is_empty() {
            sb.to_vec()
        } else if self.value(b).len() == 1 && sb.is_empty() {
            sa.to_vec()
        } else {
            panic!("{what}: incompatible shapes {sa:?} and {sb:?}");
        }
    }

    fn zip_values(&self, a: Tensor, b: Tensor, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.len() == vb.len() {
            va.iter().zip(vb).map(|(x, y)| f(*x, *y)).collect()
        } else if va.len() == 1 {
            vb.iter().map(|y| f(va[0], *y)).collect()
        } else {
            va.iter().map(|x| f(*x, vb[0])).collect()
        }
    }

    pub fn add(&mut self, a: Tensor, b: Tensor) -> Tensor {
        let shape = self.binary_shape(a, b, "add");
        let v = self.zip_values(a, b, |x, y| x + y);
        let ng = self.ng(&[a, b]);
        self.push(shape, v, Op::Add(a, b), ng)
    }

    pub fn sub(&mut self, a: Tensor, b: Tensor) -> Tensor {
        let shape = self.binary_shape(a, b, "sub");
        let v = self.zip_values(a, b, |x, y| x - y);
        let ng = self.ng(&[a, b]);
        self.push(shape, v, Op::Sub(a, b), ng)
    }

    /// Hadamard product.
    pub fn mul(&mut self, a: Tensor, b: Tensor) -> Tensor {
        let shape = self.binary_shape(a, b, "mul");
        let v = self.zip_values(a, b, |x, y| x * y);
        let ng = self.ng(&[a, b]);
        self.push(shape, v, Op::Mul(a, b), ng)
    }

    pub fn scale(&mut self, a: Tensor, c: f64) -> Tensor {
        let v = self.value(a).iter().map(|x| x * c).collect();
        let shape = self.shape(a).to_vec();
        let ng = self.ng(&[a]);
        self.push(shape, v, Op::Scale(a, c), ng)
    }

    pub fn add_const(&mut self, a: Tensor, c: f64) -> Tensor {
        let v = self.value(a).iter().map(|x| x + c).collect();
        let shape = self.shape(a).to_vec();
        let ng = self.ng(&[a]);
        self.push(shape, v, Op::AddConst(a), ng)
    }

    fn unary(&mut self, a: Tensor, op: Op, f: impl Fn(f64) -> f64) -> Tensor {
        let v = self.value(a).iter().map(|x| f(*x)).collect();
        let shape = self.shape(a).to_vec();
        let ng = self.ng(&[a]);
        self.push(shape, v, op, ng)
    }

    pub fn sigmoid(&mut self, a: Tensor) -> Tensor {
        self.unary(a, Op::Sigmoid(a), sigmoid)
    }

    pub fn tanh(&mut self, a: Tensor) -> Tensor {
        self.unary(a, Op::Tanh(a), f64::tanh)
    }

    pub fn relu(&mut self, a: Tensor) -> Tensor {
        self.unary(a, Op::Relu(a), |x| if x > 0.0 { x } else { 0.0 })
    }

    // ---- linear algebra -----------------------------------------------

    /// `[n, k] x [k, m] -> [n, m]`.
    pub fn matmul(&mut self, a: Tensor, b: Tensor) -> Tensor {
        let (sa, sb) = (self.shape(a), self.shape(b));
        assert!(
            sa.len() == 2 && sb.len() == 2 && sa[1] == sb[0],
            "matmul: incompatible shapes {sa:?} and {sb:?}"
        );
        let (n, k, m) = (sa[0], sa[1], sb[1]);
        let (va, vb) = (self.value(a), self.value(b));
        let mut out = vec![0.0; n * m];
        for i in 0..n {
            let row = &mut out[i * m..(i + 1) * m];
            for p in 0..k {
                let x = va[i * k + p];
                if x == 0.0 {
                    continue;
                }
                let brow = &vb[p * m..(p + 1) * m];
                for (o, y) in row.iter_mut().zip(brow) {
                    *o += x * y;
                }
            }
        }
        let ng = self.ng(&[a, b]);
        self.push(vec![n, m], out, Op::MatMul(a, b), ng)
    }

    /// `[n, k] x [k] -> [n]`.
    pub fn matvec(&mut self, a: Tensor, x: Tensor) -> Tensor {
        let (sa, sx) = (self.shape(a), self.shape(x));
        assert!(
            sa.len() == 2 && sx.len() == 1 && sa[1] == sx[0],
            "matvec: incompatible shapes {sa:?} and {sx:?}"
        );
        let (n, k) = (sa[0], sa[1]);
        let (va, vx) = (self.value(a), self.value(x));
        let out = (0..n)
            .map(|i| {
                va[i * k..(i + 1) * k]
                    .iter()
                    .zip(vx)
                    .map(|(p, q)| p * q)
                    .sum()
            })
            .collect();
        let ng = self.ng(&[a, x]);
        self.push(vec![n], out, Op::MatVec(a, x), ng)
    }

    pub fn transpose(&mut self, a: Tensor) -> Tensor {
        let s = self.shape(a);
        assert_eq!(s.len(), 2, "transpose needs a matrix");
        let (n, m) = (s[0], s[1]);
        let va = self.value(a);
        let mut out = vec![0.0; n * m];
        for i in 0..n {
            for j in 0..m {
                out[j * n + i] = va[i * m + j];
            }
        }
        let ng = self.ng(&[a]);
        self.push(vec![m, n], out, Op::Transpose(a), ng)
    }

    /// Inner product of two equal-length vectors.
    pub fn dot(&mut self, a: Tensor, b: Tensor) -> Tensor {
        assert_eq!(self.shape(a).len(), 1, "dot needs vectors");
        assert_eq!(self.shape(a), self.shape(b), "dot: length mismatch");
        let v: f64 = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(x, y)| x * y)
            .sum();
        let ng = self.ng(&[a, b]);
        self.push(Vec::new(), vec![v], Op::Dot(a, b), ng)
    }

    /// Adds vector `bias` of length `m` to every row of `a` (`[n, m]`).
    pub fn add_bias(&mut self, a: Tensor, bias: Tensor) -> Tensor {
        let (sa, sb) = (self.shape(a), self.shape(bias));
        assert!(
            sa.len() == 2 && sb.len() == 1 && sa[1] == sb[0],
            "add_bias: incompatible shapes {sa:?} and {sb:?}"
        );
        let m = sa[1];
        let vb = self.value(bias);
        let v = self
            .value(a)
            .iter()
            .enumerate()
            .map(|(i, x)| x + vb[i % m])
            .collect();
        let shape = sa.to_vec();
        let ng = self.ng(&[a, bias]);
        self.push(shape, v, Op::AddBias(a, bias), ng)
    }

    // ---- structure ----------------------------------------------------

    /// Concatenates along `axis`; all other dimensions must agree.
    pub fn concat(&mut self, parts: &[Tensor], axis: usize) -> Tensor {
        assert!(!parts.is_empty(), "concat of nothing");
        let first = self.shape(parts[0]).to_vec();
        let mut shape = first.clone();
        shape[axis] = 0;
        for &p in parts {
            let s = self.shape(p);
            assert_eq!(s.len(), first.len(), "concat: rank mismatch");
            for (d, (x, y)) in s.iter().zip(&first).enumerate() {
                assert!(d == axis || x == y, "concat: shape mismatch {s:?} vs {first:?}");
            }
            shape[axis] += s[axis];
        }
        let (outer, _, inner) = layout(&shape, axis);
        let mut out = Vec::with_capacity(numel(&shape));
        for o in 0..outer {
            for &p in parts {
                let len = self.shape(p)[axis] * inner;
                out.extend_from_slice(&self.value(p)[o * len..(o + 1) * len]);
            }
        }
        let ng = self.ng(parts);
        self.push(
            shape,
            out,
            Op::Concat {
                parts: parts.to_vec(),
                axis,
            },
            ng,
        )
    }

    /// Stacks equal-shape tensors along a new leading axis.
    pub fn stack(&mut self, parts: &[Tensor]) -> Tensor {
        assert!(!parts.is_empty(), "stack of nothing");
        let inner = self.shape(parts[0]).to_vec();
        let mut out = Vec::with_capacity(parts.len() * numel(&inner));
        for &p in parts {
            assert_eq!(self.shape(p), inner.as_slice(), "stack: shape mismatch");
            out.extend_from_slice(self.value(p));
        }
        let mut shape = vec![parts.len()];
        shape.extend(inner);
        let ng = self.ng(parts);
        self.push(shape, out, Op::Stack(parts.to_vec()), ng)
    }

    /// Elements `start..start + len` along `axis`.
    pub fn slice(&mut self, a: Tensor, axis: usize, start: usize, len: usize) -> Tensor {
        let s = self.shape(a).to_vec();
        let (outer, n, inner) = layout(&s, axis);
        assert!(start + len <= n, "slice {start}+{len} out of range {n}");
        let va = self.value(a);
        let mut out = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = o * n * inner + start * inner;
            out.extend_from_slice(&va[base..base + len * inner]);
        }
        let mut shape = s;
        shape[axis] = len;
        let ng = self.ng(&[a]);
        self.push(shape, out, Op::Slice { a, axis, start }, ng)
    }

    /// Row `i` of a matrix as a vector.
    pub fn row(&mut self, a: Tensor, i: usize) -> Tensor {
        let s = self.shape(a);
        assert_eq!(s.len(), 2, "row needs a matrix");
        let m = s[1];
        assert!(i < s[0], "row {i} out of range");
        let v = self.value(a)[i * m..(i + 1) * m].to_vec();
        let ng = self.ng(&[a]);
        self.push(vec![m], v, Op::Row(a, i), ng)
    }

    pub fn reshape(&mut self, a: Tensor, shape: Vec<usize>) -> Tensor {
        assert_eq!(
            numel(&shape),
            self.value(a).len(),
            "reshape: element count mismatch"
        );
        let v = self.value(a).to_vec();
        let ng = self.ng(&[a]);
        self.push(shape, v, Op::Reshape(a), ng)
    }

    /// Zero-pads a matrix.
    pub fn pad2d(&mut self, a: Tensor, top: usize, bottom: usize, left: usize, right: usize) -> Tensor {
        let s = self.shape(a);
        assert_eq!(s.len(), 2, "pad2d needs a matrix");
        let (h, w) = (s[0], s[1]);
        let (nh, nw) = (h + top + bottom, w + left + right);
        let mut out = vec![0.0; nh * nw];
        let va = self.value(a);
        for i in 0..h {
            let dst = (i + top) * nw + left;
            out[dst..dst + w].copy_from_slice(&va[i * w..(i + 1) * w]);
        }
        let ng = self.ng(&[a]);
        self.push(vec![nh, nw], out, Op::Pad2d { a, top, left }, ng)
    }

    // ---- normalisation ------------------------------------------------

    /// Softmax along `axis`, computed with max subtraction.
    pub fn softmax(&mut self, a: Tensor, axis: usize) -> Tensor {
        let s = self.shape(a).to_vec();
        let (outer, n, inner) = layout(&s, axis);
        let va = self.value(a);
        let mut out = vec![0.0; va.len()];
        for o in 0..outer {
            for r in 0..inner {
                let idx = |i: usize| o * n * inner + i * inner + r;
                let mx = (0..n).map(|i| va[idx(i)]).fold(f64::NEG_INFINITY, f64::max);
                let mut z = 0.0;
                for i in 0..n {
                    let e = (va[idx(i)] - mx).exp();
                    out[idx(i)] = e;
                    z += e;
                }
                for i in 0..n {
                    out[idx(i)] /= z;
                }
            }
        }
        let ng = self.ng(&[a]);
        self.push(s, out, Op::Softmax { a, axis }, ng)
    }

    /// Scales every vector along `axis` to unit L2 norm. Zero vectors stay
    /// zero and pass no gradient.
    pub fn l2_normalize(&mut self, a: Tensor, axis: usize) -> Tensor {
        let s = self.shape(a).to_vec();
        let (outer, n, inner) = layout(&s, axis);
        let va = self.value(a);
        let mut out = vec![0.0; va.len()];
        let mut norms = Vec::with_capacity(outer * inner);
        for o in 0..outer {
            for r in 0..inner {
                let idx = |i: usize| o * n * inner + i * inner + r;
                let norm = (0..n).map(|i| va[idx(i)] * va[idx(i)]).sum::<f64>().sqrt();
                norms.push(norm);
                if norm > 0.0 {
                    for i in 0..n {
                        out[idx(i)] = va[idx(i)] / norm;
                    }
                }
            }
        }
        let ng = self.ng(&[a]);
        self.push(s, out, Op::L2Normalize { a, axis, norms }, ng)
    }

    /// Pairwise cosine similarities between the rows of `a` (`[n, d]`) and
    /// the rows of `b` (`[m, d]`), giving `[n, m]`. Zero rows give 0.
    pub fn cosine_similarity(&mut self, a: Tensor, b: Tensor) -> Tensor {
        let na = self.l2_normalize(a, 1);
        let nb = self.l2_normalize(b, 1);
        let nbt = self.transpose(nb);
        self.matmul(na, nbt)
    }

    // ---- reductions ---------------------------------------------------

    pub fn sum(&mut self, a: Tensor) -> Tensor {
        let v = self.value(a).iter().sum();
        let ng = self.ng(&[a]);
        self.push(Vec::new(), vec![v], Op::Sum(a), ng)
    }

    pub fn mean(&mut self, a: Tensor) -> Tensor {
        let va = self.value(a);
        assert!(!va.is_empty(), "mean of empty tensor");
        let v = va.iter().sum::<f64>() / va.len() as f64;
        let ng = self.ng(&[a]);
        self.push(Vec::new(), vec![v], Op::Mean(a), ng)
    }

    fn reduce_axis(&self, a: Tensor, axis: usize) -> (Vec<usize>, Vec<f64>) {
        let s = self.shape(a).to_vec();
        let (outer, n, inner) = layout(&s, axis);
        let va = self.value(a);
        let mut out = vec![0.0; outer * inner];
        for o in 0..outer {
            for i in 0..n {
                for r in 0..inner {
                    out[o * inner + r] += va[o * n * inner + i * inner + r];
                }
            }
        }
        let mut shape = s;
        shape.remove(axis);
        (shape, out)
    }

    pub fn sum_axis(&mut self, a: Tensor, axis: usize) -> Tensor {
        let (shape, out) = self.reduce_axis(a, axis);
        let ng = self.ng(&[a]);
        self.push(shape, out, Op::SumAxis { a, axis }, ng)
    }

    pub fn mean_axis(&mut self, a: Tensor, axis: usize) -> Tensor {
        let n = self.shape(a)[axis];
        assert!(n > 0, "mean over empty axis");
        let (shape, mut out) = self.reduce_axis(a, axis);
        for x in &mut out {
            *x /= n as f64;
        }
        let ng = self.ng(&[a]);
        self.push(shape, out, Op::MeanAxis { a, axis }, ng)
    }

    /// Keeps the `k` largest entries along `axis`, in descending order.
    /// Ties go to the earlier index. If `k` exceeds the axis length all
    /// entries are kept.
    pub fn k_max_pool(&mut self, a: Tensor, axis: usize, k: usize) -> Tensor {
        assert!(k >= 1, "k_max_pool needs k >= 1");
        let s = self.shape(a).to_vec();
        let (outer, n, inner) = layout(&s, axis);
        assert!(n > 0, "k_max_pool over empty axis");
        let k = k.min(n);
        let va = self.value(a);
        let mut out = vec![0.0; outer * k * inner];
        let mut picked = vec![0usize; outer * k * inner];
        let mut order: Vec<usize> = Vec::with_capacity(n);
        for o in 0..outer {
            for r in 0..inner {
                let idx = |i: usize| o * n * inner + i * inner + r;
                order.clear();
                order.extend(0..n);
                // stable sort keeps earlier indices first among equal values
                order.sort_by(|&x, &y| va[idx(y)].total_cmp(&va[idx(x)]));
                for (slot, &src) in order.iter().take(k).enumerate() {
                    let dst = o * k * inner + slot * inner + r;
                    out[dst] = va[idx(src)];
                    picked[dst] = src;
                }
            }
        }
        let mut shape = s;
        shape[axis] = k;
        let ng = self.ng(&[a]);
        self.push(
            shape,
            out,
            Op::Select {
                a,
                axis,
                picked,
                k,
                keep_axis: true,
            },
            ng,
        )
    }

    /// Maximum along `axis` (the axis is removed). Ties go to the earlier
    /// index.
    pub fn max_pool(&mut self, a: Tensor, axis: usize) -> Tensor {
        let s = self.shape(a).to_vec();
        let (outer, n, inner) = layout(&s, axis);
        assert!(n > 0, "max_pool over empty axis");
        let va = self.value(a);
        let mut out = vec![0.0; outer * inner];
        let mut picked = vec![0usize; outer * inner];
        for o in 0..outer {
            for r in 0..inner {
                let idx = |i: usize| o * n * inner + i * inner + r;
                let mut best = 0;
                for i in 1..n {
                    if va[idx(i)] > va[idx(best)] {
                        best = i;
                    }
                }
                out[o * inner + r] = va[idx(best)];
                picked[o * inner + r] = best;
            }
        }
        let mut shape = s;
        shape.remove(axis);
        let ng = self.ng(&[a]);
        self.push(
            shape,
            out,
            Op::Select {
                a,
                axis,
                picked,
                k: 1,
                keep_axis: false,
            },
            ng,
        )
    }

    // ---- convolution --------------------------------------------------

    /// Valid 2-d convolution (cross-correlation) of a `[h, w]` input with
    /// `[f, n, n]` kernels plus per-filter bias, giving `[f, h-n+1, w-n+1]`.
    pub fn conv2d(&mut self, input: Tensor, kernels: Tensor, bias: Tensor) -> Tensor {
        let si = self.shape(input).to_vec();
        let sk = self.shape(kernels).to_vec();
        assert_eq!(si.len(), 2, "conv2d input must be [h, w]");
        assert!(sk.len() == 3 && sk[1] == sk[2], "conv2d kernels must be [f, n, n]");
        assert_eq!(self.shape(bias), &[sk[0]], "conv2d bias must be [f]");
        let (h, w) = (si[0], si[1]);
        let (f, n) = (sk[0], sk[1]);
        assert!(n <= h && n <= w, "conv2d kernel larger than input");
        let (oh, ow) = (h - n + 1, w - n + 1);
        let (vx, vk, vb) = (self.value(input), self.value(kernels), self.value(bias));
        let mut out = vec![0.0; f * oh * ow];
        for fi in 0..f {
            let kern = &vk[fi * n * n..(fi + 1) * n * n];
            let plane = &mut out[fi * oh * ow..(fi + 1) * oh * ow];
            plane.iter_mut().for_each(|x| *x = vb[fi]);
            for p in 0..n {
                for q in 0..n {
                    let kv = kern[p * n + q];
                    for i in 0..oh {
                        let src = &vx[(i + p) * w + q..(i + p) * w + q + ow];
                        let dst = &mut plane[i * ow..(i + 1) * ow];
                        for (d, s) in dst.iter_mut().zip(src) {
                            *d += kv * s;
                        }
                    }
                }
            }
        }
        let ng = self.ng(&[input, kernels, bias]);
        self.push(
            vec![f, oh, ow],
            out,
            Op::Conv2d {
                input,
                kernels,
                bias,
            },
            ng,
        )
    }

    // ---- backward -----------------------------------------------------

    /// Reverse pass from a one-element `loss`. Panics if `loss` is not
    /// scalar. Gradients from earlier calls are discarded.
    pub fn backward(&mut self, loss: Tensor) {
        assert_eq!(
            self.value(loss).len(),
            1,
            "backward needs a scalar loss, got shape {:?}",
            self.shape(loss)
        );
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);
        for id in (0..=loss.0).rev() {
            let Some(g) = grads[id].take() else { continue };
            if self.nodes[id].needs_grad {
                self.propagate(id, &g, &mut grads);
            }
            grads[id] = Some(g);
        }
        self.grads = grads;
    }

    /// Gradient of the last backward pass w.r.t. `t`; zeros if `t` was not
    /// reached.
    pub fn grad(&self, t: Tensor) -> Array {
        let shape = self.shape(t).to_vec();
        match self.grads.get(t.0).and_then(Option::as_ref) {
            Some(g) => Array::new(shape, g.clone()),
            None => Array::zeros(shape),
        }
    }

    /// Adds the gradients of every bound parameter leaf into `out`.
    pub fn accumulate_param_grads(&self, out: &mut ParamGrads) {
        for b in &self.bindings {
            let Some(g) = self.grads.get(b.tensor.0).and_then(Option::as_ref) else {
                continue;
            };
            let dst = out.get_mut(b.param);
            match &b.rows {
                None => add_into(dst, g),
                Some(rows) => {
                    let cols = g.len() / rows.len().max(1);
                    for (i, &r) in rows.iter().enumerate() {
                        add_into(&mut dst[r * cols..(r + 1) * cols], &g[i * cols..(i + 1) * cols]);
                    }
                }
            }
        }
    }

    fn acc(&self, grads: &mut [Option<Vec<f64>>], t: Tensor) -> Option<usize> {
        if !self.nodes[t.0].needs_grad {
            return None;
        }
        if grads[t.0].is_none() {
            grads[t.0] = Some(vec![0.0; self.nodes[t.0].value.len()]);
        }
        Some(t.0)
    }

    /// Accumulates `d(out)/d(a) * g` for a binary elementwise op where `a`
    /// may be a broadcast scalar. `local` maps (element index) -> partial.
    fn acc_elementwise(
        &self,
        grads: &mut [Option<Vec<f64>>],
        a: Tensor,
        g: &[f64],
        local: impl Fn(usize) -> f64,
    ) {
        if let Some(ia) = self.acc(grads, a) {
            let dst = grads[ia].as_mut().unwrap();
            if dst.len() == g.len() {
                for (i, (d, gi)) in dst.iter_mut().zip(g).enumerate() {
                    *d += gi * local(i);
                }
            } else {
                dst[0] += g.iter().enumerate().map(|(i, gi)| gi * local(i)).sum::<f64>();
            }
        }
    }

    fn propagate(&self, id: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[id];
        let y = &node.value;
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                self.acc_elementwise(grads, *a, g, |_| 1.0);
                self.acc_elementwise(grads, *b, g, |_| 1.0);
            }
            Op::Sub(a, b) => {
                self.acc_elementwise(grads, *a, g, |_| 1.0);
                self.acc_elementwise(grads, *b, g, |_| -1.0);
            }
            Op::Mul(a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                let pick = |v: &[f64], i: usize| if v.len() == 1 { v[0] } else { v[i] };
                self.acc_elementwise(grads, *a, g, |i| pick(vb, i));
                self.acc_elementwise(grads, *b, g, |i| pick(va, i));
            }
            Op::Scale(a, c) => self.acc_elementwise(grads, *a, g, |_| *c),
            Op::AddConst(a) | Op::Reshape(a) => self.acc_elementwise(grads, *a, g, |_| 1.0),
            Op::Sigmoid(a) => self.acc_elementwise(grads, *a, g, |i| y[i] * (1.0 - y[i])),
            Op::Tanh(a) => self.acc_elementwise(grads, *a, g, |i| 1.0 - y[i] * y[i]),
            Op::Relu(a) => {
                let va = self.value(*a);
                self.acc_elementwise(grads, *a, g, |i| if va[i] > 0.0 { 1.0 } else { 0.0 });
            }
            Op::MatMul(a, b) => {
                let (sa, sb) = (self.shape(*a), self.shape(*b));
                let (n, k, m) = (sa[0], sa[1], sb[1]);
                let (va, vb) = (self.value(*a), self.value(*b));
                if let Some(ia) = self.acc(grads, *a) {
                    let da = grads[ia].as_mut().unwrap();
                    for i in 0..n {
                        let grow = &g[i * m..(i + 1) * m];
                        for p in 0..k {
                            let brow = &vb[p * m..(p + 1) * m];
                            da[i * k + p] += grow.iter().zip(brow).map(|(x, y)| x * y).sum::<f64>();
                        }
                    }
                }
                if let Some(ib) = self.acc(grads, *b) {
                    let db = grads[ib].as_mut().unwrap();
                    for i in 0..n {
                        let grow = &g[i * m..(i + 1) * m];
                        for p in 0..k {
                            let x = va[i * k + p];
                            if x == 0.0 {
                                continue;
                            }
                            for (d, gv) in db[p * m..(p + 1) * m].iter_mut().zip(grow) {
                                *d += x * gv;
                            }
                        }
                    }
                }
            }
            Op::MatVec(a, x) => {
                let sa = self.shape(*a);
                let (n, k) = (sa[0], sa[1]);
                let (va, vx) = (self.value(*a), self.value(*x));
                if let Some(ia) = self.acc(grads, *a) {
                    let da = grads[ia].as_mut().unwrap();
                    for i in 0..n {
                        for (d, xv) in da[i * k..(i + 1) * k].iter_mut().zip(vx) {
                            *d += g[i] * xv;
                        }
                    }
                }
                if let Some(ix) = self.acc(grads, *x) {
                    let dx = grads[ix].as_mut().unwrap();
                    for i in 0..n {
                        for (d, av) in dx.iter_mut().zip(&va[i * k..(i + 1) * k]) {
                            *d += g[i] * av;
                        }
                    }
                }
            }
            Op::Transpose(a) => {
                if let Some(ia) = self.acc(grads, *a) {
                    let s = self.shape(*a);
                    let (n, m) = (s[0], s[1]);
                    let da = grads[ia].as_mut().unwrap();
                    for i in 0..n {
                        for j in 0..m {
                            da[i * m + j] += g[j * n + i];
                        }
                    }
                }
            }
            Op::Dot(a, b) => {
                let (va, vb) = (self.value(*a), self.value(*b));
                self.acc_elementwise(grads, *a, &vec![g[0]; vb.len()], |i| vb[i]);
                self.acc_elementwise(grads, *b, &vec![g[0]; va.len()], |i| va[i]);
            }
            Op::AddBias(a, bias) => {
                self.acc_elementwise(grads, *a, g, |_| 1.0);
                if let Some(ib) = self.acc(grads, *bias) {
                    let db = grads[ib].as_mut().unwrap();
                    let m = db.len();
                    for (i, gv) in g.iter().enumerate() {
                        db[i % m] += gv;
                    }
                }
            }
            Op::Concat { parts, axis } => {
                let (outer, _, inner) = layout(&node.shape, *axis);
                let total = node.shape[*axis] * inner;
                let mut offset = 0;
                for &p in parts {
                    let len = self.shape(p)[*axis] * inner;
                    if let Some(ip) = self.acc(grads, p) {
                        let dp = grads[ip].as_mut().unwrap();
                        for o in 0..outer {
                            add_into(
                                &mut dp[o * len..(o + 1) * len],
                                &g[o * total + offset..o * total + offset + len],
                            );
                        }
                    }
                    offset += len;
                }
            }
            Op::Stack(parts) => {
                let len = numel(&node.shape[1..]);
                for (i, &p) in parts.iter().enumerate() {
                    if let Some(ip) = self.acc(grads, p) {
                        add_into(grads[ip].as_mut().unwrap(), &g[i * len..(i + 1) * len]);
                    }
                }
            }
            Op::Slice { a, axis, start } => {
                if let Some(ia) = self.acc(grads, *a) {
                    let sa = self.shape(*a);
                    let (outer, n, inner) = layout(sa, *axis);
                    let len = node.shape[*axis];
                    let da = grads[ia].as_mut().unwrap();
                    for o in 0..outer {
                        let base = o * n * inner + start * inner;
                        add_into(
                            &mut da[base..base + len * inner],
                            &g[o * len * inner..(o + 1) * len * inner],
                        );
                    }
                }
            }
            Op::Row(a, i) => {
                if let Some(ia) = self.acc(grads, *a) {
                    let m = g.len();
                    add_into(&mut grads[ia].as_mut().unwrap()[i * m..(i + 1) * m], g);
                }
            }
            Op::Pad2d { a, top, left } => {
                if let Some(ia) = self.acc(grads, *a) {
                    let s = self.shape(*a);
                    let (h, w) = (s[0], s[1]);
                    let nw = node.shape[1];
                    let da = grads[ia].as_mut().unwrap();
                    for i in 0..h {
                        let src = (i + top) * nw + left;
                        add_into(&mut da[i * w..(i + 1) * w], &g[src..src + w]);
                    }
                }
            }
            Op::Softmax { a, axis } => {
                if let Some(ia) = self.acc(grads, *a) {
                    let (outer, n, inner) = layout(&node.shape, *axis);
                    let da = grads[ia].as_mut().unwrap();
                    for o in 0..outer {
                        for r in 0..inner {
                            let idx = |i: usize| o * n * inner + i * inner + r;
                            let s: f64 = (0..n).map(|i| g[idx(i)] * y[idx(i)]).sum();
                            for i in 0..n {
                                da[idx(i)] += y[idx(i)] * (g[idx(i)] - s);
                            }
                        }
                    }
                }
            }
            Op::L2Normalize { a, axis, norms } => {
                if let Some(ia) = self.acc(grads, *a) {
                    let (outer, n, inner) = layout(&node.shape, *axis);
                    let da = grads[ia].as_mut().unwrap();
                    for o in 0..outer {
                        for r in 0..inner {
                            let norm = norms[o * inner + r];
                            if norm == 0.0 {
                                continue;
                            }
                            let idx = |i: usize| o * n * inner + i * inner + r;
                            let s: f64 = (0..n).map(|i| g[idx(i)] * y[idx(i)]).sum();
                            for i in 0..n {
                                da[idx(i)] += (g[idx(i)] - y[idx(i)] * s) / norm;
                            }
                        }
                    }
                }
            }
            Op::Sum(a) => self.acc_elementwise(grads, *a, &vec![g[0]; self.value(*a).len()], |_| 1.0),
            Op::Mean(a) => {
                let n = self.value(*a).len() as f64;
                self.acc_elementwise(grads, *a, &vec![g[0] / n; self.value(*a).len()], |_| 1.0);
            }
            Op::SumAxis { a, axis } | Op::MeanAxis { a, axis } => {
                if let Some(ia) = self.acc(grads, *a) {
                    let sa = self.shape(*a);
                    let (outer, n, inner) = layout(sa, *axis);
                    let c = if matches!(node.op, Op::MeanAxis { .. }) {
                        1.0 / n as f64
                    } else {
                        1.0
                    };
                    let da = grads[ia].as_mut().unwrap();
                    for o in 0..outer {
                        for i in 0..n {
                            for r in 0..inner {
                                da[o * n * inner + i * inner + r] += c * g[o * inner + r];
                            }
                        }
                    }
                }
            }
            Op::Select {
                a, axis, picked, k, ..
            } => {
                if let Some(ia) = self.acc(grads, *a) {
                    let sa = self.shape(*a);
                    let (outer, n, inner) = layout(sa, *axis);
                    // `picked` is laid out as [outer, k, inner] in both modes
                    let k = *k;
                    let da = grads[ia].as_mut().unwrap();
                    for o in 0..outer {
                        for slot in 0..k {
                            for r in 0..inner {
                                let pos = o * k * inner + slot * inner + r;
                                da[o * n * inner + picked[pos] * inner + r] += g[pos];
                            }
                        }
                    }
                }
            }
            Op::Conv2d {
                input,
                kernels,
                bias,
            } => {
                let si = self.shape(*input);
                let sk = self.shape(*kernels);
                let (w, f, n) = (si[1], sk[0], sk[1]);
                let (oh, ow) = (node.shape[1], node.shape[2]);
                let (vx, vk) = (self.value(*input), self.value(*kernels));
                if let Some(ib) = self.acc(grads, *bias) {
                    let db = grads[ib].as_mut().unwrap();
                    for fi in 0..f {
                        db[fi] += g[fi * oh * ow..(fi + 1) * oh * ow].iter().sum::<f64>();
                    }
                }
                if let Some(ik) = self.acc(grads, *kernels) {
                    let dk = grads[ik].as_mut().unwrap();
                    for fi in 0..f {
                        let plane = &g[fi * oh * ow..(fi + 1) * oh * ow];
                        for p in 0..n {
                            for q in 0..n {
                                let mut s = 0.0;
                                for i in 0..oh {
                                    let src = &vx[(i + p) * w + q..(i + p) * w + q + ow];
                                    s += plane[i * ow..(i + 1) * ow]
                                        .iter()
                                        .zip(src)
                                        .map(|(a, b)| a * b)
                                        .sum::<f64>();
                                }
                                dk[fi * n * n + p * n + q] += s;
                            }
                        }
                    }
                }
                if let Some(ix) = self.acc(grads, *input) {
                    let dx = grads[ix].as_mut().unwrap();
                    for fi in 0..f {
                        let plane = &g[fi * oh * ow..(fi + 1) * oh * ow];
                        for p in 0..n {
                            for q in 0..n {
                                let kv = vk[fi * n * n + p * n + q];
                                for i in 0..oh {
                                    let dst = &mut dx[(i + p) * w + q..(i + p) * w + q + ow];
                                    for (d, gv) in dst.iter_mut().zip(&plane[i * ow..(i + 1) * ow]) {
                                        *d += kv * gv;
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}
