//! Document-aware q-term encodings of the attention-based models.

use crate::autodiff::{Graph, Tensor};

/// ABEL-DRMM: dot-product attention of each q-term encoding over the
/// d-term encodings, then the Hadamard product of the L2-normalised
/// attended document vector and q-term encoding. Returns `(phi_H, attention)`
/// with shapes `[n, width]` and `[n, m]`.
pub fn abel_doc_aware(g: &mut Graph, cq: Tensor, cd: Tensor) -> (Tensor, Tensor) {
    let cdt = g.transpose(cd);
    let logits = g.matmul(cq, cdt);
    let attn = g.softmax(logits, 1);
    let attended = g.matmul(attn, cd);
    let a = g.l2_normalize(attended, 1);
    let b = g.l2_normalize(cq, 1);
    (g.mul(a, b), attn)
}

/// POSIT-DRMM attention: cosine of every q-term encoding with every d-term
/// encoding, `[n, m]`, no softmax.
pub fn posit_attention(g: &mut Graph, cq: Tensor, cd: Tensor) -> Tensor {
    g.cosine_similarity(cq, cd)
}

/// `<max(a_i), mean(k-max(a_i))>` per row: `[n, m]` -> `[n, 2]`. When
/// `k > m` all `m` values are averaged.
pub fn posit_pool(g: &mut Graph, a: Tensor, k: usize) -> Tensor {
    let s = g.shape(a).to_vec();
    assert!(s.len() == 2 && s[1] >= 1, "posit_pool needs a nonempty [n, m] matrix, got {s:?}");
    assert!(k >= 1, "k must be positive");
    let n = s[0];
    let mx = g.max_pool(a, 1);
    let top = g.k_max_pool(a, 1, k);
    let avg = g.mean_axis(top, 1);
    let mx = g.reshape(mx, vec![n, 1]);
    let avg = g.reshape(avg, vec![n, 1]);
    g.concat(&[mx, avg], 1)
}
