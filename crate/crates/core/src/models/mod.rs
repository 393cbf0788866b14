//! Relevance models: DRMM, PACRR, PACRR-DRMM, ABEL-DRMM and POSIT-DRMM with
//! multi-view variants, plus the linear combiner over extra features.

mod dense;
pub mod drmm;
mod features;
mod inspect;
pub mod interaction;
pub mod pacrr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use dense::Mlp;
pub use drmm::{cosine, drmm_histogram, histogram_features, term_gate, Buckets};
pub use features::{compute_extra_features, ExtraFeatures, ScoreStats};
pub use inspect::{inspect_pair, InspectDump, ViewMatrix};
pub use interaction::{abel_doc_aware, posit_attention, posit_pool};
pub use pacrr::{idf_softmax_column, pacrr_rows, pacrr_sim_matrix, PacrrConfig, PacrrParams};

use crate::autodiff::{Array, Graph, ParamId, ParameterSet, Tensor};
use crate::embed::{exact_match_matrix, hashed_exact_match, EmbeddingMatrix};
use crate::encoder::{encode_sequence, BiRnnParams, Dropout};
use crate::error::{Error, Result};
use crate::text::{IdfTable, TermId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Architecture {
    /// Combiner over the extra features only (the model score is 0).
    Bm25Extra,
    Drmm,
    Pacrr,
    PacrrDrmm,
    AbelDrmm,
    AbelDrmmMv,
    PositDrmm,
    PositDrmmMv,
}

impl Architecture {
    pub const ALL: [Architecture; 8] = [
        Self::Bm25Extra,
        Self::Drmm,
        Self::Pacrr,
        Self::PacrrDrmm,
        Self::AbelDrmm,
        Self::AbelDrmmMv,
        Self::PositDrmm,
        Self::PositDrmmMv,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Bm25Extra => "bm25-extra",
            Self::Drmm => "drmm",
            Self::Pacrr => "pacrr",
            Self::PacrrDrmm => "pacrr-drmm",
            Self::AbelDrmm => "abel-drmm",
            Self::AbelDrmmMv => "abel-drmm-mv",
            Self::PositDrmm => "posit-drmm",
            Self::PositDrmmMv => "posit-drmm-mv",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown architecture {s:?}")))
    }

    pub fn uses_encoder(self) -> bool {
        matches!(self, Self::AbelDrmm | Self::AbelDrmmMv | Self::PositDrmm | Self::PositDrmmMv)
    }

    /// Models whose score is a gated sum of per-q-term scores.
    pub fn gated(self) -> bool {
        matches!(self, Self::Drmm | Self::AbelDrmm | Self::AbelDrmmMv | Self::PositDrmm | Self::PositDrmmMv)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub architecture: Architecture,
    /// Equal-width histogram buckets over [-1, 1].
    pub buckets: usize,
    /// DRMM hidden widths; `None` means two layers as wide as the input.
    pub drmm_hidden: Option<Vec<usize>>,
    /// ABEL hidden widths; `None` means two layers as wide as the input.
    pub abel_hidden: Option<Vec<usize>>,
    pub posit_k: usize,
    pub posit_hidden: Vec<usize>,
    pub pacrr: PacrrConfig,
    pub fine_tune_embeddings: bool,
    pub encoder_dropout: f64,
    /// Combine the model score with the extra features.
    pub extra_features: bool,
    /// Documents are truncated to this many terms before scoring.
    pub max_doc_terms: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            architecture: Architecture::PositDrmmMv,
            buckets: 30,
            drmm_hidden: None,
            abel_hidden: None,
            posit_k: 5,
            posit_hidden: vec![8],
            pacrr: PacrrConfig::default(),
            fine_tune_embeddings: false,
            encoder_dropout: 0.0,
            extra_features: true,
            max_doc_terms: 300,
        }
    }
}

impl ModelConfig {
    pub fn new(architecture: Architecture) -> Self {
        Self { architecture, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.buckets == 0 {
            return Err(Error::Config("bucket count must be positive".into()));
        }
        if self.posit_k == 0 {
            return Err(Error::Config("posit_k must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.encoder_dropout) {
            return Err(Error::Config("encoder_dropout must be in [0, 1)".into()));
        }
        if self.max_doc_terms == 0 {
            return Err(Error::Config("max_doc_terms must be positive".into()));
        }
        if self.architecture == Architecture::Bm25Extra && !self.extra_features {
            return Err(Error::Config("bm25-extra needs extra_features".into()));
        }
        if matches!(self.architecture, Architecture::Pacrr | Architecture::PacrrDrmm) {
            self.pacrr.validate()?;
        }
        Ok(())
    }

    /// Width of one document-aware q-term encoding.
    pub fn encoding_width(&self, dim: usize) -> usize {
        match self.architecture {
            Architecture::Bm25Extra => 0,
            Architecture::Drmm => self.buckets,
            Architecture::Pacrr | Architecture::PacrrDrmm => self.pacrr.row_width(),
            Architecture::AbelDrmm | Architecture::AbelDrmmMv => 2 * dim,
            Architecture::PositDrmm => 2,
            Architecture::PositDrmmMv => 6,
        }
    }
}

/// Read-only inputs shared by every scoring call.
#[derive(Clone, Copy)]
pub struct Resources<'a> {
    pub emb: &'a EmbeddingMatrix,
    pub idf: &'a IdfTable,
}

/// One query-document pair to score.
#[derive(Debug, Clone)]
pub struct PairInput<'a> {
    pub query: &'a [TermId],
    pub doc: &'a [TermId],
    pub extra: ExtraFeatures,
}

#[derive(Debug, Clone, PartialEq)]
struct Parts {
    emb_table: Option<ParamId>,
    w_g: Option<ParamId>,
    encoder: Option<BiRnnParams>,
    mlp: Option<Mlp>,
    pacrr: Option<PacrrParams>,
    /// PACRR-DRMM aggregation `[l_q]` and bias `[]`.
    agg: Option<(ParamId, ParamId)>,
    /// Combiner weights `[5]` (model score first) and bias `[]`.
    combiner: Option<(ParamId, ParamId)>,
}

/// A model with its parameters. Construction order is deterministic, so a
/// checkpoint restores into a fresh `Ranker` built from the same config.
#[derive(Debug, Clone)]
pub struct Ranker {
    pub config: ModelConfig,
    pub params: ParameterSet,
    dim: usize,
    parts: Parts,
}

/// Parameters bound into one graph, indexed by parameter id.
pub struct Bound {
    tensors: Vec<Tensor>,
}

impl Bound {
    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }
}

impl Ranker {
    /// Initialises parameters from `seed`. `emb` supplies the embedding
    /// dimension and, when fine-tuning, the initial table.
    pub fn new(config: ModelConfig, emb: &EmbeddingMatrix, seed: u64) -> Result<Self> {
        config.validate()?;
        let dim = emb.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ps = ParameterSet::new();
        let arch = config.architecture;
        let mut parts = Parts {
            emb_table: None,
            w_g: None,
            encoder: None,
            mlp: None,
            pacrr: None,
            agg: None,
            combiner: None,
        };
        if config.fine_tune_embeddings && arch != Architecture::Bm25Extra {
            parts.emb_table = Some(ps.insert("emb.table", emb.to_table()));
        }
        if arch.gated() {
            let w = dense::glorot(&mut rng, dim + 1, 1).into_data();
            parts.w_g = Some(ps.insert("gate.w", Array::vector(w)));
        }
        if arch.uses_encoder() {
            parts.encoder = Some(BiRnnParams::init(&mut ps, "enc", dim, &mut rng));
        }
        let width = config.encoding_width(dim);
        match arch {
            Architecture::Bm25Extra => {}
            Architecture::Drmm => {
                let hidden = config.drmm_hidden.clone().unwrap_or_else(|| vec![width, width]);
                parts.mlp = Some(Mlp::init(&mut ps, "mlp", width, &hidden, 1, &mut rng));
            }
            Architecture::AbelDrmm | Architecture::AbelDrmmMv => {
                let hidden = config.abel_hidden.clone().unwrap_or_else(|| vec![width, width]);
                parts.mlp = Some(Mlp::init(&mut ps, "mlp", width, &hidden, 1, &mut rng));
            }
            Architecture::PositDrmm | Architecture::PositDrmmMv => {
                parts.mlp = Some(Mlp::init(&mut ps, "mlp", width, &config.posit_hidden, 1, &mut rng));
            }
            Architecture::Pacrr => {
                parts.pacrr = Some(PacrrParams::init(&mut ps, "pacrr", &config.pacrr, &mut rng));
                let input = config.pacrr.l_q * width;
                parts.mlp = Some(Mlp::init(&mut ps, "mlp", input, &config.pacrr.dense, 1, &mut rng));
            }
            Architecture::PacrrDrmm => {
                parts.pacrr = Some(PacrrParams::init(&mut ps, "pacrr", &config.pacrr, &mut rng));
                parts.mlp = Some(Mlp::init(&mut ps, "mlp", width, &config.pacrr.dense, 1, &mut rng));
                let l_q = config.pacrr.l_q;
                let w = ps.insert("agg.w", Array::vector(vec![1.0 / l_q as f64; l_q]));
                let b = ps.insert("agg.b", Array::scalar(0.0));
                parts.agg = Some((w, b));
            }
        }
        if config.extra_features {
            let w = ps.insert("combine.w", Array::vector(vec![1.0, 0.0, 0.0, 0.0, 0.0]));
            let b = ps.insert("combine.b", Array::scalar(0.0));
            parts.combiner = Some((w, b));
        }
        Ok(Self { config, params: ps, dim, parts })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn architecture(&self) -> Architecture {
        self.config.architecture
    }

    pub fn combiner_ids(&self) -> Option<(ParamId, ParamId)> {
        self.parts.combiner
    }

    pub fn gate_id(&self) -> Option<ParamId> {
        self.parts.w_g
    }

    pub fn encoder_params(&self) -> Option<&BiRnnParams> {
        self.parts.encoder.as_ref()
    }

    pub fn agg_ids(&self) -> Option<(ParamId, ParamId)> {
        self.parts.agg
    }

    pub fn mlp(&self) -> Option<&Mlp> {
        self.parts.mlp.as_ref()
    }

    pub fn pacrr_params(&self) -> Option<&PacrrParams> {
        self.parts.pacrr.as_ref()
    }

    /// Binds every parameter except the embedding table, which is gathered
    /// row-wise on demand.
    pub fn bind(&self, g: &mut Graph) -> Bound {
        let mut tensors = Vec::with_capacity(self.params.len());
        for id in self.params.ids() {
            if Some(id) == self.parts.emb_table {
                tensors.push(g.constant_scalar(0.0));
            } else {
                tensors.push(g.param(&self.params, id));
            }
        }
        Bound { tensors }
    }

    /// Builds a `Bound` from caller-provided tensors, one per parameter in
    /// id order. Used by gradient checks that treat parameters as inputs.
    pub fn bound_from(&self, tensors: Vec<Tensor>) -> Bound {
        assert_eq!(tensors.len(), self.params.len());
        Bound { tensors }
    }

    fn vectors<'a>(&'a self, res: &'a Resources<'_>, t: TermId) -> &'a [f64] {
        match self.parts.emb_table {
            Some(id) => self.params.get(id).row(res.emb.row_index(t)),
            None => res.emb.vector(t),
        }
    }

    /// `[len, dim]` embeddings of `terms`, trainable when fine-tuning.
    pub fn embed(&self, g: &mut Graph, res: &Resources<'_>, terms: &[TermId]) -> Tensor {
        match self.parts.emb_table {
            Some(id) => {
                let rows: Vec<usize> = terms.iter().map(|&t| res.emb.row_index(t)).collect();
                g.param_rows(&self.params, id, &rows)
            }
            None => g.constant(res.emb.lookup_rows(terms)),
        }
    }

    fn truncated<'a>(&self, doc: &'a [TermId]) -> &'a [TermId] {
        &doc[..doc.len().min(self.config.max_doc_terms)]
    }

    fn encode(&self, g: &mut Graph, bound: &Bound, emb: Tensor, rng: Option<&mut ChaCha8Rng>) -> Tensor {
        let p = self.parts.encoder.as_ref().expect("architecture has an encoder");
        let b = crate::encoder::BoundBiRnn {
            fwd: crate::encoder::BoundLstm {
                w_x: bound.tensors[p.fwd.w_x.0],
                w_h: bound.tensors[p.fwd.w_h.0],
                b: bound.tensors[p.fwd.b.0],
            },
            bwd: crate::encoder::BoundLstm {
                w_x: bound.tensors[p.bwd.w_x.0],
                w_h: bound.tensors[p.bwd.w_h.0],
                b: bound.tensors[p.bwd.b.0],
            },
            dim: p.dim,
        };
        let dropout = rng
            .filter(|_| self.config.encoder_dropout > 0.0)
            .map(|rng| Dropout { rate: self.config.encoder_dropout, rng });
        encode_sequence(g, emb, &b, dropout)
    }

    /// Document-aware q-term encodings, `[n, width]` (`[l_q, width]` for
    /// the PACRR family). `None` for the features-only baseline.
    pub fn doc_aware(
        &self,
        g: &mut Graph,
        bound: &Bound,
        res: &Resources<'_>,
        query: &[TermId],
        doc: &[TermId],
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> Option<Tensor> {
        assert!(!query.is_empty(), "query must have at least one term");
        assert!(!doc.is_empty(), "document must have at least one term");
        let doc = self.truncated(doc);
        let arch = self.config.architecture;
        Some(match arch {
            Architecture::Bm25Extra => return None,
            Architecture::Drmm => {
                let qv: Vec<&[f64]> = query.iter().map(|&t| self.vectors(res, t)).collect();
                let dv: Vec<&[f64]> = doc.iter().map(|&t| self.vectors(res, t)).collect();
                let hist = histogram_features(&qv, &dv, &Buckets::equal_width(self.config.buckets));
                g.constant(hist)
            }
            Architecture::Pacrr | Architecture::PacrrDrmm => {
                let cfg = &self.config.pacrr;
                let q = &query[..query.len().min(cfg.l_q)];
                let qe = self.embed(g, res, q);
                let de = self.embed(g, res, &doc[..doc.len().min(cfg.l_d)]);
                let sim = pacrr_sim_matrix(g, qe, de, cfg.l_q, cfg.l_d);
                let idf: Vec<f64> = q.iter().map(|&t| res.idf.idf(t)).collect();
                pacrr_rows(g, &bound.tensors, self.parts.pacrr.as_ref().unwrap(), sim, &idf, cfg)
            }
            Architecture::AbelDrmm | Architecture::AbelDrmmMv | Architecture::PositDrmm | Architecture::PositDrmmMv => {
                let qe = self.embed(g, res, query);
                let de = self.embed(g, res, doc);
                let cq = self.encode(g, bound, qe, rng.as_deref_mut());
                let cd = self.encode(g, bound, de, rng);
                match arch {
                    Architecture::AbelDrmm => abel_doc_aware(g, cq, cd).0,
                    Architecture::AbelDrmmMv => {
                        let (ctx, _) = abel_doc_aware(g, cq, cd);
                        let qe2 = g.concat(&[qe, qe], 1);
                        let de2 = g.concat(&[de, de], 1);
                        let (raw, _) = abel_doc_aware(g, qe2, de2);
                        let (hq, hd) = hashed_exact_match(query, doc, 2 * self.dim);
                        let hq = g.constant(hq);
                        let hd = g.constant(hd);
                        let (exact, _) = abel_doc_aware(g, hq, hd);
                        let s = g.add(ctx, raw);
                        g.add(s, exact)
                    }
                    Architecture::PositDrmm => {
                        let a = posit_attention(g, cq, cd);
                        posit_pool(g, a, self.config.posit_k)
                    }
                    _ => {
                        let k = self.config.posit_k;
                        let a = posit_attention(g, cq, cd);
                        let ctx = posit_pool(g, a, k);
                        let b = g.cosine_similarity(qe, de);
                        let raw = posit_pool(g, b, k);
                        let m = g.constant(exact_match_matrix(query, doc));
                        let exact = posit_pool(g, m, k);
                        g.concat(&[ctx, raw, exact], 1)
                    }
                }
            }
        })
    }

    /// Neural relevance score before the combiner, shape `[]`.
    pub fn model_score(
        &self,
        g: &mut Graph,
        bound: &Bound,
        res: &Resources<'_>,
        query: &[TermId],
        doc: &[TermId],
        rng: Option<&mut ChaCha8Rng>,
    ) -> Tensor {
        let Some(enc) = self.doc_aware(g, bound, res, query, doc, rng) else {
            return g.constant_scalar(0.0);
        };
        let t = &bound.tensors;
        let mlp = self.parts.mlp.as_ref().unwrap();
        match self.config.architecture {
            Architecture::Pacrr => {
                let n = g.value(enc).len();
                let flat = g.reshape(enc, vec![1, n]);
                let out = mlp.forward(g, t, flat);
                g.reshape(out, vec![])
            }
            Architecture::PacrrDrmm => {
                let scores = mlp.score_rows(g, t, enc);
                let (w, b) = self.parts.agg.unwrap();
                let s = g.dot(scores, t[w.0]);
                g.add(s, t[b.0])
            }
            _ => {
                let scores = mlp.score_rows(g, t, enc);
                let qe = self.embed(g, res, query);
                let idf: Vec<f64> = query.iter().map(|&q| res.idf.idf(q)).collect();
                let gates = term_gate(g, qe, &idf, t[self.parts.w_g.unwrap().0]);
                g.dot(gates, scores)
            }
        }
    }

    /// Final score, shape `[]`: the combiner over `[model score; extra
    /// features]` when enabled, otherwise the model score.
    pub fn score_graph(&self, g: &mut Graph, bound: &Bound, res: &Resources<'_>, input: &PairInput<'_>, rng: Option<&mut ChaCha8Rng>) -> Tensor {
        let s = self.model_score(g, bound, res, input.query, input.doc, rng);
        match self.parts.combiner {
            None => s,
            Some((w, b)) => combine_with_extra(g, s, &input.extra, bound.tensors[w.0], bound.tensors[b.0]),
        }
    }

    /// Evaluates the final score without keeping the graph.
    pub fn score(&self, res: &Resources<'_>, input: &PairInput<'_>) -> f64 {
        let mut g = Graph::new();
        let bound = self.bind(&mut g);
        let s = self.score_graph(&mut g, &bound, res, input, None);
        g.scalar(s)
    }
}

/// `w . [model_score, bm25_z, exact, idf_weighted, bigram] + b`.
pub fn combine_with_extra(g: &mut Graph, model_score: Tensor, extra: &ExtraFeatures, w: Tensor, b: Tensor) -> Tensor {
    let s = g.reshape(model_score, vec![1]);
    let x = g.constant(Array::vector(extra.to_vec()));
    let feats = g.concat(&[s, x], 0);
    let lin = g.dot(feats, w);
    g.add(lin, b)
}
