//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each
//! and exits nonzero if any failed.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relrank::autodiff::{grad_check, Array, Graph};
use relrank::embed::{exact_match_matrix, hashed_exact_match, save_word_vectors, EmbeddingFormat, EmbeddingMatrix};
use relrank::eval::{evaluate_run, stratified_shuffle_test, Qrels, TIE_TOLERANCE};
use relrank::models::{
    abel_doc_aware, compute_extra_features, drmm_histogram, posit_attention, posit_pool, term_gate, Architecture, Buckets,
    ExtraFeatures, ModelConfig, PacrrConfig, PairInput, Ranker, Resources, ScoreStats,
};
use relrank::retrieval::{load_run, retrieve_top_n, Bm25Params, IndexMeta, InvertedIndex, RankedList};
use relrank::synth::{generate, SynthConfig};
use relrank::text::{IdfTable, ProcessedDocument, ProcessedQuery, TermId, Vocabulary};
use relrank_cli::pipeline;
use relrank_cli::PipelineConfig;

type Outcome = std::result::Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

// ---- shared fixtures ------------------------------------------------------

const DIM: usize = 3;
const VOCAB: usize = 12;

fn fixture(seed: u64) -> (EmbeddingMatrix, IdfTable) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..VOCAB * DIM).map(|_| rng.random_range(-1.0..1.0)).collect();
    let oov = (0..DIM).map(|_| rng.random_range(-1.0..1.0)).collect();
    let df = (0..VOCAB).map(|_| rng.random_range(1..20)).collect();
    (EmbeddingMatrix::from_rows(DIM, rows, oov), IdfTable::from_df(df, 40))
}

fn random_terms(rng: &mut ChaCha8Rng, len: usize) -> Vec<TermId> {
    (0..len).map(|_| TermId(rng.random_range(0..VOCAB as u32))).collect()
}

fn terms_between(rng: &mut ChaCha8Rng, lo: usize, hi: usize) -> Vec<TermId> {
    let len = rng.random_range(lo..hi);
    random_terms(rng, len)
}

fn small_config(arch: Architecture) -> ModelConfig {
    ModelConfig {
        pacrr: PacrrConfig { l_q: 4, l_d: 10, l_g: 3, filters: 2, k: 2, dense: vec![4] },
        ..ModelConfig::new(arch)
    }
}

fn jitter(r: &mut Ranker, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for id in r.params.ids().collect::<Vec<_>>() {
        for x in r.params.get_mut(id).data_mut() {
            *x += rng.random_range(-0.3..0.3);
        }
    }
}

fn random_extra(rng: &mut ChaCha8Rng) -> ExtraFeatures {
    ExtraFeatures {
        bm25_z: rng.random_range(-2.0..2.0),
        exact_overlap: rng.random_range(0.0..1.0),
        idf_weighted_overlap: rng.random_range(0.0..1.0),
        bigram_overlap: rng.random_range(0.0..1.0),
    }
}

fn rand_matrix(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Array {
    Array::new(vec![n, d], (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect())
}

fn row(a: &Array, i: usize) -> Vec<f64> {
    let c = a.shape()[1];
    a.data()[i * c..(i + 1) * c].to_vec()
}

fn brute_cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

// ---- criterion 1 ----------------------------------------------------------

/// Base points closer than this to a relu or max switch point are redrawn;
/// central differences there measure a secant.
const KINK_CLEARANCE: f64 = 1e-3;

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let (emb, idf) = fixture(11);
    let res = Resources { emb: &emb, idf: &idf };
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let suite = [
        ("pacrr", Architecture::Pacrr),
        ("pacrr-drmm", Architecture::PacrrDrmm),
        ("abel-drmm", Architecture::AbelDrmm),
        ("abel-drmm+mv", Architecture::AbelDrmmMv),
        ("posit-drmm", Architecture::PositDrmm),
        ("posit-drmm+mv", Architecture::PositDrmmMv),
        ("combiner", Architecture::Bm25Extra),
    ];
    let mut notes = Vec::new();
    let mut worst = 0.0f64;
    for (mi, (name, arch)) in suite.into_iter().enumerate() {
        let (mut passed, mut redrawn) = (0, 0);
        let mut inst = 0u64;
        while passed < 20 {
            ensure!(inst < 200, "{name}: only {passed} smooth instances in 200 draws");
            let mut r = Ranker::new(small_config(arch), &emb, 1000 * mi as u64 + inst).map_err(|e| e.to_string())?;
            jitter(&mut r, 77 + 1000 * mi as u64 + inst);
            inst += 1;
            let q = random_terms(&mut rng, 3);
            let d = random_terms(&mut rng, 8);
            let input = PairInput { query: &q, doc: &d, extra: random_extra(&mut rng) };
            let report = grad_check(
                |g, ts| {
                    let b = r.bound_from(ts.to_vec());
                    r.score_graph(g, &b, &res, &input, None)
                },
                r.params.values(),
                1e-4,
                1e-4,
            )
            .map_err(|e| e.to_string())?;
            if !report.smooth_within(KINK_CLEARANCE) {
                redrawn += 1;
                continue;
            }
            ensure!(report.passed(), "{name} instance {inst}: max rel error {:.3e}", report.worst());
            worst = worst.max(report.worst());
            passed += 1;
        }
        notes.push(format!("{name} 20/20 ({redrawn} redrawn)"));
    }
    let secs = start.elapsed().as_secs_f64();
    ensure!(secs < 300.0, "took {secs:.0}s, limit 300s");
    Ok(format!("{}; worst rel error {worst:.2e}; {secs:.1}s", notes.join(", ")))
}

// ---- criterion 2 ----------------------------------------------------------

const INSTANCES: usize = 200;
const FLOAT_TOL: f64 = 1e-10;

fn brute_bucket(x: f64, count: usize) -> usize {
    let edges: Vec<f64> = (0..=count).map(|k| -1.0 + 2.0 * k as f64 / count as f64).collect();
    let x = x.clamp(-1.0, 1.0);
    (0..count).find(|&b| x >= edges[b] && (x < edges[b + 1] || b == count - 1)).unwrap()
}

fn oracle_histogram(rng: &mut ChaCha8Rng) -> Outcome {
    for _ in 0..INSTANCES {
        let dim = rng.random_range(1..6);
        let count = rng.random_range(1..31);
        let q: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let ds: Vec<Vec<f64>> = (0..rng.random_range(1..40))
            .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let refs: Vec<&[f64]> = ds.iter().map(Vec::as_slice).collect();
        let got = drmm_histogram(&q, &refs, &Buckets::equal_width(count));
        let mut want = vec![0u32; count];
        for d in &ds {
            want[brute_bucket(brute_cosine(&q, d), count)] += 1;
        }
        ensure!(got == want, "histogram {got:?} != {want:?}");
    }
    Ok(String::new())
}

fn oracle_attention(rng: &mut ChaCha8Rng) -> Outcome {
    for _ in 0..INSTANCES {
        let (n, m, d) = (rng.random_range(1..5), rng.random_range(1..12), rng.random_range(1..6));
        let (cq, cd) = (rand_matrix(rng, n, d), rand_matrix(rng, m, d));
        let mut g = Graph::new();
        let (tq, td) = (g.constant(cq.clone()), g.constant(cd.clone()));
        let cos = posit_attention(&mut g, tq, td);
        let (phi, attn) = abel_doc_aware(&mut g, tq, td);
        for i in 0..n {
            let qi = row(&cq, i);
            let logits: Vec<f64> = (0..m).map(|j| qi.iter().zip(row(&cd, j)).map(|(a, b)| a * b).sum()).collect();
            let mx = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = logits.iter().map(|l| (l - mx).exp()).sum();
            let mut attended = vec![0.0; d];
            for j in 0..m {
                let c = brute_cosine(&qi, &row(&cd, j));
                ensure!((g.value(cos)[i * m + j] - c).abs() <= FLOAT_TOL, "cosine ({i},{j})");
                let a = (logits[j] - mx).exp() / z;
                ensure!((g.value(attn)[i * m + j] - a).abs() <= FLOAT_TOL, "attention ({i},{j})");
                for (k, x) in row(&cd, j).iter().enumerate() {
                    attended[k] += a * x;
                }
            }
            let na = attended.iter().map(|x| x * x).sum::<f64>().sqrt();
            let nq = qi.iter().map(|x| x * x).sum::<f64>().sqrt();
            for k in 0..d {
                let want = attended[k] / na * qi[k] / nq;
                ensure!((g.value(phi)[i * d + k] - want).abs() <= FLOAT_TOL, "phi_H ({i},{k})");
            }
        }
    }
    Ok(String::new())
}

fn oracle_pooling(rng: &mut ChaCha8Rng) -> Outcome {
    for _ in 0..INSTANCES {
        let (n, m, k) = (rng.random_range(1..5), rng.random_range(1..15), rng.random_range(1..8));
        let a = rand_matrix(rng, n, m);
        let mut g = Graph::new();
        let t = g.constant(a.clone());
        let p = posit_pool(&mut g, t, k);
        for i in 0..n {
            let mut r = row(&a, i);
            r.sort_by(|x, y| y.total_cmp(x));
            let top = &r[..k.min(m)];
            let mean = top.iter().sum::<f64>() / top.len() as f64;
            ensure!(g.value(p)[2 * i] == r[0], "max of row {i}");
            ensure!((g.value(p)[2 * i + 1] - mean).abs() <= FLOAT_TOL, "k-max mean of row {i}");
        }
    }
    Ok(String::new())
}

fn oracle_bm25(rng: &mut ChaCha8Rng) -> Outcome {
    let p = Bm25Params::default();
    for inst in 0..INSTANCES {
        let v = rng.random_range(2..15);
        let docs: Vec<Vec<String>> = (0..rng.random_range(1..40))
            .map(|_| (0..rng.random_range(1..20)).map(|_| format!("w{}", rng.random_range(0..v))).collect())
            .collect();
        let mut vocab = Vocabulary::new();
        let processed: Vec<ProcessedDocument> = docs
            .iter()
            .enumerate()
            .map(|(i, ts)| ProcessedDocument {
                doc_id: format!("d{i:03}"),
                terms: ts.iter().map(|t| vocab.intern(t)).collect(),
            })
            .collect();
        let index = InvertedIndex::build(processed, None, vocab, IndexMeta::default()).map_err(|e| e.to_string())?;
        let qtoks: Vec<String> = (0..rng.random_range(1..5)).map(|_| format!("w{}", rng.random_range(0..v + 2))).collect();
        let q = ProcessedQuery::new(format!("q{inst}"), &qtoks, index.vocab()).map_err(|e| e.to_string())?;
        let top_n = rng.random_range(1..50);
        let got = retrieve_top_n(&q, &index, top_n, p, None);

        let n = docs.len() as f64;
        let avgdl = docs.iter().map(Vec::len).sum::<usize>() as f64 / n;
        let mut scored: Vec<(String, f64)> = docs
            .iter()
            .enumerate()
            .map(|(i, d)| {
                let mut s = 0.0;
                for t in &qtoks {
                    let tf = d.iter().filter(|x| *x == t).count() as f64;
                    if tf == 0.0 {
                        continue;
                    }
                    let df = docs.iter().filter(|d| d.contains(t)).count() as f64;
                    let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
                    s += idf * tf * (p.k1 + 1.0) / (tf + p.k1 * (1.0 - p.b + p.b * d.len() as f64 / avgdl));
                }
                (format!("d{i:03}"), s)
            })
            .collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        scored.truncate(top_n);
        ensure!(got.entries.len() == scored.len(), "list length {} != {}", got.entries.len(), scored.len());
        for (r, (c, (id, s))) in got.entries.iter().zip(&scored).enumerate() {
            ensure!(c.rank == r + 1, "rank gap at {r}");
            ensure!(&c.doc_id == id, "rank {}: {} != {id}", r + 1, c.doc_id);
            ensure!((c.score - s).abs() <= FLOAT_TOL, "score of {id}");
        }
    }
    Ok(String::new())
}

fn oracle_metrics(rng: &mut ChaCha8Rng) -> Outcome {
    for inst in 0..INSTANCES {
        let pool = rng.random_range(1..60);
        let mut ids: Vec<String> = (0..pool).map(|i| format!("d{i:03}")).collect();
        ids.shuffle(rng);
        let ranked = &ids[..rng.random_range(1..=pool)];
        let mut qrels = Qrels::new();
        let qid = format!("q{inst}");
        let mut rel = BTreeSet::new();
        for id in &ids {
            let r = rng.random_bool(0.3);
            if r {
                rel.insert(id.clone());
            }
            qrels.insert(&qid, id, r).map_err(|e| e.to_string())?;
        }
        if rel.is_empty() {
            qrels.insert(&qid, "unretrieved", true).map_err(|e| e.to_string())?;
            rel.insert("unretrieved".to_string());
        }
        let list = RankedList::from_scores(
            qid.clone(),
            ranked.iter().enumerate().map(|(i, d)| (d.clone(), -(i as f64))).collect(),
        );
        let got = evaluate_run(&[list], &qrels, "x");
        let m = &got.per_query[0];

        let r_total = rel.len() as f64;
        let (mut hits, mut ap) = (0.0, 0.0);
        for (i, d) in ranked.iter().enumerate() {
            if rel.contains(d) {
                hits += 1.0;
                ap += hits / (i + 1) as f64;
            }
        }
        ap /= r_total;
        let p20 = ranked.iter().take(20).filter(|d| rel.contains(*d)).count() as f64 / 20.0;
        let mut dcg = 0.0;
        for (i, d) in ranked.iter().take(20).enumerate() {
            if rel.contains(d) {
                dcg += 1.0 / ((i + 2) as f64).log2();
            }
        }
        let idcg: f64 = (0..rel.len().min(20)).map(|i| 1.0 / ((i + 2) as f64).log2()).sum();
        ensure!((m.ap - ap).abs() <= FLOAT_TOL, "AP {} != {ap}", m.ap);
        ensure!((m.p20 - p20).abs() <= FLOAT_TOL, "P@20 {} != {p20}", m.p20);
        ensure!((m.ndcg20 - dcg / idcg).abs() <= FLOAT_TOL, "nDCG@20 {} != {}", m.ndcg20, dcg / idcg);
    }
    Ok(String::new())
}

fn oracle_bigrams(rng: &mut ChaCha8Rng) -> Outcome {
    let idf = IdfTable::from_df(vec![1; 8], 10);
    for _ in 0..INSTANCES {
        let q: Vec<TermId> = (0..rng.random_range(1..6)).map(|_| TermId(rng.random_range(0..8))).collect();
        let d: Vec<TermId> = (0..rng.random_range(1..20)).map(|_| TermId(rng.random_range(0..8))).collect();
        let f = compute_extra_features(&q, &d, 0.0, &ScoreStats::from_scores(&[0.0]), &idf);
        let doc_bigrams: BTreeSet<(u32, u32)> = d.windows(2).map(|w| (w[0].0, w[1].0)).collect();
        let hits = q.windows(2).filter(|w| doc_bigrams.contains(&(w[0].0, w[1].0))).count();
        let want = if q.len() < 2 { 0.0 } else { hits as f64 / (q.len() - 1) as f64 };
        ensure!(f.bigram_overlap == want, "bigram overlap {} != {want}", f.bigram_overlap);
    }
    Ok(String::new())
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let checks: [(&str, fn(&mut ChaCha8Rng) -> Outcome); 6] = [
        ("histogram", oracle_histogram),
        ("cosine/attention", oracle_attention),
        ("pooling", oracle_pooling),
        ("bm25 top-N", oracle_bm25),
        ("AP/P@20/nDCG@20", oracle_metrics),
        ("bigram overlap", oracle_bigrams),
    ];
    for (name, f) in checks {
        f(&mut rng).map_err(|e| format!("{name}: {e}"))?;
    }
    Ok(format!("6 oracles x {INSTANCES} instances, counts exact, floats within {FLOAT_TOL:e}"))
}

// ---- criterion 3 ----------------------------------------------------------

fn criterion_3() -> Outcome {
    let buckets = Buckets::from_edges(vec![-1.0, 0.0, 1.0]).unwrap();
    let q = [1.0, 0.0];
    let ds: Vec<[f64; 2]> = [0.5f64, 0.1, -0.3].iter().map(|&c| [c, (1.0 - c * c).sqrt()]).collect();
    let refs: Vec<&[f64]> = ds.iter().map(|d| d.as_slice()).collect();
    let h = drmm_histogram(&q, &refs, &buckets);
    ensure!(h == [1, 2], "histogram {h:?}, expected [1, 2]");

    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut g = Graph::new();
    let cq = g.constant(rand_matrix(&mut rng, 1, 4));
    let cd = g.constant(rand_matrix(&mut rng, 1, 4));
    let (phi, _) = abel_doc_aware(&mut g, cq, cq);
    let sum: f64 = g.value(phi).iter().sum();
    ensure!((sum - 1.0).abs() < 1e-15, "parallel vectors: sum phi_H = {sum}");
    let (phi, _) = abel_doc_aware(&mut g, cq, cd);
    let sum: f64 = g.value(phi).iter().sum();
    let cos = brute_cosine(g.value(cq), g.value(cd));
    ensure!((sum - cos).abs() < 1e-15, "sum phi_H {sum} != cosine {cos}");

    let (emb, idf) = fixture(32);
    let res = Resources { emb: &emb, idf: &idf };
    for (arch, width) in [(Architecture::PositDrmm, 2), (Architecture::PositDrmmMv, 6)] {
        let r = Ranker::new(ModelConfig::new(arch), &emb, 0).map_err(|e| e.to_string())?;
        let mut g = Graph::new();
        let b = r.bind(&mut g);
        let t = r.doc_aware(&mut g, &b, &res, &random_terms(&mut rng, 3), &random_terms(&mut rng, 9), None).unwrap();
        ensure!(g.shape(t) == [3, width], "{}: encoding shape {:?}", arch.name(), g.shape(t));
        ensure!(r.config.encoding_width(DIM) == width, "{}: declared width", arch.name());
    }
    Ok("histogram <1, 2>, sum phi_H = cosine, phi_P widths 2 and 6".into())
}

// ---- criterion 4 ----------------------------------------------------------

const CASES: usize = 1000;

fn criterion_4() -> Outcome {
    let (emb, idf) = fixture(41);
    let res = Resources { emb: &emb, idf: &idf };
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut violations: BTreeMap<&str, usize> = BTreeMap::new();
    let mut bump = |name: &'static str, bad: bool| *violations.entry(name).or_default() += bad as usize;

    let mut drmm = Ranker::new(small_config(Architecture::Drmm), &emb, 1).map_err(|e| e.to_string())?;
    jitter(&mut drmm, 2);
    for _ in 0..CASES {
        let q = terms_between(&mut rng, 1, 5);
        let mut d = terms_between(&mut rng, 1, 30);
        let extra = random_extra(&mut rng);
        let a = drmm.score(&res, &PairInput { query: &q, doc: &d, extra });
        d.shuffle(&mut rng);
        let b = drmm.score(&res, &PairInput { query: &q, doc: &d, extra });
        bump("drmm document permutation", a != b);
    }

    // POSIT interaction layer: the pooled views of fixed encodings
    for _ in 0..CASES {
        let (n, m, dim) = (rng.random_range(1..5), rng.random_range(1..30), rng.random_range(1..6));
        let k = rng.random_range(1..8);
        let cq = rand_matrix(&mut rng, n, dim);
        let cd = rand_matrix(&mut rng, m, dim);
        let mut perm: Vec<usize> = (0..m).collect();
        perm.shuffle(&mut rng);
        let cd_p = Array::new(vec![m, dim], perm.iter().flat_map(|&j| row(&cd, j)).collect());
        let mut g = Graph::new();
        let tq = g.constant(cq);
        let (td, tp) = (g.constant(cd), g.constant(cd_p));
        let a = posit_attention(&mut g, tq, td);
        let a = posit_pool(&mut g, a, k);
        let b = posit_attention(&mut g, tq, tp);
        let b = posit_pool(&mut g, b, k);
        let bad = g.value(a).iter().zip(g.value(b)).any(|(x, y)| (x - y).abs() > 1e-12);
        bump("posit document permutation", bad);
    }

    let rankers: Vec<Ranker> = Architecture::ALL
        .into_iter()
        .filter(|&a| a != Architecture::Bm25Extra)
        .map(|a| Ranker::new(small_config(a), &emb, 3))
        .collect::<relrank::Result<_>>()
        .map_err(|e| e.to_string())?;
    for i in 0..CASES {
        let r = &rankers[i % rankers.len()];
        let q = terms_between(&mut rng, 1, 5);
        let shapes: Vec<Vec<usize>> = [1, 5, 50]
            .iter()
            .map(|&m| {
                let d = random_terms(&mut rng, m);
                let mut g = Graph::new();
                let b = r.bind(&mut g);
                let t = r.doc_aware(&mut g, &b, &res, &q, &d, None).unwrap();
                g.shape(t).to_vec()
            })
            .collect();
        bump("width across m in {1, 5, 50}", shapes.windows(2).any(|w| w[0] != w[1]));
    }

    for _ in 0..CASES {
        let n = rng.random_range(1..8);
        let (m, dim) = (rng.random_range(1..20), rng.random_range(1..6));
        let mut g = Graph::new();
        let qe = g.constant(rand_matrix(&mut rng, n, dim));
        let cd = g.constant(rand_matrix(&mut rng, m, dim));
        let w = g.constant(Array::new(vec![dim + 1], (0..=dim).map(|_| rng.random_range(-3.0..3.0)).collect()));
        let idf: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..8.0)).collect();
        let gates = term_gate(&mut g, qe, &idf, w);
        let gs: f64 = g.value(gates).iter().sum();
        bump("gate softmax sums to 1", (gs - 1.0).abs() > 1e-12 || g.value(gates).iter().any(|&x| x < 0.0));
        let (_, attn) = abel_doc_aware(&mut g, qe, cd);
        let bad = g.value(attn).chunks(m).any(|r| (r.iter().sum::<f64>() - 1.0).abs() > 1e-12);
        bump("attention softmax sums to 1", bad);
    }

    for _ in 0..CASES {
        let q = terms_between(&mut rng, 1, 6);
        let d = terms_between(&mut rng, 1, 30);
        let binary = |xs: &[f64]| xs.iter().all(|&x| x == 0.0 || x == 1.0);
        let em = exact_match_matrix(&q, &d);
        let m = d.len();
        let brute = (0..q.len()).all(|i| (0..m).all(|j| em.data()[i * m + j] == f64::from(u8::from(q[i] == d[j]))));
        let (hq, hd) = hashed_exact_match(&q, &d, 2 * DIM);
        bump("exact-match view binary", !binary(em.data()) || !brute || !binary(hq.data()) || !binary(hd.data()));
    }

    let total: usize = violations.values().sum();
    let detail: Vec<String> = violations.iter().map(|(k, v)| format!("{k}: {v}")).collect();
    ensure!(total == 0, "violations: {}", detail.join(", "));
    Ok(format!("{} properties x {CASES} cases, 0 violations", violations.len()))
}

// ---- criterion 5 ----------------------------------------------------------

fn synth_dir(dir: &Path, synth: &SynthConfig, overrides: &[&str]) -> Result<PipelineConfig, String> {
    let path = pipeline::cmd_synth(synth, dir, &PipelineConfig::default()).map_err(|e| e.to_string())?;
    let overrides: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
    PipelineConfig::load(&path, &overrides).map_err(|e| e.to_string())
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let base = synth_dir(tmp.path(), &SynthConfig::default(), &[])?;
    pipeline::cmd_index(&base).map_err(|e| e.to_string())?;
    let index = base.index_path().to_string_lossy().into_owned();
    let run = |arch: &str| {
        let cfg = PipelineConfig::load(
            &tmp.path().join("config.json"),
            &[
                format!("model.architecture={arch}"),
                format!("paths.output=out-{arch}"),
                format!("paths.index={index}"),
            ],
        )
        .map_err(|e| e.to_string())?;
        pipeline::cmd_repeat(&cfg).map_err(|e| e.to_string())
    };
    let posit = run("posit-drmm-mv")?;
    let baseline = run("bm25-extra")?;
    ensure!(posit.per_seed.len() == 5 && baseline.per_seed.len() == 5, "expected 5 seeds");

    let diffs: Vec<f64> = posit.per_seed.iter().zip(&baseline.per_seed).map(|(p, b)| p.test.map - b.test.map).collect();
    let mean_diff = diffs.iter().sum::<f64>() / diffs.len() as f64;
    let per_seed: Vec<String> = posit
        .per_seed
        .iter()
        .zip(&baseline.per_seed)
        .map(|(p, b)| format!("{:.4}>{:.4}", p.test.map, b.test.map))
        .collect();

    let oracle = posit.oracle.metric("ap");
    let mut systems = vec![posit.bm25.metric("ap")];
    systems.extend(posit.per_seed.iter().chain(&baseline.per_seed).map(|s| s.test.metric("ap")));
    let mut oracle_violations = 0;
    for sys in &systems {
        for (q, ap) in sys {
            if oracle.get(q).is_none_or(|o| *o < ap - TIE_TOLERANCE) {
                oracle_violations += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure!(diffs.iter().all(|&d| d > 0.0), "test MAP per seed (posit>baseline): {}", per_seed.join(" "));
    ensure!(mean_diff > 0.0, "mean MAP improvement {mean_diff:.4}");
    ensure!(oracle_violations == 0, "{oracle_violations} query-level oracle violations");
    ensure!(secs < 1800.0, "took {secs:.0}s, limit 1800s");
    Ok(format!(
        "test MAP posit-drmm+mv {:.4}+-{:.4} vs bm25+extra {:.4}+-{:.4} (mean gain {mean_diff:.4}; seeds {}); oracle {:.4} >= all systems on all queries; {secs:.0}s",
        posit.map.mean,
        posit.map.std,
        baseline.map.mean,
        baseline.map.std,
        per_seed.join(" "),
        posit.oracle.map,
    ))
}

// ---- criterion 6 ----------------------------------------------------------

fn exhaustive_p(diffs: &[f64]) -> f64 {
    let n = diffs.len();
    let obs = diffs.iter().sum::<f64>().abs() / n as f64;
    let hits = (0u32..1 << n)
        .filter(|mask| {
            let s: f64 = diffs.iter().enumerate().map(|(i, d)| if mask >> i & 1 == 1 { -d } else { *d }).sum();
            (s / n as f64).abs() >= obs - TIE_TOLERANCE
        })
        .count();
    hits as f64 / (1u64 << n) as f64
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(61);
    let a: BTreeMap<String, f64> = (0..10).map(|i| (format!("q{i}"), rng.random_range(0.0..1.0))).collect();
    let self_test = stratified_shuffle_test("map", &a, &a, 10_000, 1).map_err(|e| e.to_string())?;
    ensure!(self_test.p_value == 1.0, "self p-value {}", self_test.p_value);

    let hi: BTreeMap<String, f64> = (0..10).map(|i| (format!("q{i}"), 0.75)).collect();
    let lo: BTreeMap<String, f64> = (0..10).map(|i| (format!("q{i}"), 0.25)).collect();
    let r = stratified_shuffle_test("map", &hi, &lo, 10_000, 2).map_err(|e| e.to_string())?;
    let exact = exhaustive_p(&[0.5; 10]);
    // Monte Carlo estimate of `exact` from 10,000 draws; 5 sd of slack.
    let sd = (exact * (1.0 - exact) / 10_000.0).sqrt();
    ensure!(r.p_value <= 0.01, "constant difference p {}", r.p_value);
    ensure!((r.p_value - exact).abs() <= 5.0 * sd + 1.0 / 10_001.0, "p {} vs exhaustive {exact}", r.p_value);
    Ok(format!("self p = 1.0; constant diff p = {:.5} (exhaustive 2^10: {exact:.5})", r.p_value))
}

// ---- criterion 7 ----------------------------------------------------------

fn relrank(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_relrank"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("relrank {}: {}", args.join(" "), String::from_utf8_lossy(&out.stderr).trim()));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn small_synth() -> SynthConfig {
    SynthConfig { docs: 400, queries: 60, train_queries: 36, dev_queries: 12, concepts: 60, fillers: 300, ..SynthConfig::default() }
}

fn snapshot(dir: &Path, names: &[&str]) -> Result<Vec<Vec<u8>>, String> {
    names.iter().map(|n| std::fs::read(dir.join(n)).map_err(|e| format!("{n}: {e}"))).collect()
}

fn criterion_7() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = pipeline::cmd_synth(&small_synth(), tmp.path(), &PipelineConfig::default()).map_err(|e| e.to_string())?;
    let cfg = cfg.to_string_lossy().into_owned();
    let out = tmp.path().join("out");
    let files = [
        "index.bin",
        "bm25.run",
        "train_log.jsonl",
        "model.ckpt",
        "rerank.run",
        "bm25.run.meta.json",
        "model.ckpt.meta.json",
        "rerank.run.meta.json",
    ];
    let mut runs = Vec::new();
    for _ in 0..2 {
        relrank(&["-c", &cfg, "index"])?;
        relrank(&["-c", &cfg, "retrieve"])?;
        relrank(&["-c", &cfg, "--set", "training.max_epochs=4", "train"])?;
        relrank(&["-c", &cfg, "--set", "training.max_epochs=4", "rerank"])?;
        runs.push(snapshot(&out, &files)?);
        std::fs::remove_dir_all(&out).map_err(|e| e.to_string())?;
    }
    for (i, name) in files.iter().enumerate() {
        ensure!(runs[0][i] == runs[1][i], "{name} differs between runs");
    }
    Ok(format!("{} artifacts byte-identical across two runs", files.len()))
}

// ---- criterion 8 ----------------------------------------------------------

/// Rewrites a synthetic collection in the external formats: title/abstract
/// JSONL with dates, queries with a date cutoff field, binary word2vec.
fn external_collection(dir: &Path) -> Result<(), String> {
    let s = generate(&SynthConfig { docs: 1200, queries: 50, train_queries: 30, dev_queries: 10, ..small_synth() })
        .map_err(|e| e.to_string())?;
    let mut corpus = String::new();
    for (i, d) in s.docs.iter().enumerate() {
        let (title, abs) = d.text.split_at(d.text.find(' ').unwrap_or(0));
        let line = serde_json::json!({
            "id": 24_000_000 + i,
            "title": title,
            "abstract": abs.trim(),
            "date": format!("{}-{:02}", 2010 + i % 8, 1 + i % 12),
        });
        corpus.push_str(&format!("{line}\n"));
    }
    let ids: BTreeMap<&str, String> = s.docs.iter().enumerate().map(|(i, d)| (d.id.as_str(), (24_000_000 + i).to_string())).collect();
    let mut queries = String::new();
    for q in &s.queries {
        queries.push_str(&format!("{}\n", serde_json::json!({"id": q.id, "body": q.text, "cutoff": "2016"})));
    }
    let mut qrels = String::new();
    for line in s.qrels.to_trec().lines() {
        let f: Vec<&str> = line.split_whitespace().collect();
        qrels.push_str(&format!("{} 0 {} {}\n", f[0], ids[f[2]], f[3]));
    }
    let write = |name: &str, body: &str| std::fs::write(dir.join(name), body).map_err(|e| e.to_string());
    write("corpus.jsonl", &corpus)?;
    write("queries.jsonl", &queries)?;
    write("qrels.txt", &qrels)?;
    save_word_vectors(dir.join("vectors.bin"), &s.vectors, EmbeddingFormat::Word2vecBinary).map_err(|e| e.to_string())?;
    let config = serde_json::json!({
        "paths": {
            "corpus": "corpus.jsonl",
            "queries": "queries.jsonl",
            "qrels": "qrels.txt",
            "embeddings": "vectors.bin",
            "output": "out",
        },
        "embeddings_format": "word2vec-binary",
        "cutoff_field": "cutoff",
        "training": {"max_epochs": 2},
    });
    write("config.json", &serde_json::to_string_pretty(&config).unwrap())
}

fn criterion_8() -> Outcome {
    let start = Instant::now();
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    external_collection(tmp.path())?;
    let cfg = tmp.path().join("config.json").to_string_lossy().into_owned();
    let out = tmp.path().join("out");
    relrank(&["-c", &cfg, "index"])?;
    for n in [100, 1000] {
        relrank(&["-c", &cfg, "--set", &format!("n={n}"), "retrieve"])?;
        let run = load_run(out.join("bm25.run")).map_err(|e| e.to_string())?;
        ensure!(run.iter().all(|l| l.entries.len() <= n), "n={n}: list longer than n");
        ensure!(run.iter().any(|l| l.entries.len() > 100) == (n > 100), "n={n}: unexpected list lengths");
    }
    let folds = relrank(&["-c", &cfg, "xval"])?;
    let fold0 = folds.lines().next().ok_or("xval wrote no folds")?.to_string();
    for n in ["100", "1000"] {
        let set = format!("n={n}");
        relrank(&["-c", &fold0, "--set", &set, "train"])?;
        relrank(&["-c", &fold0, "--set", &set, "rerank"])?;
        let fold_out = Path::new(&fold0).parent().unwrap().to_path_buf();
        relrank(&["-c", &fold0, "--set", &set, "retrieve", "--split", "test"])?;
        let eval = relrank(&[
            "-c",
            &fold0,
            "eval",
            &fold_out.join("rerank.run").to_string_lossy(),
            &fold_out.join("bm25.run").to_string_lossy(),
            "--split",
            "test",
        ])?;
        ensure!(eval.contains("map "), "eval printed no significance line");
    }
    let summary = relrank(&["-c", &fold0, "repeat"])?;
    let v: serde_json::Value = serde_json::from_str(&summary).map_err(|e| e.to_string())?;
    ensure!(v["per_seed"].as_array().map(Vec::len) == Some(5), "repeat did not run 5 seeds");
    ensure!(v["map"]["std"].as_f64().is_some(), "repeat summary lacks std");
    Ok(format!(
        "external formats: index, retrieve N=100/1000, xval, train, rerank, eval, 5-seed repeat (MAP {:.4}+-{:.4}); {:.0}s",
        v["map"]["mean"].as_f64().unwrap(),
        v["map"]["std"].as_f64().unwrap(),
        start.elapsed().as_secs_f64()
    ))
}

// ---- driver ---------------------------------------------------------------

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("gradient suite", criterion_1),
        ("oracle equivalences", criterion_2),
        ("anchored unit values", criterion_3),
        ("invariance suite", criterion_4),
        ("synthetic end-to-end", criterion_5),
        ("significance machinery", criterion_6),
        ("determinism", criterion_7),
        ("external-format pipeline", criterion_8),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let id = format!("{}", i + 1);
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or(p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        match outcome {
            Ok(detail) => println!("criterion {id} ({name}): PASS {detail}"),
            Err(why) => {
                failed += 1;
                println!("criterion {id} ({name}): FAIL {why}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
