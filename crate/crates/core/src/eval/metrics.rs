use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::Qrels;
use crate::retrieval::RankedList;

/// Cutoff for P@k and nDCG@k.
pub const METRIC_DEPTH: usize = 20;

/// Average precision with the total number of judged-relevant documents as
/// denominator. `None` when the query has no relevant documents.
pub fn average_precision(ranking: &[&str], is_rel: impl Fn(&str) -> bool, total_relevant: usize) -> Option<f64> {
    if total_relevant == 0 {
        return None;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, d) in ranking.iter().enumerate() {
        if is_rel(d) {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    Some(sum / total_relevant as f64)
}

/// Relevant documents in the top `k` divided by `k`.
pub fn precision_at_k(ranking: &[&str], is_rel: impl Fn(&str) -> bool, k: usize) -> f64 {
    assert!(k >= 1, "precision cutoff must be positive");
    ranking.iter().take(k).filter(|d| is_rel(d)).count() as f64 / k as f64
}

/// Binary-gain nDCG with `1 / log2(rank + 1)` discounts; 0 when nothing is relevant.
pub fn ndcg_at_k(ranking: &[&str], is_rel: impl Fn(&str) -> bool, total_relevant: usize, k: usize) -> f64 {
    assert!(k >= 1, "nDCG cutoff must be positive");
    let disc = |r: usize| 1.0 / ((r + 1) as f64).log2();
    let dcg: f64 = ranking
        .iter()
        .take(k)
        .enumerate()
        .filter(|(_, d)| is_rel(d))
        .map(|(i, _)| disc(i + 1))
        .fold(0.0, |a, x| a + x);
    let idcg: f64 = (1..=total_relevant.min(k)).map(disc).sum();
    if idcg == 0.0 {
        0.0
    } else {
        dcg / idcg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryMetrics {
    pub query_id: String,
    pub ap: f64,
    pub p20: f64,
    pub ndcg20: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub run_id: String,
    pub per_query: Vec<QueryMetrics>,
    pub map: f64,
    pub p20: f64,
    pub ndcg20: f64,
    /// Queries in the run that were skipped: unknown to the qrels or
    /// without relevant documents.
    pub skipped: Vec<String>,
}

impl MetricsReport {
    pub fn metric(&self, name: &str) -> BTreeMap<String, f64> {
        self.per_query
            .iter()
            .map(|q| {
                let v = match name {
                    "map" | "ap" => q.ap,
                    "p20" => q.p20,
                    "ndcg20" => q.ndcg20,
                    other => panic!("unknown metric {other}"),
                };
                (q.query_id.clone(), v)
            })
            .collect()
    }

    /// Aligned-column table, one row per query then the means.
    pub fn to_table(&self) -> String {
        let w = self
            .per_query
            .iter()
            .map(|q| q.query_id.len())
            .max()
            .unwrap_or(0)
            .max(5);
        let mut s = format!("{:<w$}  {:>8}  {:>8}  {:>8}\n", "query", "AP", "P@20", "nDCG@20");
        for q in &self.per_query {
            s.push_str(&format!("{:<w$}  {:>8.4}  {:>8.4}  {:>8.4}\n", q.query_id, q.ap, q.p20, q.ndcg20));
        }
        s.push_str(&format!("{:<w$}  {:>8.4}  {:>8.4}  {:>8.4}\n", "all", self.map, self.p20, self.ndcg20));
        s
    }
}

/// Per-query and mean metrics. Queries are reported in `query_id` order.
pub fn evaluate_run(run: &[RankedList], qrels: &Qrels, run_id: &str) -> MetricsReport {
    let mut per_query = Vec::new();
    let mut skipped = Vec::new();
    let mut lists: Vec<&RankedList> = run.iter().collect();
    lists.sort_by(|a, b| a.query_id.cmp(&b.query_id));
    for l in lists {
        let qid = l.query_id.as_str();
        if !qrels.contains_query(qid) {
            log::warn!("run {run_id}: query {qid} has no judgments; skipped");
            skipped.push(qid.to_string());
            continue;
        }
        let total = qrels.num_relevant(qid);
        let ranking: Vec<&str> = l.doc_ids().collect();
        let rel = |d: &str| qrels.is_relevant(qid, d);
        let Some(ap) = average_precision(&ranking, rel, total) else {
            skipped.push(qid.to_string());
            continue;
        };
        per_query.push(QueryMetrics {
            query_id: qid.to_string(),
            ap,
            p20: precision_at_k(&ranking, rel, METRIC_DEPTH),
            ndcg20: ndcg_at_k(&ranking, rel, total, METRIC_DEPTH),
        });
    }
    let mean = |f: fn(&QueryMetrics) -> f64| {
        if per_query.is_empty() {
            0.0
        } else {
            per_query.iter().map(f).sum::<f64>() / per_query.len() as f64
        }
    };
    MetricsReport {
        run_id: run_id.to_string(),
        map: mean(|q| q.ap),
        p20: mean(|q| q.p20),
        ndcg20: mean(|q| q.ndcg20),
        per_query,
        skipped,
    }
}

/// Mean and sample standard deviation (n - 1 denominator; 0 for n < 2).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (m, 0.0);
    }
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, v.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::retrieval::oracle_rerank;
    use approx::assert_abs_diff_eq;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rels<'a>(set: &'a [&'a str]) -> impl Fn(&str) -> bool + 'a {
        move |d| set.contains(&d)
    }

    #[test]
    fn ap_examples() {
        assert_eq!(average_precision(&["a", "b", "c"], rels(&["a", "b"]), 2), Some(1.0));
        assert_eq!(average_precision(&["x", "a", "y", "b"], rels(&["a", "b"]), 2), Some(0.5));
        assert_eq!(average_precision(&["x"], rels(&[]), 0), None);
    }

    #[test]
    fn precision_examples() {
        let ranking: Vec<String> = (0..20).map(|i| format!("d{i}")).collect();
        let r: Vec<&str> = ranking.iter().map(String::as_str).collect();
        assert_eq!(precision_at_k(&r, rels(&["d0", "d3", "d7", "d11", "d19"]), 20), 0.25);
        assert_eq!(precision_at_k(&[], rels(&["a"]), 20), 0.0);
    }

    #[test]
    fn ndcg_examples() {
        let r: Vec<String> = (0..25).map(|i| format!("d{i}")).collect();
        let r: Vec<&str> = r.iter().map(String::as_str).collect();
        assert_eq!(ndcg_at_k(&r, |_| true, 30, 20), 1.0);
        assert_abs_diff_eq!(ndcg_at_k(&["x", "a"], rels(&["a"]), 1, 20), 1.0 / 3f64.log2(), epsilon = 1e-15);
        assert_abs_diff_eq!(ndcg_at_k(&["x", "a"], rels(&["a"]), 1, 20), 0.6309, epsilon = 5e-5);
    }

    /// Definition-level AP: mean over every relevant document of precision
    /// at its rank, counting unretrieved ones as zero.
    fn ap_oracle(ranking: &[&str], relevant: &[&str]) -> f64 {
        let mut total = 0.0;
        for r in relevant {
            if let Some(pos) = ranking.iter().position(|d| d == r) {
                let above = ranking[..=pos].iter().filter(|d| relevant.contains(d)).count();
                total += above as f64 / (pos + 1) as f64;
            }
        }
        total / relevant.len() as f64
    }

    #[test]
    fn random_instances_match_definitions() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let pool: Vec<String> = (0..60).map(|i| format!("d{i}")).collect();
            let mut ranking: Vec<&str> = pool.iter().map(String::as_str).collect();
            ranking.shuffle(&mut rng);
            ranking.truncate(rng.random_range(0..50));
            let relevant: Vec<&str> = pool.iter().map(String::as_str).filter(|_| rng.random_bool(0.2)).collect();
            if relevant.is_empty() {
                continue;
            }
            let rel = rels(&relevant);
            let ap = average_precision(&ranking, &rel, relevant.len()).unwrap();
            assert!((ap - ap_oracle(&ranking, &relevant)).abs() <= 1e-10);
            let cnt = ranking.iter().take(20).filter(|d| relevant.contains(d)).count();
            assert_eq!(precision_at_k(&ranking, &rel, 20), cnt as f64 / 20.0);
            let mut dcg = 0.0;
            for (i, d) in ranking.iter().enumerate().take(20) {
                if relevant.contains(d) {
                    dcg += 1.0 / (i as f64 + 2.0).log2();
                }
            }
            let mut idcg = 0.0;
            for i in 0..relevant.len().min(20) {
                idcg += 1.0 / (i as f64 + 2.0).log2();
            }
            assert!((ndcg_at_k(&ranking, &rel, relevant.len(), 20) - dcg / idcg).abs() <= 1e-10);
        }
    }

    #[test]
    fn evaluate_run_skips_and_averages() {
        let qrels = Qrels::parse("q1 0 a 1\nq1 0 b 1\nq2 0 c 0\n").unwrap();
        let run = vec![
            RankedList::from_scores("q1", vec![("a".into(), 2.0), ("x".into(), 1.5), ("b".into(), 1.0)]),
            RankedList::from_scores("q2", vec![("c".into(), 1.0)]),
            RankedList::from_scores("q9", vec![("c".into(), 1.0)]),
        ];
        let rep = evaluate_run(&run, &qrels, "r");
        assert_eq!(rep.per_query.len(), 1);
        assert_abs_diff_eq!(rep.map, (1.0 + 2.0 / 3.0) / 2.0, epsilon = 1e-15);
        assert_eq!(rep.skipped, ["q2", "q9"]);
        assert_eq!(rep, evaluate_run(&run, &qrels, "r"));
        assert!(rep.to_table().contains("all"));
    }

    #[test]
    fn oracle_reaches_one_when_all_relevant_retrieved() {
        let qrels = Qrels::parse("q 0 c 1\nq 0 e 1\n").unwrap();
        let l = RankedList::from_scores("q", ["a", "b", "c", "d", "e"].iter().enumerate().map(|(i, d)| (d.to_string(), -(i as f64))).collect());
        let rep = evaluate_run(&[oracle_rerank(&l, &qrels)], &qrels, "oracle");
        assert_eq!(rep.map, 1.0);
    }

    #[test]
    fn relabeling_invariance() {
        let qrels = Qrels::parse("q 0 a 1\nq 0 c 1\n").unwrap();
        let relabeled = Qrels::parse("q 0 A 1\nq 0 C 1\n").unwrap();
        let l = RankedList::from_scores("q", vec![("b".into(), 3.0), ("a".into(), 2.0), ("c".into(), 1.0)]);
        let l2 = RankedList::from_scores("q", vec![("B".into(), 3.0), ("A".into(), 2.0), ("C".into(), 1.0)]);
        let r1 = evaluate_run(&[l], &qrels, "x");
        let r2 = evaluate_run(&[l2], &relabeled, "x");
        assert_eq!(r1.per_query, r2.per_query);
    }

    #[test]
    fn mean_std_sample() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert_abs_diff_eq!(s, (5.0f64 / 3.0).sqrt(), epsilon = 1e-15);
        assert_eq!(mean_std(&[7.0]), (7.0, 0.0));
    }
}
