//! Synthetic ad-hoc retrieval collections.
//!
//! Each query names a few concepts. A concept has several surface forms
//! whose embeddings lie close together, and every mention of a concept in a
//! document is preceded by a cue word that is either affirming or negating.
//! A document is relevant when the weighted share of query concepts it
//! mentions under an affirming cue, plus noise, passes a threshold. Exact
//! term overlap is therefore informative but incomplete: synonyms are only
//! visible through embeddings and cues only through context.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::embed::{save_word_vectors, EmbeddingFormat, WordVectors};
use crate::error::{Error, Result};
use crate::eval::Qrels;
use crate::text::{Analyzer, RawDocument, RawQuery};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub docs: usize,
    pub queries: usize,
    pub concepts: usize,
    /// Surface forms per concept; the first is used in queries.
    pub synonyms: usize,
    pub fillers: usize,
    /// Affirming and negating cue words each.
    pub cues: usize,
    pub dim: usize,
    /// Norm of the offset of each synonym vector from its unit concept
    /// vector (in expectation).
    pub synonym_noise: f64,
    pub min_filler: usize,
    pub max_filler: usize,
    /// Probability that a document is written around one query's concepts.
    pub focus_rate: f64,
    /// Standard deviation of the relevance noise.
    pub label_noise: f64,
    pub threshold: f64,
    /// Query counts for the train and dev splits; the rest is test.
    pub train_queries: usize,
    pub dev_queries: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            docs: 2000,
            queries: 200,
            concepts: 150,
            synonyms: 3,
            fillers: 600,
            cues: 6,
            dim: 16,
            synonym_noise: 0.35,
            min_filler: 15,
            max_filler: 30,
            focus_rate: 0.7,
            label_noise: 0.1,
            threshold: 0.5,
            train_queries: 120,
            dev_queries: 40,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<String>,
    pub dev: Vec<String>,
    pub test: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct SynthCollection {
    pub docs: Vec<RawDocument>,
    pub queries: Vec<RawQuery>,
    pub qrels: Qrels,
    pub vectors: WordVectors,
    pub splits: Splits,
}

const CONSONANTS: &[u8] = b"bdfgklmnprtvz";
const VOWELS: &[u8] = b"aou";

/// Distinct pronounceable words that the analyzer leaves unchanged.
fn pseudo_words(rng: &mut ChaCha8Rng, n: usize, analyzer: &Analyzer, taken: &mut BTreeSet<String>) -> Vec<String> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let syllables = rng.random_range(2..=4);
        let mut w = String::new();
        for _ in 0..syllables {
            w.push(*CONSONANTS.choose(rng).unwrap() as char);
            w.push(*VOWELS.choose(rng).unwrap() as char);
        }
        if analyzer.analyze(&w) == [w.clone()] && taken.insert(w.clone()) {
            out.push(w);
        }
    }
    out
}

fn unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let v: Vec<f64> = (0..dim).map(|_| normal.sample(rng)).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / n).collect()
}

struct Mention {
    concept: usize,
    form: usize,
    affirmed: bool,
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthCollection> {
    if cfg.train_queries + cfg.dev_queries >= cfg.queries {
        return Err(Error::Config("train and dev splits leave no test queries".into()));
    }
    if cfg.concepts < 4 || cfg.synonyms == 0 || cfg.cues == 0 || cfg.fillers == 0 || cfg.dim == 0 {
        return Err(Error::Config("synthetic vocabulary sizes must be positive".into()));
    }
    if cfg.min_filler > cfg.max_filler {
        return Err(Error::Config("min_filler exceeds max_filler".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let analyzer = Analyzer::default();
    let mut taken = BTreeSet::new();
    let forms: Vec<Vec<String>> = (0..cfg.concepts)
        .map(|_| pseudo_words(&mut rng, cfg.synonyms, &analyzer, &mut taken))
        .collect();
    let affirm = pseudo_words(&mut rng, cfg.cues, &analyzer, &mut taken);
    let negate = pseudo_words(&mut rng, cfg.cues, &analyzer, &mut taken);
    let fillers = pseudo_words(&mut rng, cfg.fillers, &analyzer, &mut taken);
    let weights: Vec<f64> = (0..cfg.concepts).map(|_| rng.random_range(0.5..1.5)).collect();

    // embeddings
    let noise = Normal::new(0.0, cfg.synonym_noise / (cfg.dim as f64).sqrt()).unwrap();
    let mut tokens = Vec::new();
    let mut data = Vec::new();
    for f in &forms {
        let centre = unit(&mut rng, cfg.dim);
        for w in f {
            tokens.push(w.clone());
            data.extend(centre.iter().map(|&c| (c + noise.sample(&mut rng)) as f32));
        }
    }
    for w in affirm.iter().chain(&negate).chain(&fillers) {
        tokens.push(w.clone());
        data.extend(unit(&mut rng, cfg.dim).into_iter().map(|x| x as f32));
    }
    let vectors = WordVectors { dim: cfg.dim, tokens, data };

    // queries
    let concept_ids: Vec<usize> = (0..cfg.concepts).collect();
    let query_concepts: Vec<Vec<usize>> = (0..cfg.queries)
        .map(|_| {
            let n = rng.random_range(2..=3);
            concept_ids.choose_multiple(&mut rng, n).copied().collect()
        })
        .collect();
    let qid = |i: usize| format!("q{i:03}");
    let queries: Vec<RawQuery> = query_concepts
        .iter()
        .enumerate()
        .map(|(i, cs)| RawQuery {
            id: qid(i),
            text: cs.iter().map(|&c| forms[c][0].as_str()).collect::<Vec<_>>().join(" "),
            cutoff: None,
        })
        .collect();

    // documents
    let mut docs = Vec::with_capacity(cfg.docs);
    let mut mentions_of = Vec::with_capacity(cfg.docs);
    for d in 0..cfg.docs {
        let mut mentions = Vec::new();
        if rng.random_bool(cfg.focus_rate) {
            let focus = &query_concepts[rng.random_range(0..cfg.queries)];
            let k = rng.random_range(1..=focus.len());
            for &c in focus.choose_multiple(&mut rng, k) {
                mentions.push(c);
            }
        }
        for _ in 0..rng.random_range(1..=3) {
            mentions.push(rng.random_range(0..cfg.concepts));
        }
        let mentions: Vec<Mention> = mentions
            .into_iter()
            .map(|concept| Mention {
                concept,
                form: rng.random_range(0..cfg.synonyms),
                affirmed: rng.random_bool(0.5),
            })
            .collect();
        let n_fill = rng.random_range(cfg.min_filler..=cfg.max_filler);
        let mut words: Vec<String> = (0..n_fill).map(|_| fillers.choose(&mut rng).unwrap().clone()).collect();
        for m in &mentions {
            let at = rng.random_range(0..=words.len());
            let cue = if m.affirmed { affirm.choose(&mut rng) } else { negate.choose(&mut rng) };
            words.insert(at, forms[m.concept][m.form].clone());
            words.insert(at, cue.unwrap().clone());
        }
        docs.push(RawDocument::new(format!("d{d:05}"), words.join(" ")));
        mentions_of.push(mentions);
    }

    // judgments
    let label_noise = Normal::new(0.0, cfg.label_noise.max(0.0)).unwrap();
    let mut qrels = Qrels::new();
    for (qi, cs) in query_concepts.iter().enumerate() {
        let total: f64 = cs.iter().map(|&c| weights[c]).sum();
        for (di, ms) in mentions_of.iter().enumerate() {
            if !ms.iter().any(|m| cs.contains(&m.concept)) {
                continue;
            }
            let hit: f64 = cs
                .iter()
                .filter(|&&c| ms.iter().any(|m| m.concept == c && m.affirmed))
                .map(|&c| weights[c])
                .sum();
            if hit / total + label_noise.sample(&mut rng) > cfg.threshold {
                qrels.insert(&qid(qi), &docs[di].id, true)?;
            }
        }
    }

    let mut order: Vec<String> = (0..cfg.queries).map(qid).collect();
    order.shuffle(&mut rng);
    let mut take = |n: usize| {
        let mut v: Vec<String> = order.drain(..n).collect();
        v.sort();
        v
    };
    let train = take(cfg.train_queries);
    let dev = take(cfg.dev_queries);
    let rest = cfg.queries - cfg.train_queries - cfg.dev_queries;
    let test = take(rest);
    Ok(SynthCollection { docs, queries, qrels, vectors, splits: Splits { train, dev, test } })
}

/// File names written by [`SynthCollection::write_dir`].
pub const CORPUS_FILE: &str = "corpus.jsonl";
pub const QUERIES_FILE: &str = "queries.jsonl";
pub const QRELS_FILE: &str = "qrels.txt";
pub const VECTORS_FILE: &str = "vectors.txt";
pub const SPLITS_FILE: &str = "splits.json";

impl SynthCollection {
    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
        let write = |name: &str, body: &[u8]| -> Result<()> {
            let p = dir.join(name);
            let mut f = std::fs::File::create(&p).map_err(|e| Error::file(&p, e))?;
            f.write_all(body).map_err(|e| Error::file(&p, e))
        };
        let mut corpus = String::new();
        for d in &self.docs {
            corpus.push_str(&serde_json::json!({"id": d.id, "text": d.text}).to_string());
            corpus.push('\n');
        }
        write(CORPUS_FILE, corpus.as_bytes())?;
        let mut qs = String::new();
        for q in &self.queries {
            qs.push_str(&serde_json::json!({"id": q.id, "text": q.text}).to_string());
            qs.push('\n');
        }
        write(QUERIES_FILE, qs.as_bytes())?;
        write(QRELS_FILE, self.qrels.to_trec().as_bytes())?;
        write(SPLITS_FILE, serde_json::to_string_pretty(&self.splits)?.as_bytes())?;
        save_word_vectors(dir.join(VECTORS_FILE), &self.vectors, EmbeddingFormat::Word2vecText)
    }

    /// Relevant documents per query.
    pub fn relevant_counts(&self) -> BTreeMap<String, usize> {
        self.queries.iter().map(|q| (q.id.clone(), self.qrels.num_relevant(&q.id))).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthConfig {
        SynthConfig { docs: 200, queries: 20, concepts: 30, train_queries: 10, dev_queries: 5, ..SynthConfig::default() }
    }

    #[test]
    fn deterministic_for_a_seed() {
        let a = generate(&small()).unwrap();
        let b = generate(&small()).unwrap();
        assert_eq!(a.docs, b.docs);
        assert_eq!(a.qrels, b.qrels);
        assert_eq!(a.vectors, b.vectors);
        let c = generate(&SynthConfig { seed: 1, ..small() }).unwrap();
        assert_ne!(a.docs, c.docs);
    }

    #[test]
    fn splits_partition_the_queries() {
        let s = generate(&small()).unwrap();
        let mut all: Vec<&String> = s.splits.train.iter().chain(&s.splits.dev).chain(&s.splits.test).collect();
        assert_eq!(all.len(), 20);
        all.sort();
        all.dedup();
        assert_eq!(all.len(), 20);
        assert_eq!(s.splits.train.len(), 10);
        assert_eq!(s.splits.test.len(), 5);
    }

    #[test]
    fn words_survive_analysis() {
        let s = generate(&small()).unwrap();
        let a = Analyzer::default();
        let words: Vec<&str> = s.docs[0].text.split(' ').collect();
        assert_eq!(a.analyze(&s.docs[0].text), words);
        assert_eq!(s.vectors.tokens.len(), 30 * 3 + 2 * 6 + 600);
    }

    #[test]
    fn synonyms_are_closer_than_strangers() {
        let s = generate(&small()).unwrap();
        let v = |i: usize| s.vectors.row(i).iter().map(|&x| x as f64).collect::<Vec<_>>();
        let cos = |a: &[f64], b: &[f64]| crate::models::cosine(a, b);
        let (mut syn, mut other) = (0.0, 0.0);
        for c in 0..30 {
            syn += cos(&v(3 * c), &v(3 * c + 1));
            other += cos(&v(3 * c), &v((3 * c + 3) % 90));
        }
        assert!(syn / 30.0 > 0.6, "{}", syn / 30.0);
        assert!((other / 30.0).abs() < 0.3);
    }

    #[test]
    fn most_queries_have_relevant_documents() {
        let s = generate(&small()).unwrap();
        let with = s.relevant_counts().values().filter(|&&n| n > 0).count();
        assert!(with >= 15, "{with}");
    }
}
