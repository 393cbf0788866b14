//! Subcommand implementations. Each reads its inputs from the paths in a
//! [`PipelineConfig`] and writes artifacts under `paths.output`, every one
//! with a `.meta.json` provenance sidecar.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use relrank::autodiff::{load_checkpoint, restore_into, save_checkpoint};
use relrank::embed::EmbeddingMatrix;
use relrank::eval::{evaluate_run, mean_std, stratified_shuffle_test, MetricsReport, Qrels, SignificanceResult, DEFAULT_PERMUTATIONS};
use relrank::models::{inspect_pair, InspectDump, Ranker, Resources};
use relrank::retrieval::{
    load_index, load_run, oracle_rerank, retrieve_top_n, save_index, save_run, IndexMeta, InvertedIndex, RankedList,
};
use relrank::synth::{generate, Splits, SynthConfig};
use relrank::text::{process_corpus, read_corpus, read_queries, Analyzer, ProcessedQuery, PubDate, Stopwords, Vocabulary};
use relrank::training::{rerank_all, train, EpochLog, RerankQuery, TrainData};
use relrank::{Error, Result};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{hash_file, ArtifactMeta, PipelineConfig};

pub const BM25_RUN: &str = "bm25.run";
pub const RERANK_RUN: &str = "rerank.run";
pub const ORACLE_RUN: &str = "oracle.run";
pub const CHECKPOINT: &str = "model.ckpt";
pub const TRAIN_LOG: &str = "train_log.jsonl";
pub const TRAIN_TIMING: &str = "train_timing.jsonl";

/// Which queries a command works on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Dev,
    Test,
    All,
}

impl Split {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Self::Train),
            "dev" => Ok(Self::Dev),
            "test" => Ok(Self::Test),
            "all" => Ok(Self::All),
            other => Err(Error::Config(format!("unknown split {other:?}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Train => "train",
            Self::Dev => "dev",
            Self::Test => "test",
            Self::All => "all",
        }
    }
}

fn create_dir(p: &Path) -> Result<()> {
    std::fs::create_dir_all(p).map_err(|e| Error::file(p, e))
}

fn write_text(path: &Path, body: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        create_dir(parent)?;
    }
    std::fs::write(path, body).map_err(|e| Error::file(path, e))
}

fn meta(cfg: &PipelineConfig, command: &str, inputs: BTreeMap<String, String>, details: serde_json::Value) -> ArtifactMeta {
    ArtifactMeta { command: command.into(), seed: cfg.seed, config_hash: cfg.hash(), inputs, details }
}

pub fn load_analyzer(cfg: &PipelineConfig) -> Result<Analyzer> {
    let sw = match &cfg.paths.stopwords {
        Some(p) => Stopwords::from_file(p)?,
        None => Stopwords::english(),
    };
    Analyzer::from_ids(&cfg.stemmer, sw)
}

// ---- index ----------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexSummary {
    pub path: PathBuf,
    pub documents: usize,
    pub skipped_empty: usize,
    pub vocabulary: usize,
    pub avg_doc_length: f64,
}

pub fn cmd_index(cfg: &PipelineConfig) -> Result<IndexSummary> {
    let corpus_path = cfg.paths.require(&cfg.paths.corpus, "corpus")?;
    let analyzer = load_analyzer(cfg)?;
    let raw = read_corpus(corpus_path)?;
    if raw.is_empty() {
        return Err(Error::Config(format!("corpus {} is empty", corpus_path.display())));
    }
    let mut vocab = Vocabulary::new();
    let (docs, skipped) = process_corpus(&raw, &analyzer, &mut vocab);
    let dates_by_id: BTreeMap<&str, Option<PubDate>> = raw.iter().map(|d| (d.id.as_str(), d.date)).collect();
    let dates = docs.iter().map(|d| dates_by_id[d.doc_id.as_str()]).collect();
    let corpus_hash = hash_file(corpus_path)?;
    let index_meta = IndexMeta {
        stemmer: analyzer.stemmer.id().to_string(),
        stopword_hash: analyzer.stopwords.hash().to_string(),
        corpus_hash: corpus_hash.clone(),
    };
    let index = InvertedIndex::build(docs, Some(dates), vocab, index_meta)?;
    let path = cfg.index_path();
    if let Some(parent) = path.parent() {
        create_dir(parent)?;
    }
    save_index(&path, &index)?;
    let summary = IndexSummary {
        path: path.clone(),
        documents: index.num_docs(),
        skipped_empty: skipped.len(),
        vocabulary: index.vocab().len(),
        avg_doc_length: index.avg_doc_length(),
    };
    meta(cfg, "index", BTreeMap::from([("corpus".into(), corpus_hash)]), serde_json::to_value(&summary)?).write_beside(&path)?;
    Ok(summary)
}

// ---- shared loading ---------------------------------------------------------

/// Index, analyzer and analysed queries; optional judgments, splits and
/// embeddings.
pub struct Context {
    pub index: InvertedIndex,
    pub analyzer: Analyzer,
    /// In file order, with date cutoffs.
    pub queries: Vec<(ProcessedQuery, Option<PubDate>)>,
    pub qrels: Option<Qrels>,
    pub splits: Option<Splits>,
    pub emb: Option<EmbeddingMatrix>,
    pub inputs: BTreeMap<String, String>,
}

impl Context {
    pub fn load(cfg: &PipelineConfig, with_embeddings: bool) -> Result<Self> {
        let analyzer = load_analyzer(cfg)?;
        let index_path = cfg.index_path();
        if !index_path.exists() {
            return Err(Error::Config(format!("index {} not found; run `index` first", index_path.display())));
        }
        let index = load_index(&index_path)?;
        let m = index.meta();
        if m.stemmer != analyzer.stemmer.id() || m.stopword_hash != analyzer.stopwords.hash() {
            return Err(Error::Config(format!(
                "index was built with stemmer {:?} and a different stopword list; rebuild it",
                m.stemmer
            )));
        }
        let mut inputs = BTreeMap::from([("corpus".to_string(), m.corpus_hash.clone())]);
        let qpath = cfg.paths.require(&cfg.paths.queries, "queries")?;
        inputs.insert("queries".into(), hash_file(qpath)?);
        let mut queries = Vec::new();
        let mut seen = BTreeSet::new();
        for q in read_queries(qpath, cfg.cutoff_field.as_deref())? {
            if !seen.insert(q.id.clone()) {
                return Err(Error::Ingest(format!("duplicate query id {}", q.id)));
            }
            match ProcessedQuery::new(q.id.clone(), &analyzer.analyze(&q.text), index.vocab()) {
                Ok(pq) => queries.push((pq, q.cutoff)),
                Err(e) => log::warn!("{e}; query skipped"),
            }
        }
        let qrels = match &cfg.paths.qrels {
            Some(p) => {
                inputs.insert("qrels".into(), hash_file(p)?);
                Some(Qrels::load(p)?)
            }
            None => None,
        };
        let splits = match &cfg.paths.splits {
            Some(p) => {
                inputs.insert("splits".into(), hash_file(p)?);
                let text = std::fs::read_to_string(p).map_err(|e| Error::file(p, e))?;
                Some(serde_json::from_str(&text)?)
            }
            None => None,
        };
        let emb = if with_embeddings {
            let p = cfg.paths.require(&cfg.paths.embeddings, "embeddings")?;
            inputs.insert("embeddings".into(), hash_file(p)?);
            let e = EmbeddingMatrix::load(p, cfg.embeddings_format, index.vocab(), &analyzer)?;
            log::info!("embeddings cover {} of {} index terms", e.coverage(), e.num_terms());
            Some(e)
        } else {
            None
        };
        Ok(Self { index, analyzer, queries, qrels, splits, emb, inputs })
    }

    pub fn qrels(&self) -> Result<&Qrels> {
        self.qrels.as_ref().ok_or_else(|| Error::Config("paths.qrels is not set".into()))
    }

    pub fn emb(&self) -> &EmbeddingMatrix {
        self.emb.as_ref().expect("context loaded with embeddings")
    }

    pub fn resources(&self) -> Resources<'_> {
        Resources { emb: self.emb(), idf: self.index.idf() }
    }

    /// Query ids of a split, in file order.
    pub fn split_ids(&self, split: Split) -> Result<BTreeSet<String>> {
        let all = || self.queries.iter().map(|(q, _)| q.query_id.clone()).collect();
        if split == Split::All {
            return Ok(all());
        }
        let s = self
            .splits
            .as_ref()
            .ok_or_else(|| Error::Config(format!("split {} needs paths.splits", split.name())))?;
        let ids = match split {
            Split::Train => &s.train,
            Split::Dev => &s.dev,
            Split::Test => &s.test,
            Split::All => unreachable!(),
        };
        Ok(ids.iter().cloned().collect())
    }

    /// BM25 top-N for the queries of `split`, in file order.
    pub fn candidates(&self, cfg: &PipelineConfig, split: Split) -> Result<Vec<(ProcessedQuery, RankedList)>> {
        let ids = self.split_ids(split)?;
        Ok(self
            .queries
            .iter()
            .filter(|(q, _)| ids.contains(&q.query_id))
            .map(|(q, cutoff)| (q.clone(), retrieve_top_n(q, &self.index, cfg.n, cfg.bm25, cutoff.as_ref())))
            .collect())
    }

    pub fn rerank_queries(&self, cfg: &PipelineConfig, split: Split) -> Result<Vec<RerankQuery>> {
        self.candidates(cfg, split)?
            .into_iter()
            .map(|(q, list)| RerankQuery::prepare(&self.index, q, &list))
            .collect()
    }
}

// ---- retrieve ---------------------------------------------------------------

pub fn cmd_retrieve(cfg: &PipelineConfig, split: Split) -> Result<PathBuf> {
    let ctx = Context::load(cfg, false)?;
    let lists: Vec<RankedList> = ctx.candidates(cfg, split)?.into_iter().map(|(_, l)| l).collect();
    let path = cfg.output(BM25_RUN);
    create_dir(&cfg.paths.output)?;
    save_run(&path, &lists, "bm25")?;
    meta(cfg, "retrieve", ctx.inputs.clone(), json!({"n": cfg.n, "split": split.name(), "queries": lists.len()})).write_beside(&path)?;
    Ok(path)
}

// ---- train ------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub checkpoint: PathBuf,
    pub best_epoch: usize,
    pub best_dev_map: f64,
    pub epochs: usize,
    pub aborted: Option<String>,
}

fn train_in(cfg: &PipelineConfig, ctx: &Context) -> Result<(Ranker, TrainSummary)> {
    let train_q = ctx.rerank_queries(cfg, Split::Train)?;
    let dev_q = ctx.rerank_queries(cfg, Split::Dev)?;
    let qrels = ctx.qrels()?;
    let data = TrainData { index: &ctx.index, res: ctx.resources(), train: &train_q, dev: &dev_q, qrels };
    let mut ranker = Ranker::new(cfg.model.clone(), ctx.emb(), cfg.seed)?;
    create_dir(&cfg.paths.output)?;
    let log_path = cfg.output(TRAIN_LOG);
    let mut log = BufWriter::new(File::create(&log_path).map_err(|e| Error::file(&log_path, e))?);
    let mut write_err = None;
    let outcome = train(&mut ranker, &data, &cfg.training_config(), |line: &EpochLog| {
        let r = serde_json::to_string(line)
            .map_err(Error::from)
            .and_then(|s| writeln!(log, "{s}").and_then(|_| log.flush()).map_err(|e| Error::file(&log_path, e)));
        if let Err(e) = r {
            write_err.get_or_insert(e);
        }
    })?;
    if let Some(e) = write_err {
        return Err(e);
    }
    drop(log);
    let timing: String = outcome
        .epoch_seconds
        .iter()
        .enumerate()
        .map(|(i, s)| format!("{}\n", json!({"epoch": i + 1, "seconds": s})))
        .collect();
    write_text(&cfg.output(TRAIN_TIMING), &timing)?;
    let ckpt = cfg.output(CHECKPOINT);
    save_checkpoint(&ckpt, &ranker.params)?;
    let summary = TrainSummary {
        checkpoint: ckpt.clone(),
        best_epoch: outcome.best_epoch,
        best_dev_map: outcome.best_dev_map,
        epochs: outcome.log.len(),
        aborted: outcome.aborted.clone(),
    };
    let details = json!({
        "model": cfg.model,
        "training": cfg.training_config(),
        "best_epoch": outcome.best_epoch,
        "best_dev_map": outcome.best_dev_map,
        "epochs": outcome.log.len(),
        "aborted": outcome.aborted,
    });
    let m = meta(cfg, "train", ctx.inputs.clone(), details);
    m.write_beside(&ckpt)?;
    m.write_beside(&log_path)?;
    Ok((ranker, summary))
}

pub fn cmd_train(cfg: &PipelineConfig) -> Result<TrainSummary> {
    let ctx = Context::load(cfg, true)?;
    Ok(train_in(cfg, &ctx)?.1)
}

fn load_ranker(cfg: &PipelineConfig, ctx: &Context) -> Result<Ranker> {
    let ckpt = cfg.output(CHECKPOINT);
    if !ckpt.exists() {
        return Err(Error::Config(format!("checkpoint {} not found; run `train` first", ckpt.display())));
    }
    let mut ranker = Ranker::new(cfg.model.clone(), ctx.emb(), cfg.seed)?;
    restore_into(&mut ranker.params, &load_checkpoint(&ckpt)?)?;
    Ok(ranker)
}

// ---- rerank -----------------------------------------------------------------

fn rerank_in(cfg: &PipelineConfig, ctx: &Context, ranker: &Ranker, split: Split) -> Result<PathBuf> {
    let queries = ctx.rerank_queries(cfg, split)?;
    let lists = rerank_all(ranker, &ctx.resources(), &ctx.index, &queries);
    let path = cfg.output(RERANK_RUN);
    save_run(&path, &lists, cfg.model.architecture.name())?;
    let mut inputs = ctx.inputs.clone();
    inputs.insert("checkpoint".into(), hash_file(&cfg.output(CHECKPOINT))?);
    meta(cfg, "rerank", inputs, json!({"split": split.name(), "queries": lists.len()})).write_beside(&path)?;
    Ok(path)
}

/// Re-ranks the candidates of `split` with the trained checkpoint, or with
/// the judgments when `oracle` is set.
pub fn cmd_rerank(cfg: &PipelineConfig, split: Split, oracle: bool) -> Result<PathBuf> {
    if oracle {
        let ctx = Context::load(cfg, false)?;
        let qrels = ctx.qrels()?;
        let lists: Vec<RankedList> = ctx
            .candidates(cfg, split)?
            .iter()
            .map(|(_, l)| oracle_rerank(l, qrels))
            .collect();
        create_dir(&cfg.paths.output)?;
        let path = cfg.output(ORACLE_RUN);
        save_run(&path, &lists, "oracle")?;
        meta(cfg, "rerank", ctx.inputs.clone(), json!({"split": split.name(), "oracle": true})).write_beside(&path)?;
        return Ok(path);
    }
    let ctx = Context::load(cfg, true)?;
    let ranker = load_ranker(cfg, &ctx)?;
    rerank_in(cfg, &ctx, &ranker, split)
}

// ---- eval -------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub a: MetricsReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<MetricsReport>,
    /// One test per metric when two runs are compared.
    pub significance: Vec<SignificanceResult>,
}

/// Keeps only lists whose query is in `ids`.
pub fn restrict(run: Vec<RankedList>, ids: Option<&BTreeSet<String>>) -> Vec<RankedList> {
    match ids {
        Some(ids) => run.into_iter().filter(|l| ids.contains(&l.query_id)).collect(),
        None => run,
    }
}

/// Significance for every metric over the queries both reports share.
pub fn compare(a: &MetricsReport, b: &MetricsReport, seed: u64) -> Result<Vec<SignificanceResult>> {
    ["map", "p20", "ndcg20"]
        .into_iter()
        .map(|m| {
            let (mut x, mut y) = (a.metric(m), b.metric(m));
            x.retain(|k, _| y.contains_key(k));
            y.retain(|k, _| x.contains_key(k));
            stratified_shuffle_test(m, &x, &y, DEFAULT_PERMUTATIONS, seed)
        })
        .collect()
}

pub fn eval_runs(qrels: &Qrels, run_a: &Path, run_b: Option<&Path>, ids: Option<&BTreeSet<String>>, seed: u64) -> Result<EvalSummary> {
    let name = |p: &Path| p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let a = evaluate_run(&restrict(load_run(run_a)?, ids), qrels, &name(run_a));
    let (b, significance) = match run_b {
        Some(p) => {
            let b = evaluate_run(&restrict(load_run(p)?, ids), qrels, &name(p));
            let s = compare(&a, &b, seed)?;
            (Some(b), s)
        }
        None => (None, Vec::new()),
    };
    Ok(EvalSummary { a, b, significance })
}

pub fn cmd_eval(cfg: &PipelineConfig, run_a: &Path, run_b: Option<&Path>, split: Split) -> Result<EvalSummary> {
    let qpath = cfg.paths.require(&cfg.paths.qrels, "qrels")?;
    let qrels = Qrels::load(qpath)?;
    let ids = if split == Split::All {
        None
    } else {
        let p = cfg.paths.require(&cfg.paths.splits, "splits")?;
        let text = std::fs::read_to_string(p).map_err(|e| Error::file(p, e))?;
        let s: Splits = serde_json::from_str(&text)?;
        Some(match split {
            Split::Train => s.train,
            Split::Dev => s.dev,
            _ => s.test,
        }
        .into_iter()
        .collect::<BTreeSet<_>>())
    };
    eval_runs(&qrels, run_a, run_b, ids.as_ref(), cfg.seed)
}

// ---- inspect ----------------------------------------------------------------

pub fn cmd_inspect(cfg: &PipelineConfig, query_id: &str, doc_id: &str) -> Result<InspectDump> {
    let ctx = Context::load(cfg, true)?;
    let ranker = load_ranker(cfg, &ctx)?;
    let (q, _) = ctx
        .queries
        .iter()
        .find(|(q, _)| q.query_id == query_id)
        .ok_or_else(|| Error::Lookup(format!("query {query_id} not found")))?;
    let doc = ctx.index.document(doc_id)?;
    let terms = &doc.terms[..doc.terms.len().min(cfg.inspect_doc_terms)];
    Ok(inspect_pair(&ranker, &ctx.resources(), ctx.index.vocab(), query_id, doc_id, &q.terms, terms))
}

// ---- xval -------------------------------------------------------------------

/// Writes `fold<k>/splits.json` and `fold<k>/config.json` for each fold:
/// fold k is the test set, fold k+1 the dev set, the rest train. Only
/// judged queries are assigned. Returns the config paths.
pub fn cmd_xval(cfg: &PipelineConfig) -> Result<Vec<PathBuf>> {
    let qpath = cfg.paths.require(&cfg.paths.qrels, "qrels")?;
    let qrels = Qrels::load(qpath)?;
    let queries = read_queries(cfg.paths.require(&cfg.paths.queries, "queries")?, None)?;
    let mut ids: Vec<String> = queries.into_iter().map(|q| q.id).filter(|id| qrels.num_relevant(id) > 0).collect();
    ids.sort();
    ids.dedup();
    if ids.len() < cfg.folds {
        return Err(Error::Config(format!("{} judged queries for {} folds", ids.len(), cfg.folds)));
    }
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed));
    let folds: Vec<Vec<String>> = (0..cfg.folds)
        .map(|k| {
            let mut f: Vec<String> = ids.iter().skip(k).step_by(cfg.folds).cloned().collect();
            f.sort();
            f
        })
        .collect();
    let mut out = Vec::new();
    for k in 0..cfg.folds {
        let dev_k = (k + 1) % cfg.folds;
        let mut train: Vec<String> = (0..cfg.folds).filter(|&j| j != k && j != dev_k).flat_map(|j| folds[j].clone()).collect();
        train.sort();
        let splits = Splits { train, dev: folds[dev_k].clone(), test: folds[k].clone() };
        let dir = cfg.output(&format!("fold{k}"));
        let splits_path = dir.join("splits.json");
        write_text(&splits_path, &(serde_json::to_string_pretty(&splits)? + "\n"))?;
        let mut fold_cfg = cfg.clone();
        fold_cfg.paths.splits = Some(splits_path);
        fold_cfg.paths.output = dir.clone();
        if fold_cfg.paths.index.is_none() {
            fold_cfg.paths.index = Some(cfg.index_path());
        }
        let cpath = dir.join("config.json");
        write_text(&cpath, &(serde_json::to_string_pretty(&fold_cfg)? + "\n"))?;
        out.push(cpath);
    }
    Ok(out)
}

// ---- repeat -----------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub best_epoch: usize,
    pub best_dev_map: f64,
    pub test: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatSummary {
    pub architecture: String,
    pub per_seed: Vec<SeedResult>,
    pub map: MeanStd,
    pub p20: MeanStd,
    pub ndcg20: MeanStd,
    pub bm25: MetricsReport,
    pub oracle: MetricsReport,
}

/// Trains and tests once per seed in `repeat_seeds`, each under
/// `<output>/seed<s>/`, then summarises test metrics as mean and sample
/// standard deviation.
pub fn cmd_repeat(cfg: &PipelineConfig) -> Result<RepeatSummary> {
    if cfg.repeat_seeds.is_empty() {
        return Err(Error::Config("repeat_seeds is empty".into()));
    }
    let ctx = Context::load(cfg, true)?;
    let qrels = ctx.qrels()?;
    let test_lists: Vec<RankedList> = ctx.candidates(cfg, Split::Test)?.into_iter().map(|(_, l)| l).collect();
    create_dir(&cfg.paths.output)?;
    save_run(cfg.output(BM25_RUN), &test_lists, "bm25")?;
    let oracle: Vec<RankedList> = test_lists.iter().map(|l| oracle_rerank(l, qrels)).collect();
    save_run(cfg.output(ORACLE_RUN), &oracle, "oracle")?;
    let mut per_seed = Vec::new();
    for &seed in &cfg.repeat_seeds {
        let mut c = cfg.clone();
        c.seed = seed;
        c.paths.output = cfg.output(&format!("seed{seed}"));
        log::info!("repeat: seed {seed}");
        let (ranker, summary) = train_in(&c, &ctx)?;
        let run = rerank_in(&c, &ctx, &ranker, Split::Test)?;
        let test = evaluate_run(&load_run(&run)?, qrels, &format!("seed{seed}"));
        per_seed.push(SeedResult { seed, best_epoch: summary.best_epoch, best_dev_map: summary.best_dev_map, test });
    }
    let ms = |f: fn(&MetricsReport) -> f64| {
        let xs: Vec<f64> = per_seed.iter().map(|s| f(&s.test)).collect();
        let (mean, std) = mean_std(&xs);
        MeanStd { mean, std }
    };
    let summary = RepeatSummary {
        architecture: cfg.model.architecture.name().to_string(),
        map: ms(|r| r.map),
        p20: ms(|r| r.p20),
        ndcg20: ms(|r| r.ndcg20),
        per_seed,
        bm25: evaluate_run(&test_lists, qrels, "bm25"),
        oracle: evaluate_run(&oracle, qrels, "oracle"),
    };
    let path = cfg.output("repeat_summary.json");
    write_text(&path, &(serde_json::to_string_pretty(&summary)? + "\n"))?;
    meta(cfg, "repeat", ctx.inputs.clone(), json!({"seeds": cfg.repeat_seeds})).write_beside(&path)?;
    Ok(summary)
}

// ---- synth ------------------------------------------------------------------

/// Writes a synthetic collection to `dir` together with a `config.json`
/// that points at it. Returns the config path.
pub fn cmd_synth(synth: &SynthConfig, dir: &Path, base: &PipelineConfig) -> Result<PathBuf> {
    let s = generate(synth)?;
    s.write_dir(dir)?;
    let mut cfg = base.clone();
    cfg.paths.corpus = Some(relrank::synth::CORPUS_FILE.into());
    cfg.paths.queries = Some(relrank::synth::QUERIES_FILE.into());
    cfg.paths.qrels = Some(relrank::synth::QRELS_FILE.into());
    cfg.paths.embeddings = Some(relrank::synth::VECTORS_FILE.into());
    cfg.paths.splits = Some(relrank::synth::SPLITS_FILE.into());
    cfg.paths.output = "out".into();
    let path = dir.join("config.json");
    write_text(&path, &(serde_json::to_string_pretty(&cfg)? + "\n"))?;
    write_text(&dir.join("synth.json"), &(serde_json::to_string_pretty(synth)? + "\n"))?;
    Ok(path)
}
