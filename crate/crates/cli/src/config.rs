//! Pipeline configuration: one JSON document plus `key=value` overrides.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::{Path, PathBuf};

use relrank::embed::EmbeddingFormat;
use relrank::models::ModelConfig;
use relrank::retrieval::Bm25Params;
use relrank::text::hex_sha256;
use relrank::training::TrainConfig;
use relrank::{Error, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// JSONL documents.
    pub corpus: Option<PathBuf>,
    /// JSONL queries.
    pub queries: Option<PathBuf>,
    /// TREC qrels.
    pub qrels: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    /// One token per line; the built-in English list when absent.
    pub stopwords: Option<PathBuf>,
    /// JSON `{"train": [...], "dev": [...], "test": [...]}` of query ids.
    pub splits: Option<PathBuf>,
    /// Binary index; `<output>/index.bin` when absent.
    pub index: Option<PathBuf>,
    /// Directory for runs, checkpoints and logs.
    pub output: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub paths: Paths,
    pub embeddings_format: EmbeddingFormat,
    /// `porter` or `none`.
    pub stemmer: String,
    /// Candidates per query.
    pub n: usize,
    pub bm25: Bm25Params,
    /// Model initialisation and training randomness.
    pub seed: u64,
    /// Query field holding a publication-date cutoff.
    pub cutoff_field: Option<String>,
    pub model: ModelConfig,
    /// `training.seed` is ignored; the top-level `seed` is used.
    pub training: TrainConfig,
    /// Document word budget for `inspect`.
    pub inspect_doc_terms: usize,
    /// Seeds for `repeat`.
    pub repeat_seeds: Vec<u64>,
    /// Folds for `xval`.
    pub folds: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            paths: Paths { output: PathBuf::from("out"), ..Paths::default() },
            embeddings_format: EmbeddingFormat::Word2vecText,
            stemmer: "porter".into(),
            n: 100,
            bm25: Bm25Params::default(),
            seed: 0,
            cutoff_field: None,
            model: ModelConfig::default(),
            training: TrainConfig::default(),
            inspect_doc_terms: 50,
            repeat_seeds: vec![0, 1, 2, 3, 4],
            folds: 5,
        }
    }
}

/// Sets `a.b.c` in a JSON object tree, creating objects on the way. The
/// value is parsed as JSON and falls back to a plain string.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {assignment:?} is not key=value")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut cur = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if part.is_empty() {
            return Err(Error::Config(format!("empty key segment in {key:?}")));
        }
        if !cur.is_object() {
            *cur = Value::Object(Default::default());
        }
        let obj = cur.as_object_mut().unwrap();
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        cur = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    unreachable!()
}

impl PipelineConfig {
    /// Parses `text` and applies the overrides in order. Relative paths are
    /// resolved against `base`.
    pub fn from_json(text: &str, overrides: &[String], base: Option<&Path>) -> Result<Self> {
        let mut v: Value = serde_json::from_str(text)?;
        for o in overrides {
            apply_override(&mut v, o)?;
        }
        let mut cfg: Self = serde_json::from_value(v)?;
        if let Some(base) = base {
            cfg.paths.resolve(base);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        let dir = path.parent().unwrap_or(Path::new(""));
        let base = std::path::absolute(if dir.as_os_str().is_empty() { Path::new(".") } else { dir })
            .map_err(|e| Error::file(dir, e))?;
        Self::from_json(&text, overrides, Some(&base))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Config("n must be positive".into()));
        }
        if self.stemmer != "porter" && self.stemmer != "none" {
            return Err(Error::Config(format!("unknown stemmer {:?}", self.stemmer)));
        }
        self.model.validate()?;
        self.training.validate()?;
        if self.folds < 2 {
            return Err(Error::Config("folds must be at least 2".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON serialisation.
    pub fn hash(&self) -> String {
        hex_sha256(serde_json::to_string(self).expect("config serialises").as_bytes())
    }

    pub fn index_path(&self) -> PathBuf {
        self.paths.index.clone().unwrap_or_else(|| self.paths.output.join("index.bin"))
    }

    pub fn output(&self, name: &str) -> PathBuf {
        self.paths.output.join(name)
    }

    pub fn training_config(&self) -> TrainConfig {
        TrainConfig { seed: self.seed, ..self.training.clone() }
    }
}

impl Paths {
    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [
            &mut self.corpus,
            &mut self.queries,
            &mut self.qrels,
            &mut self.embeddings,
            &mut self.stopwords,
            &mut self.splits,
            &mut self.index,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
        fix(&mut self.output);
    }

    pub fn require<'a>(&self, p: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
        match p {
            Some(p) if p.exists() => Ok(p),
            Some(p) => Err(Error::Config(format!("{what} file {} does not exist", p.display()))),
            None => Err(Error::Config(format!("paths.{what} is not set"))),
        }
    }
}

/// Streaming SHA-256 of a file's bytes.
pub fn hash_file(path: &Path) -> Result<String> {
    let mut f = std::fs::File::open(path).map_err(|e| Error::file(path, e))?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf).map_err(|e| Error::file(path, e))?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(format!("{:x}", h.finalize()))
}

/// Provenance written next to every artifact as `<artifact>.meta.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactMeta {
    pub command: String,
    pub seed: u64,
    pub config_hash: String,
    /// Input file role to content hash.
    pub inputs: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub details: Value,
}

impl ArtifactMeta {
    pub fn write_beside(&self, artifact: &Path) -> Result<PathBuf> {
        let mut name = artifact.file_name().unwrap_or_default().to_os_string();
        name.push(".meta.json");
        let path = artifact.with_file_name(name);
        let body = serde_json::to_string_pretty(self)? + "\n";
        std::fs::write(&path, body).map_err(|e| Error::file(&path, e))?;
        Ok(path)
    }
}
