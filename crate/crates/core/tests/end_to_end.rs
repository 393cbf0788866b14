//! Library-level pipeline over a small synthetic collection.

use relrank::autodiff::{load_checkpoint, restore_into, save_checkpoint};
use relrank::embed::{save_word_vectors, EmbeddingFormat, EmbeddingMatrix};
use relrank::eval::evaluate_run;
use relrank::models::{ModelConfig, Architecture, Ranker, Resources};
use relrank::retrieval::{load_index, load_run, retrieve_top_n, save_index, save_run, Bm25Params, IndexMeta, InvertedIndex};
use relrank::synth::{generate, SynthCollection, SynthConfig};
use relrank::text::{process_corpus, Analyzer, ProcessedQuery, Vocabulary};
use relrank::training::{rerank_all, train, RerankQuery, TrainConfig, TrainData};

fn collection() -> SynthCollection {
    generate(&SynthConfig {
        docs: 200,
        queries: 24,
        concepts: 24,
        fillers: 120,
        dim: 8,
        train_queries: 12,
        dev_queries: 6,
        ..SynthConfig::default()
    })
    .unwrap()
}

fn build(s: &SynthCollection, analyzer: &Analyzer) -> InvertedIndex {
    let mut vocab = Vocabulary::new();
    let (docs, skipped) = process_corpus(&s.docs, analyzer, &mut vocab);
    assert!(skipped.is_empty());
    InvertedIndex::build(docs, None, vocab, IndexMeta::default()).unwrap()
}

fn queries(s: &SynthCollection, ids: &[String], index: &InvertedIndex, analyzer: &Analyzer) -> Vec<RerankQuery> {
    s.queries
        .iter()
        .filter(|q| ids.contains(&q.id))
        .map(|q| {
            let pq = ProcessedQuery::new(q.id.clone(), &analyzer.analyze(&q.text), index.vocab()).unwrap();
            let list = retrieve_top_n(&pq, index, 25, Bm25Params::default(), None);
            RerankQuery::prepare(index, pq, &list).unwrap()
        })
        .collect()
}

#[test]
fn persisted_artifacts_reproduce_in_memory_results() {
    let dir = tempfile::tempdir().unwrap();
    let s = collection();
    let analyzer = Analyzer::default();
    let index = build(&s, &analyzer);
    save_index(dir.path().join("index.bin"), &index).unwrap();
    let index = load_index(dir.path().join("index.bin")).unwrap();

    for format in [EmbeddingFormat::Word2vecText, EmbeddingFormat::Word2vecBinary] {
        save_word_vectors(dir.path().join("v"), &s.vectors, format).unwrap();
        let e = EmbeddingMatrix::load(dir.path().join("v"), format, index.vocab(), &analyzer).unwrap();
        assert_eq!(e.coverage(), index.vocab().len());
    }
    let emb = EmbeddingMatrix::load(dir.path().join("v"), EmbeddingFormat::Word2vecBinary, index.vocab(), &analyzer).unwrap();

    let train_q = queries(&s, &s.splits.train, &index, &analyzer);
    let dev_q = queries(&s, &s.splits.dev, &index, &analyzer);
    let test_q = queries(&s, &s.splits.test, &index, &analyzer);
    let res = Resources { emb: &emb, idf: index.idf() };
    let data = TrainData { index: &index, res, train: &train_q, dev: &dev_q, qrels: &s.qrels };
    let mut ranker = Ranker::new(ModelConfig::new(Architecture::PositDrmm), &emb, 9).unwrap();
    let cfg = TrainConfig { max_epochs: 3, seed: 9, ..TrainConfig::default() };
    let outcome = train(&mut ranker, &data, &cfg, |_| {}).unwrap();
    assert!(outcome.best_epoch >= 1 && outcome.log.len() <= 3);

    let run = rerank_all(&ranker, &res, &index, &test_q);
    save_run(dir.path().join("test.run"), &run, "posit").unwrap();
    assert_eq!(load_run(dir.path().join("test.run")).unwrap(), run);

    save_checkpoint(dir.path().join("m.ckpt"), &ranker.params).unwrap();
    let mut fresh = Ranker::new(ModelConfig::new(Architecture::PositDrmm), &emb, 1).unwrap();
    restore_into(&mut fresh.params, &load_checkpoint(dir.path().join("m.ckpt")).unwrap()).unwrap();
    assert_eq!(rerank_all(&fresh, &res, &index, &test_q), run);

    let oracle: Vec<_> = test_q
        .iter()
        .map(|q| relrank::retrieval::oracle_rerank(&q.bm25_list(), &s.qrels))
        .collect();
    let (m, o) = (evaluate_run(&run, &s.qrels, "m"), evaluate_run(&oracle, &s.qrels, "o"));
    for (a, b) in m.per_query.iter().zip(&o.per_query) {
        assert_eq!(a.query_id, b.query_id);
        assert!(b.ap >= a.ap);
    }
}
