//! Pairwise hinge training with one sampled negative per positive, Adam,
//! gradient clipping and dev-MAP model selection.

mod adam;
mod data;

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use adam::{AdamConfig, AdamState};
pub use data::{rerank, rerank_all, RerankCandidate, RerankQuery};

use crate::autodiff::{Graph, ParamGrads, ParameterSet, Tensor};
use crate::error::{Error, Result};
use crate::eval::{evaluate_run, Qrels};
use crate::models::{Ranker, Resources};
use crate::retrieval::InvertedIndex;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub batch_size: usize,
    pub margin: f64,
    pub adam: AdamConfig,
    /// Stop after this many epochs without a dev MAP improvement.
    pub patience: usize,
    /// Global gradient-norm clip; 0 disables clipping.
    pub clip_norm: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_epochs: 50,
            batch_size: 32,
            margin: 1.0,
            adam: AdamConfig::default(),
            patience: 5,
            clip_norm: 5.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.margin > 0.0) {
            return Err(Error::Config("margin must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.max_epochs == 0 {
            return Err(Error::Config("max_epochs must be at least 1".into()));
        }
        if !(self.adam.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        Ok(())
    }
}

/// Indices into one [`RerankQuery`]'s candidate list.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrainingInstance {
    pub query: usize,
    pub positive: usize,
    pub negative: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleStats {
    pub usable_queries: usize,
    /// Queries with no relevant or no non-relevant candidate.
    pub skipped_queries: usize,
}

/// One uniformly drawn non-relevant candidate for every relevant candidate
/// of every usable query, in query then candidate order.
pub fn sample_instances<R: Rng>(queries: &[RerankQuery], qrels: &Qrels, rng: &mut R) -> Result<(Vec<TrainingInstance>, SampleStats)> {
    let mut out = Vec::new();
    let mut stats = SampleStats::default();
    for (qi, q) in queries.iter().enumerate() {
        let (pos, neg): (Vec<usize>, Vec<usize>) = (0..q.candidates.len())
            .partition(|&i| qrels.is_relevant(q.query_id(), &q.candidates[i].doc_id));
        if pos.is_empty() || neg.is_empty() {
            stats.skipped_queries += 1;
            continue;
        }
        stats.usable_queries += 1;
        for p in pos {
            let n = neg[rng.random_range(0..neg.len())];
            out.push(TrainingInstance { query: qi, positive: p, negative: n });
        }
    }
    if stats.usable_queries == 0 {
        return Err(Error::Training(format!(
            "no usable training query: all {} lack a relevant or a non-relevant candidate",
            stats.skipped_queries
        )));
    }
    Ok((out, stats))
}

/// `max(0, margin - s_pos + s_neg)`. NaN scores give a NaN loss.
pub fn pairwise_loss(s_pos: f64, s_neg: f64, margin: f64) -> f64 {
    let d = margin - s_pos + s_neg;
    if d.is_nan() || d > 0.0 {
        d
    } else {
        0.0
    }
}

/// Graph form of [`pairwise_loss`]; at the kink the zero branch is taken.
pub fn hinge(g: &mut Graph, s_pos: Tensor, s_neg: Tensor, margin: f64) -> Tensor {
    let d = g.sub(s_neg, s_pos);
    let d = g.add_const(d, margin);
    g.relu(d)
}

/// One line of the training log. Wall-clock time is kept separately so that
/// logs of identical runs are byte-identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_map: f64,
    pub instances: usize,
    pub skipped_queries: usize,
    pub rejected_steps: usize,
    pub best: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    /// 0 when no epoch completed.
    pub best_epoch: usize,
    pub best_dev_map: f64,
    pub log: Vec<EpochLog>,
    /// Seconds per epoch.
    pub epoch_seconds: Vec<f64>,
    /// Set when training stopped on a non-finite loss.
    pub aborted: Option<String>,
}

/// Epoch with the highest dev MAP, the earliest among equals.
pub fn select_best(log: &[EpochLog]) -> Option<&EpochLog> {
    log.iter().fold(None, |best: Option<&EpochLog>, e| match best {
        Some(b) if b.dev_map >= e.dev_map => Some(b),
        _ => Some(e),
    })
}

/// Everything `train` reads besides the model.
pub struct TrainData<'a> {
    pub index: &'a InvertedIndex,
    pub res: Resources<'a>,
    pub train: &'a [RerankQuery],
    pub dev: &'a [RerankQuery],
    pub qrels: &'a Qrels,
}

/// Dev MAP of `ranker` re-ranking the dev candidates.
pub fn dev_map(ranker: &Ranker, data: &TrainData<'_>) -> f64 {
    let run = rerank_all(ranker, &data.res, data.index, data.dev);
    evaluate_run(&run, data.qrels, "dev").map
}

pub(crate) fn batch_step(
    ranker: &Ranker,
    data: &TrainData<'_>,
    batch: &[TrainingInstance],
    margin: f64,
    dropout_rng: &mut ChaCha8Rng,
) -> (f64, ParamGrads) {
    let mut grads = ParamGrads::zeros_like(&ranker.params);
    let mut loss = 0.0;
    for inst in batch {
        let q = &data.train[inst.query];
        let mut g = Graph::new();
        let bound = ranker.bind(&mut g);
        let sp = ranker.score_graph(&mut g, &bound, &data.res, &q.pair(data.index, inst.positive), Some(dropout_rng));
        let sn = ranker.score_graph(&mut g, &bound, &data.res, &q.pair(data.index, inst.negative), Some(dropout_rng));
        let l = hinge(&mut g, sp, sn, margin);
        // relu maps NaN to 0, so the loss value comes from the scores
        loss += pairwise_loss(g.scalar(sp), g.scalar(sn), margin);
        g.backward(l);
        g.accumulate_param_grads(&mut grads);
    }
    grads.scale(1.0 / batch.len() as f64);
    (loss, grads)
}

/// Trains `ranker` in place and leaves it holding the parameters of the
/// epoch with the best dev MAP. `on_epoch` sees every log line as it is
/// produced.
pub fn train(ranker: &mut Ranker, data: &TrainData<'_>, cfg: &TrainConfig, mut on_epoch: impl FnMut(&EpochLog)) -> Result<TrainOutcome> {
    cfg.validate()?;
    if !data.dev.iter().any(|q| data.qrels.num_relevant(q.query_id()) > 0) {
        return Err(Error::Training("dev set has no query with relevant documents".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    dropout_rng.set_stream(1);
    let mut adam = AdamState::new(&ranker.params, cfg.adam);
    let mut best_params: ParameterSet = ranker.params.clone();
    let mut outcome = TrainOutcome {
        best_epoch: 0,
        best_dev_map: f64::NEG_INFINITY,
        log: Vec::new(),
        epoch_seconds: Vec::new(),
        aborted: None,
    };
    let mut since_best = 0;
    'epochs: for epoch in 1..=cfg.max_epochs {
        let start = Instant::now();
        let (mut instances, stats) = sample_instances(data.train, data.qrels, &mut rng)?;
        instances.shuffle(&mut rng);
        let mut total = 0.0;
        let mut rejected = 0;
        for batch in instances.chunks(cfg.batch_size) {
            let (loss, mut grads) = batch_step(ranker, data, batch, cfg.margin, &mut dropout_rng);
            if !loss.is_finite() {
                let msg = format!("non-finite loss in epoch {epoch}; keeping epoch {}", outcome.best_epoch);
                log::error!("{msg}");
                outcome.aborted = Some(msg);
                break 'epochs;
            }
            total += loss;
            if cfg.clip_norm > 0.0 {
                grads.clip_global_norm(cfg.clip_norm);
            }
            if adam.step(&mut ranker.params, &grads).is_err() {
                rejected += 1;
            }
        }
        let map = dev_map(ranker, data);
        let improved = map > outcome.best_dev_map;
        if improved {
            outcome.best_dev_map = map;
            outcome.best_epoch = epoch;
            best_params = ranker.params.clone();
            since_best = 0;
        } else {
            since_best += 1;
        }
        let line = EpochLog {
            epoch,
            train_loss: total / instances.len() as f64,
            dev_map: map,
            instances: instances.len(),
            skipped_queries: stats.skipped_queries,
            rejected_steps: rejected,
            best: improved,
        };
        log::info!(
            "epoch {epoch}: loss {:.4} dev MAP {:.4}{}",
            line.train_loss,
            map,
            if improved { " (best)" } else { "" }
        );
        on_epoch(&line);
        outcome.log.push(line);
        outcome.epoch_seconds.push(start.elapsed().as_secs_f64());
        if since_best >= cfg.patience {
            break;
        }
    }
    ranker.params = best_params;
    Ok(outcome)
}
