//! TREC-style metrics, run evaluation and significance testing.

mod metrics;
mod qrels;
mod significance;

pub use metrics::{
    average_precision, evaluate_run, mean_std, ndcg_at_k, precision_at_k, MetricsReport, QueryMetrics,
    METRIC_DEPTH,
};
pub use qrels::Qrels;
pub use significance::{stratified_shuffle_test, SignificanceResult, DEFAULT_PERMUTATIONS, TIE_TOLERANCE};
