//! Ranking metrics, per-model metric reports and significance testing.

mod metrics;
mod report;
mod significance;

pub use metrics::{
    average_precision, mean_average_precision, mrr, ndcg_at_n, precision_at_n, recall_at_n,
    reciprocal_rank, RankedList,
};
pub use report::{
    evaluate, pairwise_auc, ranked_lists, CandidateSet, EvalConfig, MetricReport, MetricSeries,
    Recommender,
};
pub use significance::{bootstrap_paired_ttest, TTestOutcome, DEFAULT_RESAMPLES, SIGNIFICANCE_LEVEL};
