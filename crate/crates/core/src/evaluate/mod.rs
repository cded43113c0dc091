//! Error metrics, link prediction, and the simulation benchmarks.

pub mod experiment;
pub mod linkpred;
pub mod metrics;

pub use experiment::{
    rep_model, run_experiment, run_sweep, ExperimentConfig, ExperimentReport, RepFailure, RepOutcome, StrategyMedian,
    StrategyOutcome, SweepAxis, CSV_HEADER,
};
pub use linkpred::{
    linkpred_scores, linkpred_scores_with, linkpred_split, test_size, LinkPredRow, LinkPredScores, LinkPredSplit,
    DEFAULT_TEST_CAP,
};
pub use metrics::{auc, auc_counts, median, rel_frob, AucCounts};
