//! Scoring, cross-validation folds, FLOP accounting and report assembly.

mod flops;
mod folds;
mod metrics;
mod report;

pub use flops::{
    cnn_flop_count, layer_flops, layers_flop_count, FlopReport, LayerFlops, ReferenceModel,
    REFERENCE_MODELS,
};
pub use folds::{make_folds, make_folds_with, Fold, FoldPlan, FOLD_COUNT, TEST_PATIENTS};
pub use metrics::{
    auc_pr, auc_roc, best_f1_threshold, confusion, f1_precision_recall, pr_curve, roc_curve,
    ConfusionCounts,
};
pub use report::{
    evaluate_fold, evaluate_series, summarize, write_curve_csv, write_fold_csv, Curve, EvalReport,
    FlopRow, FoldResult, MeanStd, SeriesMetrics, SeriesSummary,
};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("length mismatch: {left} predictions vs {right} labels")]
    Length { left: usize, right: usize },
    #[error("no blocks to score")]
    Empty,
    #[error("{0} is undefined when only one class is present")]
    SingleClass(&'static str),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("fold plan: {0}")]
    Plan(String),
    #[error("FLOP count: {0}")]
    Flops(String),
}
