//! Detector metrics (ROC, confusion-matrix rates) and generative fidelity measures.

mod classify;
mod fidelity;
mod roc;

use thiserror::Error;

pub use classify::{classification_metrics, ClassificationMetrics};
pub use fidelity::{
    combine_fidelity, density_coverage, fidelity_report, generative_pr, js_divergence, jsd, jsd_grouped,
    manifold_precision, manifold_recall, FidelityMeasure, FidelityReport, DEFAULT_JSD_BINS, DEFAULT_K,
};
pub use roc::{auroc, auroc_pairwise, RocResult};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("labels contain a single class; need both inliers and outliers")]
    SingleClass,
    #[error("{0} scores for {1} labels")]
    LengthMismatch(usize, usize),
    #[error("non-finite score")]
    NonFinite,
    #[error("confusion matrix is all zeros")]
    EmptyConfusion,
    #[error("need at least {need} points for k = {k}, got {got}")]
    TooFewPoints { k: usize, need: usize, got: usize },
    #[error("points differ in dimension")]
    Dimension,
    #[error("empty batch")]
    EmptyBatch,
    #[error("need at least 2 histogram bins, got {0}")]
    Bins(usize),
    #[error("unknown fidelity measure: {0}")]
    UnknownMeasure(String),
}

pub type Result<T> = std::result::Result<T, MetricsError>;
