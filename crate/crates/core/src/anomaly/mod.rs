//! Anomaly scores for frames and the inlier/outlier decision.

mod anogan;
mod cae;
mod fanogan;
mod ganomaly;
mod output;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ganmodels::ModelError;

pub use anogan::{anogan_score, AnoganParams, AnoganResult};
pub use cae::cae_score_and_classify;
pub use fanogan::{fanogan_score, fanogan_score_parts, fanogan_scores, reconstruction_errors};
pub use ganomaly::{ganomaly_losses, ganomaly_score, ganomaly_score_from_latents, GanomalyLosses, GanomalyWeights};
pub use output::{write_score_csv, ScoreRow, SCORE_CSV_HEADER};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnomalyError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("need at least one step, got {0}")]
    Steps(usize),
    #[error("lambda must lie in (0, 1), got {0}")]
    Lambda(f64),
    #[error("weights must lie in [0, 1] and sum to 1, got ({0}, {1}, {2})")]
    Weights(f64, f64, f64),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("empty score set")]
    Empty,
    #[error("non-finite value: {0}")]
    NonFinite(&'static str),
}

impl From<rfanogan_autograd::AutogradError> for AnomalyError {
    fn from(e: rfanogan_autograd::AutogradError) -> Self {
        AnomalyError::Model(e.into())
    }
}

pub type Result<T> = std::result::Result<T, AnomalyError>;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnomalyScore {
    pub raw: f64,
    /// Position within a min-max scaled score set, when one was applied.
    pub normalized: Option<f64>,
}

impl AnomalyScore {
    pub fn new(raw: f64) -> Self {
        Self { raw, normalized: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Inlier,
    Outlier,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub verdict: Verdict,
    pub score: AnomalyScore,
    pub threshold: f64,
}

/// Outlier iff `score.raw > tau`; a score equal to the threshold is an inlier.
pub fn detect(score: AnomalyScore, tau: f64) -> Result<Detection> {
    if !tau.is_finite() {
        return Err(AnomalyError::NonFinite("threshold"));
    }
    if !score.raw.is_finite() {
        return Err(AnomalyError::NonFinite("score"));
    }
    let verdict = if score.raw > tau { Verdict::Outlier } else { Verdict::Inlier };
    Ok(Detection { verdict, score, threshold: tau })
}

#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedScores {
    pub scores: Vec<AnomalyScore>,
    /// Set when all raw scores are equal; every normalised value is then 0.
    pub degenerate: bool,
}

/// Min-max scales raw scores into `[0, 1]`.
pub fn normalize_scores(raw: &[f64]) -> Result<NormalizedScores> {
    if raw.is_empty() {
        return Err(AnomalyError::Empty);
    }
    if raw.iter().any(|s| !s.is_finite()) {
        return Err(AnomalyError::NonFinite("score"));
    }
    let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let degenerate = hi == lo;
    let scores = raw
        .iter()
        .map(|&r| AnomalyScore { raw: r, normalized: Some(if degenerate { 0.0 } else { (r - lo) / (hi - lo) }) })
        .collect();
    Ok(NormalizedScores { scores, degenerate })
}
