//! Experiment orchestration: the per-modulation sweep, run persistence,
//! reports and the inference-latency benchmark.

mod bench;
mod experiment;
mod report;

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::anomaly::AnomalyError;
use crate::ganmodels::ModelError;
use crate::metrics::MetricsError;
use crate::rfdata::DataError;
use crate::training::TrainingError;

pub use bench::{benchmark_inference, hardware_description, Benchmark, REFERENCE_LATENCY_S, REFERENCE_THROUGHPUT};
pub use experiment::{
    evaluate_run, run_experiment, DatasetInfo, Experiment, ExperimentRecord, FanoganModels, ModulationResult,
    ModulationStatus, SplitOptions, TestCounts,
};
pub use report::{auroc_table, report, write_roc_points, ReportFiles, AVERAGE_ROW};

/// Overrides the default `runs` directory.
pub const RUNS_DIR_ENV: &str = "RFANOGAN_RUNS_DIR";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("run exists: {0}")]
    RunExists(PathBuf),
    #[error("no timed samples: warmup {warmup} leaves nothing of {n_samples}")]
    NoTimedSamples { n_samples: usize, warmup: usize },
    #[error("need at least one sample, got {0}")]
    Samples(usize),
    #[error("no frames to benchmark")]
    NoFrames,
    #[error("no modulations requested")]
    NoModulations,
    #[error("no selection measures requested")]
    NoMeasures,
    #[error("dataset changed since the run: expected sha256 {expected}, found {found}")]
    DatasetChanged { expected: String, found: String },
    #[error("bad run record: {0}")]
    Record(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Training(#[from] TrainingError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Anomaly(#[from] AnomalyError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, HarnessError>;

/// `$RFANOGAN_RUNS_DIR` if set, else `runs` under the working directory.
pub fn runs_root() -> PathBuf {
    std::env::var_os(RUNS_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("runs"))
}

/// Hex sha256 of a file's bytes.
pub fn file_sha256(path: &Path) -> Result<String> {
    use sha2::{Digest, Sha256};
    let bytes = std::fs::read(path)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// `run-<unix seconds>` for runs started without an explicit id.
pub fn timestamp_run_id() -> String {
    let secs = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map_or(0, |d| d.as_secs());
    format!("run-{secs}")
}
