use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::json;

use super::experiment::{ExperimentRecord, ModulationStatus};
use super::Result;
use crate::metrics::RocResult;

/// Label of the table's final row of column means.
pub const AVERAGE_ROW: &str = "average";

#[derive(Clone, Debug, PartialEq)]
pub struct ReportFiles {
    pub results: PathBuf,
    pub table: PathBuf,
    pub manifest: PathBuf,
    pub roc: Vec<PathBuf>,
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// The AUROC table as CSV: one row per modulation, one column per selection
/// measure plus `CAE`, then an `average` row of column means over the cells
/// that have a value. Failed stages leave empty cells. No rows at all gives
/// the header alone.
pub fn auroc_table(record: &ExperimentRecord) -> String {
    let mut s = String::from("modulation");
    for m in &record.measures {
        let _ = write!(s, ",{m}");
    }
    s.push_str(",CAE\n");
    if record.per_modulation.is_empty() {
        return s;
    }
    let n_cols = record.measures.len() + 1;
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); n_cols];
    for res in &record.per_modulation {
        s.push_str(res.modulation.name());
        let values = record.measures.iter().map(|m| res.auroc_fanogan.get(m).copied()).chain([res.auroc_cae]);
        for (col, v) in values.enumerate() {
            if let Some(x) = v {
                columns[col].push(x);
            }
            let _ = write!(s, ",{}", cell(v));
        }
        s.push('\n');
    }
    s.push_str(AVERAGE_ROW);
    for col in &columns {
        let _ = write!(s, ",{}", cell(mean(col)));
    }
    s.push('\n');
    s
}

/// `threshold,fpr,tpr` per ROC point; the leading `+inf` threshold is written as `inf`.
pub fn write_roc_points(roc: &RocResult, path: &Path) -> Result<()> {
    let mut s = String::from("threshold,fpr,tpr\n");
    for ((t, f), p) in roc.thresholds.iter().zip(&roc.fpr).zip(&roc.tpr) {
        let _ = writeln!(s, "{t},{f},{p}");
    }
    fs::write(path, s)?;
    Ok(())
}

/// Writes `results.json`, `auroc_table.csv`, `roc/<MOD>_<scorer>.csv` and
/// `manifest.json` under `out_dir`.
pub fn report(record: &ExperimentRecord, out_dir: &Path) -> Result<ReportFiles> {
    fs::create_dir_all(out_dir)?;
    let results = out_dir.join("results.json");
    fs::write(&results, serde_json::to_string_pretty(record)?)?;
    let table = out_dir.join("auroc_table.csv");
    fs::write(&table, auroc_table(record))?;

    let mut roc_files = Vec::new();
    let roc_dir = out_dir.join("roc");
    for res in &record.per_modulation {
        for (name, roc) in &res.roc {
            fs::create_dir_all(&roc_dir)?;
            let path = roc_dir.join(format!("{}_{name}.csv", res.modulation));
            write_roc_points(roc, &path)?;
            roc_files.push(path);
        }
    }

    let per_modulation: Vec<_> = record
        .per_modulation
        .iter()
        .map(|r| {
            let status = match &r.status {
                ModulationStatus::Completed => json!("completed"),
                ModulationStatus::Failed { stage, message } => json!({ "failed_stage": stage, "message": message }),
            };
            json!({
                "modulation": r.modulation,
                "status": status,
                "train_frames": r.counts.train,
                "test_inliers": r.counts.test_inliers,
                "test_outliers": r.counts.test_outliers,
                "selected_epoch": r.selected_epoch,
            })
        })
        .collect();
    let manifest_value = json!({
        "run_id": record.run_id,
        "crate_version": env!("CARGO_PKG_VERSION"),
        "config_kv": record.config.to_kv(),
        "config_hash": record.config.hash(),
        "seeds": { "training": record.config.seed, "split": record.split.seed },
        "split": record.split,
        "arch": record.arch,
        "dataset": record.dataset,
        "modulations": per_modulation,
        "timing": record.timing,
    });
    let manifest = out_dir.join("manifest.json");
    fs::write(&manifest, serde_json::to_string_pretty(&manifest_value)?)?;
    Ok(ReportFiles { results, table, manifest, roc: roc_files })
}
