//! Comma-separated batch scoring output.

use std::io::Write;

use super::Verdict;
use crate::rfdata::Modulation;

pub const SCORE_CSV_HEADER: &str = "frame_index,modulation,snr_db,raw_score,normalized_score,verdict";

#[derive(Clone, Debug, PartialEq)]
pub struct ScoreRow {
    pub frame_index: usize,
    pub modulation: Modulation,
    pub snr_db: i32,
    pub raw: f64,
    pub normalized: Option<f64>,
    pub verdict: Verdict,
}

pub fn write_score_csv<W: Write>(mut w: W, rows: &[ScoreRow]) -> std::io::Result<()> {
    writeln!(w, "{SCORE_CSV_HEADER}")?;
    for r in rows {
        let norm = r.normalized.map(|v| v.to_string()).unwrap_or_default();
        let verdict = match r.verdict {
            Verdict::Inlier => "inlier",
            Verdict::Outlier => "outlier",
        };
        writeln!(w, "{},{},{},{},{},{}", r.frame_index, r.modulation, r.snr_db, r.raw, norm, verdict)?;
    }
    Ok(())
}
