//! Saved generator/critic states and their selection.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::config::TrainingConfig;
use super::{Result, TrainingError};
use crate::metrics::{combine_fidelity, FidelityMeasure, FidelityReport};

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub epoch: usize,
    /// Parameter blobs (see `Network::to_blob`).
    pub generator: Vec<u8>,
    pub critic: Vec<u8>,
    pub encoder: Option<Vec<u8>>,
    pub fidelity: FidelityReport,
    /// Measures that reached a new best at this checkpoint.
    pub improved: Vec<FidelityMeasure>,
    pub path: Option<PathBuf>,
}

/// Best checkpoint under `measure` (lowest JSD, highest otherwise); earliest epoch on ties.
pub fn select_checkpoint(history: &[Checkpoint], measure: FidelityMeasure) -> Result<&Checkpoint> {
    let mut it = history.iter();
    let mut best = it.next().ok_or(TrainingError::EmptyHistory)?;
    for c in it {
        let (v, b) = (c.fidelity.get(measure), best.fidelity.get(measure));
        if measure.improves(v, b) || (v == b && c.epoch < best.epoch) {
            best = c;
        }
    }
    Ok(best)
}

const META: &str = "meta.txt";
const GENERATOR: &str = "generator.bin";
const CRITIC: &str = "critic.bin";
const ENCODER: &str = "encoder.bin";

/// Writes `ckpt` to `<root>/epoch-<n>/`: a `key=value` metadata file and one blob per network.
pub fn save_checkpoint(root: &Path, ckpt: &Checkpoint, cfg: &TrainingConfig) -> Result<PathBuf> {
    let dir = root.join(format!("epoch-{}", ckpt.epoch));
    fs::create_dir_all(&dir)?;
    let f = &ckpt.fidelity;
    let improved: Vec<&str> = ckpt.improved.iter().map(|m| m.name()).collect();
    let mut meta = String::new();
    let _ = writeln!(meta, "epoch={}", ckpt.epoch);
    let _ = writeln!(meta, "config_hash={}", cfg.hash());
    let _ = writeln!(meta, "improved={}", improved.join(","));
    for (k, v) in [
        ("precision", f.precision),
        ("recall", f.recall),
        ("density", f.density),
        ("coverage", f.coverage),
        ("jsd", f.jsd),
        ("s_rp", f.s_rp),
        ("h_rp", f.h_rp),
        ("s_dc", f.s_dc),
        ("h_dc", f.h_dc),
    ] {
        let _ = writeln!(meta, "{k}={v}");
    }
    fs::write(dir.join(META), meta)?;
    fs::write(dir.join(GENERATOR), &ckpt.generator)?;
    fs::write(dir.join(CRITIC), &ckpt.critic)?;
    if let Some(e) = &ckpt.encoder {
        fs::write(dir.join(ENCODER), e)?;
    }
    Ok(dir)
}

pub fn load_checkpoint(dir: &Path) -> Result<Checkpoint> {
    let text = fs::read_to_string(dir.join(META))?;
    let meta: BTreeMap<&str, &str> = text.lines().filter_map(|l| l.split_once('=')).collect();
    let get = |k: &str| meta.get(k).copied().ok_or_else(|| TrainingError::Checkpoint(format!("missing {k}")));
    let num = |k: &str| -> Result<f64> { get(k)?.parse().map_err(|_| TrainingError::Checkpoint(format!("bad {k}"))) };
    let epoch = get("epoch")?.parse().map_err(|_| TrainingError::Checkpoint("bad epoch".into()))?;
    let improved = get("improved")?
        .split(',')
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<FidelityMeasure>())
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let fidelity = combine_fidelity(num("precision")?, num("recall")?, num("density")?, num("coverage")?, num("jsd")?);
    let encoder_path = dir.join(ENCODER);
    Ok(Checkpoint {
        epoch,
        generator: fs::read(dir.join(GENERATOR))?,
        critic: fs::read(dir.join(CRITIC))?,
        encoder: if encoder_path.exists() { Some(fs::read(encoder_path)?) } else { None },
        fidelity,
        improved,
        path: Some(dir.to_path_buf()),
    })
}
