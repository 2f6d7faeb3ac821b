use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::bench::{benchmark_inference, Benchmark};
use super::report::report;
use super::{file_sha256, HarnessError, Result};
use crate::anomaly::{fanogan_scores, reconstruction_errors};
use crate::ganmodels::{build_network_with, frames_to_batch, ArchOptions, Network, Role};
use crate::metrics::{auroc, FidelityMeasure, RocResult};
use crate::rfdata::{
    load_dataset, make_anomaly_split, AnomalySplit, DatasetFormat, IqFrame, Modulation, RfDataset, DEFAULT_SNR_MIN,
    DEFAULT_TRAIN_FRAC,
};
use crate::training::{
    load_checkpoint, save_checkpoint, select_checkpoint, train_cae, train_encoder, train_wgan_gp, Checkpoint,
    EpochStats, TrainingConfig,
};

const RESULTS: &str = "results.json";
const SCORE_CHUNK: usize = 1024;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitOptions {
    pub train_frac: f64,
    pub snr_min: i32,
    pub seed: u64,
}

impl Default for SplitOptions {
    fn default() -> Self {
        Self { train_frac: DEFAULT_TRAIN_FRAC, snr_min: DEFAULT_SNR_MIN, seed: 0 }
    }
}

/// Everything one sweep needs.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub run_id: String,
    pub dataset: PathBuf,
    pub format: DatasetFormat,
    pub modulations: Vec<Modulation>,
    pub measures: Vec<FidelityMeasure>,
    pub config: TrainingConfig,
    pub split: SplitOptions,
    /// Also train and score the autoencoder baseline.
    pub cae: bool,
    /// Timed f-AnoGAN scores after the sweep; 0 skips the benchmark.
    pub bench_samples: usize,
    pub bench_warmup: usize,
}

impl Experiment {
    pub fn new(run_id: impl Into<String>, dataset: impl Into<PathBuf>, format: DatasetFormat) -> Self {
        Self {
            run_id: run_id.into(),
            dataset: dataset.into(),
            format,
            modulations: Modulation::PUBLIC.to_vec(),
            measures: FidelityMeasure::ALL.to_vec(),
            config: TrainingConfig::default(),
            split: SplitOptions::default(),
            cae: true,
            bench_samples: 0,
            bench_warmup: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "lowercase")]
pub enum ModulationStatus {
    Completed,
    Failed { stage: String, message: String },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestCounts {
    pub train: usize,
    pub test_inliers: usize,
    pub test_outliers: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModulationResult {
    pub modulation: Modulation,
    pub status: ModulationStatus,
    pub counts: TestCounts,
    pub auroc_fanogan: BTreeMap<FidelityMeasure, f64>,
    pub selected_epoch: BTreeMap<FidelityMeasure, usize>,
    pub auroc_cae: Option<f64>,
    pub cae_threshold: Option<f64>,
    /// Checkpoint directory per measure, relative to the run directory.
    pub checkpoint_dirs: BTreeMap<FidelityMeasure, String>,
    pub cae_path: Option<String>,
    /// Curves behind the AUROC values; written as separate point files.
    #[serde(skip)]
    pub roc: Vec<(String, RocResult)>,
}

impl ModulationResult {
    fn new(modulation: Modulation) -> Self {
        Self {
            modulation,
            status: ModulationStatus::Completed,
            counts: TestCounts::default(),
            auroc_fanogan: BTreeMap::new(),
            selected_epoch: BTreeMap::new(),
            auroc_cae: None,
            cae_threshold: None,
            checkpoint_dirs: BTreeMap::new(),
            cae_path: None,
            roc: Vec::new(),
        }
    }

    pub fn failed(&self) -> bool {
        matches!(self.status, ModulationStatus::Failed { .. })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub path: PathBuf,
    pub format: DatasetFormat,
    pub sha256: String,
    pub records: usize,
    pub frame_width: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub run_id: String,
    pub config: TrainingConfig,
    pub split: SplitOptions,
    pub measures: Vec<FidelityMeasure>,
    pub arch: ArchOptions,
    pub dataset: DatasetInfo,
    /// One entry per requested modulation, in request order.
    pub per_modulation: Vec<ModulationResult>,
    pub timing: Option<Benchmark>,
    pub run_dir: PathBuf,
}

/// Generator, encoder and critic of one selected checkpoint.
#[derive(Clone, Debug)]
pub struct FanoganModels {
    pub epoch: usize,
    pub generator: Network,
    pub encoder: Network,
    pub critic: Network,
}

impl FanoganModels {
    /// f-AnoGAN scores of `frames`, in order.
    pub fn score(&self, frames: &[&IqFrame], kappa: f64) -> Result<Vec<f64>> {
        score_fanogan(&self.generator, &self.encoder, &self.critic, frames, kappa)
    }
}

fn load_fanogan(
    run_dir: &Path,
    arch: ArchOptions,
    res: &ModulationResult,
    measure: FidelityMeasure,
) -> Result<FanoganModels> {
    let rel = res
        .checkpoint_dirs
        .get(&measure)
        .ok_or_else(|| HarnessError::Record(format!("{}: no checkpoint for {measure}", res.modulation)))?;
    let ckpt = load_checkpoint(&run_dir.join(rel))?;
    let enc_blob =
        ckpt.encoder.as_ref().ok_or_else(|| HarnessError::Record(format!("{rel}: checkpoint has no encoder")))?;
    Ok(FanoganModels {
        epoch: ckpt.epoch,
        generator: Network::from_blob(build_network_with(Role::Generator, arch)?, &ckpt.generator)?,
        encoder: Network::from_blob(build_network_with(Role::Encoder, arch)?, enc_blob)?,
        critic: Network::from_blob(build_network_with(Role::Critic, arch)?, &ckpt.critic)?,
    })
}

impl ExperimentRecord {
    pub fn result(&self, m: Modulation) -> Option<&ModulationResult> {
        self.per_modulation.iter().find(|r| r.modulation == m)
    }

    /// Models saved for inlier `m` under `measure` in the run at `run_dir`.
    pub fn load_fanogan(&self, run_dir: &Path, m: Modulation, measure: FidelityMeasure) -> Result<FanoganModels> {
        let res = self.result(m).ok_or_else(|| HarnessError::Record(format!("{m} is not part of this run")))?;
        load_fanogan(run_dir, self.arch, res, measure)
    }

    /// Reloads the dataset and rebuilds the split of inlier `m`, failing if the
    /// dataset no longer hashes to the recorded value.
    pub fn rebuild_split(&self, m: Modulation) -> Result<AnomalySplit> {
        let found = file_sha256(&self.dataset.path)?;
        if found != self.dataset.sha256 {
            return Err(HarnessError::DatasetChanged { expected: self.dataset.sha256.clone(), found });
        }
        let ds = load_dataset(&self.dataset.path, self.dataset.format)?;
        Ok(make_anomaly_split(&ds, m, self.split.train_frac, self.split.snr_min, self.split.seed)?)
    }

    pub fn any_failed(&self) -> bool {
        self.per_modulation.iter().any(ModulationResult::failed)
    }

    pub fn load(run_dir: &Path) -> Result<Self> {
        let text = fs::read_to_string(run_dir.join(RESULTS))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// A failing stage: its name and the error it raised.
struct StageError(&'static str, HarnessError);

trait Stage<T> {
    fn stage(self, name: &'static str) -> std::result::Result<T, StageError>;
}

impl<T, E: Into<HarnessError>> Stage<T> for std::result::Result<T, E> {
    fn stage(self, name: &'static str) -> std::result::Result<T, StageError> {
        self.map_err(|e| StageError(name, e.into()))
    }
}

fn score_fanogan(g: &Network, e: &Network, d: &Network, frames: &[&IqFrame], kappa: f64) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(frames.len());
    for chunk in frames.chunks(SCORE_CHUNK) {
        out.extend(fanogan_scores(&frames_to_batch(chunk)?, g, e, d, kappa)?);
    }
    Ok(out)
}

fn score_cae(net: &Network, frames: &[&IqFrame]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(frames.len());
    for chunk in frames.chunks(SCORE_CHUNK) {
        out.extend(reconstruction_errors(net, &frames_to_batch(chunk)?)?);
    }
    Ok(out)
}

fn counts(split: &AnomalySplit) -> TestCounts {
    let inl = split.test_inlier_count();
    TestCounts { train: split.train.len(), test_inliers: inl, test_outliers: split.test.len() - inl }
}

fn history_csv(history: &[EpochStats]) -> String {
    let mut s = String::from("epoch,critic_cost,gradient_penalty,generator_cost,wasserstein\n");
    for h in history {
        let g = h.generator_cost.map(|v| v.to_string()).unwrap_or_default();
        let _ = writeln!(s, "{},{},{},{},{}", h.epoch, h.critic_cost, h.gradient_penalty, g, h.wasserstein);
    }
    s
}

fn fidelity_csv(checkpoints: &[Checkpoint]) -> String {
    let mut s = format!("epoch,{},improved\n", crate::metrics::FidelityReport::CSV_HEADER);
    for c in checkpoints {
        let tags: Vec<&str> = c.improved.iter().map(|m| m.name()).collect();
        let _ = writeln!(s, "{},{},{}", c.epoch, c.fidelity.to_csv_line(), tags.join(" "));
    }
    s
}

fn roc_name(m: FidelityMeasure) -> String {
    format!("fanogan_{}", m.name())
}

/// Generator, encoder, critic and frames for the post-sweep benchmark.
type BenchInput = (Network, Network, Network, Vec<IqFrame>);

/// Trains and scores one inlier modulation. Artifacts go to `<run_dir>/<MOD>/`.
fn run_modulation(
    exp: &Experiment,
    ds: &RfDataset,
    run_dir: &Path,
    res: &mut ModulationResult,
) -> std::result::Result<Option<BenchInput>, StageError> {
    let m = res.modulation;
    let cfg = &exp.config;
    let mod_dir = run_dir.join(m.name());
    fs::create_dir_all(&mod_dir).stage("persist")?;

    let split = make_anomaly_split(ds, m, exp.split.train_frac, exp.split.snr_min, exp.split.seed).stage("split")?;
    res.counts = counts(&split);
    let labels = split.test_labels();
    let test: Vec<&IqFrame> = split.test.iter().map(|t| &t.frame).collect();

    let wgan = train_wgan_gp(&split.train, cfg).stage("train_wgan_gp")?;
    fs::write(mod_dir.join("training_history.csv"), history_csv(&wgan.history)).stage("persist")?;
    fs::write(mod_dir.join("fidelity_history.csv"), fidelity_csv(&wgan.checkpoints)).stage("persist")?;
    let ckpt_root = mod_dir.join("checkpoints");
    for c in &wgan.checkpoints {
        save_checkpoint(&ckpt_root, c, cfg).stage("persist")?;
    }

    // Several measures often pick the same epoch; fit its encoder once.
    let mut encoders: BTreeMap<usize, Network> = BTreeMap::new();
    let mut bench_models = None;
    for &measure in &exp.measures {
        let chosen = select_checkpoint(&wgan.checkpoints, measure).stage("select_checkpoint")?.clone();
        let g = wgan.generator(&chosen).stage("select_checkpoint")?;
        let d = wgan.critic(&chosen).stage("select_checkpoint")?;
        let e = match encoders.entry(chosen.epoch) {
            Entry::Occupied(slot) => slot.into_mut(),
            Entry::Vacant(slot) => {
                let enc = train_encoder(&g, &d, &split.train, cfg).stage("train_encoder")?.encoder;
                let with_enc = Checkpoint { encoder: Some(enc.to_blob()), ..chosen.clone() };
                save_checkpoint(&ckpt_root, &with_enc, cfg).stage("persist")?;
                slot.insert(enc)
            }
        };
        let scores = score_fanogan(&g, e, &d, &test, cfg.kappa).stage("fanogan_score")?;
        let roc = auroc(&scores, &labels).stage("auroc")?;
        res.auroc_fanogan.insert(measure, roc.auroc);
        res.selected_epoch.insert(measure, chosen.epoch);
        res.checkpoint_dirs.insert(measure, format!("{}/checkpoints/epoch-{}", m.name(), chosen.epoch));
        res.roc.push((roc_name(measure), roc));
        if bench_models.is_none() {
            bench_models = Some((g, e.clone(), d));
        }
    }

    if exp.cae {
        let cae = train_cae(&split.train, cfg).stage("train_cae")?;
        let cae_dir = mod_dir.join("cae");
        fs::create_dir_all(&cae_dir).stage("persist")?;
        fs::write(cae_dir.join("cae.bin"), cae.net.to_blob()).stage("persist")?;
        fs::write(cae_dir.join("threshold.txt"), format!("{}\n", cae.threshold)).stage("persist")?;
        let scores = score_cae(&cae.net, &test).stage("cae_score")?;
        let roc = auroc(&scores, &labels).stage("auroc")?;
        res.auroc_cae = Some(roc.auroc);
        res.cae_threshold = Some(cae.threshold);
        res.cae_path = Some(format!("{}/cae/cae.bin", m.name()));
        res.roc.push(("CAE".to_string(), roc));
    }

    let frames = split.test.iter().map(|t| t.frame.clone()).take(SCORE_CHUNK).collect();
    Ok(bench_models.map(|(g, e, d)| (g, e, d, frames)))
}

/// Runs the sweep into `<root>/<run_id>`, which must not exist yet.
///
/// A failing stage marks its modulation failed and the sweep moves on; the
/// returned record (also written as `results.json` with the report files)
/// says which stage broke. Loading the dataset is not per-modulation, so its
/// failure is returned as an error.
pub fn run_experiment(exp: &Experiment, root: &Path) -> Result<ExperimentRecord> {
    if exp.modulations.is_empty() {
        return Err(HarnessError::NoModulations);
    }
    if exp.measures.is_empty() {
        return Err(HarnessError::NoMeasures);
    }
    exp.config.validate()?;
    let run_dir = root.join(&exp.run_id);
    fs::create_dir_all(root)?;
    match fs::create_dir(&run_dir) {
        Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => return Err(HarnessError::RunExists(run_dir)),
        r => r?,
    }

    let sha256 = file_sha256(&exp.dataset)?;
    let ds = load_dataset(&exp.dataset, exp.format)?;
    let arch = ArchOptions { frame_width: ds.frame_width(), channel_divisor: exp.config.channel_divisor };

    let mut per_modulation = Vec::with_capacity(exp.modulations.len());
    let mut bench_input = None;
    for &m in &exp.modulations {
        let mut res = ModulationResult::new(m);
        match run_modulation(exp, &ds, &run_dir, &mut res) {
            Ok(models) => {
                if bench_input.is_none() {
                    bench_input = models;
                }
            }
            Err(StageError(stage, err)) => {
                res.status = ModulationStatus::Failed { stage: stage.to_string(), message: err.to_string() };
            }
        }
        per_modulation.push(res);
    }

    let timing = match (&bench_input, exp.bench_samples) {
        (Some((g, e, d, frames)), n) if n > 0 => {
            Some(benchmark_inference(g, e, d, frames, n, exp.bench_warmup, exp.config.kappa)?)
        }
        _ => None,
    };

    let record = ExperimentRecord {
        run_id: exp.run_id.clone(),
        config: exp.config.clone(),
        split: exp.split,
        measures: exp.measures.clone(),
        arch,
        dataset: DatasetInfo {
            path: exp.dataset.clone(),
            format: exp.format,
            sha256,
            records: ds.len(),
            frame_width: ds.frame_width(),
        },
        per_modulation,
        timing,
        run_dir: run_dir.clone(),
    };
    report(&record, &run_dir)?;
    Ok(record)
}

/// Rescores a finished run from its saved models and returns a record with
/// freshly computed AUROC values and curves.
///
/// The dataset must hash to the value recorded at training time.
pub fn evaluate_run(run_dir: &Path) -> Result<ExperimentRecord> {
    let mut record = ExperimentRecord::load(run_dir)?;
    let found = file_sha256(&record.dataset.path)?;
    if found != record.dataset.sha256 {
        return Err(HarnessError::DatasetChanged { expected: record.dataset.sha256.clone(), found });
    }
    let ds = load_dataset(&record.dataset.path, record.dataset.format)?;
    let arch = record.arch;
    let split_opts = record.split;
    let kappa = record.config.kappa;
    for res in record.per_modulation.iter_mut().filter(|r| !r.failed()) {
        let split =
            make_anomaly_split(&ds, res.modulation, split_opts.train_frac, split_opts.snr_min, split_opts.seed)?;
        if counts(&split) != res.counts {
            return Err(HarnessError::Record(format!("{}: split differs from the recorded one", res.modulation)));
        }
        let labels = split.test_labels();
        let test: Vec<&IqFrame> = split.test.iter().map(|t| &t.frame).collect();
        res.roc.clear();
        for &measure in &record.measures {
            let models = load_fanogan(run_dir, arch, res, measure)?;
            let roc = auroc(&models.score(&test, kappa)?, &labels)?;
            res.auroc_fanogan.insert(measure, roc.auroc);
            res.roc.push((roc_name(measure), roc));
        }
        if let Some(rel) = &res.cae_path {
            let net = Network::from_blob(build_network_with(Role::Cae, arch)?, &fs::read(run_dir.join(rel))?)?;
            let roc = auroc(&score_cae(&net, &test)?, &labels)?;
            res.auroc_cae = Some(roc.auroc);
            res.roc.push(("CAE".to_string(), roc));
        }
    }
    Ok(record)
}
