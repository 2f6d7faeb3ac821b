use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rfanogan::anomaly::{detect, normalize_scores, write_score_csv, AnomalyScore, ScoreRow};
use rfanogan::harness::{
    auroc_table, benchmark_inference, evaluate_run, report, run_experiment, runs_root, timestamp_run_id, Experiment,
    ExperimentRecord, ModulationStatus, SplitOptions, REFERENCE_LATENCY_S, REFERENCE_THROUGHPUT,
};
use rfanogan::metrics::FidelityMeasure;
use rfanogan::rfdata::{
    load_dataset, synth_dataset, write_container, DatasetFormat, IqFrame, Modulation, SynthClass, SynthSpec,
    DEFAULT_SNR_MIN, DEFAULT_TRAIN_FRAC,
};
use rfanogan::training::TrainingConfig;

#[derive(Parser)]
#[command(name = "rfanogan", version, about = "f-AnoGAN anomaly detection for RF I/Q frames")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert the public pickled dataset to the neutral container.
    Ingest {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value = "public-serialized-map")]
        dataset_format: DatasetFormat,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a seeded synthetic dataset as a neutral container.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "tone,wideband-noise")]
        classes: Vec<SynthClass>,
        #[arg(long, default_value_t = 2000)]
        frames_per_class: usize,
        #[arg(long, default_value_t = 10.0, allow_negative_numbers = true)]
        snr_db: f64,
        #[arg(long, default_value_t = 128)]
        width: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train and evaluate one inlier modulation.
    Train {
        #[arg(long)]
        inlier: Modulation,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Train and evaluate every requested inlier modulation (all eleven public ones by default).
    Sweep {
        #[arg(long, value_delimiter = ',')]
        inlier: Vec<Modulation>,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Score frames with a trained model and write one CSV row per frame.
    Score {
        #[command(flatten)]
        model: ModelArgs,
        /// Score every record of this dataset instead of the run's test split.
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long, default_value = "neutral-container")]
        dataset_format: DatasetFormat,
        /// Outlier threshold on the raw score; defaults to mean + 1 std of the training-frame scores.
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Time single-frame scoring with a trained model.
    Bench {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 100)]
        warmup: usize,
    },
    /// Rewrite a run's report files, optionally rescoring from the saved models.
    Report {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Recompute every AUROC from the checkpoints and check it against the recorded table.
        #[arg(long)]
        rescore: bool,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, default_value = "neutral-container")]
    dataset_format: DatasetFormat,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Checkpoint-selection measures (default: all five).
    #[arg(long, value_delimiter = ',')]
    measure: Vec<FidelityMeasure>,
    /// `key=value` file overriding the training defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Extra `key=value` overrides, applied after `--config`.
    #[arg(long = "set")]
    overrides: Vec<String>,
    /// Runs root; defaults to `$RFANOGAN_RUNS_DIR` or `runs`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    run_id: Option<String>,
    #[arg(long, default_value_t = DEFAULT_TRAIN_FRAC)]
    train_frac: f64,
    #[arg(long, default_value_t = DEFAULT_SNR_MIN, allow_negative_numbers = true)]
    snr_min: i32,
    #[arg(long, default_value_t = 0)]
    split_seed: u64,
    /// Skip the autoencoder baseline.
    #[arg(long)]
    no_cae: bool,
    /// Timed scores after training; 0 skips the benchmark.
    #[arg(long, default_value_t = 0)]
    bench_samples: usize,
    #[arg(long, default_value_t = 0)]
    bench_warmup: usize,
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    inlier: Modulation,
    #[arg(long, default_value = "JSD")]
    measure: FidelityMeasure,
}

fn training_config(args: &RunArgs) -> Result<TrainingConfig> {
    let mut cfg = TrainingConfig::default();
    if let Some(path) = &args.config {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        cfg.apply_kv(&text)?;
    }
    for kv in &args.overrides {
        let Some((k, v)) = kv.split_once('=') else { bail!("--set expects key=value, got {kv:?}") };
        cfg.set(k.trim(), v)?;
    }
    if let Some(e) = args.epochs {
        cfg.epochs = e;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(args: RunArgs, modulations: Vec<Modulation>) -> Result<ExitCode> {
    let config = training_config(&args)?;
    let run_id = args.run_id.clone().unwrap_or_else(timestamp_run_id);
    let root = args.out.clone().unwrap_or_else(runs_root);
    let mut exp = Experiment::new(run_id, &args.dataset, args.dataset_format);
    exp.modulations = modulations;
    if !args.measure.is_empty() {
        exp.measures = args.measure;
    }
    exp.config = config;
    exp.split = SplitOptions { train_frac: args.train_frac, snr_min: args.snr_min, seed: args.split_seed };
    exp.cae = !args.no_cae;
    exp.bench_samples = args.bench_samples;
    exp.bench_warmup = args.bench_warmup;

    let record = run_experiment(&exp, &root)?;
    print!("{}", auroc_table(&record));
    for r in &record.per_modulation {
        if let ModulationStatus::Failed { stage, message } = &r.status {
            eprintln!("{}: failed in {stage}: {message}", r.modulation);
        }
    }
    if let Some(t) = &record.timing {
        eprintln!("latency {:.6} s, {:.1} samples/s ({})", t.mean_latency_s, t.throughput_samples_per_s, t.hardware);
    }
    eprintln!("run written to {}", record.run_dir.display());
    Ok(if record.any_failed() { ExitCode::FAILURE } else { ExitCode::SUCCESS })
}

fn score(
    model: ModelArgs,
    dataset: Option<(PathBuf, DatasetFormat)>,
    threshold: Option<f64>,
    out: &Path,
) -> Result<()> {
    let record = ExperimentRecord::load(&model.run)?;
    let models = record.load_fanogan(&model.run, model.inlier, model.measure)?;
    let kappa = record.config.kappa;
    let split = record.rebuild_split(model.inlier)?;
    let tau = match threshold {
        Some(t) => t,
        None => {
            let train: Vec<&IqFrame> = split.train.iter().collect();
            let s = models.score(&train, kappa)?;
            let n = s.len() as f64;
            let mean = s.iter().sum::<f64>() / n;
            mean + (s.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
        }
    };
    let items: Vec<(usize, Modulation, i32, IqFrame)> = match dataset {
        Some((path, format)) => load_dataset(&path, format)?
            .records()
            .iter()
            .enumerate()
            .map(|(i, r)| (i, r.modulation, r.snr_db, r.frame.clone()))
            .collect(),
        None => split.test.into_iter().map(|t| (t.source_index, t.modulation, t.snr_db, t.frame)).collect(),
    };
    let frames: Vec<&IqFrame> = items.iter().map(|t| &t.3).collect();
    let raw = models.score(&frames, kappa)?;
    let norm = normalize_scores(&raw)?;
    let rows = items
        .iter()
        .zip(norm.scores)
        .map(|((i, m, snr, _), s)| {
            Ok(ScoreRow {
                frame_index: *i,
                modulation: *m,
                snr_db: *snr,
                raw: s.raw,
                normalized: s.normalized,
                verdict: detect(AnomalyScore::new(s.raw), tau)?.verdict,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    write_score_csv(fs::File::create(out)?, &rows)?;
    eprintln!("{} frames scored with threshold {tau}, written to {}", rows.len(), out.display());
    Ok(())
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn real_main() -> Result<ExitCode> {
    match Cli::parse().command {
        Command::Ingest { dataset, dataset_format, out } => {
            let ds = load_dataset(&dataset, dataset_format)?;
            fs::write(&out, write_container(&ds)?)?;
            eprintln!("{} records of width {} written to {}", ds.len(), ds.frame_width(), out.display());
        }
        Command::Synth { out, classes, frames_per_class, snr_db, width, seed } => {
            let ds = synth_dataset(&SynthSpec { classes, frames_per_class, snr_db, width }, seed)?;
            fs::write(&out, write_container(&ds)?)?;
            eprintln!("{} records written to {}", ds.len(), out.display());
        }
        Command::Train { inlier, run: args } => return run(args, vec![inlier]),
        Command::Sweep { inlier, run: args } => {
            let mods = if inlier.is_empty() { Modulation::PUBLIC.to_vec() } else { inlier };
            return run(args, mods);
        }
        Command::Score { model, dataset, dataset_format, threshold, out } => {
            score(model, dataset.map(|d| (d, dataset_format)), threshold, &out)?;
        }
        Command::Bench { model, samples, warmup } => {
            let record = ExperimentRecord::load(&model.run)?;
            let m = record.load_fanogan(&model.run, model.inlier, model.measure)?;
            let split = record.rebuild_split(model.inlier)?;
            let frames: Vec<IqFrame> = split.test.into_iter().map(|t| t.frame).collect();
            let b = benchmark_inference(
                &m.generator,
                &m.encoder,
                &m.critic,
                &frames,
                samples,
                warmup,
                record.config.kappa,
            )?;
            println!("mean_latency_s={}", b.mean_latency_s);
            println!("throughput_samples_per_s={}", b.throughput_samples_per_s);
            println!("timed_samples={}", b.timed_samples);
            println!("hardware={}", b.hardware);
            println!("reference: {REFERENCE_LATENCY_S} s, {REFERENCE_THROUGHPUT} samples/s (full-size models, GPU)");
        }
        Command::Report { run, out, rescore } => {
            let recorded = ExperimentRecord::load(&run)?;
            let record = if rescore {
                let fresh = evaluate_run(&run)?;
                if auroc_table(&fresh) != auroc_table(&recorded) {
                    bail!("rescored table differs from the recorded one");
                }
                fresh
            } else {
                recorded
            };
            let files = report(&record, out.as_deref().unwrap_or(&run))?;
            print!("{}", fs::read_to_string(&files.table)?);
            if record.any_failed() {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}
