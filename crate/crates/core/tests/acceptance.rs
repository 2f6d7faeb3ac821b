//! Acceptance criteria, one printed line each. Run with
//! `cargo test -p rfanogan --test acceptance -- --nocapture` to see the lines.

mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use common::Linear;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rfanogan::anomaly::{anogan_score, fanogan_scores, normalize_scores, AnoganParams};
use rfanogan::ganmodels::{
    build_network, build_network_with, frames_to_batch, gan_costs, gradient_penalty_value, infer_shapes, lsgan_costs,
    wgan_costs, ArchOptions, GeneratorVariant, LayerKind, Network, Role,
};
use rfanogan::harness::{auroc_table, benchmark_inference, evaluate_run, run_experiment, Experiment, ExperimentRecord};
use rfanogan::metrics::{
    auroc, classification_metrics, density_coverage, fidelity_report, generative_pr, FidelityMeasure,
};
use rfanogan::rfdata::{
    make_anomaly_split, synth_dataset, write_container, DatasetFormat, IqFrame, Modulation, SynthClass, SynthSpec,
};
use rfanogan::training::{select_checkpoint, train_encoder, train_wgan_gp, TrainingConfig};
use rfanogan_autograd::{Tensor, Var};

enum Verdict {
    Pass(String),
    Fail(String),
    NotRun(String),
}

type Check = Result<String, String>;

/// Number, name and body; `None` from the body means the criterion was not run.
type Criterion = (u32, &'static str, Box<dyn FnOnce() -> Option<Check>>);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

// ---------------------------------------------------------------- 1

fn pair_oracle(scores: &[f64], labels: &[u8]) -> f64 {
    let (mut won, mut pairs) = (0.0, 0.0);
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if labels[i] == 1 && labels[j] == 0 {
                pairs += 1.0;
                won += if si > sj {
                    1.0
                } else if si == sj {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    won / pairs
}

fn auroc_oracle() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut tied = 0;
    for _ in 0..200 {
        let n = rng.random_range(2..=50);
        let mut labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
        labels[0] = 0;
        labels[1] = 1;
        let levels = [4.0, 20.0, 1e9][rng.random_range(0..3)];
        let mut scores: Vec<f64> = (0..n).map(|_| (rng.random::<f64>() * levels).floor() / levels).collect();
        for _ in 0..rng.random_range(1..6) {
            let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
            scores[a] = scores[b];
        }
        let mut sorted = scores.clone();
        sorted.sort_by(f64::total_cmp);
        tied += sorted.windows(2).any(|w| w[0] == w[1]) as usize;
        let got = auroc(&scores, &labels).map_err(err)?.auroc;
        let want = pair_oracle(&scores, &labels);
        ensure((got - want).abs() <= 1e-12, || format!("{got} vs {want} on {scores:?} / {labels:?}"))?;
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 5.0, || format!("took {secs:.2} s"))?;
    Ok(format!("200 instances ({tied} with ties) in {secs:.3} s"))
}

// ---------------------------------------------------------------- 2

fn loss_arithmetic() -> Check {
    let close = |a: f64, b: f64, tol: f64, what: &str| ensure((a - b).abs() <= tol, || format!("{what}: {a} vs {b}"));
    let gan = gan_costs(&[0.9], &[0.1], GeneratorVariant::Saturating).map_err(err)?;
    close(gan.critic, -(0.9f64.ln() + 0.9f64.ln()), 1e-6, "J_D")?;
    close(gan.critic, 0.21072, 1e-5, "J_D rounded")?;
    let ns = gan_costs(&[0.9], &[0.1], GeneratorVariant::NonSaturating).map_err(err)?;
    close(ns.generator, -(0.1f64.ln()), 1e-6, "J_G")?;
    let eps = 1e-9;
    close(gan_costs(&[1.0 - eps], &[eps], GeneratorVariant::Saturating).map_err(err)?.critic, 0.0, 1e-6, "perfect D")?;
    close(lsgan_costs(&[1.0], &[-1.0], 1.0, -1.0, 0.0).map_err(err)?.critic, 0.0, 1e-6, "lsgan labels")?;
    close(lsgan_costs(&[0.3], &[0.5], 1.0, -1.0, 0.0).map_err(err)?.generator, 0.25, 1e-6, "lsgan G")?;
    close(wgan_costs(&[2.0, 4.0], &[1.0, 1.0]).map_err(err)?.critic, -2.0, 1e-6, "wgan critic")?;
    close(wgan_costs(&[0.0], &[3.0]).map_err(err)?.generator, -3.0, 1e-6, "wgan G")?;
    close(wgan_costs(&[0.2, 0.7], &[0.2, 0.7]).map_err(err)?.critic, 0.0, 1e-6, "wgan symmetric")?;

    // Linear critics c(x) = s * sum x over d = 4 entries: gradient norm 2s.
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let real = Tensor::uniform(&[5, 4], -1.0, 1.0, &mut rng);
    let fake = Tensor::uniform(&[5, 4], -1.0, 1.0, &mut rng);
    for (s, lambda) in [(0.5f32, 10.0f32), (2.0, 10.0), (1.5, 5.0), (0.1, 1.0)] {
        let critic = move |x: &Var| Ok(x.scale(s).sum_to(&[x.shape()[0], 1])?);
        let gp = gradient_penalty_value(critic, &real, &fake, lambda, 7).map_err(err)?;
        let want = lambda as f64 * (2.0 * s as f64 - 1.0).powi(2);
        close(gp, want, if s == 0.5 { 1e-6 } else { 1e-5 }, &format!("penalty s={s} lambda={lambda}"))?;
    }
    Ok("cost examples and linear-critic penalties (0 and 90 included)".into())
}

// ---------------------------------------------------------------- 3

fn shape_closure() -> Check {
    let c = build_network(Role::Critic, 128).map_err(err)?;
    let flat = c.layers.iter().find(|l| l.kind == LayerKind::Reshape).ok_or("critic has no reshape")?;
    ensure(flat.in_shape == [1024, 2, 4] && flat.out_shape == [8192], || format!("critic reshape {flat:?}"))?;
    ensure(infer_shapes(&c, &[1, 1, 2, 128]).map_err(err)?.last() == Some(&vec![1, 1]), || "critic output".into())?;

    let cae = build_network(Role::Cae, 128).map_err(err)?;
    let shapes = infer_shapes(&cae, &[1, 1, 2, 128]).map_err(err)?;
    let bottleneck = cae.layers.iter().position(|l| l.kind == LayerKind::Reshape).ok_or("cae has no reshape")?;
    ensure(shapes[bottleneck - 1] == [1, 1024, 2, 2] && shapes[bottleneck] == [1, 4096], || {
        format!("cae bottleneck {:?} -> {:?}", shapes[bottleneck - 1], shapes[bottleneck])
    })?;
    ensure(shapes.last() == Some(&vec![1, 1, 2, 128]), || "cae output".into())?;

    let g = build_network(Role::Generator, 128).map_err(err)?;
    ensure(infer_shapes(&g, &[1, 100]).map_err(err)?.last() == Some(&vec![1, 1, 2, 128]), || "generator".into())?;
    let e = build_network(Role::Encoder, 128).map_err(err)?;
    ensure(infer_shapes(&e, &[1, 1, 2, 128]).map_err(err)?.last() == Some(&vec![1, 100]), || "encoder".into())?;
    Ok("critic (1024,2,4)->8192, CAE bottleneck from (1024,2,2), G/E close".into())
}

// ---------------------------------------------------------------- 4

fn anomaly_identities() -> Check {
    let shape = [1, 2, 8];
    let id = || Linear::identity(&shape);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x = Tensor::uniform(&[6, 1, 2, 8], -1.0, 1.0, &mut rng);
    let s = fanogan_scores(&x, &id(), &id(), &id(), 1.0).map_err(err)?;
    ensure(s.iter().all(|v| v.abs() <= 1e-9), || format!("perfect reconstruction scores {s:?}"))?;

    for trial in 0..50 {
        let n = rng.random_range(4..40);
        let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..5.0)).collect();
        let mut labels: Vec<u8> = (0..n).map(|_| rng.random_range(0..2)).collect();
        labels[0] = 0;
        labels[1] = 1;
        let norm = normalize_scores(&raw).map_err(err)?;
        let scaled: Vec<f64> = norm.scores.iter().map(|s| s.normalized.unwrap()).collect();
        let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for (r, v) in raw.iter().zip(&scaled) {
            if *r == lo {
                ensure(*v == 0.0, || format!("trial {trial}: min maps to {v}"))?;
            }
            if *r == hi {
                ensure(*v == 1.0, || format!("trial {trial}: max maps to {v}"))?;
            }
        }
        let (a, b) = (auroc(&raw, &labels).map_err(err)?.auroc, auroc(&scaled, &labels).map_err(err)?.auroc);
        ensure(a == b, || format!("trial {trial}: AUROC {a} vs {b}"))?;
    }

    let (g, d) = (Linear::identity(&[1]), Linear::identity(&[1]));
    let p = AnoganParams { lambda: 1e-9, steps: 20, step_size: 0.01, seed: 4, backtracking: false };
    let r = anogan_score(&Tensor::new(&[1, 1], vec![0.3]).map_err(err)?, &g, &d, &p).map_err(err)?;
    ensure((r.score.raw - r.residual).abs() <= 1e-6, || format!("anogan {} vs residual {}", r.score.raw, r.residual))?;
    let direct = (0.3 - r.z_final.data()[0] as f64).abs();
    ensure((r.residual - direct).abs() <= 1e-6, || format!("residual {} vs {direct}", r.residual))?;
    Ok("f-AnoGAN zero, min-max scaling, AnoGAN residual limit".into())
}

// ---------------------------------------------------------------- 5

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn kth(set: &[Vec<f64>], i: usize, k: usize) -> f64 {
    let mut ds: Vec<f64> = (0..set.len()).filter(|&j| j != i).map(|j| dist(&set[i], &set[j])).collect();
    ds.sort_by(f64::total_cmp);
    ds[k - 1]
}

fn brute(real: &[Vec<f64>], fake: &[Vec<f64>], k: usize) -> (f64, f64, f64, f64) {
    let ball = |p: &[f64], set: &[Vec<f64>], i: usize| dist(p, &set[i]) <= kth(set, i, k);
    let nf = fake.len() as f64;
    let nr = real.len() as f64;
    let precision = fake.iter().filter(|f| (0..real.len()).any(|i| ball(f, real, i))).count() as f64 / nf;
    let recall = real.iter().filter(|r| (0..fake.len()).any(|j| ball(r, fake, j))).count() as f64 / nr;
    let hits: usize = fake.iter().map(|f| (0..real.len()).filter(|&i| ball(f, real, i)).count()).sum();
    let coverage = (0..real.len()).filter(|&i| fake.iter().any(|f| ball(f, real, i))).count() as f64 / nr;
    (precision, recall, hits as f64 / (k as f64 * nf), coverage)
}

fn cloud(rng: &mut ChaCha8Rng, n: usize, dim: usize, centre: f64) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..dim).map(|_| centre + rng.random_range(-1.0..1.0)).collect()).collect()
}

fn fidelity_sanity() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let real = cloud(&mut rng, 40, 3, 0.0);
    let same = fidelity_report(&real, &real, 5, 50).map_err(err)?;
    ensure((same.precision, same.recall, same.coverage) == (1.0, 1.0, 1.0) && same.jsd <= 0.05, || {
        format!("identical sets: {same:?}")
    })?;
    let far = cloud(&mut rng, 40, 3, 1e6);
    let apart = fidelity_report(&real, &far, 5, 50).map_err(err)?;
    ensure((apart.precision, apart.recall, apart.coverage) == (0.0, 0.0, 0.0) && apart.jsd >= 0.95, || {
        format!("separated sets: {apart:?}")
    })?;
    let mut n = 0;
    for _ in 0..200 {
        let k = rng.random_range(1..=4);
        let dim = rng.random_range(1..=3);
        let (nr, nf) = (rng.random_range(k + 1..=20), rng.random_range(k + 1..=20));
        let real = cloud(&mut rng, nr, dim, 0.0);
        let shift = rng.random_range(0.0..2.0);
        let fake = cloud(&mut rng, nf, dim, shift);
        let (p, r) = generative_pr(&real, &fake, k).map_err(err)?;
        let (d, c) = density_coverage(&real, &fake, k).map_err(err)?;
        let want = brute(&real, &fake, k);
        ensure((p, r, d, c) == want, || format!("k={k}: {:?} vs {want:?}", (p, r, d, c)))?;
        n += 1;
    }
    Ok(format!("identical/separated sets and {n} brute-force instances"))
}

// ---------------------------------------------------------------- 6

const SMOKE_BUDGET: Duration = Duration::from_secs(600);

/// Tone inliers against wideband-noise outliers at W = 128: 2000 frames of
/// each, 80 % of the tones for training, 30 epochs of GAN and encoder training
/// with JSD selection.
fn smoke_attempt(seed: u64) -> Result<(f64, Duration), String> {
    let start = Instant::now();
    let spec = SynthSpec {
        classes: vec![SynthClass::Tone, SynthClass::WidebandNoise],
        frames_per_class: 2000,
        snr_db: 10.0,
        width: 128,
    };
    let ds = synth_dataset(&spec, seed).map_err(err)?;
    let split = make_anomaly_split(&ds, Modulation::Tone, 0.8, -20, seed).map_err(err)?;
    let cfg = TrainingConfig { epochs: 30, channel_divisor: 8, seed, ..TrainingConfig::default() };
    let wgan = train_wgan_gp(&split.train, &cfg).map_err(err)?;
    let chosen = select_checkpoint(&wgan.checkpoints, FidelityMeasure::Jsd).map_err(err)?;
    let (g, d) = (wgan.generator(chosen).map_err(err)?, wgan.critic(chosen).map_err(err)?);
    let e = train_encoder(&g, &d, &split.train, &cfg).map_err(err)?.encoder;
    let frames: Vec<&IqFrame> = split.test.iter().map(|t| &t.frame).collect();
    let mut scores = Vec::new();
    for chunk in frames.chunks(512) {
        scores.extend(fanogan_scores(&frames_to_batch(chunk).map_err(err)?, &g, &e, &d, cfg.kappa).map_err(err)?);
    }
    let a = auroc(&scores, &split.test_labels()).map_err(err)?.auroc;
    Ok((a, start.elapsed()))
}

fn smoke() -> Check {
    let mut notes = Vec::new();
    // first try plus up to two reseeded retries
    for seed in [1u64, 2, 3] {
        match smoke_attempt(seed) {
            Ok((a, t)) if a >= 0.95 && t <= SMOKE_BUDGET => {
                notes.push(format!("seed {seed}: AUROC {a:.4} in {:.0} s", t.as_secs_f64()));
                return Ok(notes.join("; "));
            }
            Ok((a, t)) => notes.push(format!("seed {seed}: AUROC {a:.4} in {:.0} s", t.as_secs_f64())),
            Err(e) => notes.push(format!("seed {seed}: {e}")),
        }
    }
    Err(notes.join("; "))
}

// ---------------------------------------------------------------- 7

/// Needs `RFANOGAN_RADIOML` pointing at the public pickled dataset.
/// `RFANOGAN_RADIOML_DIVISOR` shrinks the networks for CPU-only machines.
fn desk_scale() -> Option<Check> {
    let path = std::env::var_os("RFANOGAN_RADIOML")?;
    let divisor = std::env::var("RFANOGAN_RADIOML_DIVISOR").ok().and_then(|v| v.parse().ok()).unwrap_or(1);
    Some((|| {
        let root = tempfile::tempdir().map_err(err)?;
        let mut exp = Experiment::new("desk", PathBuf::from(path), DatasetFormat::PublicSerializedMap);
        exp.modulations = vec![Modulation::Gfsk, Modulation::Cpfsk, Modulation::AmDsb];
        exp.measures = vec![FidelityMeasure::Jsd];
        exp.config = TrainingConfig { epochs: 100, channel_divisor: divisor, ..TrainingConfig::default() };
        let rec = run_experiment(&exp, root.path()).map_err(err)?;
        let mut lines = Vec::new();
        let mut ok = true;
        for r in &rec.per_modulation {
            let f = r.auroc_fanogan.get(&FidelityMeasure::Jsd).copied().unwrap_or(f64::NAN);
            let c = r.auroc_cae.unwrap_or(f64::NAN);
            ok &= f >= 0.85 && f > c;
            lines.push(format!("{} f-AnoGAN {f:.3} CAE {c:.3}", r.modulation));
        }
        let msg = lines.join("; ");
        if ok {
            Ok(msg)
        } else {
            Err(msg)
        }
    })())
}

// ---------------------------------------------------------------- 8

fn classification() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..100 {
        let (tp, fp, tn, fn_) =
            (rng.random_range(0..30), rng.random_range(0..30), rng.random_range(0..30), rng.random_range(1..30));
        let m = classification_metrics(tp, fp, tn, fn_).map_err(err)?;
        let truth: Vec<(bool, bool)> =
            [((true, true), tp), ((false, true), fp), ((false, false), tn), ((true, false), fn_)]
                .into_iter()
                .flat_map(|(pair, n)| std::iter::repeat_n(pair, n as usize))
                .collect();
        let correct = truth.iter().filter(|(t, p)| t == p).count() as f64 / truth.len() as f64;
        ensure((m.accuracy - correct).abs() <= 1e-12, || format!("accuracy {} vs {correct}", m.accuracy))?;
        let f1 =
            if m.precision + m.recall == 0.0 { 0.0 } else { 2.0 * m.precision * m.recall / (m.precision + m.recall) };
        ensure((m.f1 - f1).abs() <= 1e-12, || format!("f1 {} vs {f1}", m.f1))?;
    }
    Ok("100 confusion matrices".into())
}

// ---------------------------------------------------------------- 9

fn files_under(dir: &Path, out: &mut Vec<PathBuf>) {
    for entry in fs::read_dir(dir).unwrap().flatten() {
        let p = entry.path();
        if p.is_dir() {
            files_under(&p, out);
        } else {
            out.push(p);
        }
    }
}

fn determinism() -> Check {
    let dir = tempfile::tempdir().map_err(err)?;
    let spec =
        SynthSpec { classes: vec![SynthClass::Tone, SynthClass::Bpsk], frames_per_class: 48, snr_db: 5.0, width: 64 };
    let data = dir.path().join("d.rfds");
    fs::write(&data, write_container(&synth_dataset(&spec, 9).map_err(err)?).map_err(err)?).map_err(err)?;
    let run = |id: &str| -> Result<ExperimentRecord, String> {
        let mut exp = Experiment::new(id, &data, DatasetFormat::NeutralContainer);
        exp.modulations = vec![Modulation::Tone, Modulation::Bpsk];
        exp.config = TrainingConfig {
            epochs: 3,
            eval_every: 1,
            channel_divisor: 32,
            batch_size: 16,
            seed: 9,
            ..TrainingConfig::default()
        };
        run_experiment(&exp, &dir.path().join(id)).map_err(err)
    };
    let (a, b) = (run("a")?, run("b")?);
    ensure(auroc_table(&a) == auroc_table(&b), || "AUROC tables differ".into())?;
    let mut ckpts = Vec::new();
    files_under(&dir.path().join("a/a"), &mut ckpts);
    let mut compared = 0;
    for p in ckpts.iter().filter(|p| p.extension().is_some_and(|e| e == "bin")) {
        let rel = p.strip_prefix(dir.path().join("a/a")).unwrap();
        let other = dir.path().join("b/b").join(rel);
        ensure(fs::read(p).ok() == fs::read(&other).ok(), || format!("{} differs", rel.display()))?;
        compared += 1;
    }
    ensure(compared > 0, || "no model files written".into())?;
    let again = evaluate_run(&dir.path().join("a/a")).map_err(err)?;
    ensure(auroc_table(&again) == auroc_table(&a), || "rescored table differs".into())?;
    Ok(format!("{compared} model files bit-identical; tables equal, also after rescoring"))
}

// ---------------------------------------------------------------- 10

fn benchmark() -> Check {
    let arch = ArchOptions { frame_width: 128, channel_divisor: 8 };
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut net = |r: Role| Network::new(build_network_with(r, arch).map_err(err)?, &mut rng).map_err(err);
    let (g, e, d) = (net(Role::Generator)?, net(Role::Encoder)?, net(Role::Critic)?);
    let spec = SynthSpec { classes: vec![SynthClass::Tone], frames_per_class: 16, snr_db: 10.0, width: 128 };
    let frames: Vec<IqFrame> =
        synth_dataset(&spec, 0).map_err(err)?.records().iter().map(|r| r.frame.clone()).collect();
    let b = benchmark_inference(&g, &e, &d, &frames, 60, 10, 1.0).map_err(err)?;
    ensure(b.mean_latency_s.is_finite() && b.mean_latency_s > 0.0, || format!("latency {}", b.mean_latency_s))?;
    let rel = (b.throughput_samples_per_s * b.mean_latency_s - 1.0).abs();
    ensure(rel <= 1e-12, || format!("throughput x latency off by {rel}"))?;
    let none = benchmark_inference(&g, &e, &d, &frames, 5, 5, 1.0);
    ensure(none.is_err_and(|e| e.to_string().contains("no timed samples")), || "warmup = n accepted".into())?;
    Ok(format!(
        "{:.6} s/sample, {:.1} samples/s (div 8, {}); reference 0.005784 s / 172.9 samples/s not asserted",
        b.mean_latency_s, b.throughput_samples_per_s, b.hardware
    ))
}

// ----------------------------------------------------------------

#[test]
fn acceptance() {
    let criteria: Vec<Criterion> = vec![
        (1, "AUROC oracle equivalence", Box::new(|| Some(auroc_oracle()))),
        (2, "loss arithmetic", Box::new(|| Some(loss_arithmetic()))),
        (3, "shape closure", Box::new(|| Some(shape_closure()))),
        (4, "anomaly-score identities", Box::new(|| Some(anomaly_identities()))),
        (5, "fidelity sanity", Box::new(|| Some(fidelity_sanity()))),
        (6, "synthetic smoke reproduction", Box::new(|| Some(smoke()))),
        (7, "desk-scale partial table", Box::new(desk_scale)),
        (8, "classification metrics", Box::new(|| Some(classification()))),
        (9, "determinism", Box::new(|| Some(determinism()))),
        (10, "benchmark plumbing", Box::new(|| Some(benchmark()))),
    ];
    println!();
    let mut failed = Vec::new();
    for (n, name, run) in criteria {
        let start = Instant::now();
        let verdict = match std::panic::catch_unwind(std::panic::AssertUnwindSafe(run)) {
            Ok(None) => Verdict::NotRun("set RFANOGAN_RADIOML to the public dataset pickle".into()),
            Ok(Some(Ok(msg))) => Verdict::Pass(msg),
            Ok(Some(Err(msg))) => Verdict::Fail(msg),
            Err(_) => Verdict::Fail("panicked".into()),
        };
        let secs = start.elapsed().as_secs_f64();
        match verdict {
            Verdict::Pass(m) => println!("PASS {n:>2} {name}: {m} [{secs:.1} s]"),
            Verdict::NotRun(m) => println!("NOT RUN {n:>2} {name}: {m}"),
            Verdict::Fail(m) => {
                println!("FAIL {n:>2} {name}: {m} [{secs:.1} s]");
                failed.push(n);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
