use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn rfanogan(args: &[&str], runs: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rfanogan")).args(args).env("RFANOGAN_RUNS_DIR", runs).output().unwrap()
}

fn ok(out: &Output) {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

const TINY: [&str; 10] =
    ["--epochs", "2", "--set", "channel_divisor=64", "--set", "batch_size=16", "--set", "eval_every=1", "--seed", "3"];

#[test]
fn synth_train_score_bench_report() {
    let dir = tempfile::tempdir().unwrap();
    let runs = dir.path().join("runs");
    let data = dir.path().join("d.rfds");
    let data_s = data.to_str().unwrap();
    ok(&rfanogan(
        &["synth", "--out", data_s, "--classes", "tone,wideband-noise", "--frames-per-class", "30", "--width", "64"],
        &runs,
    ));

    let cfg = dir.path().join("cfg.txt");
    fs::write(&cfg, "encoder_epochs=1\ncae_epochs=1\n").unwrap();
    let mut args = vec!["train", "--inlier", "TONE", "--dataset", data_s, "--run-id", "r1", "--measure", "JSD"];
    args.extend(TINY);
    args.extend(["--config", cfg.to_str().unwrap()]);
    let out = rfanogan(&args, &runs);
    ok(&out);
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.starts_with("modulation,JSD,CAE\nTONE,"), "{table}");
    // the runs root comes from the environment
    assert!(runs.join("r1/results.json").is_file());

    // same id again: refused, nothing overwritten
    let again = rfanogan(&args, &runs);
    assert!(!again.status.success());
    assert!(String::from_utf8_lossy(&again.stderr).contains("run exists"));

    let run = runs.join("r1");
    let run_s = run.to_str().unwrap();
    let csv = dir.path().join("scores.csv");
    ok(&rfanogan(&["score", "--run", run_s, "--inlier", "TONE", "--out", csv.to_str().unwrap()], &runs));
    let text = fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next().unwrap(), "frame_index,modulation,snr_db,raw_score,normalized_score,verdict");
    assert_eq!(text.lines().count(), 1 + 6 + 30);

    let out = rfanogan(&["bench", "--run", run_s, "--inlier", "TONE", "--samples", "5", "--warmup", "1"], &runs);
    ok(&out);
    assert!(String::from_utf8_lossy(&out.stdout).contains("timed_samples=4"));
    let out = rfanogan(&["bench", "--run", run_s, "--inlier", "TONE", "--samples", "3", "--warmup", "3"], &runs);
    assert!(String::from_utf8_lossy(&out.stderr).contains("no timed samples"));

    let out = rfanogan(&["report", "--run", run_s, "--rescore"], &runs);
    ok(&out);
    assert_eq!(String::from_utf8(out.stdout).unwrap(), table);
}

#[test]
fn exit_code_reports_a_failed_modulation() {
    let dir = tempfile::tempdir().unwrap();
    let runs = dir.path().join("runs");
    let data = dir.path().join("d.rfds");
    let data_s = data.to_str().unwrap();
    ok(&rfanogan(&["synth", "--out", data_s, "--frames-per-class", "20", "--width", "64"], &runs));
    let mut args = vec!["sweep", "--inlier", "GFSK,TONE", "--dataset", data_s, "--run-id", "f", "--no-cae"];
    args.extend(TINY);
    args.extend(["--set", "encoder_epochs=1"]);
    let out = rfanogan(&args, &runs);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("GFSK: failed in split"));
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.lines().any(|l| l.starts_with("TONE,0") || l.starts_with("TONE,1")), "{table}");
}
