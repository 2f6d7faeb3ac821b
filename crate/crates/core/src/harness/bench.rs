use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{HarnessError, Result};
use crate::anomaly::fanogan_score;
use crate::ganmodels::Model;
use crate::rfdata::IqFrame;

/// Reference latency and throughput of the full-size models on a desktop GPU; archived, never asserted.
pub const REFERENCE_LATENCY_S: f64 = 0.005784;
pub const REFERENCE_THROUGHPUT: f64 = 172.9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Benchmark {
    pub mean_latency_s: f64,
    pub throughput_samples_per_s: f64,
    pub timed_samples: usize,
    pub warmup: usize,
    pub hardware: String,
}

/// CPU model and logical core count, as far as the platform reports them.
pub fn hardware_description() -> String {
    let model = std::fs::read_to_string("/proc/cpuinfo")
        .ok()
        .and_then(|s| {
            s.lines()
                .find(|l| l.starts_with("model name"))
                .and_then(|l| l.split_once(':'))
                .map(|(_, v)| v.trim().to_string())
        })
        .unwrap_or_else(|| "unknown cpu".to_string());
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    format!(
        "{model}; {cores} logical cpus; {} {}; single-threaded scoring",
        std::env::consts::OS,
        std::env::consts::ARCH
    )
}

/// Times `n_samples` one-frame f-AnoGAN scores (encoder, generator, two critic
/// passes and the score arithmetic), cycling through `frames`. The first
/// `warmup` are discarded; data preparation is outside the timed region.
pub fn benchmark_inference<G: Model, E: Model, D: Model>(
    g: &G,
    e: &E,
    d: &D,
    frames: &[IqFrame],
    n_samples: usize,
    warmup: usize,
    kappa: f64,
) -> Result<Benchmark> {
    if n_samples < 1 {
        return Err(HarnessError::Samples(n_samples));
    }
    if warmup >= n_samples {
        return Err(HarnessError::NoTimedSamples { n_samples, warmup });
    }
    if frames.is_empty() {
        return Err(HarnessError::NoFrames);
    }
    let mut total = 0.0;
    for i in 0..n_samples {
        let frame = &frames[i % frames.len()];
        let start = Instant::now();
        let score = fanogan_score(frame, g, e, d, kappa)?;
        let elapsed = start.elapsed().as_secs_f64();
        std::hint::black_box(score);
        if i >= warmup {
            total += elapsed;
        }
    }
    let timed = n_samples - warmup;
    // Guard against a zero reading from a coarse clock.
    let mean = (total / timed as f64).max(f64::MIN_POSITIVE);
    Ok(Benchmark {
        mean_latency_s: mean,
        throughput_samples_per_s: 1.0 / mean,
        timed_samples: timed,
        warmup,
        hardware: hardware_description(),
    })
}
