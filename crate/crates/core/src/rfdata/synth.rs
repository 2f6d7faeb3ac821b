//! Seeded synthetic baseband waveforms in additive white Gaussian noise.

use std::f64::consts::PI;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{DataError, IqFrame, Modulation, Result, RfDataset, SampleRecord, MIN_FRAME_WIDTH, SNR_NOISELESS};

const SAMPLES_PER_SYMBOL: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SynthClass {
    Tone,
    Bpsk,
    Qpsk,
    Fsk,
    WidebandNoise,
}

impl SynthClass {
    pub fn modulation(self) -> Modulation {
        match self {
            SynthClass::Tone => Modulation::Tone,
            SynthClass::Bpsk => Modulation::Bpsk,
            SynthClass::Qpsk => Modulation::Qpsk,
            SynthClass::Fsk => Modulation::Fsk,
            SynthClass::WidebandNoise => Modulation::WidebandNoise,
        }
    }
}

impl FromStr for SynthClass {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "tone" => Ok(Self::Tone),
            "bpsk" => Ok(Self::Bpsk),
            "qpsk" => Ok(Self::Qpsk),
            "fsk" => Ok(Self::Fsk),
            "wideband-noise" | "noise" => Ok(Self::WidebandNoise),
            other => Err(DataError::UnknownClass(other.to_string())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub classes: Vec<SynthClass>,
    pub frames_per_class: usize,
    /// Signal-to-noise ratio in dB; `f64::INFINITY` means no noise.
    pub snr_db: f64,
    pub width: usize,
}

/// Unit-power complex baseband waveform of `width` samples.
fn waveform(class: SynthClass, width: usize, rng: &mut ChaCha8Rng) -> Vec<(f64, f64)> {
    let phase0: f64 = rng.random_range(0.0..2.0 * PI);
    match class {
        SynthClass::Tone => {
            let freq: f64 = rng.random_range(0.02..0.12);
            (0..width)
                .map(|n| {
                    let p = 2.0 * PI * freq * n as f64 + phase0;
                    (p.cos(), p.sin())
                })
                .collect()
        }
        SynthClass::Bpsk | SynthClass::Qpsk => {
            let n_sym = width.div_ceil(SAMPLES_PER_SYMBOL);
            let symbols: Vec<f64> = (0..n_sym)
                .map(|_| match class {
                    SynthClass::Bpsk => PI * rng.random_range(0..2) as f64,
                    _ => PI / 4.0 + PI / 2.0 * rng.random_range(0..4) as f64,
                })
                .collect();
            (0..width)
                .map(|n| {
                    let p = symbols[n / SAMPLES_PER_SYMBOL] + phase0;
                    (p.cos(), p.sin())
                })
                .collect()
        }
        SynthClass::Fsk => {
            let deviation = 0.06;
            let mut phase = phase0;
            let mut bit = 0;
            (0..width)
                .map(|n| {
                    if n % SAMPLES_PER_SYMBOL == 0 {
                        bit = rng.random_range(0..2);
                    }
                    let out = (phase.cos(), phase.sin());
                    let f = if bit == 1 { deviation } else { -deviation };
                    phase += 2.0 * PI * f;
                    out
                })
                .collect()
        }
        SynthClass::WidebandNoise => (0..width)
            .map(|_| {
                let i: f64 = StandardNormal.sample(rng);
                let q: f64 = StandardNormal.sample(rng);
                (i * 0.5f64.sqrt(), q * 0.5f64.sqrt())
            })
            .collect(),
    }
}

/// Generates `frames_per_class` frames for every class in `spec`, classes in order.
pub fn synth_dataset(spec: &SynthSpec, seed: u64) -> Result<RfDataset> {
    if spec.width < MIN_FRAME_WIDTH {
        return Err(DataError::FrameShape(format!("width {} < {MIN_FRAME_WIDTH}", spec.width)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noiseless = spec.snr_db.is_infinite() && spec.snr_db > 0.0;
    let noise_std = if noiseless { 0.0 } else { (10f64.powf(-spec.snr_db / 10.0) / 2.0).sqrt() };
    let snr_label = if noiseless { SNR_NOISELESS } else { spec.snr_db.round() as i32 };

    let mut records = Vec::with_capacity(spec.classes.len() * spec.frames_per_class);
    for &class in &spec.classes {
        for _ in 0..spec.frames_per_class {
            let wave = waveform(class, spec.width, &mut rng);
            let mut i = Vec::with_capacity(spec.width);
            let mut q = Vec::with_capacity(spec.width);
            for (si, sq) in wave {
                let (ni, nq) = if noiseless {
                    (0.0, 0.0)
                } else {
                    let a: f64 = StandardNormal.sample(&mut rng);
                    let b: f64 = StandardNormal.sample(&mut rng);
                    (a * noise_std, b * noise_std)
                };
                i.push((si + ni) as f32);
                q.push((sq + nq) as f32);
            }
            records.push(SampleRecord {
                frame: IqFrame::from_iq(&i, &q)?,
                modulation: class.modulation(),
                snr_db: snr_label,
            });
        }
    }
    let provenance = format!(
        "synthetic: classes={:?} frames_per_class={} snr_db={} width={} seed={seed}",
        spec.classes, spec.frames_per_class, spec.snr_db, spec.width
    );
    RfDataset::new(records, spec.width, provenance)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(classes: Vec<SynthClass>, n: usize, snr: f64) -> SynthSpec {
        SynthSpec { classes, frames_per_class: n, snr_db: snr, width: 128 }
    }

    #[test]
    fn zero_frames_is_empty() {
        let ds = synth_dataset(&spec(vec![SynthClass::Tone], 0, 10.0), 1).unwrap();
        assert!(ds.is_empty());
    }

    #[test]
    fn noiseless_tone_has_constant_envelope() {
        let ds = synth_dataset(&spec(vec![SynthClass::Tone], 5, f64::INFINITY), 3).unwrap();
        for r in ds.records() {
            assert_eq!(r.snr_db, SNR_NOISELESS);
            for e in r.frame.envelope() {
                assert!((e - 1.0).abs() < 1e-6, "envelope {e}");
            }
        }
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let s = spec(vec![SynthClass::Bpsk, SynthClass::Fsk, SynthClass::WidebandNoise], 4, 5.0);
        assert_eq!(synth_dataset(&s, 9).unwrap(), synth_dataset(&s, 9).unwrap());
        assert_ne!(synth_dataset(&s, 9).unwrap().records(), synth_dataset(&s, 10).unwrap().records());
    }

    #[test]
    fn snr_sets_noise_power() {
        // Noise-only frames at unit power: measured power of (signal + noise) is 1 + 10^(-snr/10).
        let ds = synth_dataset(&spec(vec![SynthClass::Qpsk], 200, 0.0), 5).unwrap();
        let mean_power: f64 = ds.records().iter().map(|r| 2.0 * r.frame.mean_square()).sum::<f64>() / 200.0;
        assert!((mean_power - 2.0).abs() < 0.05, "power {mean_power}");
    }

    #[test]
    fn class_parsing() {
        assert_eq!("wideband-noise".parse::<SynthClass>().unwrap(), SynthClass::WidebandNoise);
        assert!(matches!("chirp".parse::<SynthClass>(), Err(DataError::UnknownClass(_))));
    }

    #[test]
    fn narrow_width_rejected() {
        let mut s = spec(vec![SynthClass::Tone], 1, 0.0);
        s.width = 4;
        assert!(synth_dataset(&s, 0).is_err());
    }
}
