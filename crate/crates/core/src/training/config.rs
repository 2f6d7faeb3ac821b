//! Training hyperparameters and their `key=value` text form.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Result, TrainingError};
use crate::metrics::FidelityMeasure;

/// Representation the fidelity measures compare.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FidelityFeatures {
    /// Flattened frames.
    #[default]
    Raw,
    /// Critic features `f(x)`.
    Critic,
}

impl FromStr for FidelityFeatures {
    type Err = TrainingError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "raw" => Ok(Self::Raw),
            "critic" => Ok(Self::Critic),
            other => Err(TrainingError::Config(format!("unknown fidelity features: {other}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub lr: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub batch_size: usize,
    /// Critic updates per generator update.
    pub n_critic: usize,
    pub gp_lambda: f64,
    /// Weight of the critic-feature term in encoder training and scoring.
    pub kappa: f64,
    pub selection_measure: FidelityMeasure,
    pub eval_every: usize,
    pub seed: u64,
    /// Divides every hidden filter count; 1 is the full-size network.
    pub channel_divisor: usize,
    /// Real and generated samples per fidelity evaluation (capped at the training-set size).
    pub eval_samples: usize,
    pub fidelity_k: usize,
    pub jsd_bins: usize,
    pub fidelity_features: FidelityFeatures,
    /// Encoder epochs; `None` reuses `epochs`.
    pub encoder_epochs: Option<usize>,
    /// Autoencoder baseline epochs; `None` reuses `epochs`.
    pub cae_epochs: Option<usize>,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            epochs: 500,
            lr: 2e-4,
            adam_beta1: 0.5,
            adam_beta2: 0.9,
            batch_size: 64,
            n_critic: 3,
            gp_lambda: 10.0,
            kappa: 1.0,
            selection_measure: FidelityMeasure::Jsd,
            eval_every: 10,
            seed: 0,
            channel_divisor: 1,
            eval_samples: 512,
            fidelity_k: 5,
            jsd_bins: 50,
            fidelity_features: FidelityFeatures::Raw,
            encoder_epochs: None,
            cae_epochs: None,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| TrainingError::Config(format!("bad value for {key}: {value:?}")))
}

fn parse_opt(key: &str, value: &str) -> Result<Option<usize>> {
    if value.is_empty() || value.eq_ignore_ascii_case("none") {
        Ok(None)
    } else {
        parse(key, value).map(Some)
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(TrainingError::Config(m.to_string()));
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be positive");
        }
        if self.n_critic < 1 {
            return bad("n_critic must be at least 1");
        }
        if self.eval_every < 1 {
            return bad("eval_every must be at least 1");
        }
        if self.batch_size < 1 {
            return bad("batch_size must be at least 1");
        }
        if self.channel_divisor < 1 {
            return bad("channel_divisor must be at least 1");
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return bad("adam betas must lie in [0, 1)");
        }
        if self.gp_lambda < 0.0 || self.kappa < 0.0 {
            return bad("gp_lambda and kappa must be non-negative");
        }
        if self.fidelity_k < 1 || self.jsd_bins < 2 {
            return bad("fidelity_k must be at least 1 and jsd_bins at least 2");
        }
        Ok(())
    }

    pub fn encoder_epochs(&self) -> usize {
        self.encoder_epochs.unwrap_or(self.epochs)
    }

    pub fn cae_epochs(&self) -> usize {
        self.cae_epochs.unwrap_or(self.epochs)
    }

    /// Sets one field from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "epochs" => self.epochs = parse(key, v)?,
            "lr" => self.lr = parse(key, v)?,
            "adam_beta1" => self.adam_beta1 = parse(key, v)?,
            "adam_beta2" => self.adam_beta2 = parse(key, v)?,
            "batch_size" => self.batch_size = parse(key, v)?,
            "n_critic" => self.n_critic = parse(key, v)?,
            "gp_lambda" => self.gp_lambda = parse(key, v)?,
            "kappa" => self.kappa = parse(key, v)?,
            "selection_measure" | "measure" => self.selection_measure = parse(key, v)?,
            "eval_every" => self.eval_every = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "channel_divisor" => self.channel_divisor = parse(key, v)?,
            "eval_samples" => self.eval_samples = parse(key, v)?,
            "fidelity_k" => self.fidelity_k = parse(key, v)?,
            "jsd_bins" => self.jsd_bins = parse(key, v)?,
            "fidelity_features" => self.fidelity_features = v.parse()?,
            "encoder_epochs" => self.encoder_epochs = parse_opt(key, v)?,
            "cae_epochs" => self.cae_epochs = parse_opt(key, v)?,
            other => return Err(TrainingError::Config(format!("unknown key: {other}"))),
        }
        Ok(())
    }

    /// Applies `key=value` lines on top of `self`. Blank lines and `#` comments are skipped.
    pub fn apply_kv(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| TrainingError::Config(format!("line {}: expected key=value", n + 1)))?;
            self.set(k, v)?;
        }
        self.validate()
    }

    pub fn from_kv(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_kv(text)?;
        Ok(cfg)
    }

    /// Every field as a `key=value` line, in a fixed order.
    pub fn to_kv(&self) -> String {
        let opt = |v: Option<usize>| v.map_or_else(|| "none".to_string(), |x| x.to_string());
        let features = match self.fidelity_features {
            FidelityFeatures::Raw => "raw",
            FidelityFeatures::Critic => "critic",
        };
        let mut s = String::new();
        for (k, v) in [
            ("epochs", self.epochs.to_string()),
            ("lr", self.lr.to_string()),
            ("adam_beta1", self.adam_beta1.to_string()),
            ("adam_beta2", self.adam_beta2.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("n_critic", self.n_critic.to_string()),
            ("gp_lambda", self.gp_lambda.to_string()),
            ("kappa", self.kappa.to_string()),
            ("selection_measure", self.selection_measure.to_string()),
            ("eval_every", self.eval_every.to_string()),
            ("seed", self.seed.to_string()),
            ("channel_divisor", self.channel_divisor.to_string()),
            ("eval_samples", self.eval_samples.to_string()),
            ("fidelity_k", self.fidelity_k.to_string()),
            ("jsd_bins", self.jsd_bins.to_string()),
            ("fidelity_features", features.to_string()),
            ("encoder_epochs", opt(self.encoder_epochs)),
            ("cae_epochs", opt(self.cae_epochs)),
        ] {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }

    /// SHA-256 of [`Self::to_kv`].
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_kv().as_bytes()))
    }
}
