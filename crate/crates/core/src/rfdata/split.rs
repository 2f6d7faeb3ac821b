//! Inlier/outlier splits: train on one modulation, test on all of them.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DataError, IqFrame, Modulation, Result, RfDataset};

pub const DEFAULT_TRAIN_FRAC: f64 = 0.8;
pub const DEFAULT_SNR_MIN: i32 = -20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Inlier,
    Outlier,
}

impl Label {
    /// 1 for outliers, 0 for inliers.
    pub fn as_positive(self) -> u8 {
        match self {
            Label::Inlier => 0,
            Label::Outlier => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TestSample {
    pub frame: IqFrame,
    pub label: Label,
    pub modulation: Modulation,
    pub snr_db: i32,
    /// Index of the source record in the dataset.
    pub source_index: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnomalySplit {
    pub inlier_modulation: Modulation,
    pub train: Vec<IqFrame>,
    pub test: Vec<TestSample>,
    pub seed: u64,
}

impl AnomalySplit {
    pub fn test_labels(&self) -> Vec<u8> {
        self.test.iter().map(|t| t.label.as_positive()).collect()
    }

    pub fn test_inlier_count(&self) -> usize {
        self.test.iter().filter(|t| t.label == Label::Inlier).count()
    }
}

/// Splits `ds` for one-class training on `inlier`.
///
/// Only records with `snr_db >= snr_min` take part. A seeded shuffle of the
/// inlier records sends `round(train_frac * n_inlier)` of them to training
/// (clamped so both sides keep at least one); the remaining inliers and every
/// other-modulation record form the test set, in dataset order.
pub fn make_anomaly_split(
    ds: &RfDataset,
    inlier: Modulation,
    train_frac: f64,
    snr_min: i32,
    seed: u64,
) -> Result<AnomalySplit> {
    if !(train_frac > 0.0 && train_frac < 1.0) {
        return Err(DataError::TrainFraction(train_frac));
    }
    if !ds.records().iter().any(|r| r.modulation == inlier) {
        return Err(DataError::ModulationAbsent(inlier));
    }
    let eligible: Vec<usize> = (0..ds.len()).filter(|&i| ds.records()[i].snr_db >= snr_min).collect();
    let mut inliers: Vec<usize> = eligible.iter().copied().filter(|&i| ds.records()[i].modulation == inlier).collect();
    if inliers.len() < 2 {
        return Err(DataError::TooFewInliers(inliers.len()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    inliers.shuffle(&mut rng);
    let n_train = ((train_frac * inliers.len() as f64).round() as usize).clamp(1, inliers.len() - 1);
    let mut train_idx = inliers[..n_train].to_vec();
    train_idx.sort_unstable();
    let in_train = {
        let mut mask = vec![false; ds.len()];
        for &i in &train_idx {
            mask[i] = true;
        }
        mask
    };

    let train = train_idx.iter().map(|&i| ds.records()[i].frame.clone()).collect();
    let test = eligible
        .into_iter()
        .filter(|&i| !in_train[i])
        .map(|i| {
            let r = &ds.records()[i];
            TestSample {
                frame: r.frame.clone(),
                label: if r.modulation == inlier { Label::Inlier } else { Label::Outlier },
                modulation: r.modulation,
                snr_db: r.snr_db,
                source_index: i,
            }
        })
        .collect();
    Ok(AnomalySplit { inlier_modulation: inlier, train, test, seed })
}
