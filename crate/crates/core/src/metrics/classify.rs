use serde::{Deserialize, Serialize};

use super::{MetricsError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Rates from a confusion matrix. Undefined ratios (zero denominators) are 0.
pub fn classification_metrics(tp: u64, fp: u64, tn: u64, fn_: u64) -> Result<ClassificationMetrics> {
    let total = tp + fp + tn + fn_;
    if total == 0 {
        return Err(MetricsError::EmptyConfusion);
    }
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
    Ok(ClassificationMetrics { accuracy: ratio(tp + tn, total), precision, recall, f1 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_values() {
        let m = classification_metrics(3, 1, 5, 1).unwrap();
        assert_eq!((m.precision, m.recall, m.accuracy), (0.75, 0.75, 0.8));
        assert!((m.f1 - 0.75).abs() < 1e-15);
        let perfect = classification_metrics(4, 0, 6, 0).unwrap();
        assert_eq!([perfect.accuracy, perfect.precision, perfect.recall, perfect.f1], [1.0; 4]);
        assert_eq!(classification_metrics(0, 0, 3, 2).unwrap().precision, 0.0);
        assert_eq!(classification_metrics(0, 0, 0, 0), Err(MetricsError::EmptyConfusion));
    }
}
