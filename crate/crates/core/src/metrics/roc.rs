use serde::{Deserialize, Serialize};

use super::{MetricsError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocResult {
    /// Decision thresholds, descending; the first is `+inf` (nothing flagged).
    pub thresholds: Vec<f64>,
    pub tpr: Vec<f64>,
    pub fpr: Vec<f64>,
    pub auroc: f64,
}

fn check(scores: &[f64], labels: &[u8]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(MetricsError::LengthMismatch(scores.len(), labels.len()));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(MetricsError::NonFinite);
    }
    let pos = labels.iter().filter(|&&l| l != 0).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(MetricsError::SingleClass);
    }
    Ok((pos, neg))
}

/// ROC curve and area for `scores` where higher means more likely positive
/// (label 1). The area is the Mann-Whitney statistic with ties counted as one
/// half, computed from mid-ranks.
pub fn auroc(scores: &[f64], labels: &[u8]) -> Result<RocResult> {
    let (pos, neg) = check(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut thresholds = vec![f64::INFINITY];
    let mut tpr = vec![0.0];
    let mut fpr = vec![0.0];
    // Rank sum of positives in ascending order, with ties sharing the mid-rank.
    // Ranks are multiples of one half, so the sum is exact in f64.
    let mut rank_sum = 0.0;
    let (mut tp, mut fp) = (0usize, 0usize);
    let n = scores.len();
    let mut i = 0;
    while i < n {
        let s = scores[order[i]];
        let mut j = i;
        let mut group_pos = 0;
        while j < n && scores[order[j]] == s {
            group_pos += usize::from(labels[order[j]] != 0);
            j += 1;
        }
        // descending positions i..j map to ascending ranks n-j+1 ..= n-i
        let mid_rank = ((n - j + 1) + (n - i)) as f64 / 2.0;
        rank_sum += mid_rank * group_pos as f64;
        tp += group_pos;
        fp += (j - i) - group_pos;
        thresholds.push(s);
        tpr.push(tp as f64 / pos as f64);
        fpr.push(fp as f64 / neg as f64);
        i = j;
    }
    let u = rank_sum - (pos * (pos + 1)) as f64 / 2.0;
    Ok(RocResult { thresholds, tpr, fpr, auroc: u / (pos as f64 * neg as f64) })
}

/// Area by direct comparison of every (positive, negative) pair. Quadratic;
/// kept as a reference for small inputs.
pub fn auroc_pairwise(scores: &[f64], labels: &[u8]) -> Result<f64> {
    let (pos, neg) = check(scores, labels)?;
    let mut wins = 0.0;
    for (i, &li) in labels.iter().enumerate() {
        if li == 0 {
            continue;
        }
        for (j, &lj) in labels.iter().enumerate() {
            if lj != 0 {
                continue;
            }
            wins += match scores[i].total_cmp(&scores[j]) {
                std::cmp::Ordering::Greater => 1.0,
                std::cmp::Ordering::Equal => 0.5,
                std::cmp::Ordering::Less => 0.0,
            };
        }
    }
    Ok(wins / (pos as f64 * neg as f64))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_cases() {
        let r = auroc(&[0.1, 0.4, 0.35, 0.8], &[0, 0, 1, 1]).unwrap();
        assert_eq!(r.auroc, 0.75);
        assert_eq!(auroc(&[0.0, 1.0, 2.0, 3.0], &[0, 0, 1, 1]).unwrap().auroc, 1.0);
        assert_eq!(auroc(&[2.0; 5], &[0, 1, 0, 1, 1]).unwrap().auroc, 0.5);
        assert_eq!(auroc(&[1.0, 2.0], &[1, 1]), Err(MetricsError::SingleClass));
        assert_eq!(auroc(&[1.0], &[1, 0]), Err(MetricsError::LengthMismatch(1, 2)));
    }

    #[test]
    fn curve_shape() {
        let r = auroc(&[0.1, 0.4, 0.4, 0.8, 0.2], &[0, 1, 0, 1, 0]).unwrap();
        assert_eq!((r.fpr[0], r.tpr[0]), (0.0, 0.0));
        assert_eq!((*r.fpr.last().unwrap(), *r.tpr.last().unwrap()), (1.0, 1.0));
        assert!(r.thresholds.windows(2).all(|w| w[0] > w[1]));
        assert!(r.tpr.windows(2).all(|w| w[0] <= w[1]) && r.fpr.windows(2).all(|w| w[0] <= w[1]));
        // trapezoidal area under the curve equals the rank statistic
        let trap: f64 = (1..r.tpr.len()).map(|i| (r.fpr[i] - r.fpr[i - 1]) * (r.tpr[i] + r.tpr[i - 1]) / 2.0).sum();
        assert!((trap - r.auroc).abs() < 1e-12);
    }
}
