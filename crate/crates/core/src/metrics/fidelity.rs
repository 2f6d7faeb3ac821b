//! k-NN manifold measures, histogram Jensen-Shannon distance and their combinations.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{MetricsError, Result};

pub const DEFAULT_K: usize = 5;
pub const DEFAULT_JSD_BINS: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    pub precision: f64,
    pub recall: f64,
    pub density: f64,
    pub coverage: f64,
    pub jsd: f64,
    pub s_rp: f64,
    pub h_rp: f64,
    pub s_dc: f64,
    pub h_dc: f64,
}

impl FidelityReport {
    pub const CSV_HEADER: &'static str = "precision,recall,density,coverage,jsd,s_rp,h_rp,s_dc,h_dc";

    pub fn to_csv_line(&self) -> String {
        [self.precision, self.recall, self.density, self.coverage, self.jsd, self.s_rp, self.h_rp, self.s_dc, self.h_dc]
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(",")
    }

    pub fn get(&self, m: FidelityMeasure) -> f64 {
        match m {
            FidelityMeasure::SRp => self.s_rp,
            FidelityMeasure::HRp => self.h_rp,
            FidelityMeasure::SDc => self.s_dc,
            FidelityMeasure::HDc => self.h_dc,
            FidelityMeasure::Jsd => self.jsd,
        }
    }
}

/// Checkpoint-selection criteria derived from a [`FidelityReport`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FidelityMeasure {
    #[serde(rename = "S-RP")]
    SRp,
    #[serde(rename = "H-RP")]
    HRp,
    #[serde(rename = "S-DC")]
    SDc,
    #[serde(rename = "H-DC")]
    HDc,
    #[serde(rename = "JSD")]
    Jsd,
}

impl FidelityMeasure {
    pub const ALL: [FidelityMeasure; 5] = [Self::SRp, Self::HRp, Self::SDc, Self::HDc, Self::Jsd];

    pub fn name(self) -> &'static str {
        match self {
            Self::SRp => "S-RP",
            Self::HRp => "H-RP",
            Self::SDc => "S-DC",
            Self::HDc => "H-DC",
            Self::Jsd => "JSD",
        }
    }

    pub fn lower_is_better(self) -> bool {
        self == Self::Jsd
    }

    /// Whether `candidate` strictly improves on `incumbent`.
    pub fn improves(self, candidate: f64, incumbent: f64) -> bool {
        if self.lower_is_better() {
            candidate < incumbent
        } else {
            candidate > incumbent
        }
    }
}

impl fmt::Display for FidelityMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FidelityMeasure {
    type Err = MetricsError;

    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s.chars().filter(|c| *c != '-' && *c != '_').collect::<String>().to_ascii_uppercase();
        match norm.as_str() {
            "SRP" => Ok(Self::SRp),
            "HRP" => Ok(Self::HRp),
            "SDC" => Ok(Self::SDc),
            "HDC" => Ok(Self::HDc),
            "JSD" => Ok(Self::Jsd),
            _ => Err(MetricsError::UnknownMeasure(s.to_string())),
        }
    }
}

fn harmonic(a: f64, b: f64) -> f64 {
    if a + b == 0.0 {
        0.0
    } else {
        2.0 * a * b / (a + b)
    }
}

/// Fills in the sum and harmonic-mean combinations. Harmonic means of two zeros are 0.
pub fn combine_fidelity(precision: f64, recall: f64, density: f64, coverage: f64, jsd: f64) -> FidelityReport {
    FidelityReport {
        precision,
        recall,
        density,
        coverage,
        jsd,
        s_rp: precision + recall,
        h_rp: harmonic(precision, recall),
        s_dc: density + coverage,
        h_dc: harmonic(density, coverage),
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn check_dims(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<()> {
    let d = a.first().or(b.first()).map_or(0, Vec::len);
    if a.iter().chain(b).any(|p| p.len() != d) {
        return Err(MetricsError::Dimension);
    }
    Ok(())
}

fn need(points: &[Vec<f64>], k: usize) -> Result<()> {
    if k == 0 || points.len() < k + 1 {
        return Err(MetricsError::TooFewPoints { k, need: k + 1, got: points.len() });
    }
    Ok(())
}

/// Distance from each point to its k-th nearest other point.
fn knn_radii(points: &[Vec<f64>], k: usize) -> Vec<f64> {
    let mut row = Vec::with_capacity(points.len());
    points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            row.clear();
            row.extend(points.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, q)| dist(p, q)));
            let (_, kth, _) = row.select_nth_unstable_by(k - 1, f64::total_cmp);
            *kth
        })
        .collect()
}

/// `cross[i][j] = |a_i - b_j|`.
fn cross(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    a.iter().map(|p| b.iter().map(|q| dist(p, q)).collect()).collect()
}

struct Manifolds {
    real_radii: Vec<f64>,
    fake_radii: Option<Vec<f64>>,
    /// `d[i][j]` between real `i` and fake `j`.
    d: Vec<Vec<f64>>,
}

impl Manifolds {
    fn precision(&self) -> f64 {
        let m = self.d.first().map_or(0, Vec::len);
        let inside = (0..m).filter(|&j| self.d.iter().zip(&self.real_radii).any(|(row, r)| row[j] <= *r)).count();
        inside as f64 / m as f64
    }

    fn recall(&self) -> f64 {
        let radii = self.fake_radii.as_ref().expect("fake radii computed");
        let inside = self.d.iter().filter(|row| row.iter().zip(radii).any(|(d, r)| d <= r)).count();
        inside as f64 / self.d.len() as f64
    }

    fn density(&self, k: usize) -> f64 {
        let m = self.d.first().map_or(0, Vec::len);
        let hits: usize =
            self.d.iter().zip(&self.real_radii).map(|(row, r)| row.iter().filter(|&&d| d <= *r).count()).sum();
        hits as f64 / (k as f64 * m as f64)
    }

    fn coverage(&self) -> f64 {
        let covered = self.d.iter().zip(&self.real_radii).filter(|(row, r)| row.iter().any(|d| d <= *r)).count();
        covered as f64 / self.d.len() as f64
    }
}

fn manifolds(real: &[Vec<f64>], fake: &[Vec<f64>], k: usize, with_fake_radii: bool) -> Result<Manifolds> {
    check_dims(real, fake)?;
    need(real, k)?;
    if with_fake_radii {
        need(fake, k)?;
    } else if fake.is_empty() {
        return Err(MetricsError::EmptyBatch);
    }
    Ok(Manifolds {
        real_radii: knn_radii(real, k),
        fake_radii: with_fake_radii.then(|| knn_radii(fake, k)),
        d: cross(real, fake),
    })
}

/// Fraction of `fake` points inside the union of k-NN balls around `real` points.
pub fn manifold_precision(real: &[Vec<f64>], fake: &[Vec<f64>], k: usize) -> Result<f64> {
    Ok(manifolds(real, fake, k, false)?.precision())
}

/// Fraction of `real` points inside the union of k-NN balls around `fake` points.
pub fn manifold_recall(real: &[Vec<f64>], fake: &[Vec<f64>], k: usize) -> Result<f64> {
    manifold_precision(fake, real, k)
}

/// `(precision, recall)` of the k-NN manifold estimate. Both sets need at least `k + 1` points.
pub fn generative_pr(real: &[Vec<f64>], fake: &[Vec<f64>], k: usize) -> Result<(f64, f64)> {
    let m = manifolds(real, fake, k, true)?;
    Ok((m.precision(), m.recall()))
}

/// `(density, coverage)`: density counts, per fake point, the real k-NN balls
/// containing it (averaged and divided by k, so it can exceed 1); coverage is
/// the fraction of real balls that contain any fake point.
pub fn density_coverage(real: &[Vec<f64>], fake: &[Vec<f64>], k: usize) -> Result<(f64, f64)> {
    need(fake, k)?;
    let m = manifolds(real, fake, k, false)?;
    Ok((m.density(k), m.coverage()))
}

/// Base-2 Jensen-Shannon divergence of two (not necessarily normalised) histograms.
pub fn js_divergence(p: &[f64], q: &[f64]) -> f64 {
    let (sp, sq) = (p.iter().sum::<f64>(), q.iter().sum::<f64>());
    let mut js = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        let (a, b) = (a / sp, b / sq);
        let m = 0.5 * (a + b);
        if a > 0.0 {
            js += 0.5 * a * (a / m).log2();
        }
        if b > 0.0 {
            js += 0.5 * b * (b / m).log2();
        }
    }
    js.clamp(0.0, 1.0)
}

/// Jensen-Shannon distance (square root of the base-2 divergence) between the
/// value distributions of two samples, using `bins` equal-width bins over the
/// pooled range.
pub fn jsd(real: &[f64], fake: &[f64], bins: usize) -> Result<f64> {
    if bins < 2 {
        return Err(MetricsError::Bins(bins));
    }
    if real.is_empty() || fake.is_empty() {
        return Err(MetricsError::EmptyBatch);
    }
    if real.iter().chain(fake).any(|v| !v.is_finite()) {
        return Err(MetricsError::NonFinite);
    }
    let lo = real.iter().chain(fake).copied().fold(f64::INFINITY, f64::min);
    let hi = real.iter().chain(fake).copied().fold(f64::NEG_INFINITY, f64::max);
    let hist = |xs: &[f64]| {
        let mut h = vec![0.0; bins];
        for &x in xs {
            let b = if hi > lo { (((x - lo) / (hi - lo)) * bins as f64) as usize } else { 0 };
            h[b.min(bins - 1)] += 1.0;
        }
        h
    };
    Ok(js_divergence(&hist(real), &hist(fake)).sqrt())
}

/// Mean of [`jsd`] over matched feature groups (for example one group per I/Q channel).
pub fn jsd_grouped(real: &[Vec<f64>], fake: &[Vec<f64>], bins: usize) -> Result<f64> {
    if real.is_empty() || real.len() != fake.len() {
        return Err(MetricsError::Dimension);
    }
    let total = real.iter().zip(fake).map(|(r, f)| jsd(r, f, bins)).sum::<Result<f64>>()?;
    Ok(total / real.len() as f64)
}

/// All fidelity measures for two sample sets, sharing the distance computations.
pub fn fidelity_report(real: &[Vec<f64>], fake: &[Vec<f64>], k: usize, bins: usize) -> Result<FidelityReport> {
    let m = manifolds(real, fake, k, true)?;
    let flat = |s: &[Vec<f64>]| s.iter().flatten().copied().collect::<Vec<_>>();
    let j = jsd(&flat(real), &flat(fake), bins)?;
    Ok(combine_fidelity(m.precision(), m.recall(), m.density(k), m.coverage(), j))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(v: &[f64]) -> Vec<Vec<f64>> {
        v.iter().map(|&x| vec![x]).collect()
    }

    #[test]
    fn combinations() {
        let r = combine_fidelity(1.0, 1.0, 0.5, 1.0, 0.1);
        assert_eq!((r.s_rp, r.h_rp, r.s_dc), (2.0, 1.0, 1.5));
        assert!((r.h_dc - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(combine_fidelity(1.0, 0.0, 0.0, 0.0, 0.0).h_rp, 0.0);
        assert_eq!(combine_fidelity(0.0, 0.0, 0.0, 0.0, 0.0).h_dc, 0.0);
    }

    #[test]
    fn two_bin_divergence() {
        let js = js_divergence(&[1.0, 0.0], &[0.5, 0.5]);
        assert!((js - 0.311_278_1).abs() < 1e-6, "{js}");
        assert!((js.sqrt() - 0.557_923).abs() < 1e-5);
    }

    #[test]
    fn jsd_extremes() {
        let a = [0.0, 0.1, 0.2, 0.3];
        assert_eq!(jsd(&a, &a, 50).unwrap(), 0.0);
        assert_eq!(jsd(&[0.0, 0.0], &[5.0], 10).unwrap(), 1.0);
        assert_eq!(jsd(&[1.0], &[1.0], 10).unwrap(), 0.0);
        assert_eq!(jsd(&a, &a, 1), Err(MetricsError::Bins(1)));
        assert_eq!(jsd(&[], &a, 5), Err(MetricsError::EmptyBatch));
    }

    #[test]
    fn line_configuration() {
        // real {0, 1, 2} with k = 1 has radii {1, 1, 1}; 0.5 lies inside
        assert_eq!(manifold_precision(&pts(&[0.0, 1.0, 2.0]), &pts(&[0.5]), 1).unwrap(), 1.0);
        assert!(matches!(
            generative_pr(&pts(&[0.0, 1.0, 2.0]), &pts(&[0.5]), 1),
            Err(MetricsError::TooFewPoints { got: 1, .. })
        ));
    }

    #[test]
    fn density_above_one() {
        // balls of radius 1 around 0 and 1, radius 9 around 10; every fake at 0.5
        // sits in the first two, so density is 2 and the ball at 10 stays uncovered
        let (d, c) = density_coverage(&pts(&[0.0, 1.0, 10.0]), &pts(&[0.5, 0.5, 0.5, 0.5]), 1).unwrap();
        assert_eq!(d, 2.0);
        assert_eq!(c, 2.0 / 3.0);
    }

    #[test]
    fn measure_names() {
        for m in FidelityMeasure::ALL {
            assert_eq!(m.name().parse::<FidelityMeasure>().unwrap(), m);
        }
        assert_eq!("s_rp".parse::<FidelityMeasure>().unwrap(), FidelityMeasure::SRp);
        assert!("FID".parse::<FidelityMeasure>().is_err());
        assert!(FidelityMeasure::Jsd.improves(0.1, 0.2));
        assert!(FidelityMeasure::HRp.improves(0.3, 0.2));
        assert!(!FidelityMeasure::HRp.improves(0.2, 0.2));
    }
}
