//! I/Q frame datasets: loading, validation, normalisation, splitting and synthesis.

mod container;
mod pickle;
mod radioml;
mod split;
mod synth;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use container::{read_container, write_container};
pub use radioml::read_radioml_pickle;
pub use split::{make_anomaly_split, AnomalySplit, Label, TestSample, DEFAULT_SNR_MIN, DEFAULT_TRAIN_FRAC};
pub use synth::{synth_dataset, SynthClass, SynthSpec};

/// Smallest frame width the models and loaders accept.
pub const MIN_FRAME_WIDTH: usize = 8;

/// SNR recorded for synthetic frames generated without noise.
pub const SNR_NOISELESS: i32 = i32::MAX;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("missing file: {0}")]
    MissingFile(String),
    #[error("malformed container: {0}")]
    MalformedContainer(String),
    #[error("frame shape must be (2, W) with W >= {MIN_FRAME_WIDTH}: {0}")]
    FrameShape(String),
    #[error("unknown modulation: {0}")]
    UnknownModulation(String),
    #[error("unknown signal class: {0}")]
    UnknownClass(String),
    #[error("non-finite sample value in frame")]
    NonFinite,
    #[error("degenerate frame: {0}")]
    DegenerateFrame(&'static str),
    #[error("too few inlier frames: need at least 2, have {0}")]
    TooFewInliers(usize),
    #[error("train fraction must lie in (0, 1), got {0}")]
    TrainFraction(f64),
    #[error("modulation {0} not present in dataset")]
    ModulationAbsent(Modulation),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, DataError>;

/// Signal class of a record: the eleven public-dataset modulations plus the
/// extra classes the synthetic generator produces.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Modulation {
    #[serde(rename = "AM-DSB")]
    AmDsb,
    #[serde(rename = "AM-SSB")]
    AmSsb,
    #[serde(rename = "BPSK")]
    Bpsk,
    #[serde(rename = "8PSK")]
    Psk8,
    #[serde(rename = "CPFSK")]
    Cpfsk,
    #[serde(rename = "GFSK")]
    Gfsk,
    #[serde(rename = "PAM4")]
    Pam4,
    #[serde(rename = "QAM16")]
    Qam16,
    #[serde(rename = "QAM64")]
    Qam64,
    #[serde(rename = "QPSK")]
    Qpsk,
    #[serde(rename = "WBFM")]
    Wbfm,
    #[serde(rename = "TONE")]
    Tone,
    #[serde(rename = "FSK")]
    Fsk,
    #[serde(rename = "WIDEBAND-NOISE")]
    WidebandNoise,
}

impl Modulation {
    /// The eleven modulations of the public RadioML 2016.10a release, in table order.
    pub const PUBLIC: [Modulation; 11] = [
        Modulation::AmDsb,
        Modulation::AmSsb,
        Modulation::Bpsk,
        Modulation::Psk8,
        Modulation::Cpfsk,
        Modulation::Gfsk,
        Modulation::Pam4,
        Modulation::Qam16,
        Modulation::Qam64,
        Modulation::Qpsk,
        Modulation::Wbfm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Modulation::AmDsb => "AM-DSB",
            Modulation::AmSsb => "AM-SSB",
            Modulation::Bpsk => "BPSK",
            Modulation::Psk8 => "8PSK",
            Modulation::Cpfsk => "CPFSK",
            Modulation::Gfsk => "GFSK",
            Modulation::Pam4 => "PAM4",
            Modulation::Qam16 => "QAM16",
            Modulation::Qam64 => "QAM64",
            Modulation::Qpsk => "QPSK",
            Modulation::Wbfm => "WBFM",
            Modulation::Tone => "TONE",
            Modulation::Fsk => "FSK",
            Modulation::WidebandNoise => "WIDEBAND-NOISE",
        }
    }

    pub fn is_public(self) -> bool {
        Self::PUBLIC.contains(&self)
    }
}

impl fmt::Display for Modulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Modulation {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self> {
        let upper = s.trim().to_ascii_uppercase();
        let all = Self::PUBLIC.iter().chain(&[Modulation::Tone, Modulation::Fsk, Modulation::WidebandNoise]);
        for &m in all {
            if m.name() == upper {
                return Ok(m);
            }
        }
        Err(DataError::UnknownModulation(s.to_string()))
    }
}

/// One captured window: an in-phase row and a quadrature row of `width` samples each.
#[derive(Clone, Debug, PartialEq)]
pub struct IqFrame {
    width: usize,
    /// Row-major `[2, width]`: in-phase samples then quadrature samples.
    samples: Vec<f32>,
}

impl IqFrame {
    pub fn new(width: usize, samples: Vec<f32>) -> Result<Self> {
        if width < MIN_FRAME_WIDTH || samples.len() != 2 * width {
            return Err(DataError::FrameShape(format!("width {width}, {} samples", samples.len())));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(DataError::NonFinite);
        }
        Ok(Self { width, samples })
    }

    pub fn from_iq(i: &[f32], q: &[f32]) -> Result<Self> {
        if i.len() != q.len() {
            return Err(DataError::FrameShape(format!("I has {}, Q has {}", i.len(), q.len())));
        }
        let mut samples = Vec::with_capacity(2 * i.len());
        samples.extend_from_slice(i);
        samples.extend_from_slice(q);
        Self::new(i.len(), samples)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn in_phase(&self) -> &[f32] {
        &self.samples[..self.width]
    }

    pub fn quadrature(&self) -> &[f32] {
        &self.samples[self.width..]
    }

    /// Per-sample envelope `sqrt(I^2 + Q^2)`.
    pub fn envelope(&self) -> Vec<f32> {
        self.in_phase().iter().zip(self.quadrature()).map(|(i, q)| i.hypot(*q)).collect()
    }

    pub fn mean_square(&self) -> f64 {
        self.samples.iter().map(|&v| (v as f64).powi(2)).sum::<f64>() / self.samples.len() as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormalizePolicy {
    #[default]
    None,
    MaxAbs,
    UnitPower,
}

impl FromStr for NormalizePolicy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "none" => Ok(Self::None),
            "max-abs" => Ok(Self::MaxAbs),
            "unit-power" => Ok(Self::UnitPower),
            other => Err(format!("unknown normalisation policy {other}")),
        }
    }
}

/// Rescales a frame according to `policy`.
pub fn normalize_frame(frame: &IqFrame, policy: NormalizePolicy) -> Result<IqFrame> {
    let scale = match policy {
        NormalizePolicy::None => return Ok(frame.clone()),
        NormalizePolicy::MaxAbs => {
            let m = frame.samples.iter().fold(0.0f64, |m, &v| m.max((v as f64).abs()));
            if m == 0.0 {
                return Err(DataError::DegenerateFrame("all-zero frame under max-abs"));
            }
            1.0 / m
        }
        NormalizePolicy::UnitPower => {
            let ms = frame.mean_square();
            if ms == 0.0 {
                return Err(DataError::DegenerateFrame("all-zero frame under unit-power"));
            }
            1.0 / ms.sqrt()
        }
    };
    let samples = frame.samples.iter().map(|&v| (v as f64 * scale) as f32).collect();
    IqFrame::new(frame.width, samples)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleRecord {
    pub frame: IqFrame,
    pub modulation: Modulation,
    pub snr_db: i32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RfDataset {
    records: Vec<SampleRecord>,
    frame_width: usize,
    pub provenance: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetFormat {
    /// The pickled `{(modulation, snr): ndarray}` map of the RadioML 2016.10a release.
    PublicSerializedMap,
    /// This crate's own `RFDS1` container.
    NeutralContainer,
}

impl FromStr for DatasetFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "public-serialized-map" | "radioml" | "pickle" => Ok(Self::PublicSerializedMap),
            "neutral-container" | "rfds" => Ok(Self::NeutralContainer),
            other => Err(format!("unknown dataset format {other}")),
        }
    }
}

impl RfDataset {
    /// Builds a dataset, checking that every frame has the same width.
    pub fn new(records: Vec<SampleRecord>, frame_width: usize, provenance: impl Into<String>) -> Result<Self> {
        if frame_width < MIN_FRAME_WIDTH {
            return Err(DataError::FrameShape(format!("width {frame_width}")));
        }
        if let Some(bad) = records.iter().find(|r| r.frame.width() != frame_width) {
            return Err(DataError::FrameShape(format!(
                "record of width {} in a dataset of width {frame_width}",
                bad.frame.width()
            )));
        }
        Ok(Self { records, frame_width, provenance: provenance.into() })
    }

    pub fn records(&self) -> &[SampleRecord] {
        &self.records
    }

    pub fn frame_width(&self) -> usize {
        self.frame_width
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Record counts per `(modulation, snr)` group.
    pub fn groups(&self) -> BTreeMap<(Modulation, i32), usize> {
        let mut out = BTreeMap::new();
        for r in &self.records {
            *out.entry((r.modulation, r.snr_db)).or_insert(0) += 1;
        }
        out
    }

    pub fn modulations(&self) -> Vec<Modulation> {
        let mut m: Vec<Modulation> = self.records.iter().map(|r| r.modulation).collect();
        m.sort();
        m.dedup();
        m
    }

    pub fn snrs(&self) -> Vec<i32> {
        let mut s: Vec<i32> = self.records.iter().map(|r| r.snr_db).collect();
        s.sort();
        s.dedup();
        s
    }

    pub fn normalized(&self, policy: NormalizePolicy) -> Result<Self> {
        let records = self
            .records
            .iter()
            .map(|r| Ok(SampleRecord { frame: normalize_frame(&r.frame, policy)?, ..r.clone() }))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { records, frame_width: self.frame_width, provenance: self.provenance.clone() })
    }
}

/// Loads a dataset from `path` in the given format.
pub fn load_dataset(path: &Path, format: DatasetFormat) -> Result<RfDataset> {
    if !path.is_file() {
        return Err(DataError::MissingFile(path.display().to_string()));
    }
    let bytes = std::fs::read(path)?;
    let provenance = path.display().to_string();
    match format {
        DatasetFormat::NeutralContainer => read_container(&bytes, provenance),
        DatasetFormat::PublicSerializedMap => read_radioml_pickle(&bytes, provenance),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(values: &[f32]) -> IqFrame {
        IqFrame::new(values.len() / 2, values.to_vec()).unwrap()
    }

    #[test]
    fn modulation_names_round_trip() {
        for m in Modulation::PUBLIC {
            assert_eq!(m.name().parse::<Modulation>().unwrap(), m);
        }
        assert_eq!("am-dsb".parse::<Modulation>().unwrap(), Modulation::AmDsb);
        assert!(matches!("FOO".parse::<Modulation>(), Err(DataError::UnknownModulation(_))));
    }

    #[test]
    fn frame_validation() {
        assert!(IqFrame::new(4, vec![0.0; 8]).is_err());
        assert!(IqFrame::new(8, vec![0.0; 15]).is_err());
        let mut v = vec![0.0; 16];
        v[3] = f32::NAN;
        assert!(matches!(IqFrame::new(8, v), Err(DataError::NonFinite)));
    }

    #[test]
    fn normalisation_policies() {
        let f = frame(&[1.0, -4.0, 2.0, 0.5, 0.0, 3.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 2.0]);
        assert_eq!(normalize_frame(&f, NormalizePolicy::None).unwrap(), f);
        let u = normalize_frame(&f, NormalizePolicy::UnitPower).unwrap();
        assert!((u.mean_square() - 1.0).abs() < 1e-6);
        let m = normalize_frame(&f, NormalizePolicy::MaxAbs).unwrap();
        assert_eq!(m.samples().iter().fold(0.0f32, |a, v| a.max(v.abs())), 1.0);
        let zero = frame(&[0.0; 16]);
        assert!(normalize_frame(&zero, NormalizePolicy::MaxAbs).is_err());
        assert!(normalize_frame(&zero, NormalizePolicy::UnitPower).is_err());
        assert_eq!(normalize_frame(&zero, NormalizePolicy::None).unwrap(), zero);
    }

    #[test]
    fn dataset_rejects_mixed_widths() {
        let a = SampleRecord { frame: frame(&[0.0; 16]), modulation: Modulation::Bpsk, snr_db: 0 };
        let b = SampleRecord { frame: frame(&[0.0; 20]), modulation: Modulation::Bpsk, snr_db: 0 };
        assert!(RfDataset::new(vec![a, b], 8, "test").is_err());
    }

    #[test]
    fn missing_file_is_reported() {
        let err = load_dataset(Path::new("/nonexistent/x.rfds"), DatasetFormat::NeutralContainer);
        assert!(matches!(err, Err(DataError::MissingFile(_))));
    }
}
