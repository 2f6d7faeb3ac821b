//! The `RFDS1` neutral container.
//!
//! Layout: the magic line `RFDS1\n`, a one-line JSON header
//! `{"frame_width", "n_records", "modulations", "snrs"}` terminated by `\n`,
//! then `n_records * 2 * frame_width` little-endian `f32` samples in record
//! order, then one `(mod_index: u8, snr_index: u8)` pair per record.

use serde::{Deserialize, Serialize};

use super::{DataError, IqFrame, Modulation, Result, RfDataset, SampleRecord};

const MAGIC: &[u8] = b"RFDS1\n";

#[derive(Serialize, Deserialize)]
struct Header {
    frame_width: usize,
    n_records: usize,
    modulations: Vec<String>,
    snrs: Vec<i32>,
}

fn malformed(msg: impl Into<String>) -> DataError {
    DataError::MalformedContainer(msg.into())
}

/// Serialises a dataset into container bytes.
pub fn write_container(ds: &RfDataset) -> Result<Vec<u8>> {
    let modulations = ds.modulations();
    let snrs = ds.snrs();
    if modulations.len() > 256 || snrs.len() > 256 {
        return Err(malformed("more than 256 distinct modulations or SNRs"));
    }
    let header = Header {
        frame_width: ds.frame_width(),
        n_records: ds.len(),
        modulations: modulations.iter().map(|m| m.name().to_string()).collect(),
        snrs: snrs.clone(),
    };
    let mut out = Vec::with_capacity(MAGIC.len() + 256 + ds.len() * (8 * ds.frame_width() + 2));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(serde_json::to_string(&header).expect("header serialises").as_bytes());
    out.push(b'\n');
    for r in ds.records() {
        for v in r.frame.samples() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    for r in ds.records() {
        let mi = modulations.binary_search(&r.modulation).expect("listed") as u8;
        let si = snrs.binary_search(&r.snr_db).expect("listed") as u8;
        out.push(mi);
        out.push(si);
    }
    Ok(out)
}

/// Parses container bytes.
pub fn read_container(bytes: &[u8], provenance: String) -> Result<RfDataset> {
    let rest = bytes.strip_prefix(MAGIC).ok_or_else(|| malformed("missing RFDS1 magic"))?;
    let nl = rest.iter().position(|&b| b == b'\n').ok_or_else(|| malformed("unterminated header"))?;
    let header: Header = serde_json::from_slice(&rest[..nl]).map_err(|e| malformed(format!("bad header: {e}")))?;
    let payload = &rest[nl + 1..];

    let w = header.frame_width;
    let n = header.n_records;
    let frame_bytes = 2 * w * 4;
    let expected = n.checked_mul(frame_bytes + 2).ok_or_else(|| malformed("record count overflows"))?;
    if payload.len() != expected {
        return Err(malformed(format!("payload is {} bytes, header implies {expected}", payload.len())));
    }
    let modulations = header.modulations.iter().map(|s| s.parse::<Modulation>()).collect::<Result<Vec<_>>>()?;

    let (samples, labels) = payload.split_at(n * frame_bytes);
    let mut records = Vec::with_capacity(n);
    for (chunk, label) in samples.chunks_exact(frame_bytes).zip(labels.chunks_exact(2)) {
        let values = chunk.chunks_exact(4).map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])).collect();
        let modulation = *modulations
            .get(label[0] as usize)
            .ok_or_else(|| malformed(format!("modulation index {} out of range", label[0])))?;
        let snr_db = *header
            .snrs
            .get(label[1] as usize)
            .ok_or_else(|| malformed(format!("snr index {} out of range", label[1])))?;
        records.push(SampleRecord { frame: IqFrame::new(w, values)?, modulation, snr_db });
    }
    RfDataset::new(records, w, provenance)
}
