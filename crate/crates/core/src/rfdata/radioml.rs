//! Ingestion of the pickled RadioML 2016.10a release: a dict mapping
//! `(modulation_name, snr_db)` to a float array of shape `(n, 2, W)`.

use super::pickle::{unpickle, Value};
use super::{DataError, IqFrame, Modulation, Result, RfDataset, SampleRecord};

fn malformed(msg: impl Into<String>) -> DataError {
    DataError::MalformedContainer(msg.into())
}

fn decode_values(dtype: &Value, data: &[u8]) -> Result<Vec<f32>> {
    let (descr, order) = match dtype {
        Value::Dtype { descr, byte_order } => (descr.as_str(), *byte_order),
        _ => return Err(malformed("array without a dtype")),
    };
    let big = order == '>';
    match descr.trim_start_matches(['<', '>', '=', '|']) {
        "f4" => Ok(data
            .chunks_exact(4)
            .map(|b| {
                let b = [b[0], b[1], b[2], b[3]];
                if big {
                    f32::from_be_bytes(b)
                } else {
                    f32::from_le_bytes(b)
                }
            })
            .collect()),
        "f8" => Ok(data
            .chunks_exact(8)
            .map(|b| {
                let b: [u8; 8] = b.try_into().expect("8 bytes");
                (if big { f64::from_be_bytes(b) } else { f64::from_le_bytes(b) }) as f32
            })
            .collect()),
        other => Err(malformed(format!("unsupported dtype {other}"))),
    }
}

/// Parses the pickled `{(mod, snr): ndarray}` map into a dataset.
///
/// Keys are visited in sorted `(modulation, snr)` order so the record order
/// does not depend on the writer's dict ordering.
pub fn read_radioml_pickle(bytes: &[u8], provenance: String) -> Result<RfDataset> {
    if bytes.is_empty() {
        return Err(malformed("empty file"));
    }
    let root = unpickle(bytes).map_err(|e| malformed(format!("pickle: {}", e.0)))?;
    let Value::Dict(entries) = root else {
        return Err(malformed("root object is not a dict"));
    };

    let mut groups = Vec::with_capacity(entries.len());
    let mut width = None;
    for (key, value) in entries {
        let Value::Tuple(k) = key else { return Err(malformed("dict key is not a tuple")) };
        let name = k.first().and_then(Value::as_text).ok_or_else(|| malformed("key without modulation name"))?;
        let modulation: Modulation = name.parse()?;
        let snr_db = match k.get(1) {
            Some(Value::Int(s)) => i32::try_from(*s).map_err(|_| malformed("snr out of range"))?,
            _ => return Err(malformed("key without integer snr")),
        };
        let Value::Array { shape, dtype, fortran, data } = value else {
            return Err(malformed("dict value is not an array"));
        };
        if fortran {
            return Err(malformed("fortran-ordered arrays are not supported"));
        }
        if shape.len() != 3 || shape[1] != 2 {
            return Err(DataError::FrameShape(format!("array of shape {shape:?}, expected (n, 2, W)")));
        }
        let w = shape[2];
        if *width.get_or_insert(w) != w {
            return Err(DataError::FrameShape(format!("mixed frame widths {} and {w}", width.unwrap())));
        }
        let values = decode_values(&dtype, &data)?;
        if values.len() != shape.iter().product::<usize>() {
            return Err(malformed("array data length does not match its shape"));
        }
        groups.push((modulation, snr_db, w, values));
    }
    groups.sort_by_key(|g| (g.0, g.1));

    let mut records = Vec::new();
    for (modulation, snr_db, w, values) in groups {
        for chunk in values.chunks_exact(2 * w) {
            records.push(SampleRecord { frame: IqFrame::new(w, chunk.to_vec())?, modulation, snr_db });
        }
    }
    let width = width.ok_or_else(|| malformed("no arrays in file"))?;
    RfDataset::new(records, width, provenance)
}
