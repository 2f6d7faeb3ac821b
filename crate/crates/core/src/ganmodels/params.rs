//! Named parameter collections and their binary encoding.

use std::collections::BTreeMap;

use rfanogan_autograd::Tensor;

use super::{ModelError, Result};

const MAGIC: &[u8; 6] = b"RFPB1\n";

/// Parameters and buffers keyed by name, iterated in name order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StateDict(BTreeMap<String, Tensor>);

impl StateDict {
    pub fn insert(&mut self, name: String, t: Tensor) {
        self.0.insert(name, t);
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.0.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor)> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Layout: magic, u32 entry count, then per entry a u32 name length, the
/// name, a u32 rank, u64 dims and little-endian f32 data. All integers LE.
pub fn encode_params(sd: &StateDict) -> Vec<u8> {
    let mut out = MAGIC.to_vec();
    out.extend((sd.len() as u32).to_le_bytes());
    for (name, t) in sd.iter() {
        out.extend((name.len() as u32).to_le_bytes());
        out.extend(name.as_bytes());
        out.extend((t.shape().len() as u32).to_le_bytes());
        for &d in t.shape() {
            out.extend((d as u64).to_le_bytes());
        }
        for v in t.data() {
            out.extend(v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| ModelError::State("truncated parameter blob".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn decode_params(bytes: &[u8]) -> Result<StateDict> {
    if !bytes.starts_with(MAGIC) {
        return Err(ModelError::State("not a parameter blob".into()));
    }
    let mut r = Reader { buf: bytes, pos: MAGIC.len() };
    let mut sd = StateDict::default();
    for _ in 0..r.u32()? {
        let len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|_| ModelError::State("parameter name is not UTF-8".into()))?
            .to_string();
        let rank = r.u32()? as usize;
        let shape = (0..rank).map(|_| r.u64().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let n: usize = shape.iter().product();
        let raw = r.take(n.checked_mul(4).ok_or_else(|| ModelError::State("tensor too large".into()))?)?;
        let data = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
        sd.insert(name, Tensor::new(&shape, data)?);
    }
    if r.pos != bytes.len() {
        return Err(ModelError::State("trailing bytes after parameter blob".into()));
    }
    Ok(sd)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blob_round_trip_and_truncation() {
        let mut sd = StateDict::default();
        sd.insert("0.weight".into(), Tensor::new(&[2, 3], vec![1.0, -2.0, 3.5, 0.0, f32::MIN_POSITIVE, 7.0]).unwrap());
        sd.insert("1.gamma".into(), Tensor::scalar(0.25));
        let bytes = encode_params(&sd);
        assert_eq!(decode_params(&bytes).unwrap(), sd);
        assert!(decode_params(&bytes[..bytes.len() - 1]).is_err());
        assert!(decode_params(b"nope").is_err());
    }
}
