//! A minimal pickle reader covering the opcodes a dict of numpy arrays uses
//! (protocols 2 to 4, from both Python 2 and Python 3 writers).
//!
//! Only the object shapes needed to recover `{(str, int): ndarray}` are
//! modelled; arbitrary class instantiation is not supported.

use std::collections::HashMap;

#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    None,
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
    Bytes(Vec<u8>),
    Tuple(Vec<Value>),
    List(Vec<Value>),
    Dict(Vec<(Value, Value)>),
    Global(String, String),
    /// `numpy.dtype(descr)`, with its byte order once its state is applied.
    Dtype {
        descr: String,
        byte_order: char,
    },
    /// An ndarray under construction (after `_reconstruct`) or complete (after `BUILD`).
    Array {
        shape: Vec<usize>,
        dtype: Box<Value>,
        fortran: bool,
        data: Vec<u8>,
    },
    /// Result of calling an unmodelled global.
    Opaque(String),
}

impl Value {
    pub fn as_text(&self) -> Option<String> {
        match self {
            Value::Str(s) => Some(s.clone()),
            Value::Bytes(b) => Some(b.iter().map(|&c| c as char).collect()),
            _ => None,
        }
    }
}

#[derive(Debug)]
pub struct PickleError(pub String);

type PResult<T> = std::result::Result<T, PickleError>;

fn err<T>(msg: impl Into<String>) -> PResult<T> {
    Err(PickleError(msg.into()))
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> PResult<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return err(format!("unexpected end of data at byte {}", self.pos));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> PResult<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> PResult<usize> {
        let b = self.take(2)?;
        Ok(u16::from_le_bytes([b[0], b[1]]) as usize)
    }

    fn u32(&mut self) -> PResult<usize> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }

    fn i32(&mut self) -> PResult<i64> {
        let b = self.take(4)?;
        Ok(i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as i64)
    }

    fn u64(&mut self) -> PResult<usize> {
        let b = self.take(8)?;
        Ok(u64::from_le_bytes(b.try_into().expect("8 bytes")) as usize)
    }

    fn line(&mut self) -> PResult<String> {
        let start = self.pos;
        while self.pos < self.buf.len() && self.buf[self.pos] != b'\n' {
            self.pos += 1;
        }
        if self.pos >= self.buf.len() {
            return err("unterminated text line");
        }
        let s = String::from_utf8_lossy(&self.buf[start..self.pos]).into_owned();
        self.pos += 1;
        Ok(s)
    }

    fn utf8(&mut self, n: usize) -> PResult<String> {
        String::from_utf8(self.take(n)?.to_vec()).map_err(|e| PickleError(e.to_string()))
    }
}

enum Item {
    Mark,
    Val(Value),
}

struct Machine {
    stack: Vec<Item>,
    memo: HashMap<usize, Value>,
}

impl Machine {
    fn push(&mut self, v: Value) {
        self.stack.push(Item::Val(v));
    }

    fn pop(&mut self) -> PResult<Value> {
        match self.stack.pop() {
            Some(Item::Val(v)) => Ok(v),
            Some(Item::Mark) => err("unexpected mark"),
            None => err("stack underflow"),
        }
    }

    fn top_mut(&mut self) -> PResult<&mut Value> {
        match self.stack.last_mut() {
            Some(Item::Val(v)) => Ok(v),
            _ => err("expected a value on the stack"),
        }
    }

    fn pop_mark(&mut self) -> PResult<Vec<Value>> {
        let mut out = Vec::new();
        loop {
            match self.stack.pop() {
                Some(Item::Mark) => break,
                Some(Item::Val(v)) => out.push(v),
                None => return err("mark not found"),
            }
        }
        out.reverse();
        Ok(out)
    }

    fn memo_put(&mut self, idx: usize) -> PResult<()> {
        let v = match self.stack.last() {
            Some(Item::Val(v)) => v.clone(),
            _ => return err("memoising a non-value"),
        };
        self.memo.insert(idx, v);
        Ok(())
    }

    fn memo_get(&mut self, idx: usize) -> PResult<()> {
        let v = self.memo.get(&idx).cloned().ok_or_else(|| PickleError(format!("memo {idx} missing")))?;
        self.push(v);
        Ok(())
    }
}

fn reduce(callable: Value, args: Value) -> PResult<Value> {
    let Value::Global(module, name) = &callable else {
        return err("REDUCE on a non-global callable");
    };
    let args = match args {
        Value::Tuple(a) => a,
        _ => return err("REDUCE arguments are not a tuple"),
    };
    match (module.as_str(), name.as_str()) {
        ("_codecs", "encode") => {
            let text = args.first().and_then(Value::as_text).ok_or_else(|| PickleError("encode of non-text".into()))?;
            let encoding = args.get(1).and_then(Value::as_text).unwrap_or_else(|| "utf-8".into());
            if encoding.eq_ignore_ascii_case("latin1") || encoding.eq_ignore_ascii_case("latin-1") {
                Ok(Value::Bytes(text.chars().map(|c| c as u32 as u8).collect()))
            } else {
                Ok(Value::Bytes(text.into_bytes()))
            }
        }
        (m, "_reconstruct") if m.starts_with("numpy") => {
            Ok(Value::Array { shape: vec![], dtype: Box::new(Value::None), fortran: false, data: vec![] })
        }
        (m, "dtype") if m.starts_with("numpy") => {
            let descr =
                args.first().and_then(Value::as_text).ok_or_else(|| PickleError("dtype without descr".into()))?;
            Ok(Value::Dtype { descr, byte_order: '|' })
        }
        (m, "_frombuffer") if m.starts_with("numpy") => {
            // (buffer, dtype, shape, order)
            let data = match args.first() {
                Some(Value::Bytes(b)) => b.clone(),
                _ => return err("_frombuffer without bytes"),
            };
            let dtype = args.get(1).cloned().unwrap_or(Value::None);
            let shape = shape_of(args.get(2).unwrap_or(&Value::Tuple(vec![])))?;
            let fortran = args.get(3).and_then(Value::as_text).map(|o| o == "F").unwrap_or(false);
            Ok(Value::Array { shape, dtype: Box::new(dtype), fortran, data })
        }
        _ => Ok(Value::Opaque(format!("{module}.{name}"))),
    }
}

fn shape_of(v: &Value) -> PResult<Vec<usize>> {
    match v {
        Value::Tuple(items) | Value::List(items) => items
            .iter()
            .map(|i| match i {
                Value::Int(n) if *n >= 0 => Ok(*n as usize),
                _ => err("bad shape entry"),
            })
            .collect(),
        _ => err("shape is not a tuple"),
    }
}

fn build(obj: &mut Value, state: Value) -> PResult<()> {
    match obj {
        Value::Array { shape, dtype, fortran, data } => {
            // (version, shape, dtype, is_fortran, rawdata)
            let Value::Tuple(items) = state else { return err("ndarray state is not a tuple") };
            let off = if items.len() == 5 { 1 } else { 0 };
            if items.len() < 4 + off {
                return err("short ndarray state");
            }
            *shape = shape_of(&items[off])?;
            **dtype = items[off + 1].clone();
            *fortran = matches!(items[off + 2], Value::Bool(true) | Value::Int(1));
            *data = match &items[off + 3] {
                Value::Bytes(b) => b.clone(),
                Value::Str(s) => s.chars().map(|c| c as u32 as u8).collect(),
                _ => return err("ndarray raw data is not a byte string"),
            };
            Ok(())
        }
        Value::Dtype { byte_order, .. } => {
            if let Value::Tuple(items) = state {
                if let Some(order) = items.get(1).and_then(Value::as_text) {
                    *byte_order = order.chars().next().unwrap_or('|');
                }
            }
            Ok(())
        }
        _ => Ok(()),
    }
}

/// Runs the pickle program in `bytes` and returns the unpickled root value.
pub fn unpickle(bytes: &[u8]) -> PResult<Value> {
    let mut r = Reader { buf: bytes, pos: 0 };
    let mut m = Machine { stack: Vec::new(), memo: HashMap::new() };
    loop {
        let op = r.u8()?;
        match op {
            0x80 => {
                r.u8()?;
            } // PROTO
            0x95 => {
                r.u64()?;
            } // FRAME
            b'.' => return m.pop(),
            b'(' => m.stack.push(Item::Mark),
            b'}' => m.push(Value::Dict(vec![])),
            b']' => m.push(Value::List(vec![])),
            b')' => m.push(Value::Tuple(vec![])),
            b'N' => m.push(Value::None),
            0x88 => m.push(Value::Bool(true)),
            0x89 => m.push(Value::Bool(false)),
            b'J' => {
                let v = r.i32()?;
                m.push(Value::Int(v));
            }
            b'K' => {
                let v = r.u8()? as i64;
                m.push(Value::Int(v));
            }
            b'M' => {
                let v = r.u16()? as i64;
                m.push(Value::Int(v));
            }
            0x8a => {
                // LONG1
                let n = r.u8()? as usize;
                let b = r.take(n)?;
                if n > 8 {
                    return err("LONG1 wider than 64 bits");
                }
                let mut v: i64 = 0;
                for (i, &byte) in b.iter().enumerate() {
                    v |= (byte as i64) << (8 * i);
                }
                if n > 0 && n < 8 && b[n - 1] & 0x80 != 0 {
                    v -= 1i64 << (8 * n);
                }
                m.push(Value::Int(v));
            }
            b'I' => {
                let line = r.line()?;
                let v = match line.as_str() {
                    "00" => Value::Bool(false),
                    "01" => Value::Bool(true),
                    s => Value::Int(s.trim().parse().map_err(|_| PickleError(format!("bad INT {s}")))?),
                };
                m.push(v);
            }
            b'G' => {
                let b = r.take(8)?;
                m.push(Value::Float(f64::from_be_bytes(b.try_into().expect("8 bytes"))));
            }
            b'U' => {
                let n = r.u8()? as usize;
                m.push(Value::Bytes(r.take(n)?.to_vec()));
            }
            b'T' => {
                let n = r.u32()?;
                m.push(Value::Bytes(r.take(n)?.to_vec()));
            }
            b'C' => {
                let n = r.u8()? as usize;
                m.push(Value::Bytes(r.take(n)?.to_vec()));
            }
            b'B' => {
                let n = r.u32()?;
                m.push(Value::Bytes(r.take(n)?.to_vec()));
            }
            0x8e | 0x96 => {
                // BINBYTES8 / BYTEARRAY8
                let n = r.u64()?;
                m.push(Value::Bytes(r.take(n)?.to_vec()));
            }
            0x8c => {
                let n = r.u8()? as usize;
                let s = r.utf8(n)?;
                m.push(Value::Str(s));
            }
            b'X' => {
                let n = r.u32()?;
                let s = r.utf8(n)?;
                m.push(Value::Str(s));
            }
            0x8d => {
                let n = r.u64()?;
                let s = r.utf8(n)?;
                m.push(Value::Str(s));
            }
            b'q' => {
                let i = r.u8()? as usize;
                m.memo_put(i)?;
            }
            b'r' => {
                let i = r.u32()?;
                m.memo_put(i)?;
            }
            0x94 => {
                let i = m.memo.len();
                m.memo_put(i)?;
            } // MEMOIZE
            b'p' => {
                let i = r.line()?.trim().parse().map_err(|_| PickleError("bad PUT".into()))?;
                m.memo_put(i)?;
            }
            b'h' => {
                let i = r.u8()? as usize;
                m.memo_get(i)?;
            }
            b'j' => {
                let i = r.u32()?;
                m.memo_get(i)?;
            }
            b'g' => {
                let i = r.line()?.trim().parse().map_err(|_| PickleError("bad GET".into()))?;
                m.memo_get(i)?;
            }
            b't' => {
                let items = m.pop_mark()?;
                m.push(Value::Tuple(items));
            }
            0x85 => {
                let a = m.pop()?;
                m.push(Value::Tuple(vec![a]));
            }
            0x86 => {
                let b = m.pop()?;
                let a = m.pop()?;
                m.push(Value::Tuple(vec![a, b]));
            }
            0x87 => {
                let c = m.pop()?;
                let b = m.pop()?;
                let a = m.pop()?;
                m.push(Value::Tuple(vec![a, b, c]));
            }
            b'l' => {
                let items = m.pop_mark()?;
                m.push(Value::List(items));
            }
            b'd' => {
                let items = m.pop_mark()?;
                let pairs = items.chunks(2).filter(|c| c.len() == 2).map(|c| (c[0].clone(), c[1].clone())).collect();
                m.push(Value::Dict(pairs));
            }
            b'c' => {
                let module = r.line()?;
                let name = r.line()?;
                m.push(Value::Global(module, name));
            }
            0x93 => {
                let name = m.pop()?.as_text().ok_or_else(|| PickleError("STACK_GLOBAL name".into()))?;
                let module = m.pop()?.as_text().ok_or_else(|| PickleError("STACK_GLOBAL module".into()))?;
                m.push(Value::Global(module, name));
            }
            b'R' => {
                let args = m.pop()?;
                let callable = m.pop()?;
                m.push(reduce(callable, args)?);
            }
            0x81 => {
                // NEWOBJ
                let args = m.pop()?;
                let cls = m.pop()?;
                m.push(reduce(cls, args)?);
            }
            b'b' => {
                let state = m.pop()?;
                build(m.top_mut()?, state)?;
            }
            b's' => {
                let v = m.pop()?;
                let k = m.pop()?;
                match m.top_mut()? {
                    Value::Dict(d) => d.push((k, v)),
                    _ => return err("SETITEM on a non-dict"),
                }
            }
            b'u' => {
                let items = m.pop_mark()?;
                match m.top_mut()? {
                    Value::Dict(d) => {
                        for c in items.chunks(2) {
                            if c.len() == 2 {
                                d.push((c[0].clone(), c[1].clone()));
                            }
                        }
                    }
                    _ => return err("SETITEMS on a non-dict"),
                }
            }
            b'a' => {
                let v = m.pop()?;
                match m.top_mut()? {
                    Value::List(l) => l.push(v),
                    _ => return err("APPEND on a non-list"),
                }
            }
            b'e' => {
                let items = m.pop_mark()?;
                match m.top_mut()? {
                    Value::List(l) => l.extend(items),
                    _ => return err("APPENDS on a non-list"),
                }
            }
            b'0' => {
                m.pop()?;
            }
            other => return err(format!("unsupported opcode 0x{other:02x} at byte {}", r.pos - 1)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn python2_style_tuple_keyed_dict() {
        // {('BPSK', 2): 7} written with py2 string opcodes
        let mut p = vec![0x80, 0x02, b'}', b'q', 0, b'U', 4];
        p.extend_from_slice(b"BPSK");
        p.extend_from_slice(&[b'K', 2, 0x86, b'K', 7, b's', b'.']);
        let v = unpickle(&p).unwrap();
        assert_eq!(
            v,
            Value::Dict(vec![(Value::Tuple(vec![Value::Bytes(b"BPSK".to_vec()), Value::Int(2)]), Value::Int(7))])
        );
    }

    #[test]
    fn negative_long1() {
        let p = [0x80, 0x02, 0x8a, 0x01, 0xec, b'.'];
        assert_eq!(unpickle(&p).unwrap(), Value::Int(-20));
    }

    #[test]
    fn truncated_stream_errors() {
        assert!(unpickle(&[0x80, 0x02, b'}']).is_err());
        assert!(unpickle(&[]).is_err());
    }
}
