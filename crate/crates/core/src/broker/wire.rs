//! Broker frame encoding.
//!
//! Every frame starts with the magic `AFCB`, a `u8` version (1), a `u8`
//! opcode and a `u16` little-endian key length followed by the UTF-8 key.
//! `GET` appends a `u32` timeout in milliseconds. `PUT` and `TENSOR` append
//! a tensor: `u8` dtype, `u8` rank, one `u64` per dimension, then the
//! elements as little-endian bytes in row-major order. `ERR` frames carry
//! their message in the key slot.

use std::io::{self, Read, Write};

use thiserror::Error;

pub const MAGIC: &[u8; 4] = b"AFCB";
pub const VERSION: u8 = 1;
/// Longest permitted key (the length field is a `u16`).
pub const MAX_KEY_LEN: usize = u16::MAX as usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum Opcode {
    Put = 1,
    Get = 2,
    Del = 3,
    Ping = 4,
    Ok = 128,
    Tensor = 129,
    NotFound = 130,
    Err = 131,
}

impl Opcode {
    pub fn from_u8(b: u8) -> Option<Self> {
        Some(match b {
            1 => Opcode::Put,
            2 => Opcode::Get,
            3 => Opcode::Del,
            4 => Opcode::Ping,
            128 => Opcode::Ok,
            129 => Opcode::Tensor,
            130 => Opcode::NotFound,
            131 => Opcode::Err,
            _ => return None,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u8)]
pub enum DType {
    F32 = 1,
    F64 = 2,
    I64 = 3,
}

impl DType {
    pub fn from_u8(b: u8) -> Option<Self> {
        match b {
            1 => Some(DType::F32),
            2 => Some(DType::F64),
            3 => Some(DType::I64),
            _ => None,
        }
    }

    pub fn size(self) -> usize {
        match self {
            DType::F32 => 4,
            DType::F64 | DType::I64 => 8,
        }
    }
}

/// A dense tensor as it travels on the wire: element bytes are little-endian.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Tensor {
    pub dtype: DType,
    pub dims: Vec<u64>,
    pub data: Vec<u8>,
}

/// Number of payload bytes implied by `dtype` and `dims`, if it fits in `usize`.
pub fn payload_len(dtype: DType, dims: &[u64]) -> Option<usize> {
    dims.iter()
        .try_fold(dtype.size() as u64, |acc, &d| acc.checked_mul(d))
        .and_then(|n| usize::try_from(n).ok())
}

impl Tensor {
    /// Validates that the payload length matches the dimensions.
    pub fn new(dtype: DType, dims: Vec<u64>, data: Vec<u8>) -> Result<Self, WireError> {
        if dims.len() > u8::MAX as usize {
            return Err(WireError::Malformed(format!("rank {} exceeds 255", dims.len())));
        }
        match payload_len(dtype, &dims) {
            Some(n) if n == data.len() => Ok(Self { dtype, dims, data }),
            _ => Err(WireError::Malformed(format!(
                "{} payload bytes do not match dims {:?}",
                data.len(),
                dims
            ))),
        }
    }

    pub fn from_f64(dims: &[u64], values: &[f64]) -> Result<Self, WireError> {
        let data = values.iter().flat_map(|v| v.to_le_bytes()).collect();
        Self::new(DType::F64, dims.to_vec(), data)
    }

    pub fn from_f32(dims: &[u64], values: &[f32]) -> Result<Self, WireError> {
        let data = values.iter().flat_map(|v| v.to_le_bytes()).collect();
        Self::new(DType::F32, dims.to_vec(), data)
    }

    pub fn from_i64(dims: &[u64], values: &[i64]) -> Result<Self, WireError> {
        let data = values.iter().flat_map(|v| v.to_le_bytes()).collect();
        Self::new(DType::I64, dims.to_vec(), data)
    }

    /// 1-D `f64` tensor.
    pub fn vector(values: &[f64]) -> Self {
        Self::from_f64(&[values.len() as u64], values).expect("consistent by construction")
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dtype.size()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Elements converted to `f64` (`i64` is converted numerically).
    pub fn to_f64(&self) -> Vec<f64> {
        match self.dtype {
            DType::F64 => self
                .data
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect(),
            DType::F32 => self
                .data
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
                .collect(),
            DType::I64 => self
                .data
                .chunks_exact(8)
                .map(|c| i64::from_le_bytes(c.try_into().unwrap()) as f64)
                .collect(),
        }
    }

    /// Header plus payload size on the wire.
    pub fn encoded_len(&self) -> usize {
        2 + 8 * self.dims.len() + self.data.len()
    }
}

/// One protocol message.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Frame {
    Put { key: String, tensor: Tensor },
    Get { key: String, timeout_ms: u32 },
    Del { key: String },
    Ping,
    Ok,
    Tensor { key: String, tensor: Tensor },
    NotFound { key: String },
    Err { message: String },
}

#[derive(Debug, Error)]
pub enum WireError {
    #[error("bad magic {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported protocol version {0}")]
    Version(u8),
    #[error("unknown opcode {0}")]
    Opcode(u8),
    #[error("unknown dtype {0}")]
    DType(u8),
    #[error("malformed frame: {0}")]
    Malformed(String),
    #[error("frame payload of {0} bytes exceeds the limit")]
    TooLarge(u64),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Frame {
    pub fn opcode(&self) -> Opcode {
        match self {
            Frame::Put { .. } => Opcode::Put,
            Frame::Get { .. } => Opcode::Get,
            Frame::Del { .. } => Opcode::Del,
            Frame::Ping => Opcode::Ping,
            Frame::Ok => Opcode::Ok,
            Frame::Tensor { .. } => Opcode::Tensor,
            Frame::NotFound { .. } => Opcode::NotFound,
            Frame::Err { .. } => Opcode::Err,
        }
    }

    fn key(&self) -> &str {
        match self {
            Frame::Put { key, .. }
            | Frame::Get { key, .. }
            | Frame::Del { key }
            | Frame::Tensor { key, .. }
            | Frame::NotFound { key } => key,
            Frame::Err { message } => message,
            Frame::Ping | Frame::Ok => "",
        }
    }

    /// Serializes the frame. Fails on keys that are empty where required or too long.
    pub fn encode(&self) -> Result<Vec<u8>, WireError> {
        let key = self.key().as_bytes();
        let needs_key = matches!(
            self.opcode(),
            Opcode::Put | Opcode::Get | Opcode::Del | Opcode::Tensor | Opcode::NotFound
        );
        if needs_key && key.is_empty() {
            return Err(WireError::Malformed("empty key".into()));
        }
        // Long error messages are truncated on a character boundary.
        let key = if key.len() > MAX_KEY_LEN {
            if needs_key {
                return Err(WireError::Malformed(format!("key of {} bytes", key.len())));
            }
            let s = self.key();
            let mut end = MAX_KEY_LEN;
            while !s.is_char_boundary(end) {
                end -= 1;
            }
            &key[..end]
        } else {
            key
        };
        let mut out = Vec::with_capacity(8 + key.len());
        out.extend_from_slice(MAGIC);
        out.push(VERSION);
        out.push(self.opcode() as u8);
        out.extend_from_slice(&(key.len() as u16).to_le_bytes());
        out.extend_from_slice(key);
        match self {
            Frame::Get { timeout_ms, .. } => out.extend_from_slice(&timeout_ms.to_le_bytes()),
            Frame::Put { tensor, .. } | Frame::Tensor { tensor, .. } => {
                out.reserve(tensor.encoded_len());
                out.push(tensor.dtype as u8);
                out.push(tensor.dims.len() as u8);
                for d in &tensor.dims {
                    out.extend_from_slice(&d.to_le_bytes());
                }
                out.extend_from_slice(&tensor.data);
            }
            _ => {}
        }
        Ok(out)
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<(), WireError> {
        w.write_all(&self.encode()?)?;
        w.flush()?;
        Ok(())
    }

    /// Reads one frame. Tensor payloads above `max_payload` bytes are rejected
    /// before allocation. A clean end of stream before the first byte yields
    /// `Ok(None)`.
    pub fn read_from<R: Read>(r: &mut R, max_payload: u64) -> Result<Option<Frame>, WireError> {
        let mut head = [0u8; 8];
        let mut got = 0;
        while got < head.len() {
            match r.read(&mut head[got..]) {
                Ok(0) if got == 0 => return Ok(None),
                Ok(0) => {
                    return Err(WireError::Io(io::Error::new(
                        io::ErrorKind::UnexpectedEof,
                        "truncated frame header",
                    )))
                }
                Ok(n) => got += n,
                Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
                Err(e) => return Err(e.into()),
            }
        }
        let magic: [u8; 4] = head[..4].try_into().unwrap();
        if &magic != MAGIC {
            return Err(WireError::BadMagic(magic));
        }
        if head[4] != VERSION {
            return Err(WireError::Version(head[4]));
        }
        let op = Opcode::from_u8(head[5]).ok_or(WireError::Opcode(head[5]))?;
        let key_len = u16::from_le_bytes([head[6], head[7]]) as usize;
        let mut key = vec![0u8; key_len];
        r.read_exact(&mut key)?;
        let key =
            String::from_utf8(key).map_err(|_| WireError::Malformed("key is not UTF-8".into()))?;
        let needs_key = matches!(
            op,
            Opcode::Put | Opcode::Get | Opcode::Del | Opcode::Tensor | Opcode::NotFound
        );
        if needs_key && key.is_empty() {
            return Err(WireError::Malformed("empty key".into()));
        }
        Ok(Some(match op {
            Opcode::Put => Frame::Put {
                key,
                tensor: read_tensor(r, max_payload)?,
            },
            Opcode::Tensor => Frame::Tensor {
                key,
                tensor: read_tensor(r, max_payload)?,
            },
            Opcode::Get => {
                let mut t = [0u8; 4];
                r.read_exact(&mut t)?;
                Frame::Get {
                    key,
                    timeout_ms: u32::from_le_bytes(t),
                }
            }
            Opcode::Del => Frame::Del { key },
            Opcode::Ping => Frame::Ping,
            Opcode::Ok => Frame::Ok,
            Opcode::NotFound => Frame::NotFound { key },
            Opcode::Err => Frame::Err { message: key },
        }))
    }

    /// Decodes a complete frame from a byte slice; trailing bytes are an error.
    pub fn decode(bytes: &[u8]) -> Result<Frame, WireError> {
        let mut cur = io::Cursor::new(bytes);
        let frame = Frame::read_from(&mut cur, u64::MAX)?.ok_or_else(|| {
            WireError::Io(io::Error::new(io::ErrorKind::UnexpectedEof, "empty input"))
        })?;
        if cur.position() as usize != bytes.len() {
            return Err(WireError::Malformed("trailing bytes after frame".into()));
        }
        Ok(frame)
    }
}

fn read_tensor<R: Read>(r: &mut R, max_payload: u64) -> Result<Tensor, WireError> {
    let mut h = [0u8; 2];
    r.read_exact(&mut h)?;
    let dtype = DType::from_u8(h[0]).ok_or(WireError::DType(h[0]))?;
    let ndim = h[1] as usize;
    let mut dims = Vec::with_capacity(ndim);
    for _ in 0..ndim {
        let mut d = [0u8; 8];
        r.read_exact(&mut d)?;
        dims.push(u64::from_le_bytes(d));
    }
    let len = dims
        .iter()
        .try_fold(dtype.size() as u64, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| WireError::Malformed(format!("dims {dims:?} overflow")))?;
    if len > max_payload {
        return Err(WireError::TooLarge(len));
    }
    let mut data = vec![0u8; len as usize];
    r.read_exact(&mut data)?;
    Ok(Tensor { dtype, dims, data })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ping_layout() {
        assert_eq!(
            Frame::Ping.encode().unwrap(),
            vec![b'A', b'F', b'C', b'B', 1, 4, 0, 0]
        );
    }

    #[test]
    fn put_layout() {
        let t = Tensor::from_f32(&[2], &[1.0, -2.0]).unwrap();
        let bytes = Frame::Put {
            key: "k".into(),
            tensor: t,
        }
        .encode()
        .unwrap();
        let mut expect = vec![b'A', b'F', b'C', b'B', 1, 1, 1, 0, b'k', 1, 1];
        expect.extend_from_slice(&2u64.to_le_bytes());
        expect.extend_from_slice(&1f32.to_le_bytes());
        expect.extend_from_slice(&(-2f32).to_le_bytes());
        assert_eq!(bytes, expect);
    }

    #[test]
    fn get_carries_timeout() {
        let f = Frame::Get {
            key: "abc".into(),
            timeout_ms: 50,
        };
        let bytes = f.encode().unwrap();
        assert_eq!(&bytes[11..], &50u32.to_le_bytes());
        assert_eq!(Frame::decode(&bytes).unwrap(), f);
    }

    #[test]
    fn empty_tensor_is_legal() {
        let f = Frame::Tensor {
            key: "e".into(),
            tensor: Tensor::from_f64(&[0], &[]).unwrap(),
        };
        assert_eq!(Frame::decode(&f.encode().unwrap()).unwrap(), f);
    }

    #[test]
    fn rejects_bad_frames() {
        assert!(Tensor::new(DType::F64, vec![3], vec![0; 16]).is_err());
        assert!(Frame::Del { key: String::new() }.encode().is_err());
        let mut b = Frame::Ping.encode().unwrap();
        b[0] = b'X';
        assert!(matches!(Frame::decode(&b), Err(WireError::BadMagic(_))));
        let mut b = Frame::Ping.encode().unwrap();
        b[4] = 2;
        assert!(matches!(Frame::decode(&b), Err(WireError::Version(2))));
        let mut b = Frame::Ping.encode().unwrap();
        b[5] = 77;
        assert!(matches!(Frame::decode(&b), Err(WireError::Opcode(77))));
        let bytes = Frame::Put {
            key: "k".into(),
            tensor: Tensor::vector(&[1.0, 2.0]),
        }
        .encode()
        .unwrap();
        assert!(Frame::decode(&bytes[..bytes.len() - 1]).is_err());
        assert!(matches!(
            Frame::read_from(&mut &bytes[..], 8),
            Err(WireError::TooLarge(16))
        ));
    }

    #[test]
    fn huge_dims_do_not_allocate() {
        let mut b = vec![b'A', b'F', b'C', b'B', 1, 1, 1, 0, b'k', 2, 2];
        b.extend_from_slice(&u64::MAX.to_le_bytes());
        b.extend_from_slice(&u64::MAX.to_le_bytes());
        assert!(Frame::decode(&b).is_err());
    }

    #[test]
    fn long_error_message_is_truncated() {
        let f = Frame::Err {
            message: "é".repeat(40_000),
        };
        let bytes = f.encode().unwrap();
        match Frame::decode(&bytes).unwrap() {
            Frame::Err { message } => assert!(message.len() <= MAX_KEY_LEN),
            other => panic!("{other:?}"),
        }
    }
}
