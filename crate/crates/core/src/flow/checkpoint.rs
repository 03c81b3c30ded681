//! Binary flow checkpoints.
//!
//! Layout (little-endian): magic `AFCS`, `u16` version, `u32 nx`, `u32 ny`,
//! `f64 t`, then the padded `u`, `v` and `p` arrays (ghost layer included,
//! row-major) as `f64`. Storing the ghosts makes the round trip exact.

use thiserror::Error;

use super::grid::Field2;
use super::solver::FlowField;

pub const MAGIC: &[u8; 4] = b"AFCS";
pub const VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 4 + 4 + 8;

#[derive(Debug, Error, PartialEq)]
pub enum CheckpointError {
    #[error("not a flow checkpoint (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {found} (expected {VERSION})")]
    Version { found: u16 },
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error("checkpoint grid {found:?} does not match the expected {expected:?}")]
    Shape {
        expected: (usize, usize),
        found: (usize, usize),
    },
}

fn padded_len(nx: usize, ny: usize) -> usize {
    (nx + 2) * (ny + 2)
}

pub fn encode_checkpoint(field: &FlowField) -> Vec<u8> {
    let (nx, ny) = (field.nx(), field.ny());
    let n = field.u.raw().len() + field.v.raw().len() + field.p.raw().len();
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * n);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(nx as u32).to_le_bytes());
    out.extend_from_slice(&(ny as u32).to_le_bytes());
    out.extend_from_slice(&field.t.to_le_bytes());
    for f in [&field.u, &field.v, &field.p] {
        for x in f.raw() {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    out
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<FlowField, CheckpointError> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    if bytes.len() < HEADER_LEN {
        return Err(CheckpointError::Corrupt(format!(
            "header truncated at {} bytes",
            bytes.len()
        )));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(CheckpointError::Version { found: version });
    }
    let nx = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
    let ny = u32::from_le_bytes(bytes[10..14].try_into().unwrap()) as usize;
    let t = f64::from_le_bytes(bytes[14..22].try_into().unwrap());
    let lens = [
        padded_len(nx + 1, ny),
        padded_len(nx, ny + 1),
        padded_len(nx, ny),
    ];
    let expected = HEADER_LEN as u64 + 8 * lens.iter().map(|&l| l as u64).sum::<u64>();
    if bytes.len() as u64 != expected {
        return Err(CheckpointError::Corrupt(format!(
            "payload is {} bytes, a {nx}x{ny} grid needs {expected}",
            bytes.len()
        )));
    }
    let mut field = FlowField::zeros(nx, ny);
    field.t = t;
    let mut chunks = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    for f in [&mut field.u, &mut field.v, &mut field.p] {
        for (dst, src) in f.raw_mut().iter_mut().zip(chunks.by_ref()) {
            *dst = src;
        }
    }
    Ok(field)
}

/// Decodes and checks the grid dimensions.
pub fn decode_checkpoint_for(
    bytes: &[u8],
    nx: usize,
    ny: usize,
) -> Result<FlowField, CheckpointError> {
    let f = decode_checkpoint(bytes)?;
    if (f.nx(), f.ny()) != (nx, ny) {
        return Err(CheckpointError::Shape {
            expected: (nx, ny),
            found: (f.nx(), f.ny()),
        });
    }
    Ok(f)
}

/// Convenience for tests and tools: a field whose every entry is distinct.
pub fn patterned_field(nx: usize, ny: usize) -> FlowField {
    let mut f = FlowField::zeros(nx, ny);
    let fill = |a: &mut Field2, s: f64| {
        for (k, x) in a.raw_mut().iter_mut().enumerate() {
            *x = s * (k as f64 + 0.25).sin();
        }
    };
    fill(&mut f.u, 1.0);
    fill(&mut f.v, 0.5);
    fill(&mut f.p, -2.0);
    f.t = 123.456;
    f
}
