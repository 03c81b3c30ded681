//! Policy file format.
//!
//! Little-endian: magic `AFCP`, `u16` version, `u32` observation size,
//! `u32` hidden width, `f64` flow-rate bound, `u32` parameter count, then
//! the parameters (actor, critic, log-std in [`PolicyParams::flatten`]
//! order) as `f32`.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::policy::PolicyParams;
use super::AgentError;

pub const MAGIC: &[u8; 4] = b"AFCP";
pub const VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 4 + 4 + 8 + 4;

pub fn encode_policy(params: &PolicyParams<f32>) -> Vec<u8> {
    let flat = params.flatten();
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * flat.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(params.obs_dim() as u32).to_le_bytes());
    out.extend_from_slice(&(params.hidden() as u32).to_le_bytes());
    out.extend_from_slice(&params.q_max.to_le_bytes());
    out.extend_from_slice(&(flat.len() as u32).to_le_bytes());
    for x in flat {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

pub fn decode_policy(bytes: &[u8]) -> Result<PolicyParams<f32>, AgentError> {
    let corrupt = |m: &str| AgentError::Model(m.to_string());
    if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
        return Err(corrupt("not a policy file"));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(AgentError::Model(format!("unsupported policy version {version}")));
    }
    let u32_at = |k: usize| u32::from_le_bytes(bytes[k..k + 4].try_into().unwrap()) as usize;
    let obs_dim = u32_at(6);
    let hidden = u32_at(10);
    let q_max = f64::from_le_bytes(bytes[14..22].try_into().unwrap());
    let count = u32_at(22);
    if obs_dim == 0 || hidden == 0 || !(q_max > 0.0) {
        return Err(corrupt("invalid policy dimensions"));
    }
    // Every value is overwritten below; the seed only fixes the shapes.
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut params = PolicyParams::<f32>::new(obs_dim, hidden, q_max, 0.0, &mut rng);
    if count != params.n_params() || bytes.len() != HEADER_LEN + 4 * count {
        return Err(corrupt("parameter count does not match the dimensions"));
    }
    let flat: Vec<f32> = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    params.unflatten(&flat);
    if !params.all_finite() {
        return Err(corrupt("non-finite parameters"));
    }
    Ok(params)
}

pub fn save_policy(params: &PolicyParams<f32>, path: &Path) -> Result<(), AgentError> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, encode_policy(params))?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_policy(path: &Path) -> Result<PolicyParams<f32>, AgentError> {
    decode_policy(&std::fs::read(path)?)
}
