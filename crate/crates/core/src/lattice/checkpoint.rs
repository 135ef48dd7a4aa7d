//! Binary snapshot of a lattice and its random stream.
//!
//! Layout: `"TOOMCKPT"`, version byte, topology byte, size (u64 LE),
//! clock (f64 LE), RNG state, then `size` words (u64 LE).

use super::rng::{RngState, RNG_STATE_BYTES};
use super::{Engine, SpinLattice, TimeMode, Topology};
use crate::coefficients::ModelParams;
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"TOOMCKPT";
pub const CHECKPOINT_VERSION: u8 = 1;

const HEADER: usize = 8 + 1 + 1 + 8 + 8 + RNG_STATE_BYTES;

pub fn checkpoint(lattice: &SpinLattice, rng: &RngState) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER + 8 * lattice.size());
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.push(CHECKPOINT_VERSION);
    out.push(lattice.topology().tag());
    out.extend_from_slice(&(lattice.size() as u64).to_le_bytes());
    out.extend_from_slice(&lattice.clock().to_le_bytes());
    out.extend_from_slice(&rng.to_bytes());
    for w in lattice.words() {
        out.extend_from_slice(&w.to_le_bytes());
    }
    out
}

pub fn restore(blob: &[u8]) -> Result<(SpinLattice, RngState)> {
    let bad = |version: u8, reason: String| Error::Format { version, reason };
    if blob.len() < 9 {
        return Err(bad(0, format!("blob of {} bytes is too short", blob.len())));
    }
    if &blob[..8] != CHECKPOINT_MAGIC {
        return Err(bad(0, "wrong magic".into()));
    }
    let version = blob[8];
    if version != CHECKPOINT_VERSION {
        return Err(bad(
            version,
            format!("unsupported version (expected {CHECKPOINT_VERSION})"),
        ));
    }
    if blob.len() < HEADER {
        return Err(bad(version, "truncated header".into()));
    }
    let topology = Topology::from_tag(blob[9])
        .ok_or_else(|| bad(version, format!("unknown topology tag {}", blob[9])))?;
    let size = u64::from_le_bytes(blob[10..18].try_into().expect("8 bytes"));
    let clock = f64::from_le_bytes(blob[18..26].try_into().expect("8 bytes"));
    let rng = RngState::from_bytes(&blob[26..HEADER]).map_err(|e| bad(version, e.to_string()))?;
    let expected = (size as usize)
        .checked_mul(8)
        .and_then(|b| b.checked_add(HEADER))
        .ok_or_else(|| bad(version, format!("size {size} overflows")))?;
    if blob.len() != expected {
        return Err(bad(
            version,
            format!("expected {expected} bytes, got {}", blob.len()),
        ));
    }
    let words = blob[HEADER..]
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let lattice =
        SpinLattice::from_words(topology, words, clock).map_err(|e| bad(version, e.to_string()))?;
    Ok((lattice, rng))
}

impl Engine {
    pub fn checkpoint(&self) -> Vec<u8> {
        checkpoint(self.lattice(), self.rng())
    }

    /// Rebuild an engine; λ and the time mode are not part of the blob.
    pub fn restore(blob: &[u8], params: ModelParams, mode: TimeMode) -> Result<Self> {
        let (lattice, rng) = restore(blob)?;
        Ok(Engine::from_parts(lattice, rng, params, mode))
    }
}
