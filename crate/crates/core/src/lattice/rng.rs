use rand::{Rng, RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{Error, Result};

/// Serialized size of [`RngState`]: 32-byte key, 64-bit stream id and a
/// 128-bit word position.
pub const RNG_STATE_BYTES: usize = 32 + 8 + 16;

/// Counter-based generator: a ChaCha8 keystream addressed by
/// (key, stream, word position). Distinct stream ids under the same key
/// give independent sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct RngState {
    inner: ChaCha8Rng,
}

impl RngState {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { inner }
    }

    pub fn stream(&self) -> u64 {
        self.inner.get_stream()
    }

    #[inline]
    pub fn next_word(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform index in `0..n`.
    #[inline]
    pub fn below(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    /// Standard exponential variate.
    #[inline]
    pub fn exponential(&mut self) -> f64 {
        Exp1.sample(&mut self.inner)
    }

    #[inline]
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    pub fn to_bytes(&self) -> [u8; RNG_STATE_BYTES] {
        let mut out = [0u8; RNG_STATE_BYTES];
        out[..32].copy_from_slice(&self.inner.get_seed());
        out[32..40].copy_from_slice(&self.inner.get_stream().to_le_bytes());
        out[40..].copy_from_slice(&self.inner.get_word_pos().to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() != RNG_STATE_BYTES {
            return Err(Error::Format {
                version: 0,
                reason: format!(
                    "rng state must be {RNG_STATE_BYTES} bytes, got {}",
                    bytes.len()
                ),
            });
        }
        let mut seed = [0u8; 32];
        seed.copy_from_slice(&bytes[..32]);
        let stream = u64::from_le_bytes(bytes[32..40].try_into().expect("8 bytes"));
        let pos = u128::from_le_bytes(bytes[40..].try_into().expect("16 bytes"));
        let mut inner = ChaCha8Rng::from_seed(seed);
        inner.set_stream(stream);
        inner.set_word_pos(pos);
        Ok(Self { inner })
    }
}

/// A probability rounded to 32 binary digits, stored as `round(p · 2³²)`
/// so that `p = 1` is representable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DyadicProbability(u64);

impl DyadicProbability {
    pub const ONE: Self = Self(1 << 32);
    pub const ZERO: Self = Self(0);

    pub fn new(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Domain(format!(
                "probability must lie in [0, 1], got {p}"
            )));
        }
        Ok(Self((p * 4_294_967_296.0).round() as u64))
    }

    pub fn from_bits(bits: u64) -> Result<Self> {
        if bits > 1 << 32 {
            return Err(Error::Domain(format!(
                "dyadic numerator {bits} exceeds 2^32"
            )));
        }
        Ok(Self(bits))
    }

    pub fn bits(&self) -> u64 {
        self.0
    }

    pub fn value(&self) -> f64 {
        self.0 as f64 / 4_294_967_296.0
    }
}

/// A word whose bits are independently 1 with probability `p`.
///
/// The binary digits of `p` are consumed from the least significant one
/// upward: a 1-digit ORs in a fresh uniform word, a 0-digit ANDs one in.
/// Digits below the lowest set digit are skipped since they act on an
/// all-zero word.
#[inline]
pub fn biased_word(rng: &mut RngState, p: DyadicProbability) -> u64 {
    let bits = p.0;
    if bits == 0 {
        return 0;
    }
    if bits >= 1 << 32 {
        return u64::MAX;
    }
    let lowest = bits.trailing_zeros();
    let mut w = rng.next_word();
    for digit in lowest + 1..32 {
        if bits >> digit & 1 == 1 {
            w |= rng.next_word();
        } else {
            w &= rng.next_word();
        }
    }
    w
}
