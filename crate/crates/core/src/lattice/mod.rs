//! Multispin-coded Toom spin exchange dynamics.
//!
//! Word `j` stores the spin at site `j` for 64 replicas ("lanes"); bit 1
//! is spin −1 and bit 0 is spin +1. Sites are indexed from 0 in code.
//!
//! In one event a single site `i` is chosen for all lanes. A lane accepts
//! if its spin there is − (rate 1) or, when it is +, with probability λ.
//! Accepted lanes flip site `i` and then flip the first site to the right
//! whose spin differs from the original spin at `i`, which realises the
//! exchange with the nearest opposite spin.
//!
//! * Half-line window: the scan stops at the last site. Lanes that found
//!   no partner keep only the flip at `i`; this is the block-flip rule for
//!   a block of equal spins touching the right boundary.
//! * Ring: the scan wraps around and visits at most `N − 1` sites. Lanes
//!   whose configuration is all-equal have no partner and the attempt is
//!   undone.

mod checkpoint;
mod correlation;
mod engine;
mod rng;

pub use checkpoint::{checkpoint, restore, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use correlation::{CorrelationRow, TwoPointCorrelation};
pub use engine::{Engine, IntegratedCurrent, RingInit, TimeMode};
pub use rng::{biased_word, DyadicProbability, RngState, RNG_STATE_BYTES};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const LANES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Topology {
    HalfLine,
    Ring,
}

impl Topology {
    pub(crate) fn tag(self) -> u8 {
        match self {
            Topology::HalfLine => 0,
            Topology::Ring => 1,
        }
    }

    pub(crate) fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Topology::HalfLine),
            1 => Some(Topology::Ring),
            _ => None,
        }
    }
}

/// Outcome of one attempt, as lane masks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EventMasks {
    pub site: usize,
    pub accepted: u64,
    pub partner_found: u64,
    /// Half-line only: lanes where the initiator flipped alone.
    pub boundary_flip: u64,
    /// Ring only: accepted lanes with an all-equal configuration.
    pub no_op: u64,
}

/// An [`EventMasks`] together with the time step that preceded it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventRecord {
    pub masks: EventMasks,
    pub dt: f64,
}

/// Bit-packed spin configuration of 64 lanes.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinLattice {
    topology: Topology,
    words: Vec<u64>,
    clock: f64,
    magnetization: [i64; LANES],
}

impl SpinLattice {
    /// Build from raw words. A half-line needs at least one site and a
    /// ring at least two.
    pub fn from_words(topology: Topology, words: Vec<u64>, clock: f64) -> Result<Self> {
        let min = match topology {
            Topology::HalfLine => 1,
            Topology::Ring => 2,
        };
        if words.len() < min {
            return Err(Error::Config(format!(
                "{topology:?} needs at least {min} sites, got {}",
                words.len()
            )));
        }
        if !(clock >= 0.0) || !clock.is_finite() {
            return Err(Error::Config(format!(
                "clock must be finite and non-negative, got {clock}"
            )));
        }
        let magnetization = recount(&words);
        Ok(Self {
            topology,
            words,
            clock,
            magnetization,
        })
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn size(&self) -> usize {
        self.words.len()
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub(crate) fn set_clock(&mut self, t: f64) {
        debug_assert!(t >= self.clock);
        self.clock = t;
    }

    /// Spin (±1) at `site` in `lane`.
    pub fn spin(&self, site: usize, lane: usize) -> i8 {
        if self.words[site] >> lane & 1 == 1 {
            -1
        } else {
            1
        }
    }

    /// Per-lane magnetization `Σ_j σ_j`, maintained incrementally.
    pub fn lane_magnetizations(&self) -> [i64; LANES] {
        self.magnetization
    }

    /// Magnetization recomputed from the words.
    pub fn recount_magnetizations(&self) -> [i64; LANES] {
        recount(&self.words)
    }

    /// Magnetization of sites `lo..hi` in every lane.
    pub fn segment_magnetizations(&self, lo: usize, hi: usize) -> [i64; LANES] {
        recount(&self.words[lo..hi])
    }

    /// Apply one attempt at `site` with acceptance pattern `bias` (lanes
    /// with spin + accept where `bias` has a 1; lanes with spin − always
    /// accept).
    #[inline]
    pub fn apply_event(&mut self, site: usize, bias: u64) -> EventMasks {
        self.apply_tracked(site, bias, None).0
    }

    /// As [`apply_event`](Self::apply_event); additionally returns the
    /// lanes whose exchange path crossed the bond between sites
    /// `bond_right − 1` and `bond_right` (ring only).
    #[inline]
    pub(crate) fn apply_tracked(
        &mut self,
        site: usize,
        bias: u64,
        bond_right: Option<usize>,
    ) -> (EventMasks, u64) {
        let first = self.words[site];
        let mut todo = bias | first;
        let accepted = todo;
        self.words[site] ^= todo;
        let mut crossing = 0u64;
        let mut masks = EventMasks {
            site,
            accepted,
            ..Default::default()
        };
        match self.topology {
            Topology::HalfLine => {
                for w in &mut self.words[site + 1..] {
                    if todo == 0 {
                        break;
                    }
                    let flip = todo & (first ^ *w);
                    *w ^= flip;
                    todo &= !flip;
                }
                masks.boundary_flip = todo;
                masks.partner_found = accepted & !todo;
                if todo != 0 {
                    self.record_single_flips(todo, first);
                }
            }
            Topology::Ring => {
                let n = self.words.len();
                let target = bond_right.unwrap_or(usize::MAX);
                let mut j = site + 1;
                if j == n {
                    j = 0;
                }
                while todo != 0 && j != site {
                    if j == target {
                        crossing = todo;
                    }
                    let w = &mut self.words[j];
                    let flip = todo & (first ^ *w);
                    *w ^= flip;
                    todo &= !flip;
                    j += 1;
                    if j == n {
                        j = 0;
                    }
                }
                if todo != 0 {
                    // all-equal lanes: undo the initiator flip
                    self.words[site] ^= todo;
                    crossing &= !todo;
                }
                masks.no_op = todo;
                masks.partner_found = accepted & !todo;
            }
        }
        (masks, crossing)
    }

    fn record_single_flips(&mut self, mut lanes: u64, first: u64) {
        while lanes != 0 {
            let lane = lanes.trailing_zeros() as usize;
            // a − spin (bit 1) becomes +: magnetization rises by 2
            if first >> lane & 1 == 1 {
                self.magnetization[lane] += 2;
            } else {
                self.magnetization[lane] -= 2;
            }
            lanes &= lanes - 1;
        }
    }
}

/// Per-lane `Σ σ` over a slice of words.
fn recount(words: &[u64]) -> [i64; LANES] {
    let mut minus = [0i64; LANES];
    for &w in words {
        let mut bits = w;
        while bits != 0 {
            minus[bits.trailing_zeros() as usize] += 1;
            bits &= bits - 1;
        }
    }
    let n = words.len() as i64;
    let mut m = [0i64; LANES];
    for (mi, ci) in m.iter_mut().zip(minus) {
        *mi = n - 2 * ci;
    }
    m
}
