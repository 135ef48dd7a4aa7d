use serde::{Deserialize, Serialize};

use super::rng::{biased_word, DyadicProbability, RngState};
use super::{EventRecord, SpinLattice, Topology, LANES};
use crate::coefficients::ModelParams;
use crate::error::{Error, Result};

/// How the clock advances per attempt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum TimeMode {
    /// Exponential increments with mean `1/size`: exact uniformization.
    #[default]
    Exact,
    /// Deterministic increments `1/size`.
    Fast,
}

/// Initial ring configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RingInit {
    /// Independent spins with `⟨σ⟩ = μ`.
    Bernoulli { magnetization: f64 },
    /// Every lane gets exactly `minus` spins −1 at uniformly random sites.
    Canonical { minus: usize },
}

/// Net magnetization carried rightward across the bond `(bond, bond + 1)`
/// during `[t0, t1]`, per lane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegratedCurrent {
    pub bond: usize,
    pub counts: Vec<i64>,
    pub t0: f64,
    pub t1: f64,
}

impl IntegratedCurrent {
    pub fn duration(&self) -> f64 {
        self.t1 - self.t0
    }

    /// `counts / (t1 − t0)` per lane.
    pub fn rates(&self) -> Vec<f64> {
        let d = self.duration();
        self.counts.iter().map(|&c| c as f64 / d).collect()
    }

    /// Lane-averaged current.
    pub fn mean_rate(&self) -> f64 {
        self.counts.iter().sum::<i64>() as f64 / (self.counts.len() as f64 * self.duration())
    }
}

const CONSERVATION_CHECK_EVERY: u64 = 1 << 20;

/// A lattice together with its random stream and dynamics parameters.
#[derive(Debug, Clone)]
pub struct Engine {
    lattice: SpinLattice,
    rng: RngState,
    params: ModelParams,
    bias: DyadicProbability,
    mode: TimeMode,
    events: u64,
}

impl Engine {
    /// Half-line window of `n` sites; each spin is −1 with probability
    /// `init_density` independently (1/2 gives the flat initial state).
    pub fn new_halfline(
        n: usize,
        params: ModelParams,
        seed: u64,
        stream: u64,
        init_density: f64,
    ) -> Result<Self> {
        if n < 2 {
            return Err(Error::Config(format!("half-line needs n >= 2, got {n}")));
        }
        let density = DyadicProbability::new(init_density).map_err(|_| {
            Error::Config(format!(
                "init density must lie in [0, 1], got {init_density}"
            ))
        })?;
        let mut rng = RngState::new(seed, stream);
        let words = (0..n).map(|_| biased_word(&mut rng, density)).collect();
        let lattice = SpinLattice::from_words(Topology::HalfLine, words, 0.0)?;
        Ok(Self::from_parts(lattice, rng, params, TimeMode::Exact))
    }

    pub fn new_ring(
        n: usize,
        params: ModelParams,
        seed: u64,
        stream: u64,
        init: RingInit,
    ) -> Result<Self> {
        if n < 2 {
            return Err(Error::Config(format!("ring needs N >= 2, got {n}")));
        }
        let mut rng = RngState::new(seed, stream);
        let words = match init {
            RingInit::Bernoulli { magnetization } => {
                if !(-1.0..=1.0).contains(&magnetization) {
                    return Err(Error::Config(format!(
                        "magnetization must lie in [-1, 1], got {magnetization}"
                    )));
                }
                let density = DyadicProbability::new((1.0 - magnetization) / 2.0)?;
                (0..n).map(|_| biased_word(&mut rng, density)).collect()
            }
            RingInit::Canonical { minus } => {
                if minus > n {
                    return Err(Error::Config(format!("{minus} minus spins on {n} sites")));
                }
                let mut words = vec![0u64; n];
                let mut sites: Vec<usize> = (0..n).collect();
                for lane in 0..LANES {
                    // partial Fisher–Yates
                    for k in 0..minus {
                        let r = k + rng.below(n - k);
                        sites.swap(k, r);
                        words[sites[k]] |= 1 << lane;
                    }
                }
                words
            }
        };
        let lattice = SpinLattice::from_words(Topology::Ring, words, 0.0)?;
        Ok(Self::from_parts(lattice, rng, params, TimeMode::Exact))
    }

    pub fn from_parts(
        lattice: SpinLattice,
        rng: RngState,
        params: ModelParams,
        mode: TimeMode,
    ) -> Self {
        let bias = DyadicProbability::new(params.lambda()).expect("lambda lies in (0, 1]");
        Self {
            lattice,
            rng,
            params,
            bias,
            mode,
            events: 0,
        }
    }

    pub fn with_mode(mut self, mode: TimeMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn lattice(&self) -> &SpinLattice {
        &self.lattice
    }

    pub fn rng(&self) -> &RngState {
        &self.rng
    }

    pub fn params(&self) -> ModelParams {
        self.params
    }

    pub fn mode(&self) -> TimeMode {
        self.mode
    }

    pub fn clock(&self) -> f64 {
        self.lattice.clock()
    }

    pub fn size(&self) -> usize {
        self.lattice.size()
    }

    /// Attempts performed by this instance since construction or restore.
    pub fn events(&self) -> u64 {
        self.events
    }

    pub fn lane_magnetizations(&self) -> [i64; LANES] {
        self.lattice.lane_magnetizations()
    }

    pub fn into_parts(self) -> (SpinLattice, RngState) {
        (self.lattice, self.rng)
    }

    #[inline]
    fn time_step(&mut self) -> f64 {
        let size = self.lattice.size() as f64;
        match self.mode {
            TimeMode::Exact => self.rng.exponential() / size,
            TimeMode::Fast => 1.0 / size,
        }
    }

    #[inline]
    fn fire(&mut self, bond_right: Option<usize>) -> (super::EventMasks, u64) {
        let site = self.rng.below(self.lattice.size());
        let bias = biased_word(&mut self.rng, self.bias);
        let out = self.lattice.apply_tracked(site, bias, bond_right);
        self.events += 1;
        if cfg!(debug_assertions) && self.events % CONSERVATION_CHECK_EVERY == 0 {
            debug_assert_eq!(
                self.lattice.lane_magnetizations(),
                self.lattice.recount_magnetizations(),
                "magnetization bookkeeping drifted"
            );
        }
        out
    }

    /// One attempt at a uniformly chosen site; the clock advances first.
    pub fn attempt_event(&mut self) -> EventRecord {
        let dt = self.time_step();
        let t = self.lattice.clock() + dt;
        self.lattice.set_clock(t);
        let (masks, _) = self.fire(None);
        EventRecord { masks, dt }
    }

    /// Run attempts until the clock reaches `target`; returns the number of
    /// attempts. In exact mode the step that would cross `target` is
    /// discarded and the clock stops at `target`, which by memorylessness
    /// leaves the law of the process unchanged.
    pub fn advance_until(&mut self, target: f64) -> u64 {
        self.run(target, None, &mut [])
    }

    fn run(&mut self, target: f64, bond: Option<usize>, counts: &mut [i64]) -> u64 {
        let start = self.lattice.clock();
        if !(target > start) {
            return 0;
        }
        let bond_right = bond.map(|b| (b + 1) % self.lattice.size());
        let mut fired = 0;
        match self.mode {
            TimeMode::Exact => loop {
                let t = self.lattice.clock() + self.time_step();
                if t > target {
                    break;
                }
                self.lattice.set_clock(t);
                let (masks, crossing) = self.fire(bond_right);
                if crossing != 0 {
                    tally(counts, crossing, self.lattice.words()[masks.site]);
                }
                fired += 1;
            },
            TimeMode::Fast => {
                let size = self.lattice.size() as f64;
                let due = (target * size).round() as u64;
                let done = (start * size).round() as u64;
                for _ in done..due {
                    let (masks, crossing) = self.fire(bond_right);
                    if crossing != 0 {
                        tally(counts, crossing, self.lattice.words()[masks.site]);
                    }
                    fired += 1;
                }
            }
        }
        self.lattice.set_clock(target);
        fired
    }

    /// Current across bond `(bond, bond + 1 mod N)` over `[t0, t1]`. The
    /// engine is first advanced to `t0` without tallying.
    pub fn measure_current(&mut self, bond: usize, t0: f64, t1: f64) -> Result<IntegratedCurrent> {
        if self.lattice.topology() != Topology::Ring {
            return Err(Error::Config("current measurement needs a ring".into()));
        }
        if bond >= self.lattice.size() {
            return Err(Error::Domain(format!(
                "bond {bond} out of range 0..{}",
                self.lattice.size()
            )));
        }
        if !(t0 >= self.lattice.clock() && t1 >= t0) {
            return Err(Error::Domain(format!(
                "need clock {} <= t0 {t0} <= t1 {t1}",
                self.lattice.clock()
            )));
        }
        self.advance_until(t0);
        let mut cur = IntegratedCurrent {
            bond,
            counts: vec![0; LANES],
            t0,
            t1: t0,
        };
        self.extend_current(&mut cur, t1)?;
        Ok(cur)
    }

    /// Continue tallying `cur` up to `t1`.
    pub fn extend_current(&mut self, cur: &mut IntegratedCurrent, t1: f64) -> Result<()> {
        if cur.t1 != self.lattice.clock() || t1 < cur.t1 {
            return Err(Error::Domain(format!(
                "current ends at {} but engine is at {}; target {t1}",
                cur.t1,
                self.lattice.clock()
            )));
        }
        self.run(t1, Some(cur.bond), &mut cur.counts);
        cur.t1 = t1;
        Ok(())
    }
}

/// Add ±2 per crossing lane. `initiator_now` is the initiator word after
/// the event: a lane whose initiator was + (now −, bit 1) carried + across.
#[inline]
fn tally(counts: &mut [i64], mut crossing: u64, initiator_now: u64) {
    while crossing != 0 {
        let lane = crossing.trailing_zeros() as usize;
        counts[lane] += if initiator_now >> lane & 1 == 1 {
            2
        } else {
            -2
        };
        crossing &= crossing - 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(l: f64) -> ModelParams {
        ModelParams::new(l).unwrap()
    }

    #[test]
    fn halfline_init_extremes() {
        let e = Engine::new_halfline(10, params(0.5), 1, 0, 0.0).unwrap();
        assert!(e.lane_magnetizations().iter().all(|&m| m == 10));
        let e = Engine::new_halfline(10, params(0.5), 1, 0, 1.0).unwrap();
        assert!(e.lane_magnetizations().iter().all(|&m| m == -10));
        assert!(Engine::new_halfline(1, params(0.5), 1, 0, 0.5).is_err());
        assert!(Engine::new_halfline(5, params(0.5), 1, 0, 1.5).is_err());
    }

    #[test]
    fn halfline_bernoulli_mean() {
        let e = Engine::new_halfline(10_000, params(0.125), 3, 0, 0.5).unwrap();
        let m = e.lane_magnetizations();
        let mean = m.iter().sum::<i64>() as f64 / 64.0;
        assert!(mean.abs() < 4.0 * 100.0 / 8.0, "{mean}");
        assert!(m.iter().all(|v| v % 2 == 0));
    }

    #[test]
    fn canonical_ring_has_exact_count() {
        let e =
            Engine::new_ring(100, params(0.3), 5, 0, RingInit::Canonical { minus: 37 }).unwrap();
        assert!(e.lane_magnetizations().iter().all(|&m| m == 100 - 74));
    }

    #[test]
    fn advance_to_current_clock_is_free() {
        let mut e = Engine::new_ring(
            50,
            params(0.3),
            5,
            0,
            RingInit::Bernoulli { magnetization: 0.0 },
        )
        .unwrap();
        let before = e.rng().to_bytes();
        assert_eq!(e.advance_until(0.0), 0);
        assert_eq!(e.rng().to_bytes(), before);
    }

    #[test]
    fn ring_conserves_magnetization() {
        let mut e = Engine::new_ring(
            257,
            params(0.125),
            9,
            2,
            RingInit::Bernoulli { magnetization: 0.2 },
        )
        .unwrap();
        let m0 = e.lane_magnetizations();
        e.advance_until(50.0);
        assert_eq!(e.lane_magnetizations(), m0);
        assert_eq!(e.lattice().recount_magnetizations(), m0);
        assert_eq!(e.clock(), 50.0);
    }

    #[test]
    fn halfline_bookkeeping_matches_recount() {
        let mut e = Engine::new_halfline(300, params(0.125), 4, 0, 0.5).unwrap();
        e.advance_until(20.0);
        assert_eq!(
            e.lane_magnetizations(),
            e.lattice().recount_magnetizations()
        );
    }

    #[test]
    fn fast_mode_event_count_is_deterministic() {
        let mut e = Engine::new_halfline(100, params(0.5), 4, 0, 0.5)
            .unwrap()
            .with_mode(TimeMode::Fast);
        assert_eq!(e.advance_until(2.5), 250);
        assert_eq!(e.advance_until(3.0), 50);
    }

    #[test]
    fn all_equal_ring_carries_no_current() {
        let mut e = Engine::new_ring(
            64,
            params(0.5),
            1,
            0,
            RingInit::Bernoulli { magnetization: 1.0 },
        )
        .unwrap();
        let c = e.measure_current(10, 0.0, 100.0).unwrap();
        assert!(c.counts.iter().all(|&x| x == 0));
    }

    #[test]
    fn current_preconditions() {
        let mut e = Engine::new_halfline(64, params(0.5), 1, 0, 0.5).unwrap();
        assert!(e.measure_current(0, 0.0, 1.0).is_err());
        let mut r = Engine::new_ring(
            64,
            params(0.5),
            1,
            0,
            RingInit::Bernoulli { magnetization: 0.0 },
        )
        .unwrap();
        assert!(r.measure_current(64, 0.0, 1.0).is_err());
        r.advance_until(2.0);
        assert!(r.measure_current(0, 1.0, 3.0).is_err());
    }

    #[test]
    fn current_balances_segment_magnetization() {
        // inflow across (b0, b0+1) minus outflow across (b1, b1+1) equals
        // the change of magnetization on sites b0+1..=b1
        let mut a = Engine::new_ring(
            200,
            params(0.125),
            12,
            0,
            RingInit::Bernoulli { magnetization: 0.0 },
        )
        .unwrap();
        let mut b = a.clone();
        let before = a.lattice().segment_magnetizations(11, 71);
        let ca = a.measure_current(10, 0.0, 30.0).unwrap();
        let cb = b.measure_current(70, 0.0, 30.0).unwrap();
        assert_eq!(a.lattice().words(), b.lattice().words());
        let after = a.lattice().segment_magnetizations(11, 71);
        for lane in 0..LANES {
            assert_eq!(
                ca.counts[lane] - cb.counts[lane],
                after[lane] - before[lane],
                "lane {lane}"
            );
        }
    }
}
