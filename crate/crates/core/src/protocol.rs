//! Sampling schedules: the anchored-interface run on a half-line window
//! and the ring checks of the bulk dynamics.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coefficients::{kpz_coefficients, spin_current, stationary_magnetization, ModelParams};
use crate::error::{Error, Result};
use crate::estimators::{
    default_max_lag, MomentAccumulator, RawHistogram, StructureFunctionAccumulator,
};
use crate::lattice::{Engine, RingInit, TimeMode, TwoPointCorrelation, LANES};

/// Schedule of one interface run, identical for every word.
///
/// After `warmup` time units, the lane magnetizations are recorded every
/// `sample_period` units (`samples` times). On the same trajectory,
/// blocks of `max_lag + 1` consecutive unit-time values start every
/// `block_spacing` units and feed the structure function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterfacePlan {
    pub n: usize,
    pub warmup: u64,
    pub sample_period: u64,
    pub samples: u64,
    pub max_lag: usize,
    pub block_spacing: u64,
    /// Batches per word for the error estimates.
    pub batches: usize,
    pub record_samples: bool,
    /// Probability of a − spin in the initial state.
    pub init_density: f64,
}

impl InterfacePlan {
    /// The published schedule: warmup `n²/2`, one sample per `n` time
    /// units, blocks of length `⌈2 n^{2/3}⌉` every `n + T` units.
    pub fn published(n: usize, samples: u64) -> Self {
        let t = default_max_lag(n);
        Self {
            n,
            warmup: (n as u64 * n as u64) / 2,
            sample_period: n as u64,
            samples,
            max_lag: t,
            block_spacing: (n + t) as u64,
            batches: 16,
            record_samples: false,
            init_density: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Config(format!(
                "window size must be >= 2, got {}",
                self.n
            )));
        }
        if self.sample_period == 0 || self.samples < 2 {
            return Err(Error::Config(
                "need a positive sample period and at least 2 samples".into(),
            ));
        }
        if self.block_spacing < self.max_lag as u64 + 1 {
            return Err(Error::Config(format!(
                "block spacing {} shorter than block length {}",
                self.block_spacing,
                self.max_lag + 1
            )));
        }
        if !(0.0..=1.0).contains(&self.init_density) {
            return Err(Error::Config(format!(
                "init density must lie in [0, 1], got {}",
                self.init_density
            )));
        }
        if self.batches == 0 {
            return Err(Error::Config("need at least one batch per word".into()));
        }
        Ok(())
    }

    /// Time of the last sample.
    pub fn end(&self) -> u64 {
        self.warmup + (self.samples - 1) * self.sample_period
    }

    /// Number of complete blocks that fit before [`end`](Self::end).
    pub fn blocks(&self) -> u64 {
        let span = self.end() - self.warmup;
        if span < self.max_lag as u64 {
            0
        } else {
            (span - self.max_lag as u64) / self.block_spacing + 1
        }
    }

    fn sample_time(&self, k: u64) -> u64 {
        self.warmup + k * self.sample_period
    }

    fn block_start(&self, k: u64) -> u64 {
        self.warmup + k * self.block_spacing
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub time: u64,
    /// Replica index `64 · stream + lane`.
    pub lane: u64,
    pub magnetization: i64,
}

/// Per-word accumulated observables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterfaceData {
    pub moments: MomentAccumulator<i64>,
    pub histogram: RawHistogram,
    pub structure: StructureFunctionAccumulator,
    pub samples: Vec<SampleRecord>,
}

impl InterfaceData {
    fn new(plan: &InterfacePlan, center: i64) -> Self {
        Self {
            moments: MomentAccumulator::new(center),
            histogram: RawHistogram::new(),
            structure: StructureFunctionAccumulator::new(plan.max_lag),
            samples: Vec::new(),
        }
    }

    pub fn merge(&mut self, other: &InterfaceData) -> Result<()> {
        self.moments.merge(&other.moments)?;
        self.histogram.merge(&other.histogram);
        self.structure.merge(&other.structure)?;
        self.samples.extend_from_slice(&other.samples);
        Ok(())
    }
}

/// One word (64 lanes) of an interface run. It can be stopped between
/// observations, snapshotted and resumed.
#[derive(Debug, Clone)]
pub struct WordRun {
    plan: InterfacePlan,
    engine: Engine,
    stream: u64,
    samples_taken: u64,
    blocks_done: u64,
    block: Vec<Vec<i64>>,
    data: InterfaceData,
}

/// Serializable form of a [`WordRun`]; the engine is stored as its
/// checkpoint blob.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordSnapshot {
    pub plan: InterfacePlan,
    pub lambda: f64,
    pub mode: TimeMode,
    pub stream: u64,
    pub engine: Vec<u8>,
    pub samples_taken: u64,
    pub blocks_done: u64,
    pub block: Vec<Vec<i64>>,
    pub data: InterfaceData,
}

impl WordRun {
    pub fn new(
        plan: InterfacePlan,
        params: ModelParams,
        seed: u64,
        stream: u64,
        mode: TimeMode,
    ) -> Result<Self> {
        plan.validate()?;
        let engine =
            Engine::new_halfline(plan.n, params, seed, stream, plan.init_density)?.with_mode(mode);
        let center = (stationary_magnetization(params) * plan.n as f64).round() as i64;
        Ok(Self {
            plan,
            engine,
            stream,
            samples_taken: 0,
            blocks_done: 0,
            block: (0..LANES)
                .map(|_| Vec::with_capacity(plan.max_lag + 1))
                .collect(),
            data: InterfaceData::new(&plan, center),
        })
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    pub fn clock(&self) -> f64 {
        self.engine.clock()
    }

    pub fn is_done(&self) -> bool {
        self.samples_taken >= self.plan.samples && self.blocks_done >= self.plan.blocks()
    }

    pub fn data(&self) -> &InterfaceData {
        &self.data
    }

    pub fn into_data(self) -> InterfaceData {
        self.data
    }

    fn next_time(&self) -> Option<u64> {
        let sample = (self.samples_taken < self.plan.samples)
            .then(|| self.plan.sample_time(self.samples_taken));
        let block = (self.blocks_done < self.plan.blocks())
            .then(|| self.plan.block_start(self.blocks_done) + self.block[0].len() as u64);
        match (sample, block) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }

    /// Advance through every observation time up to `limit`. The clock
    /// stops on the last observation so that a resumed run draws the same
    /// random numbers as an uninterrupted one.
    pub fn run_until(&mut self, limit: f64) {
        let per_sample_batch = self.plan.samples.div_ceil(self.plan.batches as u64);
        let per_block_batch = self.plan.blocks().div_ceil(self.plan.batches as u64).max(1);
        // warmup stops on multiples of the sample period so that long
        // warmups can be interrupted too
        while self.engine.clock() < self.plan.warmup as f64 {
            let step = self.plan.sample_period as f64;
            let w =
                (((self.engine.clock() / step).floor() + 1.0) * step).min(self.plan.warmup as f64);
            if w > limit {
                return;
            }
            self.engine.advance_until(w);
        }
        while let Some(t) = self.next_time() {
            if t as f64 > limit {
                break;
            }
            self.engine.advance_until(t as f64);
            let m = self.engine.lane_magnetizations();
            if self.samples_taken < self.plan.samples
                && t == self.plan.sample_time(self.samples_taken)
            {
                for (lane, &v) in m.iter().enumerate() {
                    self.data.moments.push(v);
                    self.data.histogram.push(v);
                    if self.plan.record_samples {
                        self.data.samples.push(SampleRecord {
                            time: t,
                            lane: self.stream * LANES as u64 + lane as u64,
                            magnetization: v,
                        });
                    }
                }
                self.samples_taken += 1;
                if self.samples_taken % per_sample_batch == 0 {
                    self.data.moments.end_batch();
                }
            }
            if self.blocks_done < self.plan.blocks()
                && t == self.plan.block_start(self.blocks_done) + self.block[0].len() as u64
            {
                for (series, &v) in self.block.iter_mut().zip(&m) {
                    series.push(v);
                }
                if self.block[0].len() == self.plan.max_lag + 1 {
                    for series in &mut self.block {
                        self.data
                            .structure
                            .push_series_block(series)
                            .expect("block length matches the plan");
                        series.clear();
                    }
                    self.blocks_done += 1;
                    if self.blocks_done % per_block_batch == 0 {
                        self.data.structure.end_batch();
                    }
                }
            }
        }
        if self.is_done() {
            self.data.moments.end_batch();
            self.data.structure.end_batch();
        }
    }

    pub fn run_to_completion(&mut self) {
        self.run_until(f64::INFINITY);
    }

    pub fn snapshot(&self) -> WordSnapshot {
        WordSnapshot {
            plan: self.plan,
            lambda: self.engine.params().lambda(),
            mode: self.engine.mode(),
            stream: self.stream,
            engine: self.engine.checkpoint(),
            samples_taken: self.samples_taken,
            blocks_done: self.blocks_done,
            block: self.block.clone(),
            data: self.data.clone(),
        }
    }

    pub fn from_snapshot(s: WordSnapshot) -> Result<Self> {
        let params = ModelParams::new(s.lambda)?;
        let engine = Engine::restore(&s.engine, params, s.mode)?;
        if s.block.len() != LANES {
            return Err(Error::Format {
                version: 1,
                reason: "block buffer must have 64 lanes".into(),
            });
        }
        Ok(Self {
            plan: s.plan,
            engine,
            stream: s.stream,
            samples_taken: s.samples_taken,
            blocks_done: s.blocks_done,
            block: s.block,
            data: s.data,
        })
    }
}

/// Run `words` independent words (streams `0..words`) in parallel and merge
/// their observables in stream order.
pub fn run_interface(
    plan: InterfacePlan,
    params: ModelParams,
    seed: u64,
    words: usize,
    mode: TimeMode,
) -> Result<InterfaceData> {
    if words == 0 {
        return Err(Error::Config("need at least one word".into()));
    }
    let runs = (0..words as u64)
        .map(|s| WordRun::new(plan, params, seed, s, mode))
        .collect::<Result<Vec<_>>>()?;
    finish_words(runs)
}

/// Complete and merge a set of (possibly partially run) words.
pub fn finish_words(mut runs: Vec<WordRun>) -> Result<InterfaceData> {
    runs.par_iter_mut().for_each(|r| r.run_to_completion());
    let mut it = runs.into_iter();
    let mut data = it
        .next()
        .ok_or_else(|| Error::Config("no words to merge".into()))?
        .into_data();
    for r in it {
        data.merge(&r.into_data())?;
    }
    Ok(data)
}

/// Settings of the ring checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RingCheckPlan {
    pub size: usize,
    /// Duration of each current measurement.
    pub current_time: f64,
    /// Words per current measurement.
    pub current_words: usize,
    /// Time batches per word.
    pub time_batches: usize,
    /// Lags for the two-point correlations.
    pub max_lag: usize,
    /// Horizon of the integrated-current variance.
    pub variance_time: f64,
    pub variance_words: usize,
    /// Equally spaced bonds pooled in the variance estimate.
    pub variance_bonds: usize,
}

impl Default for RingCheckPlan {
    fn default() -> Self {
        Self {
            size: 4096,
            current_time: 1e4,
            current_words: 4,
            time_batches: 10,
            max_lag: 4,
            variance_time: 1000.0,
            variance_words: 128,
            variance_bonds: 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

impl Estimate {
    /// Mean and standard error of equally weighted batch values.
    pub fn from_batches(xs: &[f64]) -> Self {
        let k = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / k;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
        Self {
            value: mean,
            stderr: (var / k).sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationEstimate {
    pub lag: usize,
    pub value: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RingCheckReport {
    pub lambda: f64,
    pub size: usize,
    /// Magnetization actually realised by the canonical initial state.
    pub mu_zero_realised: f64,
    pub mu_stationary_realised: f64,
    pub current_at_zero: Estimate,
    pub current_at_stationary: Estimate,
    pub correlations: Vec<CorrelationEstimate>,
    /// `Var(𝒥(t)) / t` at the variance horizon.
    pub variance_rate: Estimate,
    /// Predicted rate Ã.
    pub predicted_rate: f64,
}

fn canonical_minus(size: usize, mu: f64) -> usize {
    ((size as f64) * (1.0 - mu) / 2.0).round() as usize
}

/// Lane-averaged currents per time batch for each word, plus optional
/// correlations sampled at batch boundaries.
fn current_batches(
    plan: &RingCheckPlan,
    params: ModelParams,
    seed: u64,
    stream_base: u64,
    minus: usize,
    corr: bool,
) -> Result<(Vec<f64>, Option<TwoPointCorrelation>)> {
    let per_word = (0..plan.current_words as u64)
        .into_par_iter()
        .map(|w| -> Result<(Vec<f64>, Option<TwoPointCorrelation>)> {
            let mut e = Engine::new_ring(
                plan.size,
                params,
                seed,
                stream_base + w,
                RingInit::Canonical { minus },
            )?;
            let mut c = if corr {
                Some(TwoPointCorrelation::new(
                    e.lattice(),
                    0,
                    plan.size,
                    plan.max_lag,
                )?)
            } else {
                None
            };
            let dt = plan.current_time / plan.time_batches as f64;
            let bond = plan.size / 2;
            let mut rates = Vec::with_capacity(plan.time_batches);
            for b in 0..plan.time_batches {
                let t0 = b as f64 * dt;
                let cur = e.measure_current(bond, t0, t0 + dt)?;
                rates.push(cur.mean_rate());
                if let Some(c) = c.as_mut() {
                    c.sample(e.lattice());
                }
            }
            Ok((rates, c))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rates = Vec::new();
    let mut merged: Option<TwoPointCorrelation> = None;
    for (r, c) in per_word {
        rates.extend(r);
        if let Some(c) = c {
            match merged.as_mut() {
                Some(m) => m.merge(&c)?,
                None => merged = Some(c),
            }
        }
    }
    Ok((rates, merged))
}

/// Variance of the integrated current from Bernoulli(μ₀) initial states,
/// which are stationary. Each word contributes the pooled per-bond
/// variance of its lanes; the error is the spread over words.
fn variance_rate(
    plan: &RingCheckPlan,
    params: ModelParams,
    seed: u64,
    stream_base: u64,
) -> Result<Estimate> {
    let mu0 = stationary_magnetization(params);
    let bonds: Vec<usize> = (0..plan.variance_bonds)
        .map(|k| k * plan.size / plan.variance_bonds)
        .collect();
    let per_word = (0..plan.variance_words as u64)
        .into_par_iter()
        .map(|w| -> Result<Vec<Vec<i64>>> {
            let base = Engine::new_ring(
                plan.size,
                params,
                seed,
                stream_base + w,
                RingInit::Bernoulli { magnetization: mu0 },
            )?;
            // each bond is tallied on an identical copy of the trajectory
            bonds
                .iter()
                .map(|&b| {
                    let mut e = base.clone();
                    Ok(e.measure_current(b, 0.0, plan.variance_time)?.counts)
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;
    // second moments about the global mean, word by word
    let mut sum = 0.0;
    let mut count = 0.0;
    for word in &per_word {
        for counts in word {
            sum += counts.iter().sum::<i64>() as f64;
            count += counts.len() as f64;
        }
    }
    let mean = sum / count;
    let per_word_rate: Vec<f64> = per_word
        .iter()
        .map(|word| {
            let (mut s2, mut k) = (0.0, 0.0);
            for counts in word {
                for &c in counts {
                    s2 += (c as f64 - mean).powi(2);
                    k += 1.0;
                }
            }
            s2 / k / plan.variance_time
        })
        .collect();
    let mut est = Estimate::from_batches(&per_word_rate);
    // undo the 1/count bias of the pooled mean
    est.value *= count / (count - 1.0);
    Ok(est)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RingCurrent {
    pub mu_realised: f64,
    pub measured: Estimate,
    pub predicted: f64,
}

/// Current at the canonical magnetization closest to `mu`, compared with
/// the closed-form current at the realised magnetization.
pub fn ring_current(
    plan: &RingCheckPlan,
    params: ModelParams,
    seed: u64,
    mu: f64,
) -> Result<RingCurrent> {
    if !(-1.0..=1.0).contains(&mu) {
        return Err(Error::Config(format!(
            "magnetization must lie in [-1, 1], got {mu}"
        )));
    }
    if plan.size < 2
        || plan.current_words == 0
        || plan.time_batches < 2
        || !(plan.current_time > 0.0)
    {
        return Err(Error::Config(
            "ring current needs size >= 2, words >= 1, >= 2 batches and a positive time".into(),
        ));
    }
    let minus = canonical_minus(plan.size, mu);
    let mu_realised = 1.0 - 2.0 * minus as f64 / plan.size as f64;
    let (rates, _) = current_batches(plan, params, seed, 3 << 20, minus, false)?;
    Ok(RingCurrent {
        mu_realised,
        measured: Estimate::from_batches(&rates),
        predicted: spin_current(mu_realised, params)?,
    })
}

/// Currents at μ = 0 and μ = μ₀, spin correlations at μ₀, and the growth
/// rate of the integrated-current variance.
pub fn ring_check(plan: &RingCheckPlan, params: ModelParams, seed: u64) -> Result<RingCheckReport> {
    if plan.size < 2 || plan.current_words == 0 || plan.time_batches < 2 || plan.variance_words < 2
    {
        return Err(Error::Config(
            "ring check needs size >= 2, words >= 1 and >= 2 batches".into(),
        ));
    }
    if plan.variance_bonds == 0 || !(plan.current_time > 0.0 && plan.variance_time > 0.0) {
        return Err(Error::Config(
            "ring check needs positive times and at least one bond".into(),
        ));
    }
    let coeffs = kpz_coefficients(params);
    let minus_zero = canonical_minus(plan.size, 0.0);
    let minus_stat = canonical_minus(plan.size, coeffs.mu0);
    let realised = |minus: usize| 1.0 - 2.0 * minus as f64 / plan.size as f64;

    let (zero, _) = current_batches(plan, params, seed, 0, minus_zero, false)?;
    let (stat, corr) = current_batches(plan, params, seed, 1 << 20, minus_stat, true)?;
    let correlations = corr
        .expect("correlations were requested")
        .rows()?
        .into_iter()
        .map(|r| CorrelationEstimate {
            lag: r.lag,
            value: r.value,
            stderr: r.stderr,
        })
        .collect();
    let variance_rate = variance_rate(plan, params, seed, 2 << 20)?;
    Ok(RingCheckReport {
        lambda: params.lambda(),
        size: plan.size,
        mu_zero_realised: realised(minus_zero),
        mu_stationary_realised: realised(minus_stat),
        current_at_zero: Estimate::from_batches(&zero),
        current_at_stationary: Estimate::from_batches(&stat),
        correlations,
        variance_rate,
        predicted_rate: coeffs.a_t,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_plan() -> InterfacePlan {
        InterfacePlan {
            n: 64,
            warmup: 200,
            sample_period: 16,
            samples: 40,
            max_lag: default_max_lag(64),
            block_spacing: 64 + default_max_lag(64) as u64,
            batches: 4,
            record_samples: true,
            init_density: 0.5,
        }
    }

    #[test]
    fn published_schedule() {
        let p = InterfacePlan::published(10_000, 100);
        assert_eq!(p.warmup, 50_000_000);
        assert_eq!(p.sample_period, 10_000);
        assert_eq!(p.max_lag, 929);
        assert_eq!(p.block_spacing, 10_929);
    }

    #[test]
    fn counts_match_schedule() {
        let plan = small_plan();
        let p = ModelParams::new(0.125).unwrap();
        let data = run_interface(plan, p, 3, 2, TimeMode::Exact).unwrap();
        assert_eq!(data.moments.count(), 2 * 40 * 64);
        assert_eq!(data.histogram.total(), 2 * 40 * 64);
        assert_eq!(data.samples.len(), 2 * 40 * 64);
        assert_eq!(data.structure.blocks(), 2 * 64 * plan.blocks());
        assert!(data.samples.iter().all(|s| (s.magnetization - 64) % 2 == 0));
    }

    #[test]
    fn resume_matches_uninterrupted_run() {
        let plan = small_plan();
        let p = ModelParams::new(0.125).unwrap();
        let mut a = WordRun::new(plan, p, 9, 1, TimeMode::Exact).unwrap();
        a.run_to_completion();
        let mut b = WordRun::new(plan, p, 9, 1, TimeMode::Exact).unwrap();
        b.run_until(351.5);
        let json = serde_json::to_string(&b.snapshot()).unwrap();
        let mut c = WordRun::from_snapshot(serde_json::from_str(&json).unwrap()).unwrap();
        c.run_to_completion();
        assert_eq!(a.data(), c.data());
    }

    #[test]
    fn plan_validation() {
        let mut p = small_plan();
        p.block_spacing = 3;
        assert!(p.validate().is_err());
        let mut p = small_plan();
        p.samples = 1;
        assert!(p.validate().is_err());
    }

    #[test]
    fn resume_during_warmup() {
        let plan = small_plan();
        let p = ModelParams::new(0.125).unwrap();
        let mut a = WordRun::new(plan, p, 4, 0, TimeMode::Exact).unwrap();
        a.run_to_completion();
        let mut b = WordRun::new(plan, p, 4, 0, TimeMode::Exact).unwrap();
        b.run_until(130.0);
        assert_eq!(b.clock(), 128.0);
        let mut c = WordRun::from_snapshot(b.snapshot()).unwrap();
        c.run_to_completion();
        assert_eq!(a.data(), c.data());
    }

    #[test]
    fn small_ring_current() {
        let plan = RingCheckPlan {
            size: 256,
            current_time: 400.0,
            current_words: 2,
            time_batches: 4,
            ..Default::default()
        };
        let p = ModelParams::new(0.125).unwrap();
        let r = ring_current(&plan, p, 1, 0.0).unwrap();
        assert_eq!(r.mu_realised, 0.0);
        assert!((r.measured.value - r.predicted).abs() < 0.05, "{r:?}");
        assert!(ring_current(&plan, p, 1, 1.5).is_err());
    }
}
