use serde::{Deserialize, Serialize};

use super::rescale::Rescaling;
use crate::error::{Error, Result};

/// Longest lag used by the interface protocol, `⌈2 n^{2/3}⌉`.
pub fn default_max_lag(n: usize) -> usize {
    (2.0 * (n as f64).powf(2.0 / 3.0)).ceil() as usize
}

/// Lags `⌈n^{2/3}⌉ ..= ⌊2 n^{2/3}⌋` over which the variance plateau is taken.
pub fn plateau_window(n: usize) -> (usize, usize) {
    let c = (n as f64).powf(2.0 / 3.0);
    (c.ceil() as usize, (2.0 * c).floor() as usize)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct LagTable {
    sum_sq: Vec<u64>,
    count: Vec<u64>,
}

impl LagTable {
    fn new(len: usize) -> Self {
        Self {
            sum_sq: vec![0; len],
            count: vec![0; len],
        }
    }

    fn is_empty(&self) -> bool {
        self.count.iter().all(|&c| c == 0)
    }

    fn add(&mut self, o: &LagTable) {
        for (a, b) in self.sum_sq.iter_mut().zip(&o.sum_sq) {
            *a += b;
        }
        for (a, b) in self.count.iter_mut().zip(&o.count) {
            *a += b;
        }
    }

    fn minus(&self, o: &LagTable) -> LagTable {
        LagTable {
            sum_sq: self
                .sum_sq
                .iter()
                .zip(&o.sum_sq)
                .map(|(a, b)| a - b)
                .collect(),
            count: self
                .count
                .iter()
                .zip(&o.count)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    fn s(&self, j: usize) -> f64 {
        self.sum_sq[j] as f64 / self.count[j] as f64
    }

    fn plateau(&self, lo: usize, hi: usize) -> f64 {
        (lo..=hi).map(|j| 0.5 * self.s(j)).sum::<f64>() / (hi - lo + 1) as f64
    }
}

/// Per-lag sums of squared increments `(M(i) − M(i+j))²`, kept exactly and
/// split into batches for jackknife errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureFunctionAccumulator {
    max_lag: usize,
    batches: Vec<LagTable>,
    open: LagTable,
    blocks: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructureRow {
    pub lag: usize,
    pub sum_sq: u64,
    pub count: u64,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlateauEstimate {
    pub value: f64,
    pub stderr: Option<f64>,
    pub lags: (usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceRow {
    pub t: f64,
    pub t_resc: f64,
    pub cov_resc: f64,
    pub stderr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceCurve {
    pub variance: PlateauEstimate,
    pub rows: Vec<CovarianceRow>,
}

impl StructureFunctionAccumulator {
    pub fn new(max_lag: usize) -> Self {
        Self {
            max_lag,
            batches: Vec::new(),
            open: LagTable::new(max_lag + 1),
            blocks: 0,
        }
    }

    /// Rebuild from per-batch `(sum_sq, count)` tables indexed by lag
    /// `0..=max_lag`, e.g. as read back from a CSV dump. The block count is
    /// recovered from the lag-0 counts.
    pub fn from_batch_tables(max_lag: usize, tables: Vec<(Vec<u64>, Vec<u64>)>) -> Result<Self> {
        let mut acc = Self::new(max_lag);
        for (sum_sq, count) in tables {
            if sum_sq.len() != max_lag + 1 || count.len() != max_lag + 1 {
                return Err(Error::Domain(format!(
                    "batch table must have {} lags",
                    max_lag + 1
                )));
            }
            acc.blocks += count[0] / (max_lag as u64 + 1);
            acc.batches.push(LagTable { sum_sq, count });
        }
        Ok(acc)
    }

    /// Closed and open batches as `(sum_sq, count)` tables.
    pub fn batch_tables(&self) -> Vec<(&[u64], &[u64])> {
        self.tables()
            .into_iter()
            .map(|t| (t.sum_sq.as_slice(), t.count.as_slice()))
            .collect()
    }

    pub fn max_lag(&self) -> usize {
        self.max_lag
    }

    pub fn blocks(&self) -> u64 {
        self.blocks
    }

    pub fn batch_count(&self) -> usize {
        self.batches.len() + usize::from(!self.open.is_empty())
    }

    /// Add all pairs `(series[i], series[i + j])` of one block, `j ≤ T`.
    pub fn push_series_block(&mut self, series: &[i64]) -> Result<()> {
        let t = self.max_lag;
        if series.len() != t + 1 {
            return Err(Error::Domain(format!(
                "block must have {} points, got {}",
                t + 1,
                series.len()
            )));
        }
        for j in 1..=t {
            let mut acc = 0u64;
            for (a, b) in series[..=t - j].iter().zip(&series[j..]) {
                let d = a.abs_diff(*b);
                acc += d * d;
            }
            self.open.sum_sq[j] += acc;
        }
        for j in 0..=t {
            self.open.count[j] += (t + 1 - j) as u64;
        }
        self.blocks += 1;
        Ok(())
    }

    pub fn end_batch(&mut self) {
        if !self.open.is_empty() {
            let fresh = LagTable::new(self.max_lag + 1);
            self.batches.push(std::mem::replace(&mut self.open, fresh));
        }
    }

    pub fn merge(&mut self, other: &Self) -> Result<()> {
        if other.max_lag != self.max_lag {
            return Err(Error::Config(
                "structure functions with different lag ranges".into(),
            ));
        }
        self.end_batch();
        self.batches.extend(other.batches.iter().cloned());
        if !other.open.is_empty() {
            self.batches.push(other.open.clone());
        }
        self.blocks += other.blocks;
        Ok(())
    }

    fn tables(&self) -> Vec<&LagTable> {
        let mut out: Vec<&LagTable> = self.batches.iter().collect();
        if !self.open.is_empty() {
            out.push(&self.open);
        }
        out
    }

    fn total(&self) -> LagTable {
        let mut total = LagTable::new(self.max_lag + 1);
        for b in self.tables() {
            total.add(b);
        }
        total
    }

    pub fn rows(&self) -> Vec<StructureRow> {
        let total = self.total();
        (0..=self.max_lag)
            .map(|j| StructureRow {
                lag: j,
                sum_sq: total.sum_sq[j],
                count: total.count[j],
                value: if total.count[j] > 0 {
                    total.s(j)
                } else {
                    f64::NAN
                },
            })
            .collect()
    }

    /// Jackknife standard error of `f` over batches, when there are at
    /// least [`MIN_BATCHES`](super::MIN_BATCHES) of them.
    fn jackknife(&self, total: &LagTable, f: impl Fn(&LagTable) -> f64) -> Option<f64> {
        let tables = self.tables();
        if tables.len() < super::MIN_BATCHES {
            return None;
        }
        let k = tables.len() as f64;
        let xs: Vec<f64> = tables.iter().map(|b| f(&total.minus(b))).collect();
        let mean = xs.iter().sum::<f64>() / k;
        Some(((k - 1.0) / k * xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>()).sqrt())
    }

    /// Mean of `S(j)/2` over the plateau window of a window of size `n`.
    pub fn plateau_variance(&self, n: usize) -> Result<PlateauEstimate> {
        let (lo, hi) = plateau_window(n);
        if hi > self.max_lag || lo > hi {
            return Err(Error::InsufficientData(format!(
                "plateau lags {lo}..={hi} exceed max lag {}",
                self.max_lag
            )));
        }
        if self.blocks == 0 {
            return Err(Error::InsufficientData("no blocks".into()));
        }
        let total = self.total();
        Ok(PlateauEstimate {
            value: total.plateau(lo, hi),
            stderr: self.jackknife(&total, |t| t.plateau(lo, hi)),
            lags: (lo, hi),
        })
    }

    /// `Cov(j) = Var − S(j)/2` with rescaled axes; `dt` is the time between
    /// consecutive series points.
    pub fn covariance_curve(&self, r: &Rescaling, dt: f64) -> Result<CovarianceCurve> {
        let variance = self.plateau_variance(r.n)?;
        let (lo, hi) = variance.lags;
        let total = self.total();
        let rows = (0..=self.max_lag)
            .map(|j| {
                let cov = |t: &LagTable| t.plateau(lo, hi) - 0.5 * t.s(j);
                CovarianceRow {
                    t: j as f64 * dt,
                    t_resc: r.time(j as f64 * dt),
                    cov_resc: r.covariance(cov(&total)),
                    stderr: self.jackknife(&total, cov).map(|e| r.covariance(e)),
                }
            })
            .collect();
        Ok(CovarianceCurve { variance, rows })
    }
}
