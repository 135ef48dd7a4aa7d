use serde::{Deserialize, Serialize};

use super::{SpinLattice, Topology, LANES};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRow {
    pub lag: usize,
    pub value: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
struct LagSums {
    product: i64,
    left: i64,
    right: i64,
    count: i64,
}

impl LagSums {
    fn add(&mut self, o: &LagSums) {
        self.product += o.product;
        self.left += o.left;
        self.right += o.right;
        self.count += o.count;
    }

    fn connected(&self) -> f64 {
        let n = self.count as f64;
        self.product as f64 / n - (self.left as f64 / n) * (self.right as f64 / n)
    }
}

/// Streaming estimate of `⟨σ_i σ_{i+j}⟩ − ⟨σ_i⟩⟨σ_{i+j}⟩` over a window,
/// pooled over positions and lanes. Each call to [`sample`](Self::sample)
/// is one batch for the jackknife error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoPointCorrelation {
    window_start: usize,
    window_len: usize,
    max_lag: usize,
    batches: Vec<Vec<LagSums>>,
}

impl TwoPointCorrelation {
    /// On a half-line the window plus `max_lag` must fit in the lattice; on
    /// a ring positions wrap.
    pub fn new(
        lattice: &SpinLattice,
        window_start: usize,
        window_len: usize,
        max_lag: usize,
    ) -> Result<Self> {
        let size = lattice.size();
        let fits = match lattice.topology() {
            Topology::HalfLine => window_start + window_len + max_lag <= size,
            Topology::Ring => window_start < size && window_len <= size && max_lag < size,
        };
        if window_len == 0 || max_lag == 0 || !fits {
            return Err(Error::Domain(format!(
                "window {window_start}+{window_len} with lags up to {max_lag} does not fit {size} sites"
            )));
        }
        Ok(Self {
            window_start,
            window_len,
            max_lag,
            batches: Vec::new(),
        })
    }

    pub fn batches(&self) -> usize {
        self.batches.len()
    }

    /// Append the batches of another estimator over the same window.
    pub fn merge(&mut self, other: &Self) -> Result<()> {
        if (self.window_start, self.window_len, self.max_lag)
            != (other.window_start, other.window_len, other.max_lag)
        {
            return Err(Error::Domain("correlation windows differ".into()));
        }
        self.batches.extend_from_slice(&other.batches);
        Ok(())
    }

    pub fn sample(&mut self, lattice: &SpinLattice) {
        let words = lattice.words();
        let size = words.len();
        let lanes = LANES as i64;
        let spin_sum = |w: u64| lanes - 2 * w.count_ones() as i64;
        let batch = (1..=self.max_lag)
            .map(|lag| {
                let mut s = LagSums::default();
                for k in 0..self.window_len {
                    let i = (self.window_start + k) % size;
                    let j = (i + lag) % size;
                    let (a, b) = (words[i], words[j]);
                    s.product += spin_sum(a ^ b);
                    s.left += spin_sum(a);
                    s.right += spin_sum(b);
                }
                s.count = self.window_len as i64 * lanes;
                s
            })
            .collect();
        self.batches.push(batch);
    }

    /// One row per lag. Errors come from a delete-one-group jackknife over
    /// up to 64 contiguous groups of batches.
    pub fn rows(&self) -> Result<Vec<CorrelationRow>> {
        if self.batches.len() < 2 {
            return Err(Error::InsufficientData("need at least two samples".into()));
        }
        let groups = self.batches.len().min(64);
        let per = self.batches.len() / groups;
        let mut grouped = vec![vec![LagSums::default(); self.max_lag]; groups];
        for (b, batch) in self.batches.iter().enumerate() {
            let g = (b / per).min(groups - 1);
            for (acc, s) in grouped[g].iter_mut().zip(batch) {
                acc.add(s);
            }
        }
        let rows = (0..self.max_lag)
            .map(|l| {
                let mut total = LagSums::default();
                for g in &grouped {
                    total.add(&g[l]);
                }
                let value = total.connected();
                let leave: Vec<f64> = grouped
                    .iter()
                    .map(|g| {
                        let s = &g[l];
                        LagSums {
                            product: total.product - s.product,
                            left: total.left - s.left,
                            right: total.right - s.right,
                            count: total.count - s.count,
                        }
                        .connected()
                    })
                    .collect();
                let k = groups as f64;
                let mean = leave.iter().sum::<f64>() / k;
                let var = (k - 1.0) / k * leave.iter().map(|x| (x - mean).powi(2)).sum::<f64>();
                CorrelationRow {
                    lag: l + 1,
                    value,
                    stderr: var.sqrt(),
                }
            })
            .collect();
        Ok(rows)
    }
}
