use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::rescale::Rescaling;
use crate::error::{Error, Result};

/// Default bin width for rescaled densities.
pub const RESCALED_BIN_WIDTH: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityRow {
    pub center: f64,
    pub lo: f64,
    pub hi: f64,
    /// Sample mass in the bin (fractional after overlap splitting).
    pub mass: f64,
    pub density: f64,
}

fn rows_from_bins(bins: &BTreeMap<i64, f64>, width: f64, total: f64) -> Vec<DensityRow> {
    let (Some((&first, _)), Some((&last, _))) = (bins.first_key_value(), bins.last_key_value())
    else {
        return Vec::new();
    };
    (first..=last)
        .map(|k| {
            let mass = bins.get(&k).copied().unwrap_or(0.0);
            let lo = k as f64 * width;
            DensityRow {
                center: lo + 0.5 * width,
                lo,
                hi: lo + width,
                mass,
                density: mass / (total * width),
            }
        })
        .collect()
}

/// Histogram normalised to unit integral with bins `[k w, (k+1) w)`.
pub fn binned_density(samples: &[f64], bin_width: f64) -> Result<Vec<DensityRow>> {
    if !(bin_width > 0.0) {
        return Err(Error::Domain(format!(
            "bin width must be positive, got {bin_width}"
        )));
    }
    if samples.is_empty() {
        return Err(Error::InsufficientData("no samples".into()));
    }
    let mut bins = BTreeMap::new();
    for &x in samples {
        if !x.is_finite() {
            return Err(Error::Domain(format!("non-finite sample {x}")));
        }
        *bins.entry((x / bin_width).floor() as i64).or_insert(0.0) += 1.0;
    }
    Ok(rows_from_bins(&bins, bin_width, samples.len() as f64))
}

/// Counts of integer magnetizations. Magnetizations of a fixed window
/// share the parity of its size, so each value stands for a raw bin of
/// width 2.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RawHistogram {
    counts: BTreeMap<i64, u64>,
    total: u64,
}

impl RawHistogram {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn push(&mut self, m: i64) {
        *self.counts.entry(m).or_insert(0) += 1;
        self.total += 1;
    }

    pub fn merge(&mut self, other: &RawHistogram) {
        for (&m, &c) in &other.counts {
            *self.counts.entry(m).or_insert(0) += c;
        }
        self.total += other.total;
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn counts(&self) -> &BTreeMap<i64, u64> {
        &self.counts
    }

    /// Raw density with bins `[M − 1, M + 1)`.
    pub fn density(&self) -> Result<Vec<DensityRow>> {
        if self.total == 0 {
            return Err(Error::InsufficientData("empty histogram".into()));
        }
        let t = self.total as f64;
        Ok(self
            .counts
            .iter()
            .map(|(&m, &c)| DensityRow {
                center: m as f64,
                lo: m as f64 - 1.0,
                hi: m as f64 + 1.0,
                mass: c as f64,
                density: c as f64 / (2.0 * t),
            })
            .collect())
    }

    /// Density of the rescaled variable on bins of width `bin_width`. Each
    /// raw bin is mapped to an interval of length `2 / scale` and its count
    /// is shared among the rescaled bins in proportion to overlap.
    pub fn rescaled_density(&self, r: &Rescaling, bin_width: f64) -> Result<Vec<DensityRow>> {
        if !(bin_width > 0.0) {
            return Err(Error::Domain(format!(
                "bin width must be positive, got {bin_width}"
            )));
        }
        if self.total == 0 {
            return Err(Error::InsufficientData("empty histogram".into()));
        }
        let mut bins: BTreeMap<i64, f64> = BTreeMap::new();
        for (&m, &c) in &self.counts {
            let a = r.height(m as f64 - 1.0);
            let b = r.height(m as f64 + 1.0);
            let len = b - a;
            let mut k = (a / bin_width).floor() as i64;
            loop {
                let lo = (k as f64 * bin_width).max(a);
                let hi = ((k + 1) as f64 * bin_width).min(b);
                if hi > lo {
                    *bins.entry(k).or_insert(0.0) += c as f64 * (hi - lo) / len;
                }
                if (k + 1) as f64 * bin_width >= b {
                    break;
                }
                k += 1;
            }
        }
        Ok(rows_from_bins(&bins, bin_width, self.total as f64))
    }
}
