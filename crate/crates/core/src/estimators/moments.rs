use std::ops::{AddAssign, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum number of batches for error bars.
pub const MIN_BATCHES: usize = 16;

/// A sample type with an accumulator for its first four power sums.
/// Integers use exact `i128` sums; floats use `f64`.
pub trait MomentSample: Copy + std::fmt::Debug + PartialEq {
    type Sum: Copy + Default + AddAssign + Sub<Output = Self::Sum> + PartialEq + std::fmt::Debug;
    fn powers(self, center: Self) -> [Self::Sum; 4];
    fn sum_to_f64(s: Self::Sum) -> f64;
    fn to_f64(self) -> f64;
}

impl MomentSample for i64 {
    type Sum = i128;
    #[inline]
    fn powers(self, center: i64) -> [i128; 4] {
        let x = (self - center) as i128;
        let x2 = x * x;
        [x, x2, x2 * x, x2 * x2]
    }
    fn sum_to_f64(s: i128) -> f64 {
        s as f64
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl MomentSample for f64 {
    type Sum = f64;
    #[inline]
    fn powers(self, center: f64) -> [f64; 4] {
        let x = self - center;
        let x2 = x * x;
        [x, x2, x2 * x, x2 * x2]
    }
    fn sum_to_f64(s: f64) -> f64 {
        s
    }
    fn to_f64(self) -> f64 {
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerSums<S> {
    pub count: u64,
    pub sums: [S; 4],
}

impl<S: Copy + Default> Default for PowerSums<S> {
    fn default() -> Self {
        Self {
            count: 0,
            sums: [S::default(); 4],
        }
    }
}

impl<S: Copy + AddAssign + Sub<Output = S>> PowerSums<S> {
    fn add(&mut self, o: &Self) {
        self.count += o.count;
        for (a, b) in self.sums.iter_mut().zip(o.sums) {
            *a += b;
        }
    }

    fn minus(&self, o: &Self) -> Self {
        let mut sums = self.sums;
        for (a, b) in sums.iter_mut().zip(o.sums) {
            *a = *a - b;
        }
        Self {
            count: self.count - o.count,
            sums,
        }
    }
}

/// Mean, variance, skewness and plain kurtosis `μ₄/μ₂²`. Skewness and
/// kurtosis are `None` when the variance vanishes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CumulantSet {
    pub mean: f64,
    pub variance: f64,
    pub skewness: Option<f64>,
    pub kurtosis: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CumulantErrors {
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub kurtosis: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cumulants {
    pub count: u64,
    pub batches: usize,
    pub values: CumulantSet,
    /// Delete-one-batch jackknife errors, present with at least
    /// [`MIN_BATCHES`] batches.
    pub errors: Option<CumulantErrors>,
}

impl Cumulants {
    /// Statistics of `(x − shift) / scale`.
    pub fn affine(&self, shift: f64, scale: f64) -> Cumulants {
        let s2 = scale * scale;
        Cumulants {
            count: self.count,
            batches: self.batches,
            values: CumulantSet {
                mean: (self.values.mean - shift) / scale,
                variance: self.values.variance / s2,
                skewness: self.values.skewness.map(|v| v * scale.signum()),
                kurtosis: self.values.kurtosis,
            },
            errors: self.errors.map(|e| CumulantErrors {
                mean: e.mean / scale.abs(),
                variance: e.variance / s2,
                ..e
            }),
        }
    }
}

fn cumulants_of<T: MomentSample>(p: &PowerSums<T::Sum>, center: f64) -> CumulantSet {
    let n = p.count as f64;
    let [s1, s2, s3, s4] = p.sums.map(|s| T::sum_to_f64(s) / n);
    let m = s1;
    let mu2 = (s2 - m * m).max(0.0);
    let mu3 = s3 - 3.0 * m * s2 + 2.0 * m * m * m;
    let mu4 = s4 - 4.0 * m * s3 + 6.0 * m * m * s2 - 3.0 * m.powi(4);
    let (skewness, kurtosis) = if mu2 > 0.0 {
        (Some(mu3 / mu2.powf(1.5)), Some(mu4 / (mu2 * mu2)))
    } else {
        (None, None)
    };
    CumulantSet {
        mean: center + m,
        variance: mu2,
        skewness,
        kurtosis,
    }
}

/// Streaming first four moments with batch partial sums.
///
/// Samples are shifted by a fixed `center` before being raised to powers,
/// which keeps integer sums small and float sums well conditioned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Serialize, T::Sum: Serialize",
    deserialize = "T: Deserialize<'de>, T::Sum: Deserialize<'de>"
))]
pub struct MomentAccumulator<T: MomentSample = i64> {
    center: T,
    batches: Vec<PowerSums<T::Sum>>,
    open: PowerSums<T::Sum>,
}

impl<T: MomentSample> MomentAccumulator<T> {
    pub fn new(center: T) -> Self {
        Self {
            center,
            batches: Vec::new(),
            open: PowerSums::default(),
        }
    }

    pub fn center(&self) -> T {
        self.center
    }

    #[inline]
    pub fn push(&mut self, x: T) {
        let p = x.powers(self.center);
        self.open.count += 1;
        for (a, b) in self.open.sums.iter_mut().zip(p) {
            *a += b;
        }
    }

    pub fn extend<I: IntoIterator<Item = T>>(&mut self, xs: I) {
        for x in xs {
            self.push(x);
        }
    }

    /// Close the current batch. Empty batches are dropped.
    pub fn end_batch(&mut self) {
        if self.open.count > 0 {
            self.batches.push(std::mem::take(&mut self.open));
        }
    }

    /// Closed batches plus the open one if non-empty.
    pub fn batch_count(&self) -> usize {
        self.batches.len() + usize::from(self.open.count > 0)
    }

    pub fn count(&self) -> u64 {
        self.batches.iter().map(|b| b.count).sum::<u64>() + self.open.count
    }

    /// Append the batches of `other`, which must share the same center.
    pub fn merge(&mut self, other: &Self) -> Result<()> {
        if other.center.to_f64() != self.center.to_f64() {
            return Err(Error::Config(
                "cannot merge accumulators with different centers".into(),
            ));
        }
        self.end_batch();
        self.batches.extend(other.batches.iter().copied());
        if other.open.count > 0 {
            self.batches.push(other.open);
        }
        Ok(())
    }

    fn all_batches(&self) -> Vec<PowerSums<T::Sum>> {
        let mut out = self.batches.clone();
        if self.open.count > 0 {
            out.push(self.open);
        }
        out
    }

    pub fn cumulants(&self) -> Result<Cumulants> {
        let batches = self.all_batches();
        let mut total = PowerSums::<T::Sum>::default();
        for b in &batches {
            total.add(b);
        }
        if total.count < 2 {
            return Err(Error::InsufficientData(format!("{} samples", total.count)));
        }
        let c = self.center.to_f64();
        let values = cumulants_of::<T>(&total, c);
        let errors = if batches.len() >= MIN_BATCHES && values.skewness.is_some() {
            let k = batches.len() as f64;
            let leave: Vec<CumulantSet> = batches
                .iter()
                .map(|b| cumulants_of::<T>(&total.minus(b), c))
                .collect();
            let jack = |f: &dyn Fn(&CumulantSet) -> f64| {
                let xs: Vec<f64> = leave.iter().map(f).collect();
                let mean = xs.iter().sum::<f64>() / k;
                ((k - 1.0) / k * xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>()).sqrt()
            };
            Some(CumulantErrors {
                mean: jack(&|s| s.mean),
                variance: jack(&|s| s.variance),
                skewness: jack(&|s| s.skewness.unwrap_or(f64::NAN)),
                kurtosis: jack(&|s| s.kurtosis.unwrap_or(f64::NAN)),
            })
        } else {
            None
        };
        Ok(Cumulants {
            count: total.count,
            batches: batches.len(),
            values,
            errors,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn constant_samples_flag_shape() {
        let mut acc = MomentAccumulator::new(0i64);
        acc.extend([7i64; 100]);
        let c = acc.cumulants().unwrap();
        assert_eq!(c.values.mean, 7.0);
        assert_eq!(c.values.variance, 0.0);
        assert!(c.values.skewness.is_none() && c.values.kurtosis.is_none());
    }

    #[test]
    fn too_few_samples() {
        let mut acc = MomentAccumulator::new(0i64);
        assert!(acc.cumulants().is_err());
        acc.push(1);
        assert!(acc.cumulants().is_err());
    }

    #[test]
    fn small_exact_example() {
        // {0, 0, 0, 4}: mean 1, μ₂ = 3, μ₃ = 6, μ₄ = 21
        let mut acc = MomentAccumulator::new(0i64);
        acc.extend([0, 0, 0, 4]);
        let v = acc.cumulants().unwrap().values;
        assert_eq!(v.mean, 1.0);
        assert_eq!(v.variance, 3.0);
        assert!((v.skewness.unwrap() - 6.0 / 3f64.powf(1.5)).abs() < 1e-15);
        assert!((v.kurtosis.unwrap() - 21.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn gaussian_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut acc = MomentAccumulator::new(0.0f64);
        for _ in 0..64 {
            for _ in 0..15_625 {
                let x: f64 = StandardNormal.sample(&mut rng);
                acc.push(x);
            }
            acc.end_batch();
        }
        let c = acc.cumulants().unwrap();
        let e = c.errors.unwrap();
        let v = c.values;
        assert!(v.mean.abs() < 4.0 * e.mean, "{v:?} {e:?}");
        assert!((v.variance - 1.0).abs() < 4.0 * e.variance);
        assert!(v.skewness.unwrap().abs() < 4.0 * e.skewness);
        assert!((v.kurtosis.unwrap() - 3.0).abs() < 4.0 * e.kurtosis);
        // jackknife errors near the asymptotic 1/√N, √(2/N), √(6/N), √(24/N)
        let n = 1e6f64;
        assert!((e.mean * n.sqrt() - 1.0).abs() < 0.3);
        assert!((e.kurtosis * (n / 24.0).sqrt() - 1.0).abs() < 0.4);
    }

    #[test]
    fn merge_order_does_not_matter() {
        let mk = |seed: i64| {
            let mut a = MomentAccumulator::new(3i64);
            for k in 0..1000 {
                a.push((k * 7919 + seed * 31) % 97 - 40);
            }
            a.end_batch();
            a
        };
        let (a, b, c) = (mk(1), mk(2), mk(3));
        let mut x = a.clone();
        x.merge(&b).unwrap();
        x.merge(&c).unwrap();
        let mut y = c.clone();
        y.merge(&a).unwrap();
        y.merge(&b).unwrap();
        assert_eq!(x.cumulants().unwrap().values, y.cumulants().unwrap().values);
        assert!(x.merge(&MomentAccumulator::new(0)).is_err());
    }

    #[test]
    fn affine_map() {
        let mut acc = MomentAccumulator::new(0i64);
        for k in 0..2000i64 {
            acc.push((k * k) % 101);
            if k % 100 == 99 {
                acc.end_batch();
            }
        }
        let raw = acc.cumulants().unwrap();
        let (shift, scale) = (12.5, 3.25);
        let mut direct = MomentAccumulator::new(0.0f64);
        for k in 0..2000i64 {
            direct.push((((k * k) % 101) as f64 - shift) / scale);
            if k % 100 == 99 {
                direct.end_batch();
            }
        }
        let a = raw.affine(shift, scale);
        let d = direct.cumulants().unwrap();
        let close = |x: f64, y: f64| (x - y).abs() <= 1e-12 * y.abs().max(1.0);
        assert!(close(a.values.mean, d.values.mean));
        assert!(close(a.values.variance, d.values.variance));
        assert!(close(
            a.values.skewness.unwrap(),
            d.values.skewness.unwrap()
        ));
        assert!(close(
            a.values.kurtosis.unwrap(),
            d.values.kurtosis.unwrap()
        ));
        let (ea, ed) = (a.errors.unwrap(), d.errors.unwrap());
        assert!(close(ea.mean, ed.mean) && close(ea.variance, ed.variance));
    }
}
