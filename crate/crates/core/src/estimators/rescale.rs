use serde::{Deserialize, Serialize};

use crate::coefficients::Coefficients;
use crate::error::Result;

/// The map `M ↦ (M − μ₀ n) / (Γ̃ n)^{1/3}` together with the matching time
/// map `t ↦ Ã t / (2 (Γ̃ n)^{2/3})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rescaling {
    pub n: usize,
    /// μ₀ n.
    pub center: f64,
    /// (Γ̃ n)^{1/3}.
    pub scale: f64,
    /// Ã.
    pub a_t: f64,
}

impl Rescaling {
    pub fn new(n: usize, coeffs: &Coefficients) -> Result<Self> {
        let scale = coeffs.height_scale(n as f64)?;
        Ok(Self {
            n,
            center: coeffs.mu0 * n as f64,
            scale,
            a_t: coeffs.a_t,
        })
    }

    #[inline]
    pub fn height(&self, m: f64) -> f64 {
        (m - self.center) / self.scale
    }

    #[inline]
    pub fn time(&self, t: f64) -> f64 {
        self.a_t * t / (2.0 * self.scale * self.scale)
    }

    /// Inverse of [`time`](Self::time).
    pub fn raw_time(&self, t_resc: f64) -> f64 {
        2.0 * self.scale * self.scale * t_resc / self.a_t
    }

    /// Covariances scale with the square of the height scale.
    pub fn covariance(&self, c: f64) -> f64 {
        c / (self.scale * self.scale)
    }
}

/// Rescaled value of a single magnetization sample.
pub fn rescale(m: i64, n: usize, coeffs: &Coefficients) -> Result<f64> {
    Ok(Rescaling::new(n, coeffs)?.height(m as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficients::{kpz_coefficients, ModelParams};
    use crate::error::Error;

    #[test]
    fn worked_example() {
        let c = kpz_coefficients(ModelParams::new(0.125).unwrap());
        let v = rescale(5000, 10_000, &c).unwrap();
        assert!((v - 11.513).abs() < 1e-3, "{v}");
    }

    #[test]
    fn centre_maps_to_zero() {
        // λ = 1/4: μ₀ = 1/3, so n = 3000 has an integral centre
        let c = kpz_coefficients(ModelParams::new(0.25).unwrap());
        assert!(rescale(1000, 3000, &c).unwrap().abs() < 1e-12);
    }

    #[test]
    fn symmetric_point_is_degenerate() {
        let c = kpz_coefficients(ModelParams::new(1.0).unwrap());
        assert!(matches!(
            rescale(0, 100, &c),
            Err(Error::DegenerateScaling { .. })
        ));
    }

    #[test]
    fn time_round_trip() {
        let c = kpz_coefficients(ModelParams::new(0.125).unwrap());
        let r = Rescaling::new(2000, &c).unwrap();
        assert!((r.time(r.raw_time(0.7)) - 0.7).abs() < 1e-14);
        assert!((r.raw_time(1.0) - c.time_scale(2000.0).unwrap()).abs() < 1e-9);
    }
}
