//! λ-dependent constants of the Toom spin exchange model and of its KPZ
//! scaling theory, including the coefficients of the space-time
//! interchanged description.
//!
//! Everything here is a closed form in √λ evaluated in `f64`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Asymmetry parameter of the exchange dynamics, `0 < λ ≤ 1`.
///
/// A `+` spin exchanges with the nearest `−` spin to its right at rate λ,
/// a `−` spin with the nearest `+` to its right at rate 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct ModelParams {
    lambda: f64,
}

impl ModelParams {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda <= 1.0) {
            return Err(Error::Domain(format!(
                "lambda must lie in (0, 1], got {lambda}"
            )));
        }
        Ok(Self { lambda })
    }

    #[inline]
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    #[inline]
    fn sqrt_lambda(&self) -> f64 {
        self.lambda.sqrt()
    }

    /// `λ = 1`: the current has no curvature and the GOE scaling collapses.
    pub fn is_symmetric(&self) -> bool {
        self.lambda == 1.0
    }
}

impl TryFrom<f64> for ModelParams {
    type Error = Error;
    fn try_from(lambda: f64) -> Result<Self> {
        Self::new(lambda)
    }
}

impl From<ModelParams> for f64 {
    fn from(p: ModelParams) -> f64 {
        p.lambda
    }
}

/// Scaling constants at the stationary magnetization μ₀.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    pub lambda: f64,
    /// Stationary magnetization μ₀.
    pub mu0: f64,
    /// Propagation speed J'(μ₀).
    pub v: f64,
    /// Current curvature J''(μ₀).
    pub g: f64,
    /// Spatial susceptibility 1 − μ₀².
    pub a: f64,
    /// Drift in the interchanged description, ṽ = 1/v.
    pub v_t: f64,
    /// Curvature in the interchanged description, G̃ = −G/v³.
    pub g_t: f64,
    /// Time-direction susceptibility Ã = A v.
    pub a_t: f64,
    /// KPZ amplitude Γ̃ = |G̃| Ã².
    pub gamma_t: f64,
}

impl Coefficients {
    /// Scale of the height fluctuations at distance `n`, (Γ̃ n)^{1/3}.
    pub fn height_scale(&self, n: f64) -> Result<f64> {
        if self.gamma_t <= 0.0 {
            return Err(Error::DegenerateScaling {
                lambda: self.lambda,
            });
        }
        Ok((self.gamma_t * n).cbrt())
    }

    /// Time unit of the Airy₁ process at distance `n`: one rescaled time
    /// unit corresponds to `2 (Γ̃ n)^{2/3} / Ã` units of simulation time.
    pub fn time_scale(&self, n: f64) -> Result<f64> {
        let h = self.height_scale(n)?;
        Ok(2.0 * h * h / self.a_t)
    }

    /// Residuals of the identities tying the interchanged coefficients to
    /// the direct ones: `(v ṽ − 1, G + G̃ v³, Ã − A v, Γ̃ − |G̃| Ã²)`,
    /// each relative to the natural scale of the identity.
    pub fn identity_residuals(&self) -> [f64; 4] {
        let rel = |a: f64, b: f64| {
            let scale = a.abs().max(b.abs());
            if scale == 0.0 {
                0.0
            } else {
                (a - b) / scale
            }
        };
        [
            rel(self.v * self.v_t, 1.0),
            rel(self.g, -self.g_t * self.v.powi(3)),
            rel(self.a_t, self.a * self.v),
            rel(self.gamma_t, self.g_t.abs() * self.a_t * self.a_t),
        ]
    }
}

/// μ₀ = (1 − √λ)/(1 + √λ), the unique zero of the spin current.
pub fn stationary_magnetization(params: ModelParams) -> f64 {
    let r = params.sqrt_lambda();
    (1.0 - r) / (1.0 + r)
}

/// Stationary spin current of the Bernoulli measure with magnetization μ:
/// `J = 2 (λ (1+μ)/(1−μ) − (1−μ)/(1+μ))`.
pub fn spin_current(mu: f64, params: ModelParams) -> Result<f64> {
    if !(mu > -1.0 && mu < 1.0) {
        return Err(Error::Domain(format!(
            "magnetization must lie in (-1, 1), got {mu}"
        )));
    }
    let lambda = params.lambda();
    Ok(2.0 * (lambda * (1.0 + mu) / (1.0 - mu) - (1.0 - mu) / (1.0 + mu)))
}

/// All scaling constants from their closed forms.
pub fn kpz_coefficients(params: ModelParams) -> Coefficients {
    let r = params.sqrt_lambda();
    let p = 1.0 + r;
    let m = 1.0 - r;
    let v = 2.0 * p * p;
    let g = p.powi(3) * m / r;
    let a = 4.0 * r / (p * p);
    let v_t = 1.0 / v;
    let g_t = -g / v.powi(3);
    let a_t = a * v;
    // |G̃| Ã² written out; equals 8√λ (1−√λ)(1+√λ)^{-3}.
    let gamma_t = g_t.abs() * a_t * a_t;
    Coefficients {
        lambda: params.lambda(),
        mu0: m / p,
        v,
        g,
        a,
        v_t,
        g_t,
        a_t,
        gamma_t,
    }
}

/// Closed form of Γ̃ that does not pass through G̃ and Ã.
pub fn gamma_t_closed_form(params: ModelParams) -> f64 {
    let r = params.sqrt_lambda();
    8.0 * r * (1.0 - r) / (1.0 + r).powi(3)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(lambda: f64) -> ModelParams {
        ModelParams::new(lambda).unwrap()
    }

    fn assert_rel(actual: f64, expected: f64, tol: f64) {
        let err = ((actual - expected) / expected).abs();
        assert!(err <= tol, "{actual} vs {expected}: rel err {err:e}");
    }

    #[test]
    fn lambda_domain() {
        assert!(ModelParams::new(0.0).is_err());
        assert!(ModelParams::new(-0.1).is_err());
        assert!(ModelParams::new(1.0 + 1e-12).is_err());
        assert!(ModelParams::new(f64::NAN).is_err());
        assert!(ModelParams::new(1.0).is_ok());
    }

    #[test]
    fn stationary_magnetization_examples() {
        assert_eq!(stationary_magnetization(p(1.0)), 0.0);
        assert!((stationary_magnetization(p(0.25)) - 1.0 / 3.0).abs() < 1e-15);
        // (1 - 1/√8) / (1 + 1/√8)
        assert!((stationary_magnetization(p(0.125)) - 0.477592).abs() < 1e-6);
    }

    #[test]
    fn spin_current_examples() {
        for lambda in [0.01, 0.125, 0.25, 0.7, 1.0] {
            let mu0 = stationary_magnetization(p(lambda));
            assert!(spin_current(mu0, p(lambda)).unwrap().abs() < 1e-14);
        }
        assert!((spin_current(0.0, p(0.125)).unwrap() + 1.75).abs() < 1e-15);
        assert!((spin_current(1.0 / 3.0, p(1.0)).unwrap() - 3.0).abs() < 1e-14);
        assert!(spin_current(1.0, p(0.5)).is_err());
        assert!(spin_current(-1.0, p(0.5)).is_err());
    }

    #[test]
    fn symmetric_point() {
        let c = kpz_coefficients(p(1.0));
        assert_eq!(c.v, 8.0);
        assert_eq!(c.g, 0.0);
        assert_eq!(c.a, 1.0);
        assert_eq!(c.a_t, 8.0);
        assert_eq!(c.gamma_t, 0.0);
        assert_eq!(c.mu0, 0.0);
        assert!(matches!(
            c.height_scale(100.0),
            Err(Error::DegenerateScaling { .. })
        ));
    }

    #[test]
    fn quarter() {
        let c = kpz_coefficients(p(0.25));
        assert_rel(c.v, 4.5, 1e-15);
        assert_rel(c.g, 3.375, 1e-15);
        assert_rel(c.a, 8.0 / 9.0, 1e-15);
        assert_rel(c.a_t, 4.0, 1e-15);
        assert_rel(c.g_t, -1.0 / 27.0, 1e-14);
        assert_rel(c.gamma_t, 16.0 / 27.0, 1e-14);
    }

    #[test]
    fn one_eighth() {
        let c = kpz_coefficients(p(0.125));
        assert_rel(c.v, 3.664214, 1e-5);
        assert_rel(c.g, 4.5342, 1e-5);
        assert_rel(c.a, 0.771906, 1e-5);
        assert_rel(c.a_t, 2.828427, 1e-5);
        assert_rel(c.g_t, -0.0921640, 1e-5);
        assert_rel(c.gamma_t, 0.737312, 1e-5);
    }
}
