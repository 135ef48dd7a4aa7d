//! Airy function Ai on the real line.
//!
//! Three regimes:
//! * `|x| <= 2.5`: Maclaurin series about 0.
//! * `x >= 9` and `x <= -8`: the standard asymptotic expansions, whose
//!   optimal truncation error there is below 1e-13.
//! * in between: Taylor continuation of the ODE `y'' = x y`, stepping
//!   towards `x` from a point where the value is known. On the positive
//!   axis the continuation runs from `x = 9` towards the origin, which is
//!   the direction in which Ai is the dominant solution.

use crate::error::{Error, Result};

/// Ai(0) = 3^{-2/3} / Γ(2/3).
pub const AI_ZERO: f64 = 0.355_028_053_887_817_24;
/// Ai'(0) = -3^{-1/3} / Γ(1/3).
pub const AI_PRIME_ZERO: f64 = -0.258_819_403_792_806_8;

/// Arguments below this are rejected: the phase of the oscillatory
/// expansion loses absolute accuracy beyond it.
pub const AIRY_MIN_ARG: f64 = -100.0;

const SERIES_RADIUS: f64 = 2.5;
const POS_ASYMPTOTIC: f64 = 9.0;
const NEG_ASYMPTOTIC: f64 = -8.0;
const MAX_STEP: f64 = 0.5;
const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;

/// Ai(x) with absolute error ≤ 1e-12 for `x ≤ 0` and relative error
/// ≤ 1e-12 for `x > 0`.
pub fn airy_ai(x: f64) -> Result<f64> {
    if x == f64::INFINITY {
        return Ok(0.0);
    }
    if x.is_nan() || x < AIRY_MIN_ARG {
        return Err(Error::Domain(format!(
            "Airy argument {x} outside supported range [{AIRY_MIN_ARG}, inf)"
        )));
    }
    Ok(ai(x))
}

/// Unchecked Ai used by the kernel assembly loops.
#[inline]
pub(crate) fn ai(x: f64) -> f64 {
    ai_and_derivative(x).0
}

/// (Ai(x), Ai'(x)).
pub fn ai_and_derivative(x: f64) -> (f64, f64) {
    if x.abs() <= SERIES_RADIUS {
        taylor_step(0.0, AI_ZERO, AI_PRIME_ZERO, x)
    } else if x >= POS_ASYMPTOTIC {
        asymptotic_positive(x)
    } else if x <= NEG_ASYMPTOTIC {
        asymptotic_negative(-x)
    } else if x > 0.0 {
        let (y, dy) = asymptotic_positive(POS_ASYMPTOTIC);
        continue_to(POS_ASYMPTOTIC, y, dy, x)
    } else {
        continue_to(0.0, AI_ZERO, AI_PRIME_ZERO, x)
    }
}

fn continue_to(mut a: f64, mut y: f64, mut dy: f64, x: f64) -> (f64, f64) {
    let steps = ((x - a).abs() / MAX_STEP).ceil().max(1.0) as usize;
    let h = (x - a) / steps as f64;
    for _ in 0..steps {
        (y, dy) = taylor_step(a, y, dy, h);
        a += h;
    }
    (y, dy)
}

/// Sum the Taylor series of the solution of `y'' = x y` with `y(a) = y0`,
/// `y'(a) = y1`, evaluated at `a + h`. Returns `(y, y')` there.
fn taylor_step(a: f64, y0: f64, y1: f64, h: f64) -> (f64, f64) {
    // c_{k+2} (k+2)(k+1) = a c_k + c_{k-1}
    let (mut c_km2, mut c_km1, mut c_k) = (y0, y1, 0.5 * a * y0);
    let mut val = y0 + y1 * h;
    let mut der = y1;
    let mut h_km1 = h;
    let mut quiet = 0;
    for k in 2..400 {
        let kf = k as f64;
        let term = c_k * h_km1 * h;
        let dterm = kf * c_k * h_km1;
        val += term;
        der += dterm;
        h_km1 *= h;
        if term.abs() <= 1e-17 * val.abs() && dterm.abs() <= 1e-17 * der.abs() {
            quiet += 1;
            // two of every three coefficients vanish at a = 0
            if quiet >= 3 {
                break;
            }
        } else {
            quiet = 0;
        }
        let c_kp1 = (a * c_km1 + c_km2) / ((kf + 1.0) * kf);
        c_km2 = c_km1;
        c_km1 = c_k;
        c_k = c_kp1;
    }
    (val, der)
}

/// Coefficients u_k of the Airy asymptotic expansions, with the companion
/// v_k for the derivative.
fn uv_coefficients(count: usize) -> (Vec<f64>, Vec<f64>) {
    let mut u = Vec::with_capacity(count);
    let mut v = Vec::with_capacity(count);
    u.push(1.0);
    v.push(1.0);
    for k in 1..count {
        let kf = k as f64;
        let uk = u[k - 1] * (6.0 * kf - 5.0) * (6.0 * kf - 3.0) * (6.0 * kf - 1.0)
            / ((2.0 * kf - 1.0) * 216.0 * kf);
        u.push(uk);
        v.push(-(6.0 * kf + 1.0) / (6.0 * kf - 1.0) * uk);
    }
    (u, v)
}

thread_local! {
    static UV: (Vec<f64>, Vec<f64>) = uv_coefficients(40);
}

/// Sum `Σ (-1)^k c_k z^{-k}` over the given parity with optimal truncation.
fn alternating_sum(c: &[f64], z: f64, start: usize, stride: usize) -> f64 {
    let mut sum = 0.0;
    let mut sign = 1.0;
    let mut last = f64::INFINITY;
    let mut k = start;
    while k < c.len() {
        let term = c[k] / z.powi(k as i32);
        if term.abs() >= last {
            break;
        }
        sum += sign * term;
        last = term.abs();
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
        sign = -sign;
        k += stride;
    }
    sum
}

fn asymptotic_positive(x: f64) -> (f64, f64) {
    let zeta = 2.0 / 3.0 * x * x.sqrt();
    let q = x.sqrt().sqrt();
    let e = (-zeta).exp();
    UV.with(|(u, v)| {
        let su = signed_series(u, zeta);
        let sv = signed_series(v, zeta);
        (
            0.5 * FRAC_1_SQRT_PI * e / q * su,
            -0.5 * FRAC_1_SQRT_PI * q * e * sv,
        )
    })
}

/// `Σ (-1)^k c_k / z^k`, truncated at the smallest term.
fn signed_series(c: &[f64], z: f64) -> f64 {
    let mut sum = 0.0;
    let mut last = f64::INFINITY;
    let mut zk = 1.0;
    for (k, ck) in c.iter().enumerate() {
        let term = ck / zk;
        if term.abs() >= last {
            break;
        }
        sum += if k % 2 == 0 { term } else { -term };
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
        last = term.abs();
        zk *= z;
    }
    sum
}

/// Ai(-x) and Ai'(-x) for large positive `x`, returned as (Ai, d/dy Ai(y)) at y = -x.
fn asymptotic_negative(x: f64) -> (f64, f64) {
    let zeta = 2.0 / 3.0 * x * x.sqrt();
    let q = x.sqrt().sqrt();
    let phase = zeta - std::f64::consts::FRAC_PI_4;
    let (s, c) = phase.sin_cos();
    UV.with(|(u, v)| {
        let u_even = alternating_sum(u, zeta, 0, 2);
        let u_odd = alternating_sum(u, zeta, 1, 2);
        let v_even = alternating_sum(v, zeta, 0, 2);
        let v_odd = alternating_sum(v, zeta, 1, 2);
        let ai = FRAC_1_SQRT_PI / q * (c * u_even + s * u_odd);
        let aip = FRAC_1_SQRT_PI * q * (s * v_even - c * v_odd);
        (ai, aip)
    })
}
