//! Two-time distribution of the Airy₁ process and its covariance g₁(t).
//!
//! The joint distribution is the Fredholm determinant of the extended
//! kernel on `L²(ℝ × {1, 2})`,
//!
//! ```text
//! K₁(t, x; t', x') = Ai(x + x' + Δ²) exp(Δ (x + x') + ⅔ Δ³)
//!                    − exp(−(x' − x)² / 4Δ) / √(4πΔ) · 1(Δ > 0),   Δ = t' − t,
//! ```
//!
//! restricted to `x > s_i`, `x' > s_j`. Each half-line is truncated to
//! `(s_i, s_i + span)` and discretised with Gauss–Legendre nodes.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::airy::ai;
use super::fredholm::{GoeFredholm, KernelMatrix};
use super::quadrature::{gauss_legendre, Quadrature};
use crate::error::{Error, Result};

pub const JOINT_NODES: usize = 40;
pub const JOINT_SPAN: f64 = 10.0;

/// Nyström discretisation of the two-time extended kernel.
#[derive(Debug, Clone)]
pub struct Airy1Joint {
    reference: Quadrature,
    span: f64,
    marginal: GoeFredholm,
}

impl Airy1Joint {
    pub fn new(m: usize, span: f64) -> Result<Self> {
        Ok(Self {
            reference: gauss_legendre(m, 0.0, 1.0)?,
            span,
            marginal: GoeFredholm::new(m, span)?,
        })
    }

    pub fn nodes(&self) -> usize {
        self.reference.len()
    }

    /// P(A₁(0) ≤ s) with the same discretisation as the joint law.
    pub fn marginal_cdf(&self, s: f64) -> f64 {
        self.marginal.cdf(s)
    }

    /// The `2m × 2m` kernel matrix for times `(0, t)`, `t > 0`.
    pub fn kernel_matrix(&self, t: f64, s1: f64, s2: f64) -> KernelMatrix {
        let m = self.reference.len();
        let q1 = self.reference.mapped(s1, s1 + self.span);
        let q2 = self.reference.mapped(s2, s2 + self.span);
        let sw1: Vec<f64> = q1.weights.iter().map(|w| w.sqrt()).collect();
        let sw2: Vec<f64> = q2.weights.iter().map(|w| w.sqrt()).collect();
        let mut k = DMatrix::zeros(2 * m, 2 * m);

        for i in 0..m {
            for j in 0..=i {
                let a = sw1[i] * ai(q1.nodes[i] + q1.nodes[j]) * sw1[j];
                k[(i, j)] = a;
                k[(j, i)] = a;
                let b = sw2[i] * ai(q2.nodes[i] + q2.nodes[j]) * sw2[j];
                k[(m + i, m + j)] = b;
                k[(m + j, m + i)] = b;
            }
        }

        let t2 = t * t;
        let t3 = 2.0 / 3.0 * t2 * t;
        let heat_norm = 1.0 / (4.0 * std::f64::consts::PI * t).sqrt();
        for i in 0..m {
            for j in 0..m {
                // block (1,2): from time 0 at x = q1[i] to time t at x' = q2[j]
                let x = q1.nodes[i];
                let xp = q2.nodes[j];
                let sum = x + xp;
                let airy = ai(sum + t2);
                let fwd = airy * (t * sum + t3).exp()
                    - heat_norm * (-(xp - x) * (xp - x) / (4.0 * t)).exp();
                k[(i, m + j)] = sw1[i] * fwd * sw2[j];
                // block (2,1): from time t at x = q2[j] to time 0 at x' = q1[i]
                let back = airy * (-t * sum - t3).exp();
                k[(m + j, i)] = sw2[j] * back * sw1[i];
            }
        }
        KernelMatrix { entries: k }
    }

    /// P(A₁(0) ≤ s1, A₁(t) ≤ s2). At `t = 0` both coordinates coincide and
    /// the value is the marginal at `min(s1, s2)`.
    pub fn joint_cdf(&self, t: f64, s1: f64, s2: f64) -> f64 {
        if t == 0.0 {
            return self.marginal_cdf(s1.min(s2));
        }
        self.kernel_matrix(t, s1, s2).fredholm_determinant()
    }
}

/// P(A₁(0) ≤ s1, A₁(t) ≤ s2) with an `m`-node rule per half-line.
pub fn airy1_joint_cdf(t: f64, s1: f64, s2: f64, m: usize, span: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!(
            "time gap must be non-negative, got {t}"
        )));
    }
    for s in [s1, s2] {
        if !(-8.0..=8.0).contains(&s) {
            return Err(Error::Domain(format!("s = {s} outside [-8, 8]")));
        }
    }
    Ok(Airy1Joint::new(m, span)?.joint_cdf(t, s1, s2))
}

/// Breakpoints of the panels in the gap `d = s₂ − s₁` on each side of the
/// diagonal, where the integrand has a kink at `t = 0` and a bump of width
/// `√(2t)` for small `t`.
const GAP_PANELS: [f64; 5] = [0.0, 0.5, 2.0, 6.0, 12.0];

/// Settings for the covariance integral
/// `g₁(t) = ∬ [P(A₁(0) ≤ s₁, A₁(t) ≤ s₂) − F(s₁) F(s₂)] ds₁ ds₂`,
/// evaluated in the coordinates `(s₁, d = s₂ − s₁)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceGrid {
    /// Range of `s₁`.
    pub lo: f64,
    pub hi: f64,
    pub mesh_nodes: usize,
    /// Nodes per gap panel.
    pub gap_nodes: usize,
    /// Nodes per half-line for the determinant (before small-gap refinement).
    pub kernel_nodes: usize,
    pub span: f64,
    /// Mesh pairs whose integrand is bounded below this by the Fréchet
    /// bounds are skipped.
    pub skip_below: f64,
}

impl Default for CovarianceGrid {
    fn default() -> Self {
        Self {
            lo: -6.0,
            hi: 6.0,
            mesh_nodes: 40,
            gap_nodes: 10,
            kernel_nodes: JOINT_NODES,
            span: JOINT_SPAN,
            skip_below: 1e-12,
        }
    }
}

impl CovarianceGrid {
    pub fn refined(&self) -> Self {
        Self {
            mesh_nodes: 2 * self.mesh_nodes,
            gap_nodes: 2 * self.gap_nodes,
            kernel_nodes: 2 * self.kernel_nodes,
            ..*self
        }
    }

    /// Node count that resolves the heat kernel of width `√(2t)`.
    pub fn kernel_nodes_for(&self, t: f64) -> usize {
        if t <= 0.0 {
            return self.kernel_nodes;
        }
        // mid-interval Gauss–Legendre spacing ≈ π span / (2m); keep it
        // below about 0.6 of the Gaussian width
        let width = (2.0 * t).sqrt();
        let needed = (std::f64::consts::PI * self.span / (2.0 * 0.6 * width)).ceil() as usize;
        self.kernel_nodes.max(needed)
    }

    fn gap_rule(&self) -> Result<Quadrature> {
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for w in GAP_PANELS.windows(2) {
            let q = gauss_legendre(self.gap_nodes, w[0], w[1])?;
            for (x, wt) in q.nodes.iter().zip(&q.weights) {
                nodes.extend([*x, -*x]);
                weights.extend([*wt, *wt]);
            }
        }
        Ok(Quadrature {
            a: -GAP_PANELS[GAP_PANELS.len() - 1],
            b: GAP_PANELS[GAP_PANELS.len() - 1],
            nodes,
            weights,
        })
    }
}

/// |F₁₂ − F₁F₂| allowed by the Fréchet bounds on F₁₂.
fn frechet_bound(fa: f64, fb: f64) -> f64 {
    let (lo, hi) = if fa <= fb { (fa, fb) } else { (fb, fa) };
    (lo * (1.0 - hi)).max(((1.0 - lo) * (1.0 - hi)).min(lo * hi))
}

/// Covariance of A₁(0) and A₁(t).
pub fn g1(t: f64, grid: &CovarianceGrid) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!(
            "time gap must be non-negative, got {t}"
        )));
    }
    let joint = Airy1Joint::new(grid.kernel_nodes_for(t), grid.span)?;
    let mesh = gauss_legendre(grid.mesh_nodes, grid.lo, grid.hi)?;
    let gaps = grid.gap_rule()?;
    let marginal = |s: f64| {
        if s > 8.0 {
            1.0
        } else if s < -8.0 {
            0.0
        } else {
            joint.marginal_cdf(s)
        }
    };
    let mut total = 0.0;
    for (&s1, &w1) in mesh.nodes.iter().zip(&mesh.weights) {
        let f1 = marginal(s1);
        for (&d, &w2) in gaps.nodes.iter().zip(&gaps.weights) {
            let s2 = s1 + d;
            let f2 = marginal(s2);
            if frechet_bound(f1, f2) < grid.skip_below {
                continue;
            }
            let f12 = joint.joint_cdf(t, s1, s2);
            total += w1 * w2 * (f12 - f1 * f2);
        }
    }
    Ok(total)
}

/// Rows `(t, value)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryCurve {
    pub rows: Vec<(f64, f64)>,
}

impl TheoryCurve {
    /// Linear interpolation; `None` outside the tabulated range.
    pub fn interpolate(&self, t: f64) -> Option<f64> {
        let rows = &self.rows;
        if rows.is_empty() || t < rows[0].0 || t > rows[rows.len() - 1].0 {
            return None;
        }
        let k = rows.partition_point(|r| r.0 <= t).clamp(1, rows.len() - 1);
        let (t0, y0) = rows[k - 1];
        let (t1, y1) = rows[k];
        if t1 == t0 {
            return Some(y0);
        }
        Some(y0 + (y1 - y0) * (t - t0) / (t1 - t0))
    }
}

/// g₁ on `steps + 1` equally spaced times in `[0, t_max]`; rows are
/// computed in parallel.
pub fn g1_curve(t_max: f64, steps: usize, grid: &CovarianceGrid) -> Result<TheoryCurve> {
    if steps == 0 || !(t_max > 0.0) {
        return Err(Error::Domain("need t_max > 0 and at least one step".into()));
    }
    let rows = (0..=steps)
        .into_par_iter()
        .map(|k| {
            let t = t_max * k as f64 / steps as f64;
            g1(t, grid).map(|v| (t, v))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TheoryCurve { rows })
}
