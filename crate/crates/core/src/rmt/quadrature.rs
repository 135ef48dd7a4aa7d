use crate::error::{Error, Result};

/// Gauss–Legendre rule on a finite interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadrature {
    pub a: f64,
    pub b: f64,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Quadrature {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// The same rule moved affinely onto `(a, b)`.
    pub fn mapped(&self, a: f64, b: f64) -> Quadrature {
        let scale = (b - a) / (self.b - self.a);
        Quadrature {
            a,
            b,
            nodes: self
                .nodes
                .iter()
                .map(|&x| a + (x - self.a) * scale)
                .collect(),
            weights: self.weights.iter().map(|&w| w * scale).collect(),
        }
    }
}

/// `m`-point Gauss–Legendre rule on `(a, b)`, nodes from Newton iteration
/// on the three-term recurrence for `P_m`.
pub fn gauss_legendre(m: usize, a: f64, b: f64) -> Result<Quadrature> {
    if m < 2 {
        return Err(Error::Domain(format!("need at least 2 nodes, got {m}")));
    }
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(Error::Domain(format!("invalid interval ({a}, {b})")));
    }
    let mut x = vec![0.0; m];
    let mut w = vec![0.0; m];
    let mf = m as f64;
    for i in 0..m.div_ceil(2) {
        // i-th largest root
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (mf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(m, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() <= 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(m, z);
        if d.is_finite() {
            dp = d;
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[m - 1 - i] = z;
        x[i] = -z;
        w[m - 1 - i] = wi;
        w[i] = wi;
    }
    if m % 2 == 1 {
        x[m / 2] = 0.0;
    }
    let reference = Quadrature {
        a: -1.0,
        b: 1.0,
        nodes: x,
        weights: w,
    };
    Ok(reference.mapped(a, b))
}

fn legendre_with_derivative(m: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    for j in 2..=m {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * z * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let d = m as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}
