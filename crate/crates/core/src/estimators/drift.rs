use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Power-law fit of `|value(n) − limit|` against `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftFit {
    pub deficits: Vec<f64>,
    /// Deficits shrink strictly with increasing `n`.
    pub monotone: bool,
    /// Least-squares slope of log deficit against log n.
    pub slope: f64,
    /// Standard error of the slope from the fit residuals (zero for two
    /// points).
    pub slope_stderr: f64,
}

/// `points` are `(n, value)` pairs in any order.
pub fn finite_size_drift(points: &[(f64, f64)], limit: f64) -> Result<DriftFit> {
    if points.len() < 2 {
        return Err(Error::InsufficientData("need at least two sizes".into()));
    }
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let deficits: Vec<f64> = pts.iter().map(|&(_, v)| (v - limit).abs()).collect();
    if pts.iter().any(|p| !(p.0 > 0.0)) || deficits.contains(&0.0) {
        return Err(Error::Domain(
            "sizes must be positive and deficits non-zero".into(),
        ));
    }
    let monotone = deficits.windows(2).all(|w| w[1] < w[0]);
    let xs: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = deficits.iter().map(|d| d.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let slope_stderr = if xs.len() > 2 {
        let rss: f64 = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| (y - my - slope * (x - mx)).powi(2))
            .sum();
        (rss / (k - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(DriftFit {
        deficits,
        monotone,
        slope,
        slope_stderr,
    })
}
