//! Simulation against theory: densities, cumulants and covariances of the
//! rescaled magnetization.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use toom_core::estimators::{
    default_max_lag, MomentAccumulator, PlateauEstimate, RawHistogram, Rescaling,
    StructureFunctionAccumulator, RESCALED_BIN_WIDTH,
};
use toom_core::rmt::{GoeFredholm, TheoryCurve};
use toom_core::{kpz_coefficients, ModelParams};

use crate::error::{CliError, CliResult};
use crate::io::{num, write_table};

/// Published cumulants (mean, variance, skewness, kurtosis) of the rescaled
/// magnetization; `None` is the n → ∞ limit.
pub const PUBLISHED_CUMULANTS: [(Option<usize>, [f64; 4]); 5] = [
    (Some(10_000), [-0.5198, 0.4335, 0.2657, 3.154]),
    (Some(20_000), [-0.5344, 0.4239, 0.2757, 3.159]),
    (Some(50_000), [-0.5496, 0.4162, 0.2820, 3.152]),
    (Some(100_000), [-0.5612, 0.4116, 0.2897, 3.168]),
    (None, [-0.6033, 0.4080, 0.2931, 3.165]),
];

/// Row for `n` if it was published, otherwise the limit.
pub fn published_target(n: usize) -> (Option<usize>, [f64; 4]) {
    PUBLISHED_CUMULANTS
        .iter()
        .find(|r| r.0 == Some(n))
        .copied()
        .unwrap_or(PUBLISHED_CUMULANTS[4])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Largest allowed |empirical − theory| density.
    pub density_sup: f64,
    /// Cumulant and covariance tolerances in standard errors.
    pub sigmas: f64,
    /// Systematic allowance added to the covariance tolerance.
    pub covariance_allowance: f64,
    /// Covariances are compared on `t_resc ≤ covariance_t_max`.
    pub covariance_t_max: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            density_sup: 0.02,
            sigmas: 3.0,
            covariance_allowance: 0.02,
            covariance_t_max: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityComparison {
    pub s: f64,
    pub empirical: f64,
    pub theory: f64,
    pub diff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CumulantComparison {
    pub n: usize,
    /// Mean, variance, skewness, kurtosis of the rescaled samples; the
    /// variance is the structure-function plateau when available.
    pub measured: [f64; 4],
    pub errors: Option<[f64; 4]>,
    pub marginal_variance: f64,
    /// `None` is the n → ∞ row.
    pub target_n: Option<usize>,
    pub target: [f64; 4],
    /// `(measured − target) / |target|`.
    pub deviation: [f64; 4],
    pub within: [bool; 4],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceComparison {
    pub t_resc: f64,
    pub cov_resc: f64,
    pub stderr: Option<f64>,
    pub g1: Option<f64>,
}

/// Covariance at lags `≥ 2 n^{2/3}`, where it should vanish.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailCheck {
    pub first_lag: usize,
    pub rows: usize,
    pub max_abs: f64,
    /// Largest |cov| / stderr.
    pub max_z: f64,
    pub mean_stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub lambda: f64,
    pub n: usize,
    pub samples: u64,
    pub tolerances: Tolerances,
    pub density: Vec<DensityComparison>,
    pub density_sup: f64,
    pub cumulants: CumulantComparison,
    pub plateau: Option<PlateauEstimate>,
    pub covariance: Vec<CovarianceComparison>,
    /// Largest `|cov − g₁| − (k σ + allowance)` over the compared rows.
    pub covariance_excess: Option<f64>,
    pub tail: Option<TailCheck>,
}

pub struct CompareInput<'a> {
    pub params: ModelParams,
    pub n: usize,
    pub moments: &'a MomentAccumulator<i64>,
    pub histogram: &'a RawHistogram,
    pub structure: Option<&'a StructureFunctionAccumulator>,
    pub g1: Option<&'a TheoryCurve>,
    /// Time between consecutive structure-function points.
    pub structure_dt: f64,
}

pub fn compare(
    input: &CompareInput,
    tol: Tolerances,
    theory: &GoeFredholm,
) -> CliResult<ComparisonReport> {
    let coeffs = kpz_coefficients(input.params);
    let r = Rescaling::new(input.n, &coeffs)?;

    let density: Vec<DensityComparison> = input
        .histogram
        .rescaled_density(&r, RESCALED_BIN_WIDTH)?
        .into_iter()
        .map(|row| {
            let theory = (theory.cdf(row.hi) - theory.cdf(row.lo)) / (row.hi - row.lo);
            DensityComparison {
                s: row.center,
                empirical: row.density,
                theory,
                diff: row.density - theory,
            }
        })
        .collect();
    let density_sup = density.iter().map(|d| d.diff.abs()).fold(0.0, f64::max);

    let c = input.moments.cumulants()?.affine(r.center, r.scale);
    let plateau = match input.structure {
        Some(s) => Some(s.plateau_variance(input.n)?),
        None => None,
    };
    let (variance, variance_err) = match plateau {
        Some(p) => (r.covariance(p.value), p.stderr.map(|e| r.covariance(e))),
        None => (c.values.variance, c.errors.map(|e| e.variance)),
    };
    let measured = [
        c.values.mean,
        variance,
        c.values.skewness.unwrap_or(f64::NAN),
        c.values.kurtosis.unwrap_or(f64::NAN),
    ];
    let errors = match (c.errors, variance_err) {
        (Some(e), Some(ve)) => Some([e.mean, ve, e.skewness, e.kurtosis]),
        _ => None,
    };
    let (target_n, target) = published_target(input.n);
    let deviation: [f64; 4] = std::array::from_fn(|k| (measured[k] - target[k]) / target[k].abs());
    let within: [bool; 4] = std::array::from_fn(|k| match errors {
        Some(e) => (measured[k] - target[k]).abs() <= tol.sigmas * e[k],
        None => false,
    });
    let cumulants = CumulantComparison {
        n: input.n,
        measured,
        errors,
        marginal_variance: c.values.variance,
        target_n,
        target,
        deviation,
        within,
    };

    let mut covariance = Vec::new();
    let mut covariance_excess = None;
    let mut tail = None;
    if let Some(s) = input.structure {
        let curve = s.covariance_curve(&r, input.structure_dt)?;
        let tail_from = default_max_lag(input.n);
        let mut t = TailCheck {
            first_lag: tail_from,
            rows: 0,
            max_abs: 0.0,
            max_z: 0.0,
            mean_stderr: 0.0,
        };
        for (lag, row) in curve.rows.iter().enumerate() {
            let g1 = input.g1.and_then(|g| g.interpolate(row.t_resc));
            covariance.push(CovarianceComparison {
                t_resc: row.t_resc,
                cov_resc: row.cov_resc,
                stderr: row.stderr,
                g1,
            });
            if let (Some(g), true) = (g1, row.t_resc <= tol.covariance_t_max) {
                let allowed = tol.sigmas * row.stderr.unwrap_or(0.0) + tol.covariance_allowance;
                let excess = (row.cov_resc - g).abs() - allowed;
                covariance_excess = Some(covariance_excess.map_or(excess, |e: f64| e.max(excess)));
            }
            if lag >= tail_from {
                t.rows += 1;
                t.max_abs = t.max_abs.max(row.cov_resc.abs());
                if let Some(e) = row.stderr {
                    t.max_z = t.max_z.max(row.cov_resc.abs() / e);
                    t.mean_stderr += e;
                }
            }
        }
        if t.rows > 0 {
            t.mean_stderr /= t.rows as f64;
            tail = Some(t);
        }
    }

    Ok(ComparisonReport {
        lambda: input.params.lambda(),
        n: input.n,
        samples: c.count,
        tolerances: tol,
        density,
        density_sup,
        cumulants,
        plateau,
        covariance,
        covariance_excess,
        tail,
    })
}

impl ComparisonReport {
    pub fn density_passes(&self) -> bool {
        self.density_sup <= self.tolerances.density_sup
    }

    pub fn cumulants_pass(&self) -> bool {
        self.cumulants.within.iter().all(|&w| w)
    }

    /// `None` when there was nothing to compare.
    pub fn covariance_passes(&self) -> Option<bool> {
        self.covariance_excess.map(|e| e <= 0.0)
    }

    pub fn tail_passes(&self) -> Option<bool> {
        self.tail.map(|t| t.max_z <= self.tolerances.sigmas)
    }

    pub fn passes(&self) -> bool {
        self.density_passes()
            && self.cumulants_pass()
            && self.covariance_passes().unwrap_or(true)
            && self.tail_passes().unwrap_or(true)
    }

    pub fn failures(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if !self.density_passes() {
            out.push("density");
        }
        if !self.cumulants_pass() {
            out.push("cumulants");
        }
        if self.covariance_passes() == Some(false) {
            out.push("covariance");
        }
        if self.tail_passes() == Some(false) {
            out.push("covariance tail");
        }
        out
    }

    pub fn summary(&self) -> String {
        let verdict = |ok: bool| if ok { "PASS" } else { "FAIL" };
        let mut s = String::new();
        let c = &self.cumulants;
        let _ = writeln!(
            s,
            "lambda = {}, n = {}, samples = {}",
            self.lambda, self.n, self.samples
        );
        let _ = writeln!(
            s,
            "density: sup |empirical - theory| = {:.4} (tolerance {}) {}",
            self.density_sup,
            self.tolerances.density_sup,
            verdict(self.density_passes())
        );
        let row = match c.target_n {
            Some(n) => format!("published n = {n}"),
            None => "n = infinity".to_string(),
        };
        let _ = writeln!(
            s,
            "cumulants against {row} ({} standard errors):",
            self.tolerances.sigmas
        );
        for (k, name) in ["mean", "variance", "skewness", "kurtosis"]
            .iter()
            .enumerate()
        {
            let err = c
                .errors
                .map_or("n/a".to_string(), |e| format!("{:.4}", e[k]));
            let _ = writeln!(
                s,
                "  {name:<9} {:>9.4} ± {err:<7} target {:>8.4}  deviation {:>+7.2}%  {}",
                c.measured[k],
                c.target[k],
                100.0 * c.deviation[k],
                verdict(c.within[k])
            );
        }
        let _ = writeln!(s, "  marginal variance {:.4}", c.marginal_variance);
        if let Some(e) = self.covariance_excess {
            let _ = writeln!(
                s,
                "covariance vs g1 on t_resc <= {}: worst excess over {}σ + {} is {:+.4} {}",
                self.tolerances.covariance_t_max,
                self.tolerances.sigmas,
                self.tolerances.covariance_allowance,
                e,
                verdict(e <= 0.0)
            );
        }
        if let Some(t) = self.tail {
            let _ = writeln!(
                s,
                "covariance at lags >= {}: max |cov| {:.2e}, max |cov|/σ {:.2}, mean σ {:.2e} {}",
                t.first_lag,
                t.max_abs,
                t.max_z,
                t.mean_stderr,
                verdict(t.max_z <= self.tolerances.sigmas)
            );
        }
        let _ = writeln!(s, "overall: {}", verdict(self.passes()));
        s
    }

    /// density.csv, cumulants.csv, covariance.csv and summary.txt.
    pub fn write(&self, dir: &Path) -> CliResult<()> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        write_table(
            &dir.join("density.csv"),
            &["s", "empirical", "theory", "diff"],
            self.density
                .iter()
                .map(|d| [num(d.s), num(d.empirical), num(d.theory), num(d.diff)]),
        )?;
        let c = &self.cumulants;
        let e = c.errors.unwrap_or([f64::NAN; 4]);
        write_table(
            &dir.join("cumulants.csv"),
            &[
                "n", "mean", "var", "skew", "kurt", "mean_err", "var_err", "skew_err", "kurt_err",
            ],
            [[
                c.n.to_string(),
                num(c.measured[0]),
                num(c.measured[1]),
                num(c.measured[2]),
                num(c.measured[3]),
                num(e[0]),
                num(e[1]),
                num(e[2]),
                num(e[3]),
            ]],
        )?;
        let opt = |x: Option<f64>| x.map(num).unwrap_or_default();
        write_table(
            &dir.join("covariance.csv"),
            &["t_resc", "cov_resc", "stderr", "g1"],
            self.covariance
                .iter()
                .map(|r| [num(r.t_resc), num(r.cov_resc), opt(r.stderr), opt(r.g1)]),
        )?;
        let path = dir.join("summary.txt");
        std::fs::write(&path, self.summary()).map_err(|e| CliError::io(&path, e))
    }
}
