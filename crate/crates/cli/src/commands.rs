use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use toom_core::estimators::{
    MomentAccumulator, RawHistogram, Rescaling, StructureFunctionAccumulator,
};
use toom_core::protocol::{
    finish_words, ring_check, ring_current, InterfaceData, RingCheckPlan, RingCheckReport,
    RingCurrent, WordRun, WordSnapshot,
};
use toom_core::rmt::{
    g1_curve, tw_goe_moments_with, tw_goe_table, CovarianceGrid, GoeFredholm, TheoryCurve,
};
use toom_core::{kpz_coefficients, stationary_magnetization, Coefficients, ModelParams};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::io::{self, num};
use crate::report::{compare, CompareInput, ComparisonReport, Tolerances};

pub struct CoeffsOutput {
    pub coefficients: Coefficients,
    pub residuals: [f64; 4],
    pub degenerate: bool,
}

pub fn coeffs(lambda: f64) -> CliResult<CoeffsOutput> {
    let p = ModelParams::new(lambda)?;
    let c = kpz_coefficients(p);
    Ok(CoeffsOutput {
        coefficients: c,
        residuals: c.identity_residuals(),
        degenerate: p.is_symmetric(),
    })
}

impl CoeffsOutput {
    pub fn rows(&self) -> Vec<(&'static str, f64)> {
        let c = &self.coefficients;
        vec![
            ("lambda", c.lambda),
            ("mu0", c.mu0),
            ("v", c.v),
            ("G", c.g),
            ("A", c.a),
            ("v_tilde", c.v_t),
            ("G_tilde", c.g_t),
            ("A_tilde", c.a_t),
            ("Gamma_tilde", c.gamma_t),
            ("residual_v_vtilde", self.residuals[0]),
            ("residual_G", self.residuals[1]),
            ("residual_A", self.residuals[2]),
            ("residual_Gamma", self.residuals[3]),
        ]
    }

    pub fn table(&self) -> String {
        self.rows()
            .iter()
            .map(|(k, v)| {
                if k.starts_with("residual") {
                    format!("{k:<18} {v:>14.3e}\n")
                } else {
                    format!("{k:<18} {v:>14.9}\n")
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Checkpoint {
    config: RunConfig,
    words: Vec<WordSnapshot>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SimulateOptions {
    pub resume: bool,
    /// Stop (leaving a checkpoint) once every word reaches this time.
    pub stop_after: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub samples: u64,
    pub mean: f64,
    pub variance_marginal: f64,
    pub variance_plateau: Option<f64>,
    pub skewness: Option<f64>,
    pub kurtosis: Option<f64>,
}

pub enum SimulateOutcome {
    Finished {
        data: Box<InterfaceData>,
        summary: RunSummary,
    },
    Stopped {
        clock: f64,
    },
}

fn same_run(a: &RunConfig, b: &RunConfig) -> bool {
    RunConfig {
        checkpoint_interval: b.checkpoint_interval,
        output: b.output.clone(),
        ..a.clone()
    } == *b
}

fn unix_seconds() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

pub fn simulate(cfg: &RunConfig, opts: SimulateOptions) -> CliResult<SimulateOutcome> {
    let started = unix_seconds();
    let wall = Instant::now();
    let out = &cfg.output;
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let ckpt_path = out.join("checkpoint.json");
    let params = cfg.params()?;
    let plan = cfg.plan();

    let mut runs = if opts.resume && ckpt_path.exists() {
        let ck: Checkpoint = io::read_json(&ckpt_path)?;
        if !same_run(&ck.config, cfg) {
            return Err(CliError::Config(format!(
                "{} belongs to a different configuration",
                ckpt_path.display()
            )));
        }
        ck.words
            .into_iter()
            .map(WordRun::from_snapshot)
            .collect::<Result<Vec<_>, _>>()?
    } else {
        (0..cfg.replicas as u64)
            .map(|s| WordRun::new(plan, params, cfg.seed, s, cfg.mode.into()))
            .collect::<Result<Vec<_>, _>>()?
    };
    io::write_json(&out.join("config.json"), cfg)?;

    let save = |runs: &[WordRun]| {
        let ck = Checkpoint {
            config: cfg.clone(),
            words: runs.iter().map(WordRun::snapshot).collect(),
        };
        io::write_json_atomic(&ckpt_path, &ck)
    };
    let slice = (cfg.sample_period * 16) as f64;
    let mut limit = runs
        .iter()
        .map(WordRun::clock)
        .fold(f64::INFINITY, f64::min);
    let mut last_save = Instant::now();
    while !runs.iter().all(WordRun::is_done) {
        limit = ((limit / slice).floor() + 1.0) * slice;
        if let Some(stop) = opts.stop_after {
            limit = limit.min(stop);
        }
        runs.par_iter_mut().for_each(|r| r.run_until(limit));
        if opts.stop_after.is_some_and(|stop| limit >= stop) && !runs.iter().all(WordRun::is_done) {
            save(&runs)?;
            return Ok(SimulateOutcome::Stopped { clock: limit });
        }
        if last_save.elapsed().as_secs_f64() >= cfg.checkpoint_interval {
            save(&runs)?;
            last_save = Instant::now();
        }
    }

    let mut data = finish_words(runs)?;
    data.samples.sort_by_key(|s| (s.time, s.lane));
    if cfg.record_samples {
        io::write_samples(&out.join("samples.csv"), &data.samples)?;
    }
    io::write_structure(&out.join("structure.csv"), &data.structure)?;
    let summary = summarize(&data, params, cfg.n)?;
    io::write_json(&out.join("results.json"), &summary)?;
    io::write_json(
        &out.join("meta.json"),
        &serde_json::json!({
            "started_unix": started,
            "finished_unix": unix_seconds(),
            "wall_seconds": wall.elapsed().as_secs_f64(),
            "version": env!("CARGO_PKG_VERSION"),
        }),
    )?;
    if ckpt_path.exists() {
        std::fs::remove_file(&ckpt_path).map_err(|e| CliError::io(&ckpt_path, e))?;
    }
    Ok(SimulateOutcome::Finished {
        data: Box::new(data),
        summary,
    })
}

/// Rescaled cumulants of a finished run. Raw values are reported at the
/// symmetric point, where the rescaling is degenerate.
fn summarize(data: &InterfaceData, params: ModelParams, n: usize) -> CliResult<RunSummary> {
    let raw = data.moments.cumulants()?;
    let plateau = data.structure.plateau_variance(n).ok().map(|p| p.value);
    let (c, plateau) = match Rescaling::new(n, &kpz_coefficients(params)) {
        Ok(r) => (
            raw.affine(r.center, r.scale),
            plateau.map(|v| r.covariance(v)),
        ),
        Err(_) => (raw, plateau),
    };
    Ok(RunSummary {
        samples: c.count,
        mean: c.values.mean,
        variance_marginal: c.values.variance,
        variance_plateau: plateau,
        skewness: c.values.skewness,
        kurtosis: c.values.kurtosis,
    })
}

pub struct RingCheckOutput {
    pub report: Option<RingCheckReport>,
    pub extra: Vec<RingCurrent>,
}

pub fn ring(
    plan: &RingCheckPlan,
    lambda: f64,
    seed: u64,
    magnetizations: &[f64],
    skip_standard: bool,
) -> CliResult<RingCheckOutput> {
    let p = ModelParams::new(lambda)?;
    let report = if skip_standard {
        None
    } else {
        Some(ring_check(plan, p, seed)?)
    };
    let extra = magnetizations
        .iter()
        .map(|&mu| ring_current(plan, p, seed, mu))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(RingCheckOutput { report, extra })
}

impl RingCheckOutput {
    pub fn text(&self, sigmas: f64) -> String {
        let mut s = String::new();
        let mark = |ok: bool| if ok { "ok" } else { "MISMATCH" };
        if let Some(r) = &self.report {
            s += &format!("lambda = {}, N = {}\n", r.lambda, r.size);
            let j0 = r.current_at_zero;
            let want = toom_core::spin_current(
                r.mu_zero_realised,
                ModelParams::new(r.lambda).expect("valid"),
            )
            .unwrap_or(f64::NAN);
            s += &format!(
                "current at mu = {:.6}: {:.5} ± {:.5} (predicted {:.5}) {}\n",
                r.mu_zero_realised,
                j0.value,
                j0.stderr,
                want,
                mark((j0.value - want).abs() <= sigmas * j0.stderr + 0.02)
            );
            let js = r.current_at_stationary;
            s += &format!(
                "current at mu = {:.6} (mu0): {:.5} ± {:.5} (predicted 0) {}\n",
                r.mu_stationary_realised,
                js.value,
                js.stderr,
                mark(js.value.abs() <= sigmas * js.stderr)
            );
            for c in &r.correlations {
                s += &format!(
                    "correlation lag {}: {:+.2e} ± {:.2e} {}\n",
                    c.lag,
                    c.value,
                    c.stderr,
                    mark(c.value.abs() <= sigmas * c.stderr)
                );
            }
            let v = r.variance_rate;
            s += &format!(
                "integrated-current variance rate: {:.4} ± {:.4} (predicted {:.4}) {}\n",
                v.value,
                v.stderr,
                r.predicted_rate,
                mark((v.value / r.predicted_rate - 1.0).abs() <= 0.05)
            );
        }
        for e in &self.extra {
            s += &format!(
                "current at mu = {:.6}: {:.5} ± {:.5} (predicted {:.5}) {}\n",
                e.mu_realised,
                e.measured.value,
                e.measured.stderr,
                e.predicted,
                mark((e.measured.value - e.predicted).abs() <= sigmas * e.measured.stderr)
            );
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryOptions {
    pub nodes: usize,
    pub span: f64,
    pub s_min: f64,
    pub s_max: f64,
    pub s_step: f64,
    /// g₁ on `t_steps + 1` points of `[0, t_max]`; no g₁ table when zero.
    pub t_max: f64,
    pub t_steps: usize,
}

impl Default for TheoryOptions {
    fn default() -> Self {
        Self {
            nodes: 60,
            span: 12.0,
            s_min: -5.0,
            s_max: 4.0,
            s_step: 0.05,
            t_max: 1.5,
            t_steps: 30,
        }
    }
}

/// Writes tw_density.csv and, unless `t_steps` is 0, g1.csv. Returns the
/// four moments of the distribution.
pub fn theory(dir: &Path, o: &TheoryOptions) -> CliResult<[f64; 4]> {
    if !(o.s_step > 0.0 && o.s_max > o.s_min) {
        return Err(CliError::Config(
            "need s_max > s_min and a positive step".into(),
        ));
    }
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let f = GoeFredholm::new(o.nodes, o.span)?;
    io::write_table(
        &dir.join("tw_density.csv"),
        &["s", "cdf", "density"],
        tw_goe_table(&f, o.s_min, o.s_max, o.s_step)
            .into_iter()
            .map(|(s, c, d)| [num(s), num(c), num(d)]),
    )?;
    if o.t_steps > 0 {
        let curve = g1_curve(o.t_max, o.t_steps, &CovarianceGrid::default())?;
        write_g1(&dir.join("g1.csv"), &curve)?;
    }
    let m = tw_goe_moments_with(&f, 160);
    Ok([m.mean, m.variance, m.skewness, m.kurtosis])
}

pub fn write_g1(path: &Path, curve: &TheoryCurve) -> CliResult<()> {
    io::write_table(
        path,
        &["t", "g1"],
        curve.rows.iter().map(|&(t, g)| [num(t), num(g)]),
    )
}

pub fn read_g1(path: &Path) -> CliResult<TheoryCurve> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut lines = text.lines();
    if lines.next() != Some("t,g1") {
        return Err(CliError::parse(path, "expected header t,g1"));
    }
    let rows = lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            let (a, b) = l.split_once(',').ok_or_else(|| CliError::parse(path, l))?;
            Ok((
                a.parse().map_err(|_| CliError::parse(path, l))?,
                b.parse().map_err(|_| CliError::parse(path, l))?,
            ))
        })
        .collect::<CliResult<Vec<(f64, f64)>>>()?;
    Ok(TheoryCurve { rows })
}

pub struct CompareOptions {
    pub samples: PathBuf,
    pub structure: Option<PathBuf>,
    pub g1: Option<PathBuf>,
    pub lambda: f64,
    pub n: usize,
    /// Batches per replica word for the cumulant errors.
    pub batches: usize,
    pub out: PathBuf,
    pub tolerances: Tolerances,
}

/// Accumulators rebuilt from samples.csv: each word's samples are split
/// by time into `batches` contiguous batches.
pub fn accumulate_samples(
    samples: &[toom_core::protocol::SampleRecord],
    center: i64,
    batches: usize,
) -> (MomentAccumulator<i64>, RawHistogram) {
    let mut by_word: std::collections::BTreeMap<u64, Vec<(u64, i64)>> = Default::default();
    let mut hist = RawHistogram::new();
    for s in samples {
        by_word
            .entry(s.lane / 64)
            .or_default()
            .push((s.time, s.magnetization));
        hist.push(s.magnetization);
    }
    let mut total = MomentAccumulator::new(center);
    for (_, mut rows) in by_word {
        rows.sort_by_key(|r| r.0);
        let mut times: Vec<u64> = rows.iter().map(|r| r.0).collect();
        times.dedup();
        let per = times.len().div_ceil(batches.max(1)).max(1);
        let mut acc = MomentAccumulator::new(center);
        let mut k = 0;
        for chunk in rows.chunk_by(|a, b| a.0 == b.0) {
            acc.extend(chunk.iter().map(|r| r.1));
            k += 1;
            if k % per == 0 {
                acc.end_batch();
            }
        }
        acc.end_batch();
        total.merge(&acc).expect("same center");
    }
    (total, hist)
}

pub fn compare_files(o: &CompareOptions) -> CliResult<ComparisonReport> {
    let params = ModelParams::new(o.lambda)?;
    let samples = io::read_samples(&o.samples)?;
    let center = (stationary_magnetization(params) * o.n as f64).round() as i64;
    let (moments, histogram) = accumulate_samples(&samples, center, o.batches);
    let structure: Option<StructureFunctionAccumulator> =
        o.structure.as_deref().map(io::read_structure).transpose()?;
    let g1 = match (&o.g1, &structure) {
        (Some(p), _) => Some(read_g1(p)?),
        (None, Some(_)) => Some(g1_curve(
            o.tolerances.covariance_t_max,
            20,
            &CovarianceGrid::default(),
        )?),
        (None, None) => None,
    };
    let report = compare(
        &CompareInput {
            params,
            n: o.n,
            moments: &moments,
            histogram: &histogram,
            structure: structure.as_ref(),
            g1: g1.as_ref(),
            structure_dt: 1.0,
        },
        o.tolerances,
        &GoeFredholm::default(),
    )?;
    report.write(&o.out)?;
    Ok(report)
}
