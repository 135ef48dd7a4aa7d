//! One PASS/FAIL line per acceptance criterion.
//!
//! `TOOM_ACCEPTANCE=1,4` restricts the run to the listed criteria.
//! Criterion 6 (hours of CPU time) runs only with
//! `TOOM_ACCEPTANCE_FULL_SCALE=1`; `TOOM_ACCEPTANCE_WORDS` sets its word
//! count (default 8).

use std::time::Instant;

use toom_cli::report::{compare, published_target, CompareInput, Tolerances};
use toom_core::estimators::{finite_size_drift, Rescaling};
use toom_core::lattice::{
    biased_word, DyadicProbability, Engine, RingInit, RngState, SpinLattice, TimeMode, Topology,
    LANES,
};
use toom_core::protocol::{ring_check, run_interface, InterfaceData, InterfacePlan, RingCheckPlan};
use toom_core::rmt::{
    g1_curve, tw_goe_moments_with, Airy1Joint, CovarianceGrid, GoeFredholm, TheoryCurve,
};
use toom_core::{kpz_coefficients, spin_current, ModelParams};

const SEED: u64 = 20_240_611;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

fn rel(a: f64, b: f64) -> f64 {
    let s = a.abs().max(b.abs());
    if s == 0.0 {
        0.0
    } else {
        (a - b).abs() / s
    }
}

fn criterion_1() -> Outcome {
    let mut worst = [0.0f64; 4];
    let mut worst_current = 0.0f64;
    let mut worst_fd = [0.0f64; 2];
    for k in 0..200 {
        let lambda = 1e-3 + (1.0 - 1e-3) * k as f64 / 199.0;
        let p = ModelParams::new(lambda).unwrap();
        let c = kpz_coefficients(p);
        worst_current = worst_current.max(spin_current(c.mu0, p).unwrap().abs());
        for (w, r) in worst.iter_mut().zip(c.identity_residuals()) {
            *w = w.max(r.abs());
        }
        // Richardson-extrapolated central differences
        let j = |mu: f64| spin_current(mu, p).unwrap();
        let d1 = |h: f64| (j(c.mu0 + h) - j(c.mu0 - h)) / (2.0 * h);
        let d2 = |h: f64| (j(c.mu0 + h) - 2.0 * j(c.mu0) + j(c.mu0 - h)) / (h * h);
        let h = 1e-3 * (1.0 - c.mu0);
        let v = (4.0 * d1(h / 2.0) - d1(h)) / 3.0;
        let g = (4.0 * d2(h / 2.0) - d2(h)) / 3.0;
        worst_fd[0] = worst_fd[0].max(rel(v, c.v));
        // G vanishes at λ = 1, so its error is measured against a floor of 1e-3
        worst_fd[1] = worst_fd[1].max((g - c.g).abs() / c.g.abs().max(1e-3));
    }
    let ids = worst.iter().all(|&r| r <= 1e-12);
    let pass = worst_current <= 1e-12 && ids && worst_fd.iter().all(|&r| r <= 1e-6);
    outcome(
        pass,
        format!(
            "max |J(mu0)| {worst_current:.1e}, identity residuals {:.1e}/{:.1e}/{:.1e}/{:.1e}, finite-difference v {:.1e}, G {:.1e}",
            worst[0], worst[1], worst[2], worst[3], worst_fd[0], worst_fd[1]
        ),
    )
}

fn criterion_2() -> Outcome {
    let f = GoeFredholm::new(60, 12.0).unwrap();
    let m = tw_goe_moments_with(&f, 160);
    let checks = [
        ("mean", m.mean, -0.6033, 0.0015),
        ("variance", m.variance, 0.4080, 0.0015),
        ("skewness", m.skewness, 0.2931, 0.003),
        ("kurtosis", m.kurtosis, 3.165, 0.005),
    ];
    let mut detail = Vec::new();
    let mut pass = true;
    for (name, x, t, tol) in checks {
        let ok = within(x, t, tol);
        pass &= ok;
        detail.push(format!(
            "{name} {x:.7} (target {t} ± {tol}{})",
            if ok { "" } else { ", OUT" }
        ));
    }
    outcome(pass, detail.join(", "))
}

fn criterion_3(curve: &TheoryCurve, curve_secs: f64) -> Outcome {
    let g0 = curve.rows[0].1;
    let value_ok = within(g0, 0.4080, 0.002);

    let j = Airy1Joint::new(40, 10.0).unwrap();
    let grid: Vec<f64> = (0..9).map(|k| -3.0 + 0.5 * k as f64).collect();
    let mut coherence = 0.0f64;
    for &t in &[0.1, 0.5, 1.0] {
        for &s1 in &grid {
            let f1 = j.marginal_cdf(s1);
            // marginalization
            coherence = coherence.max((j.joint_cdf(t, s1, 9.0) - f1).abs());
            coherence = coherence.max((j.joint_cdf(t, 9.0, s1) - f1).abs());
            for &s2 in &grid {
                let f2 = j.marginal_cdf(s2);
                let f12 = j.joint_cdf(t, s1, s2);
                // Fréchet bounds
                coherence = coherence.max(f12 - f1.min(f2));
                coherence = coherence.max((f1 + f2 - 1.0).max(0.0) - f12);
            }
        }
    }
    for &s1 in &grid {
        for &s2 in &grid {
            let f = j.marginal_cdf(s1.min(s2));
            coherence = coherence.max((j.joint_cdf(0.0, s1, s2) - f).abs());
        }
    }
    let coherent = coherence <= 1e-6;
    let worst_rise = curve
        .rows
        .windows(2)
        .map(|w| w[1].1 - w[0].1)
        .fold(f64::NEG_INFINITY, f64::max);
    let monotone = worst_rise <= 1e-4;
    let fast = curve_secs < 600.0;
    outcome(
        value_ok && coherent && monotone && fast,
        format!(
            "g1(0) {g0:.7} (target 0.4080 ± 0.002{}), coherence error {coherence:.1e}, largest rise {worst_rise:.1e}, {}-point curve in {curve_secs:.0}s",
            if value_ok { "" } else { ", OUT" },
            curve.rows.len()
        ),
    )
}

fn criterion_4() -> Outcome {
    let p = ModelParams::new(0.125).unwrap();
    let plan = RingCheckPlan::default();
    let r = ring_check(&plan, p, SEED).unwrap();
    let j0 = r.current_at_zero;
    let js = r.current_at_stationary;
    let zero_ok = within(j0.value, -1.75, 0.02);
    let stat_ok = js.value.abs() <= 3.0 * js.stderr;
    let corr_ok = r
        .correlations
        .iter()
        .all(|c| c.value.abs() <= 3.0 * c.stderr);
    let var_ok = within(r.variance_rate.value / 2.828, 1.0, 0.05);
    let corr: Vec<String> = r
        .correlations
        .iter()
        .map(|c| format!("{:+.1}σ", c.value / c.stderr))
        .collect();
    outcome(
        zero_ok && stat_ok && corr_ok && var_ok,
        format!(
            "J(0) {:.4} ± {:.4}, J(mu0) {:+.5} ± {:.5}, lag 1-4 correlations {}, variance rate {:.4} ± {:.4} (2.828 ± 5%)",
            j0.value,
            j0.stderr,
            js.value,
            js.stderr,
            corr.join(" "),
            r.variance_rate.value,
            r.variance_rate.stderr
        ),
    )
}

/// Desk-scale schedule: 1954 sample times on each of 8 words give
/// 1 000 448 samples.
fn desk_plan() -> (InterfacePlan, usize) {
    let n = 2000;
    let max_lag = (3.0 * (n as f64).powf(2.0 / 3.0)).ceil() as usize;
    (
        InterfacePlan {
            n,
            warmup: 20 * n as u64,
            sample_period: n as u64 / 8,
            samples: 1954,
            max_lag,
            block_spacing: (n + max_lag) as u64,
            batches: 16,
            record_samples: false,
            init_density: 0.5,
        },
        8,
    )
}

fn rescaled_cumulants(data: &InterfaceData, n: usize) -> ([f64; 4], [f64; 4], f64) {
    let p = ModelParams::new(0.125).unwrap();
    let r = Rescaling::new(n, &kpz_coefficients(p)).unwrap();
    let c = data.moments.cumulants().unwrap().affine(r.center, r.scale);
    let e = c.errors.unwrap();
    let plateau = data.structure.plateau_variance(n).unwrap();
    (
        [
            c.values.mean,
            r.covariance(plateau.value),
            c.values.skewness.unwrap(),
            c.values.kurtosis.unwrap(),
        ],
        [
            e.mean,
            plateau.stderr.map_or(f64::NAN, |s| r.covariance(s)),
            e.skewness,
            e.kurtosis,
        ],
        c.values.variance,
    )
}

fn criterion_5(data: &InterfaceData, secs: f64) -> Outcome {
    let (plan, words) = desk_plan();
    let (v, e, marginal) = rescaled_cumulants(data, plan.n);
    let checks = [
        ("mean", within(v[0], -0.452, 0.04)),
        ("variance", (0.42..=0.46).contains(&v[1])),
        ("skewness", within(v[2], 0.2931, 0.1 * 0.2931)),
        ("kurtosis", within(v[3], 3.165, 0.02 * 3.165)),
    ];
    let out: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    outcome(
        out.is_empty() && secs <= 1800.0,
        format!(
            "{} samples on {words} words in {secs:.0}s: mean {:.4} ± {:.4}, variance (plateau) {:.4} ± {:.4} [marginal {:.4}], skewness {:.4} ± {:.4}, kurtosis {:.4} ± {:.4}{}",
            data.moments.count(),
            v[0],
            e[0],
            v[1],
            e[1],
            marginal,
            v[2],
            e[2],
            v[3],
            e[3],
            if out.is_empty() { String::new() } else { format!("; outside: {}", out.join(", ")) }
        ),
    )
}

fn criterion_6() -> Option<Outcome> {
    if std::env::var("TOOM_ACCEPTANCE_FULL_SCALE").ok().as_deref() != Some("1") {
        return None;
    }
    let words: usize = std::env::var("TOOM_ACCEPTANCE_WORDS")
        .ok()
        .and_then(|w| w.parse().ok())
        .unwrap_or(8);
    let n = 10_000;
    let samples = 5_000_000u64.div_ceil(64 * words as u64);
    let plan = InterfacePlan::published(n, samples);
    let p = ModelParams::new(0.125).unwrap();
    let data = run_interface(plan, p, SEED, words, TimeMode::Exact).unwrap();
    let (v, e, _) = rescaled_cumulants(&data, n);
    let (_, target) = published_target(n);
    let z: Vec<f64> = (0..4).map(|k| (v[k] - target[k]) / e[k]).collect();
    Some(outcome(
        z.iter().all(|z| z.abs() <= 3.0),
        format!(
            "mean {:.4}, variance {:.4}, skewness {:.4}, kurtosis {:.4}; deviations {:+.1}σ {:+.1}σ {:+.1}σ {:+.1}σ",
            v[0], v[1], v[2], v[3], z[0], z[1], z[2], z[3]
        ),
    ))
}

fn criterion_7(data: &InterfaceData, curve: &TheoryCurve) -> Outcome {
    let (plan, _) = desk_plan();
    let p = ModelParams::new(0.125).unwrap();
    let report = compare(
        &CompareInput {
            params: p,
            n: plan.n,
            moments: &data.moments,
            histogram: &data.histogram,
            structure: Some(&data.structure),
            g1: Some(curve),
            structure_dt: 1.0,
        },
        Tolerances::default(),
        &GoeFredholm::default(),
    )
    .unwrap();
    let worst = report
        .covariance
        .iter()
        .filter(|r| r.t_resc <= 1.0)
        .filter_map(|r| Some((r.t_resc, r.cov_resc, r.g1?, r.stderr?)))
        .max_by(|a, b| ((a.1 - a.2).abs() - 3.0 * a.3).total_cmp(&((b.1 - b.2).abs() - 3.0 * b.3)))
        .unwrap();
    let tail = report.tail.unwrap();
    let cov_ok = report.covariance_passes().unwrap_or(false);
    let tail_ok = report.tail_passes().unwrap_or(false);
    outcome(
        cov_ok && tail_ok,
        format!(
            "worst point t_resc {:.3}: cov {:.4} vs g1 {:.4} (σ {:.4}), excess over 3σ+0.02 {:+.4}; lags >= {}: max |cov| {:.1e}, max |cov|/σ {:.2}, mean σ {:.1e}",
            worst.0,
            worst.1,
            worst.2,
            worst.3,
            report.covariance_excess.unwrap(),
            tail.first_lag,
            tail.max_abs,
            tail.max_z,
            tail.mean_stderr
        ),
    )
}

fn reference_event(spins: &mut [i8], ring: bool, site: usize, accept_plus: bool) {
    let s = spins[site];
    if s == 1 && !accept_plus {
        return;
    }
    let n = spins.len();
    let steps = if ring { n - 1 } else { n - 1 - site };
    match (1..=steps).map(|k| (site + k) % n).find(|&j| spins[j] != s) {
        Some(j) => {
            spins[site] = -s;
            spins[j] = s;
        }
        None if !ring => spins[site] = -s,
        None => {}
    }
}

fn criterion_8() -> Outcome {
    let p = ModelParams::new(0.125).unwrap();
    let bias = DyadicProbability::new(0.125).unwrap();
    let mut notes = Vec::new();

    // scalar oracle, every lane, 10⁵ events per topology on n = 64
    let mut oracle_ok = true;
    for topology in [Topology::HalfLine, Topology::Ring] {
        let mut init = RngState::new(SEED, 1);
        let words: Vec<u64> = (0..64).map(|_| init.next_word()).collect();
        let lattice = SpinLattice::from_words(topology, words.clone(), 0.0).unwrap();
        let mut e = Engine::from_parts(lattice, RngState::new(SEED, 2), p, TimeMode::Exact);
        let mut rng = RngState::new(SEED, 2);
        let mut lanes: Vec<Vec<i8>> = (0..LANES)
            .map(|l| {
                words
                    .iter()
                    .map(|w| if (w >> l) & 1 == 1 { -1 } else { 1 })
                    .collect()
            })
            .collect();
        for _ in 0..100_000 {
            rng.exponential();
            let site = rng.below(64);
            let b = biased_word(&mut rng, bias);
            for (l, s) in lanes.iter_mut().enumerate() {
                reference_event(s, topology == Topology::Ring, site, (b >> l) & 1 == 1);
            }
            e.attempt_event();
        }
        oracle_ok &= (0..LANES).all(|l| (0..64).all(|i| e.lattice().spin(i, l) == lanes[l][i]));
    }
    notes.push(format!(
        "oracle {}",
        if oracle_ok { "identical" } else { "DIFFERS" }
    ));

    // ring conservation over 10⁶ events
    let mut ring =
        Engine::new_ring(512, p, SEED, 3, RingInit::Bernoulli { magnetization: 0.3 }).unwrap();
    let before = ring.lane_magnetizations();
    let fired = ring.advance_until(2000.0);
    let conserved =
        ring.lane_magnetizations() == before && ring.lattice().recount_magnetizations() == before;
    notes.push(format!(
        "ring conservation over {fired} events {}",
        if conserved { "exact" } else { "BROKEN" }
    ));

    // single-site chain
    let lattice = SpinLattice::from_words(Topology::HalfLine, vec![0], 0.0).unwrap();
    let mut e = Engine::from_parts(lattice, RngState::new(SEED, 4), p, TimeMode::Exact);
    let mut batches = Vec::new();
    let mut t = 20.0;
    for _ in 0..200 {
        let mut plus = 0u64;
        for _ in 0..100 {
            t += 1.0;
            e.advance_until(t);
            plus += 64 - e.lattice().words()[0].count_ones() as u64;
        }
        batches.push(plus as f64 / 6400.0);
    }
    let k = batches.len() as f64;
    let mean = batches.iter().sum::<f64>() / k;
    let se = (batches.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0) / k).sqrt();
    let chain_ok = (mean - 1.0 / 1.125).abs() <= 3.0 * se;
    notes.push(format!("P(+) {mean:.5} ± {se:.5} vs {:.5}", 1.0 / 1.125));

    // event counts per unit time on n = 1000
    let mut e = Engine::new_halfline(1000, p, SEED, 5, 0.5).unwrap();
    let counts: Vec<f64> = (1..=10_000)
        .map(|k| e.advance_until(k as f64) as f64)
        .collect();
    let k = counts.len() as f64;
    let m = counts.iter().sum::<f64>() / k;
    let var = counts.iter().map(|c| (c - m).powi(2)).sum::<f64>() / (k - 1.0);
    let poisson_ok = (m - 1000.0).abs() <= 3.0 * (1000.0 / k).sqrt()
        && (var / m - 1.0).abs() <= 3.0 * (2.0 / k).sqrt();
    notes.push(format!("counts mean {m:.2}, variance/mean {:.4}", var / m));

    // checkpoint round trip
    let mut a = Engine::new_halfline(500, p, SEED, 6, 0.5).unwrap();
    a.advance_until(100.0);
    let mut b = Engine::restore(&a.checkpoint(), p, TimeMode::Exact).unwrap();
    let events = a.advance_until(2100.0);
    b.advance_until(2100.0);
    let ckpt_ok =
        a.lattice().words() == b.lattice().words() && a.rng().to_bytes() == b.rng().to_bytes();
    notes.push(format!(
        "checkpoint resume over {events} events {}",
        if ckpt_ok { "bit-exact" } else { "DIVERGED" }
    ));

    outcome(
        oracle_ok && conserved && chain_ok && poisson_ok && ckpt_ok,
        notes.join(", "),
    )
}

fn criterion_9(results: &[(usize, Option<bool>)]) -> Outcome {
    let column = [
        (1e4, -0.5198),
        (2e4, -0.5344),
        (5e4, -0.5496),
        (1e5, -0.5612),
    ];
    let fit = finite_size_drift(&column, -0.6033).unwrap();
    let slope_ok = (fit.slope + 1.0 / 3.0).abs() <= 3.0 * fit.slope_stderr + 0.05;
    let status = |id: usize| match results.iter().find(|r| r.0 == id).and_then(|r| r.1) {
        Some(true) => "pass",
        Some(false) => "fail",
        None => "not run",
    };
    outcome(
        fit.monotone && slope_ok,
        format!(
            "mean deficit monotone {}, log-log slope {:.3} ± {:.3} (expected -1/3); criteria 2/5/6: {}/{}/{}",
            fit.monotone,
            fit.slope,
            fit.slope_stderr,
            status(2),
            status(5),
            status(6)
        ),
    )
}

type Results = Vec<(usize, Option<bool>)>;

fn record(results: &mut Results, id: usize, start: Instant, o: Option<Outcome>) {
    let secs = start.elapsed().as_secs_f64();
    match o {
        Some(o) => {
            println!(
                "criterion {id}: {} {} [{secs:.1}s]",
                if o.pass { "PASS" } else { "FAIL" },
                o.detail
            );
            results.push((id, Some(o.pass)));
        }
        None => {
            println!("criterion {id}: SKIP");
            results.push((id, None));
        }
    }
}

fn main() {
    let selected: Option<Vec<usize>> = std::env::var("TOOM_ACCEPTANCE")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let wanted = |id: usize| selected.as_ref().map_or(true, |s| s.contains(&id));
    let mut results: Results = Vec::new();

    if wanted(1) {
        let t = Instant::now();
        record(&mut results, 1, t, Some(criterion_1()));
    }
    if wanted(2) {
        let t = Instant::now();
        record(&mut results, 2, t, Some(criterion_2()));
    }
    let mut curve = None;
    let mut curve_secs = 0.0;
    if wanted(3) || wanted(7) {
        let t = Instant::now();
        curve = Some(g1_curve(1.5, 30, &CovarianceGrid::default()).unwrap());
        curve_secs = t.elapsed().as_secs_f64();
    }
    if wanted(3) {
        let t = Instant::now();
        let o = criterion_3(curve.as_ref().unwrap(), curve_secs);
        record(&mut results, 3, t, Some(o));
    }
    if wanted(4) {
        let t = Instant::now();
        record(&mut results, 4, t, Some(criterion_4()));
    }
    if wanted(5) || wanted(7) {
        let t = Instant::now();
        let (plan, words) = desk_plan();
        let data = run_interface(
            plan,
            ModelParams::new(0.125).unwrap(),
            SEED,
            words,
            TimeMode::Exact,
        )
        .unwrap();
        let secs = t.elapsed().as_secs_f64();
        if wanted(5) {
            record(&mut results, 5, t, Some(criterion_5(&data, secs)));
        }
        if wanted(7) {
            let t = Instant::now();
            record(
                &mut results,
                7,
                t,
                Some(criterion_7(&data, curve.as_ref().unwrap())),
            );
        }
    }
    if wanted(6) {
        let t = Instant::now();
        record(&mut results, 6, t, criterion_6());
    }
    if wanted(8) {
        let t = Instant::now();
        record(&mut results, 8, t, Some(criterion_8()));
    }
    if wanted(9) {
        let t = Instant::now();
        let o = criterion_9(&results);
        record(&mut results, 9, t, Some(o));
    }

    let failed: Vec<String> = results
        .iter()
        .filter(|r| r.1 == Some(false))
        .map(|r| r.0.to_string())
        .collect();
    let passed = results.iter().filter(|r| r.1 == Some(true)).count();
    let skipped = results.iter().filter(|r| r.1.is_none()).count();
    println!(
        "acceptance: {passed} passed, {} failed, {skipped} skipped",
        failed.len()
    );
    if !failed.is_empty() {
        println!("failed criteria: {}", failed.join(", "));
        std::process::exit(1);
    }
}
