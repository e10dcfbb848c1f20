//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits nonzero if any fails.

use std::f64::consts::PI;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use icapm_core::data::{ModelParams, ParameterLayout};
use icapm_core::garch::{covariance_step, indicator_innovations, symmetric_covariance_step, GarchParams};
use icapm_core::inference::{hp_filter, sandwich_covariance, Hypothesis};
use icapm_core::qml::{
    estimate, fd_step, gaussian_log_density, per_period_scores, score_gradient, BhhhOptions, EstimationOptions,
    QmlProblem,
};
use icapm_core::simulation::{illustrative_theta, simulate_panel, InstrumentProcess, SimulatedPanel, SimulationConfig};
use icapm_core::stats::{annualized_mean, chi_squared_sf, jarque_bera};
use icapm_core::{ExecMode, InstrumentSet, ModelSpec, ReturnsPanel, Variant};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde_json::Value;

type Check = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(elapsed: Duration, budget: Duration, result: Check) -> Check {
    let detail = |d: String| format!("{d}; {:.2}s of {:.0}s budget", elapsed.as_secs_f64(), budget.as_secs_f64());
    match result {
        Ok(d) if elapsed <= budget => Ok(detail(d)),
        Ok(d) => Err(detail(format!("{d}; over time budget"))),
        Err(d) => Err(detail(d)),
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn names(n: usize) -> Vec<String> {
    (1..n).map(|i| format!("A{i}")).collect()
}

// ---------------------------------------------------------------- structure

fn structure() -> Check {
    let mut problems = Vec::new();
    let mut counts = Vec::new();
    let mut layouts = Vec::new();
    for (variant, expected) in [(Variant::Asymmetric, 56), (Variant::Symmetric, 46), (Variant::Augmented, 72)] {
        let spec = ModelSpec::new(variant, 5, 5, 4).map_err(|e| e.to_string())?;
        let layout = ParameterLayout::new(&spec).map_err(|e| e.to_string())?;
        counts.push(format!("{}={}", variant.as_str(), layout.len()));
        if layout.len() != expected {
            problems.push(format!("{variant:?} has {} parameters, expected {expected}", layout.len()));
        }
        layouts.push((variant, layout));
    }
    let lr_df = layouts[0].1.len() - layouts[1].1.len();
    if lr_df != 10 {
        problems.push(format!("LR df {lr_df}, expected 10"));
    }
    let locals = names(5);
    let cases = [
        (Variant::Asymmetric, Hypothesis::WorldPriceConstant, 4),
        (Variant::Asymmetric, Hypothesis::DomesticPriceZero("A1".into()), 4),
        (Variant::Asymmetric, Hypothesis::DomesticPriceZero("A4".into()), 4),
        (Variant::Asymmetric, Hypothesis::AllDomesticZero, 16),
        (Variant::Asymmetric, Hypothesis::SZero, 5),
        (Variant::Asymmetric, Hypothesis::ZZero, 5),
        (Variant::Augmented, Hypothesis::LocalCoefficientsZero, 12),
    ];
    let mut dfs = Vec::new();
    for (variant, h, expected) in cases {
        let layout = &layouts.iter().find(|(v, _)| *v == variant).unwrap().1;
        let df = h.indices(layout, &locals).map_err(|e| e.to_string())?.len();
        dfs.push(format!("{h}={df}"));
        if df != expected {
            problems.push(format!("{h} df {df}, expected {expected}"));
        }
    }
    let detail = format!("{}; LR df {lr_df}; Wald {}", counts.join(" "), dfs.join(" "));
    if problems.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{detail}; {}", problems.join("; ")))
    }
}

// ---------------------------------------------------------------- PSD

fn random_garch(n: usize, rng: &mut ChaCha8Rng, asymmetric: bool) -> GarchParams {
    // A zero intercept leaves only the rank-deficient ARCH and GARCH terms.
    let intercept = rng.random_bool(0.7);
    let c = DMatrix::from_fn(n, n, |i, j| if j <= i && intercept { normal(rng) } else { 0.0 });
    let mut v = |scale: f64| DVector::from_fn(n, |_, _| scale * rng.random_range(-1.0..1.0));
    let (a, b) = (v(1.0), v(1.0));
    let (s, z) = if asymmetric { (v(1.0), v(1.0)) } else { (DVector::zeros(n), DVector::zeros(n)) };
    GarchParams { c, a, b, s, z }
}

fn random_psd(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let rank = rng.random_range(1..=n);
    let m = DMatrix::from_fn(n, rank, |_, _| normal(rng));
    &m * m.transpose()
}

fn psd_invariant() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_601);
    let mut worst = f64::INFINITY;
    let mut failures = 0;
    let trials = 10_000;
    for _ in 0..trials {
        let n = rng.random_range(2..=6);
        let params = random_garch(n, &mut rng, true);
        let h_prev = random_psd(n, &mut rng);
        let eps = DVector::from_fn(n, |_, _| 2.0 * normal(&mut rng));
        let (xi, eta) = indicator_innovations(&eps, &h_prev.diagonal().map(|v| v.max(1e-12)))
            .map_err(|e| e.to_string())?;
        let h = covariance_step(&h_prev, &eps, &xi, &eta, &params).map_err(|e| e.to_string())?;
        let scale = h.abs().max().max(1.0);
        let min = h.symmetric_eigen().eigenvalues.min() / scale;
        worst = worst.min(min);
        if min < -1e-8 {
            failures += 1;
        }
    }
    ensure(
        failures == 0,
        format!("{trials} random steps, {failures} below -1e-8, worst scaled min eigenvalue {worst:.3e}"),
    )
}

// ---------------------------------------------------------------- likelihood oracle

/// Straight-line evaluation of the model likelihood: every Hadamard term
/// element by element, means from the pricing equations, and the Gaussian
/// density through a fresh Cholesky factorization.
fn naive_loglik(panel: &ReturnsPanel, inst: &InstrumentSet, params: &ModelParams, h_init: &DMatrix<f64>) -> f64 {
    let (t_len, n) = panel.values().shape();
    let world = panel.world_index();
    let g = &params.garch;
    let p = &params.prices;
    let cc = g.c.transpose() * &g.c;
    let exp = |x: f64| x.clamp(-50.0, 50.0).exp();
    let mut h = h_init.clone();
    let mut prev: Option<(Vec<f64>, Vec<f64>, Vec<f64>)> = None;
    let mut total = 0.0;
    for t in 0..t_len {
        if let Some((e, x, y)) = &prev {
            let mut next = DMatrix::zeros(n, n);
            for i in 0..n {
                for j in 0..n {
                    next[(i, j)] = cc[(i, j)]
                        + (g.a[i] * g.a[j]) * (e[i] * e[j])
                        + (g.b[i] * g.b[j]) * h[(i, j)]
                        + (g.s[i] * g.s[j]) * (x[i] * x[j])
                        + (g.z[i] * g.z[j]) * (y[i] * y[j]);
                }
            }
            h = next;
        }
        let zg = inst.global();
        let delta_w = exp((0..zg.ncols()).map(|k| zg[(t, k)] * p.kappa_world[k]).sum());
        let mut mu = vec![0.0; n];
        let mut local = 0;
        for i in 0..n {
            let h_iw = h[(i, world)];
            if i == world {
                mu[i] = delta_w * h[(world, world)];
                continue;
            }
            let zl = &inst.local()[local];
            let kappa = &p.kappa_local[local];
            let delta_i = exp((0..zl.ncols()).map(|k| zl[(t, k)] * kappa[k]).sum());
            let q = (h[(i, i)] - h_iw * h_iw / h[(world, world)]).max(0.0);
            mu[i] = delta_w * h_iw + delta_i * q;
            if let (Some(alpha), Some(phi)) = (&p.alpha, &p.phi) {
                mu[i] += alpha[local];
                for k in 1..zl.ncols() {
                    mu[i] += phi[local][k - 1] * zl[(t, k)];
                }
            }
            local += 1;
        }
        let e: Vec<f64> = (0..n).map(|i| panel.values()[(t, i)] - mu[i]).collect();
        let x: Vec<f64> = e.iter().map(|&v| if v < 0.0 { v } else { 0.0 }).collect();
        let y: Vec<f64> = (0..n).map(|i| if e[i].abs() > h[(i, i)].sqrt() { e[i] } else { 0.0 }).collect();
        let chol = h.clone().cholesky().expect("positive definite covariance");
        let logdet: f64 = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let ev = DVector::from_column_slice(&e);
        let quad = ev.dot(&chol.solve(&ev));
        total += -0.5 * (n as f64 * (2.0 * PI).ln() + logdet + quad);
        prev = Some((e, x, y));
    }
    total
}

fn likelihood_oracle() -> Check {
    let one = gaussian_log_density(&DVector::from_element(1, 0.0), &DMatrix::identity(1, 1)).map_err(|e| e.to_string())?;
    let two = gaussian_log_density(&DVector::from_element(2, 1.0), &DMatrix::identity(2, 2)).map_err(|e| e.to_string())?;
    let closed = (one + 0.9189).abs() < 1e-4 && (one + 0.5 * (2.0 * PI).ln()).abs() < 1e-6
        && (two + 2.8379).abs() < 1e-4
        && (two + (2.0 * PI).ln() + 1.0).abs() < 1e-6;

    let mut worst = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for variant in [Variant::Symmetric, Variant::Asymmetric, Variant::Augmented] {
        let spec = ModelSpec::new(variant, 3, 2, 2).map_err(|e| e.to_string())?;
        let layout = ParameterLayout::new(&spec).map_err(|e| e.to_string())?;
        let mut theta = illustrative_theta(&spec).map_err(|e| e.to_string())?;
        for v in &mut theta[layout.kappa_world.start + 1..layout.kappa_world.end] {
            *v = normal(&mut rng);
        }
        for r in &layout.kappa_local {
            theta[r.start + 1] = normal(&mut rng);
        }
        for k in layout.alpha.iter().chain(&layout.phi).flat_map(|r| r.clone()) {
            theta[k] = 0.01 * normal(&mut rng);
        }
        let cfg = SimulationConfig::new(theta.clone(), spec, 50, 300 + variant as u64)
            .with_instruments(InstrumentProcess::IidGaussian { scale: 0.1 });
        let sim = simulate_panel(&cfg).map_err(|e| e.to_string())?;
        // Evaluate away from the truth so the test covers a generic point.
        for k in layout.garch_indices() {
            theta[k] *= 1.0 + 0.05 * normal(&mut rng);
        }
        let problem = QmlProblem::new(&sim.panel, &sim.instruments, spec).map_err(|e| e.to_string())?;
        let fused = problem.log_likelihood(&theta).map_err(|e| e.to_string())?;
        if fused.penalty_applied != 0.0 {
            return Err("oracle point is penalized".into());
        }
        let params = layout.unpack(&theta).map_err(|e| e.to_string())?;
        let naive = naive_loglik(&sim.panel, &sim.instruments, &params, problem.h_init());
        worst = worst.max((fused.total_loglik - naive).abs());
    }
    ensure(
        closed && worst <= 1e-10,
        format!("closed forms {one:.6} and {two:.6}; fused vs naive max |Δ| {worst:.2e} over 3 variants (N=3, T=50)"),
    )
}

// ---------------------------------------------------------------- gradient

fn recovery_truth() -> (ModelSpec, Vec<f64>) {
    let spec = ModelSpec::new(Variant::Asymmetric, 2, 2, 2).unwrap();
    let l = ParameterLayout::new(&spec).unwrap();
    let mut theta = vec![0.0; l.len()];
    theta[l.kappa_world.start] = 3.5f64.ln();
    theta[l.kappa_world.start + 1] = 1.0;
    theta[l.kappa_local[0].start] = 2.0f64.ln();
    theta[l.kappa_local[0].start + 1] = -1.0;
    theta[l.c_index(0, 0)] = 0.018;
    theta[l.c_index(1, 0)] = 0.008;
    theta[l.c_index(1, 1)] = 0.016;
    for (r, v) in [
        (l.a.clone(), [0.3, 0.28]),
        (l.b.clone(), [0.8, 0.82]),
        (l.s.clone().unwrap(), [0.3, 0.25]),
        (l.z.clone().unwrap(), [0.3, 0.25]),
    ] {
        theta[r.start] = v[0];
        theta[r.start + 1] = v[1];
    }
    (spec, theta)
}

fn simulate(spec: ModelSpec, theta: &[f64], periods: usize, seed: u64) -> icapm_core::Result<SimulatedPanel> {
    let cfg = SimulationConfig::new(theta.to_vec(), spec, periods, seed)
        .with_instruments(InstrumentProcess::IidGaussian { scale: 0.1 });
    simulate_panel(&cfg)
}

fn gradient_check() -> Check {
    let (spec, theta) = recovery_truth();
    let sim = simulate(spec, &theta, 100, 8).map_err(|e| e.to_string())?;
    let problem = QmlProblem::new(&sim.panel, &sim.instruments, spec).map_err(|e| e.to_string())?;
    let scores = per_period_scores(&problem, &theta, ExecMode::Parallel).map_err(|e| e.to_string())?;
    let g = score_gradient(&scores);
    let total = |th: &[f64]| problem.log_likelihood(th).map(|r| r.total_loglik);
    let mut worst = 0.0f64;
    for k in 0..theta.len() {
        let h = fd_step(theta[k]);
        let (mut up, mut down) = (theta.clone(), theta.clone());
        up[k] += h;
        down[k] -= h;
        let fd = (total(&up).map_err(|e| e.to_string())? - total(&down).map_err(|e| e.to_string())?) / (2.0 * h);
        worst = worst.max((fd - g[k]).abs());
    }
    ensure(
        worst <= 1e-8,
        format!("K={} coordinates, max |Σ scores − FD gradient| {worst:.2e}", theta.len()),
    )
}

// ---------------------------------------------------------------- recovery

fn recovery() -> Check {
    let (spec, truth) = recovery_truth();
    let layout = ParameterLayout::new(&spec).unwrap();
    let garch = layout.garch_indices();
    let labels = layout.labels(&["A1".into(), "World".into()], &["c".into(), "g".into()], &["c".into(), "l".into()]);
    let seeds = 50u64;
    let outcomes: Vec<Result<Vec<bool>, String>> = (0..seeds)
        .into_par_iter()
        .map(|seed| {
            let sim = simulate(spec, &truth, 2000, 10_000 + seed).map_err(|e| e.to_string())?;
            let problem = QmlProblem::new(&sim.panel, &sim.instruments, spec).map_err(|e| e.to_string())?;
            let result = estimate(&problem, &EstimationOptions::default()).map_err(|e| e.to_string())?;
            let problem = problem.with_h_init(result.h_init.clone()).map_err(|e| e.to_string())?;
            let cov = sandwich_covariance(&problem, &result.theta, &result.scores, ExecMode::Parallel)
                .map_err(|e| e.to_string())?;
            let se = cov.standard_errors();
            Ok(garch.iter().map(|&k| (result.theta[k] - truth[k]).abs() <= 3.0 * se[k]).collect())
        })
        .collect();
    let mut hits = vec![0usize; garch.len()];
    let mut errors = Vec::new();
    for o in outcomes {
        match o {
            Ok(cover) => {
                for (h, c) in hits.iter_mut().zip(cover) {
                    *h += c as usize;
                }
            }
            Err(e) => errors.push(e),
        }
    }
    let min = *hits.iter().min().unwrap();
    let worst = garch[hits.iter().position(|&h| h == min).unwrap()];
    let detail = format!(
        "{seeds} seeds, N=2, T=2000; lowest coverage {min}/{seeds} ({}); {} failed fits",
        labels[worst],
        errors.len()
    );
    ensure(errors.is_empty() && min as f64 >= 0.9 * seeds as f64, detail)
}

// ---------------------------------------------------------------- symmetric reduction

fn symmetric_reduction() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4242);
    let mut mismatches = 0;
    for _ in 0..100 {
        let n = rng.random_range(2..=6);
        let mut params = random_garch(n, &mut rng, false);
        params.a *= 0.6;
        params.b *= 0.6;
        let mut h = random_psd(n, &mut rng) + DMatrix::identity(n, n) * 0.1;
        let mut h_sym = h.clone();
        for _ in 0..20 {
            let eps = DVector::from_fn(n, |_, _| normal(&mut rng));
            let (xi, eta) = indicator_innovations(&eps, &h.diagonal()).map_err(|e| e.to_string())?;
            h = covariance_step(&h, &eps, &xi, &eta, &params).map_err(|e| e.to_string())?;
            h_sym = symmetric_covariance_step(&h_sym, &eps, &params.c, &params.a, &params.b);
            if h != h_sym {
                mismatches += 1;
                break;
            }
        }
    }
    ensure(
        mismatches == 0,
        format!("100 random instances × 20 chained steps, {mismatches} not bit-identical"),
    )
}

// ---------------------------------------------------------------- LR sanity

const CHI2_10_95: f64 = 18.307;

fn lr_statistic(dgp: Variant, seed: u64) -> Result<f64, String> {
    let e = |x: icapm_core::Error| x.to_string();
    let spec = ModelSpec::new(Variant::Asymmetric, 5, 1, 1).map_err(e)?;
    let sym_spec = spec.with_variant(Variant::Symmetric);
    let truth = illustrative_theta(&spec.with_variant(dgp)).map_err(e)?;
    let cfg = SimulationConfig::new(truth, spec.with_variant(dgp), 1000, seed).with_instruments(InstrumentProcess::Constant);
    let sim = simulate_panel(&cfg).map_err(e)?;
    let bhhh = BhhhOptions {
        max_iterations: 150,
        relative_tolerance: 1e-7,
        ..Default::default()
    };
    let sym_problem = QmlProblem::new(&sim.panel, &sim.instruments, sym_spec).map_err(e)?;
    let sym = estimate(
        &sym_problem,
        &EstimationOptions {
            simplex_budget: Some(1),
            theta0: Some(illustrative_theta(&sym_spec).map_err(e)?),
            bhhh,
            ..Default::default()
        },
    )
    .map_err(e)?;
    let asym_problem = QmlProblem::new(&sim.panel, &sim.instruments, spec).map_err(e)?;
    let layout = asym_problem.layout().clone();
    let mut start = sym_problem.layout().embed(&sym.theta, &layout).map_err(e)?;
    for k in layout.s.clone().unwrap().chain(layout.z.clone().unwrap()) {
        start[k] = 0.01;
    }
    let asym = estimate(
        &asym_problem,
        &EstimationOptions {
            simplex_budget: Some(1),
            theta0: Some(start),
            bhhh,
            ..Default::default()
        },
    )
    .map_err(e)?;
    Ok(2.0 * (asym.loglik.max(sym.loglik) - sym.loglik))
}

fn rejection_rate(dgp: Variant, seeds: std::ops::Range<u64>) -> (usize, usize, Vec<String>) {
    let results: Vec<Result<f64, String>> = seeds.into_par_iter().map(|s| lr_statistic(dgp, s)).collect();
    let mut rejected = 0;
    let mut ok = 0;
    let mut errors = Vec::new();
    for r in results {
        match r {
            Ok(lr) => {
                ok += 1;
                rejected += (lr > CHI2_10_95) as usize;
            }
            Err(e) => errors.push(e),
        }
    }
    (rejected, ok, errors)
}

fn lr_sanity() -> Check {
    let (size_rej, size_n, size_err) = rejection_rate(Variant::Symmetric, 0..100);
    let (power_rej, power_n, power_err) = rejection_rate(Variant::Asymmetric, 1000..1100);
    let size = size_rej as f64 / 100.0;
    let power = power_rej as f64 / 100.0;
    let detail = format!(
        "N=5, T=1000: size {size_rej}/{size_n} ({:.0}%), power {power_rej}/{power_n} ({:.0}%), {} failed fits",
        100.0 * size,
        100.0 * power,
        size_err.len() + power_err.len()
    );
    // A failed fit counts against the criterion: it is neither a valid
    // acceptance under the null nor a rejection under the alternative.
    ensure(
        size_err.is_empty() && size <= 0.15 && power >= 0.80,
        detail,
    )
}

// ---------------------------------------------------------------- small oracles

fn chi_squared() -> Check {
    let p = chi_squared_sf(29.646, 10);
    let q = chi_squared_sf(CHI2_10_95, 10);
    ensure(
        (0.0005..=0.0015).contains(&p) && (q - 0.05).abs() < 1e-4,
        format!("p(29.646, 10) = {p:.6}; p(18.307, 10) = {q:.6}"),
    )
}

fn hp() -> Check {
    let e = |x: icapm_core::Error| x.to_string();
    let t = 240;
    let constant = vec![3.7; t];
    let line: Vec<f64> = (0..t).map(|i| 0.5 - 0.013 * i as f64).collect();
    let max_abs = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let c1 = max_abs(&hp_filter(&constant, 14_400.0).map_err(e)?.cycle);
    let c2 = max_abs(&hp_filter(&line, 14_400.0).map_err(e)?.cycle);

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let noisy: Vec<f64> = (0..t).map(|i| 1.0 + 0.02 * i as f64 + normal(&mut rng)).collect();
    let trend = hp_filter(&noisy, 1e12).map_err(e)?.trend;
    let n = t as f64;
    let xm = (n - 1.0) / 2.0;
    let ym = noisy.iter().sum::<f64>() / n;
    let sxy: f64 = noisy.iter().enumerate().map(|(i, y)| (i as f64 - xm) * (y - ym)).sum();
    let sxx: f64 = (0..t).map(|i| (i as f64 - xm).powi(2)).sum();
    let slope = sxy / sxx;
    let range = noisy.iter().cloned().fold(f64::MIN, f64::max) - noisy.iter().cloned().fold(f64::MAX, f64::min);
    let dev = (0..t)
        .map(|i| (trend[i] - (ym + slope * (i as f64 - xm))).abs())
        .fold(0.0f64, f64::max)
        / range;
    ensure(
        c1 <= 1e-10 && c2 <= 1e-10 && dev < 1e-3,
        format!("constant cycle {c1:.1e}, linear cycle {c2:.1e}, λ=1e12 trend vs OLS line {dev:.1e} of range"),
    )
}

fn descriptive() -> Check {
    let jb = jarque_bera(407, 0.51, 5.38);
    let rel = (jb / 499.76 - 1.0).abs();
    let annual = annualized_mean(&[0.01; 36]);
    ensure(
        rel < 0.05 && annual == 12.0,
        format!("JB(S=0.51, K=5.38, T=407) = {jb:.2} ({:.2}% from 499.76); 0.01/month → {annual}%/year", 100.0 * rel),
    )
}

// ---------------------------------------------------------------- pipeline smoke

struct Run {
    code: i32,
    stderr: String,
}

fn icapm(dir: &Path, args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_icapm"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("launch icapm");
    Run {
        code: out.status.code().unwrap_or(-1),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

fn read_json(path: &Path) -> Result<Value, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn pipeline() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let dir = tmp.path();
    std::fs::write(
        dir.join("sim.toml"),
        "seed = 11\n[simulation]\nperiods = 407\nassets = [\"Singapore\", \"UK\", \"HongKong\", \"US\", \"World\"]\n",
    )
    .map_err(|e| e.to_string())?;
    let steps: Vec<(&str, Vec<&str>, Vec<&str>)> = vec![
        ("simulate", vec!["simulate", "--config", "sim.toml", "--out", "sim"], vec!["sim/truth.json", "sim/data.toml"]),
        (
            "describe",
            vec!["describe", "--config", "sim/data.toml", "--out", "describe"],
            vec!["describe/describe.json", "describe/correlations.csv", "describe/cross_correlations.csv"],
        ),
        (
            "estimate symmetric",
            vec!["estimate", "--config", "sim/data.toml", "--model", "symmetric", "--out", "symmetric"],
            vec!["symmetric/fit.json", "symmetric/report.json"],
        ),
        (
            "estimate asymmetric",
            vec!["estimate", "--config", "sim/data.toml", "--model", "asymmetric", "--emit-prices", "--out", "asymmetric"],
            vec!["asymmetric/report.json", "asymmetric/prices.csv", "asymmetric/conditional_correlations.csv"],
        ),
        (
            "estimate augmented",
            vec!["estimate", "--config", "sim/data.toml", "--model", "augmented", "--out", "augmented"],
            vec!["augmented/report.json"],
        ),
        (
            "test LR",
            vec!["test", "--fit", "asymmetric/fit.json", "--restricted-fit", "symmetric/fit.json", "--out", "lr"],
            vec!["lr/tests.json"],
        ),
        (
            "test augmented",
            vec![
                "test",
                "--fit",
                "augmented/fit.json",
                "--hypothesis",
                "country-constants-zero",
                "--hypothesis",
                "local-coefficients-zero",
                "--out",
                "robust",
            ],
            vec!["robust/tests.json"],
        ),
        (
            "estimate 1970-02:1987-12",
            vec!["estimate", "--config", "sim/data.toml", "--window", "1970-02:1987-12", "--out", "early"],
            vec!["early/report.json"],
        ),
        (
            "estimate 1988-01:2003-12",
            vec!["estimate", "--config", "sim/data.toml", "--window", "1988-01:2003-12", "--out", "late"],
            vec!["late/report.json"],
        ),
        (
            "correlations",
            vec!["correlations", "--fit", "asymmetric/fit.json", "--out", "correlations"],
            vec!["correlations/conditional_correlations.csv", "correlations/correlations.json"],
        ),
        ("hp", vec!["hp", "--fit", "asymmetric/fit.json", "--out", "hp"], vec!["hp/hp.csv", "hp/hp.json"]),
    ];
    let mut log = Vec::new();
    let mut problems = Vec::new();
    for (name, args, outputs) in &steps {
        let run = icapm(dir, args);
        log.push(format!("{name}:{}", run.code));
        // 2 means outputs were written but an estimation did not converge.
        if run.code != 0 && run.code != 2 {
            problems.push(format!("{name} exited {}: {}", run.code, run.stderr.trim()));
            continue;
        }
        let mut expected = outputs.clone();
        let manifest = format!("{}/manifest.json", args[args.iter().position(|a| *a == "--out").unwrap() + 1]);
        expected.push(&manifest);
        for f in expected {
            if !dir.join(f).is_file() {
                problems.push(format!("{name} did not write {f}"));
            }
        }
    }
    if problems.is_empty() {
        let lr = read_json(&dir.join("lr/tests.json"))?;
        let df = lr["comparison"]["likelihood_ratio"]["df"].as_u64();
        if df != Some(10) {
            problems.push(format!("LR df {df:?}"));
        }
        let report = read_json(&dir.join("asymmetric/report.json"))?;
        let tests = report["panel_c_tests"].as_array().map(|a| a.len()).unwrap_or(0);
        if tests == 0 {
            problems.push("estimate report has no specification tests".into());
        }
        for (window, periods) in [("early", 215), ("late", 192)] {
            let r = read_json(&dir.join(format!("{window}/report.json")))?;
            if r["sample"]["periods"].as_u64() != Some(periods) {
                problems.push(format!("{window} window has {} periods", r["sample"]["periods"]));
            }
        }
    }
    ensure(problems.is_empty(), format!("exit codes {}; {}", log.join(" "), problems.join("; ")))
}

fn main() {
    // `cargo test` passes harness flags; a name filter other than this
    // target's is honoured so `cargo test <name>` stays quick.
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    type Criterion = (&'static str, Duration, fn() -> Check);
    let criteria: [Criterion; 11] = [
        ("structure", Duration::from_secs(1), structure),
        ("psd-invariant", Duration::from_secs(10), psd_invariant),
        ("likelihood-oracle", Duration::from_secs(5), likelihood_oracle),
        ("gradient-check", Duration::from_secs(30), gradient_check),
        ("recovery", Duration::from_secs(30 * 60), recovery),
        ("symmetric-reduction", Duration::from_secs(60), symmetric_reduction),
        ("lr-sanity", Duration::from_secs(3 * 3600), lr_sanity),
        ("chi-squared-calibration", Duration::from_secs(1), chi_squared),
        ("hp-filter", Duration::from_secs(1), hp),
        ("descriptive-stats", Duration::from_secs(1), descriptive),
        ("conditional-pipeline", Duration::from_secs(3600), pipeline),
    ];
    let mut failed = 0;
    let mut ran = 0;
    for (name, budget, check) in criteria {
        if let Some(f) = &filter {
            if !name.contains(f.as_str()) {
                continue;
            }
        }
        ran += 1;
        let start = Instant::now();
        let outcome = check();
        let result = within(start.elapsed(), budget, outcome);
        match &result {
            Ok(d) => println!("PASS {name}: {d}"),
            Err(d) => {
                failed += 1;
                println!("FAIL {name}: {d}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
