use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use icapm_core::data::{write_panel_csv, ParameterLayout};
use icapm_core::garch::conditional_correlations;
use icapm_core::inference::{hp_filter, lr_test, InformationCriteria, ResidualDiagnostics, TestResult};
use icapm_core::qml::SimplexSummary;
use icapm_core::simulation::{default_asset_names, illustrative_theta, simulate_panel, SimulationConfig};
use icapm_core::stats::{
    autocorrelations, cross_correlations_squared, mean, sample_std, stars, summarize, unconditional_correlations,
    band_stars,
};
use icapm_core::{ModelSpec, ReturnsPanel, Variant, YearMonth};
use serde::Serialize;

use crate::config::{Provenance, RunConfig};
use crate::fit::{fit_model, Dataset, FitArtifact};
use crate::manifest::{check_provenance, input_digests, num, Outputs};
use crate::report::{default_hypotheses, garch_panel, mean_panel, parse_hypotheses, wald_entries, GarchPanel, MeanPanel, TestEntry};
use crate::{Command, Outcome};

/// Lags reported for autocorrelations and cross-correlations.
const MAX_LAG: usize = 6;

pub fn execute(command: Command, config: &RunConfig, provenance: &Provenance) -> Result<Outcome> {
    let inputs = input_digests(config)?;
    check_provenance(command.name(), provenance, &inputs)?;
    let mut out = Outputs::create(&config.out)?;
    let outcome = match command {
        Command::Describe => describe(config, &mut out)?,
        Command::Estimate => estimate(config, &mut out)?,
        Command::Test => test(config, &mut out)?,
        Command::Simulate => simulate(config, &mut out)?,
        Command::Correlations => correlations(config, &mut out)?,
        Command::Hp => hp(config, &mut out)?,
    };
    out.finish(command.name(), config, inputs)?;
    Ok(outcome)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesSummary {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub min_date: YearMonth,
    pub max: f64,
    pub max_date: YearMonth,
}

fn series_summary(values: &[f64], dates: &[YearMonth]) -> SeriesSummary {
    let (mut lo, mut hi) = (0, 0);
    for (i, v) in values.iter().enumerate() {
        if *v < values[lo] {
            lo = i;
        }
        if *v > values[hi] {
            hi = i;
        }
    }
    SeriesSummary {
        mean: mean(values),
        std: sample_std(values),
        min: values[lo],
        min_date: dates[lo],
        max: values[hi],
        max_date: dates[hi],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct SampleInfo {
    window: Option<String>,
    first_date: YearMonth,
    last_date: YearMonth,
    periods: usize,
    assets: Vec<String>,
}

impl SampleInfo {
    fn of(data: &Dataset) -> Self {
        Self {
            window: data.window.clone(),
            first_date: data.first_date(),
            last_date: data.last_date(),
            periods: data.panel.periods(),
            assets: data.panel.asset_names().to_vec(),
        }
    }
}

// ---------------------------------------------------------------- describe

#[derive(Debug, Clone, PartialEq, Serialize)]
struct SummaryRow {
    asset: String,
    mean_annual: f64,
    min_monthly: f64,
    min_date: Option<YearMonth>,
    max_monthly: f64,
    max_date: Option<YearMonth>,
    std_annual: f64,
    skewness: f64,
    excess_kurtosis: f64,
    jarque_bera: f64,
    jarque_bera_p: f64,
    jarque_bera_stars: String,
    q12: f64,
    q12_p: f64,
    q12_stars: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct CorrelationPanel {
    assets: Vec<String>,
    /// Row `i` holds the correlations with assets `i..N`.
    upper: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct LagRow<L> {
    asset: String,
    lags: Vec<L>,
    values: Vec<f64>,
    stars: Vec<String>,
    band_5pct: f64,
    band_1pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct DescribeReport {
    sample: SampleInfo,
    panel_a_summary: Vec<SummaryRow>,
    panel_b_correlations: CorrelationPanel,
    panel_c_autocorrelations: Vec<LagRow<usize>>,
    panel_d_squared_autocorrelations: Vec<LagRow<usize>>,
    /// Correlation of the asset's squared return at `t` with the world's at `t − lag`.
    panel_e_cross_correlations: Vec<LagRow<i64>>,
}

fn describe(config: &RunConfig, out: &mut Outputs) -> Result<Outcome> {
    let data = Dataset::load(config)?;
    let panel = &data.panel;
    let names = panel.asset_names();
    let world = panel.column(panel.world_index());

    let mut summary = Vec::new();
    let mut acf = Vec::new();
    let mut acf2 = Vec::new();
    for (i, name) in names.iter().enumerate() {
        let x = panel.column(i);
        let s = summarize(&x, Some(panel.dates())).with_context(|| format!("summary of {name}"))?;
        summary.push(SummaryRow {
            asset: name.clone(),
            mean_annual: s.mean_annual,
            min_monthly: s.min_monthly,
            min_date: s.min_date,
            max_monthly: s.max_monthly,
            max_date: s.max_date,
            std_annual: s.std_annual,
            skewness: s.skewness,
            excess_kurtosis: s.excess_kurtosis,
            jarque_bera: s.jarque_bera,
            jarque_bera_p: s.jarque_bera_p,
            jarque_bera_stars: stars(s.jarque_bera_p).into(),
            q12: s.q12,
            q12_p: s.q12_p,
            q12_stars: stars(s.q12_p).into(),
        });
        for (squared, target) in [(false, &mut acf), (true, &mut acf2)] {
            let a = autocorrelations(&x, MAX_LAG, squared).with_context(|| format!("autocorrelations of {name}"))?;
            target.push(LagRow {
                asset: name.clone(),
                stars: a.values.iter().map(|&v| band_stars(v, a.band, a.band_1pct).to_string()).collect(),
                lags: a.lags,
                values: a.values,
                band_5pct: a.band,
                band_1pct: a.band_1pct,
            });
        }
    }
    let mut cross = Vec::new();
    for &i in &panel.local_indices() {
        let c = cross_correlations_squared(&panel.column(i), &world, MAX_LAG)
            .with_context(|| format!("cross-correlations of {}", names[i]))?;
        cross.push(LagRow {
            asset: names[i].clone(),
            stars: c.values.iter().map(|&v| band_stars(v, c.band, c.band_1pct).to_string()).collect(),
            lags: c.lags,
            values: c.values,
            band_5pct: c.band,
            band_1pct: c.band_1pct,
        });
    }
    let corr = unconditional_correlations(panel.values(), names)?;
    let n = names.len();
    let report = DescribeReport {
        sample: SampleInfo::of(&data),
        panel_a_summary: summary,
        panel_b_correlations: CorrelationPanel {
            assets: names.to_vec(),
            upper: (0..n).map(|i| (i..n).map(|j| corr[(i, j)]).collect()).collect(),
        },
        panel_c_autocorrelations: acf,
        panel_d_squared_autocorrelations: acf2,
        panel_e_cross_correlations: cross,
    };
    out.write_json("describe.json", &report)?;

    let mut header = vec!["asset".to_string()];
    header.extend(names.iter().cloned());
    let rows: Vec<Vec<String>> = (0..n)
        .map(|i| std::iter::once(names[i].clone()).chain((0..n).map(|j| num(corr[(i, j)]))).collect())
        .collect();
    out.write_csv("correlations.csv", &header, &rows)?;

    let mut header = vec!["asset".to_string()];
    header.extend((-(MAX_LAG as i64)..=MAX_LAG as i64).map(|k| format!("lag{k}")));
    let rows: Vec<Vec<String>> = report
        .panel_e_cross_correlations
        .iter()
        .map(|r| std::iter::once(r.asset.clone()).chain(r.values.iter().map(|&v| num(v))).collect())
        .collect();
    out.write_csv("cross_correlations.csv", &header, &rows)?;
    Ok(Outcome::Success)
}

// ---------------------------------------------------------------- estimate

#[derive(Debug, Clone, PartialEq, Serialize)]
struct NamedSummary {
    asset: String,
    #[serde(flatten)]
    summary: SeriesSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct EstimateReport {
    model: Variant,
    sample: SampleInfo,
    n_params: usize,
    converged: bool,
    termination: icapm_core::qml::Termination,
    iterations: usize,
    gradient_norm: f64,
    simplex: SimplexSummary,
    pseudo_inverse: bool,
    clamp_flag: bool,
    loglik: f64,
    information_criteria: InformationCriteria,
    panel_a_mean: MeanPanel,
    panel_b_garch: GarchPanel,
    panel_c_tests: Vec<TestEntry>,
    residual_diagnostics: Vec<ResidualDiagnostics>,
    hp_lambda: f64,
    world_price: SeriesSummary,
    world_price_trend: SeriesSummary,
    conditional_correlations: Vec<NamedSummary>,
}

fn test_outcome(entries: &[TestEntry]) -> Outcome {
    if entries.iter().any(|e| e.error.is_some()) {
        Outcome::Incomplete
    } else {
        Outcome::Success
    }
}

fn convergence_outcome(converged: bool) -> Outcome {
    if converged {
        Outcome::Success
    } else {
        Outcome::NotConverged
    }
}

fn estimate(config: &RunConfig, out: &mut Outputs) -> Result<Outcome> {
    let requested = parse_hypotheses(&config.hypotheses)?;
    let data = Dataset::load(config)?;
    let fitted = fit_model(data, config.model, &config.estimation, None)?;
    let fit = &fitted.artifact;
    let data = &fitted.data;
    let dates = data.panel.dates();
    out.write_json("fit.json", fit)?;

    let hypotheses = if requested.is_empty() {
        default_hypotheses(config.model, &fit.local_assets())
    } else {
        requested
    };
    let tests = wald_entries(fit, &hypotheses)?;

    let delta: Vec<f64> = fitted.path.prices.delta_world.iter().copied().collect();
    let hp = hp_filter(&delta, config.hp_lambda)?;
    let rho = conditional_correlations(&fitted.path.covariance, data.panel.world_index())?;
    let locals = fit.local_assets();
    let rho_summary = locals
        .iter()
        .enumerate()
        .map(|(j, a)| NamedSummary {
            asset: a.clone(),
            summary: series_summary(&rho.column(j).iter().copied().collect::<Vec<_>>(), dates),
        })
        .collect();

    let report = EstimateReport {
        model: config.model,
        sample: SampleInfo::of(data),
        n_params: fit.n_params,
        converged: fit.converged,
        termination: fit.termination,
        iterations: fit.iterations,
        gradient_norm: fit.gradient_norm,
        simplex: fitted.result.simplex.clone(),
        pseudo_inverse: fit.pseudo_inverse,
        clamp_flag: fit.clamp_flag,
        loglik: fit.loglik,
        information_criteria: fit.information_criteria,
        panel_a_mean: mean_panel(fit)?,
        panel_b_garch: garch_panel(fit)?,
        panel_c_tests: tests,
        residual_diagnostics: fit.residual_diagnostics.clone(),
        hp_lambda: config.hp_lambda,
        world_price: series_summary(&delta, dates),
        world_price_trend: series_summary(&hp.trend, dates),
        conditional_correlations: rho_summary,
    };
    out.write_json("report.json", &report)?;
    write_correlations_csv(out, dates, &locals, &rho)?;

    if config.emit_prices {
        let mut header: Vec<String> = ["date", "delta_world", "delta_world_trend", "delta_world_cycle"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        header.extend(locals.iter().map(|a| format!("delta_{a}")));
        let local = &fitted.path.prices.delta_local;
        let rows: Vec<Vec<String>> = (0..dates.len())
            .map(|t| {
                let mut r = vec![dates[t].to_string(), num(delta[t]), num(hp.trend[t]), num(hp.cycle[t])];
                r.extend((0..locals.len()).map(|j| num(local[(t, j)])));
                r
            })
            .collect();
        out.write_csv("prices.csv", &header, &rows)?;
    }
    Ok(convergence_outcome(fit.converged).max(test_outcome(&report.panel_c_tests)))
}

fn write_correlations_csv(
    out: &mut Outputs,
    dates: &[YearMonth],
    locals: &[String],
    rho: &nalgebra::DMatrix<f64>,
) -> Result<()> {
    let mut header = vec!["date".to_string()];
    header.extend(locals.iter().map(|a| format!("rho_{a}")));
    let rows: Vec<Vec<String>> = (0..dates.len())
        .map(|t| {
            std::iter::once(dates[t].to_string())
                .chain((0..locals.len()).map(|j| num(rho[(t, j)])))
                .collect()
        })
        .collect();
    out.write_csv("conditional_correlations.csv", &header, &rows)?;
    Ok(())
}

/// The fit named in the config, or a fresh estimate written to `fit.json`.
fn obtain_fit(config: &RunConfig, out: &mut Outputs) -> Result<FitArtifact> {
    match &config.fit {
        Some(path) => FitArtifact::read(path),
        None => {
            let fitted = fit_model(Dataset::load(config)?, config.model, &config.estimation, None)?;
            out.write_json("fit.json", &fitted.artifact)?;
            Ok(fitted.artifact)
        }
    }
}

// ---------------------------------------------------------------- test

#[derive(Debug, Clone, PartialEq, Serialize)]
struct ModelSummary {
    model: Variant,
    n_params: usize,
    loglik: f64,
    aic: f64,
    sbc: f64,
    converged: bool,
    residual_diagnostics: Vec<ResidualDiagnostics>,
}

impl ModelSummary {
    fn of(fit: &FitArtifact) -> Self {
        Self {
            model: fit.model,
            n_params: fit.n_params,
            loglik: fit.loglik,
            aic: fit.information_criteria.aic,
            sbc: fit.information_criteria.sbc,
            converged: fit.converged,
            residual_diagnostics: fit.residual_diagnostics.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct Comparison {
    restricted: ModelSummary,
    unrestricted: ModelSummary,
    likelihood_ratio: TestResult,
    likelihood_ratio_stars: String,
    /// Model with the lower criterion.
    preferred_by_aic: Variant,
    preferred_by_sbc: Variant,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct TestReport {
    model: Variant,
    window: Option<String>,
    periods: usize,
    wald: Vec<TestEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    comparison: Option<Comparison>,
}

fn compare(restricted: &FitArtifact, unrestricted: &FitArtifact) -> Result<Comparison> {
    if restricted.asset_names != unrestricted.asset_names
        || restricted.periods != unrestricted.periods
        || restricted.first_date != unrestricted.first_date
    {
        bail!("the restricted and unrestricted fits use different samples");
    }
    if restricted.n_params >= unrestricted.n_params {
        bail!(
            "the restricted fit has {} parameters, not fewer than the unrestricted {}",
            restricted.n_params,
            unrestricted.n_params
        );
    }
    let df = unrestricted.n_params - restricted.n_params;
    let label = format!("{} vs {}", restricted.model, unrestricted.model);
    let lr = lr_test(restricted.loglik, unrestricted.loglik, df, label)?;
    let pick = |r: f64, u: f64| if u < r { unrestricted.model } else { restricted.model };
    Ok(Comparison {
        restricted: ModelSummary::of(restricted),
        unrestricted: ModelSummary::of(unrestricted),
        likelihood_ratio_stars: stars(lr.p_value).into(),
        likelihood_ratio: lr,
        preferred_by_aic: pick(restricted.information_criteria.aic, unrestricted.information_criteria.aic),
        preferred_by_sbc: pick(restricted.information_criteria.sbc, unrestricted.information_criteria.sbc),
    })
}

fn test(config: &RunConfig, out: &mut Outputs) -> Result<Outcome> {
    let requested = parse_hypotheses(&config.hypotheses)?;
    let fit = obtain_fit(config, out)?;
    let hypotheses = if requested.is_empty() {
        default_hypotheses(fit.model, &fit.local_assets())
    } else {
        requested
    };
    let wald = wald_entries(&fit, &hypotheses)?;
    let mut outcome = convergence_outcome(fit.converged).max(test_outcome(&wald));
    let comparison = match &config.restricted_fit {
        Some(path) => {
            let restricted = FitArtifact::read(path)?;
            outcome = outcome.max(convergence_outcome(restricted.converged));
            Some(compare(&restricted, &fit)?)
        }
        None => None,
    };
    let report = TestReport {
        model: fit.model,
        window: fit.window.clone(),
        periods: fit.periods,
        wald,
        comparison,
    };
    out.write_json("tests.json", &report)?;
    Ok(outcome)
}

// ---------------------------------------------------------------- simulate

#[derive(Debug, Clone, PartialEq, Serialize)]
struct Truth {
    source: String,
    spec: ModelSpec,
    seed: u64,
    periods: usize,
    burn_in: usize,
    instruments: icapm_core::simulation::InstrumentProcess,
    asset_names: Vec<String>,
    labels: Vec<String>,
    theta_true: Vec<f64>,
}

#[derive(Serialize)]
struct DataConfig {
    returns: String,
    global: String,
    world: String,
    model: Variant,
    local: BTreeMap<String, String>,
}

fn relative(path: &Path, base: &Path) -> Result<String> {
    Ok(path
        .strip_prefix(base)
        .with_context(|| format!("{} is outside {}", path.display(), base.display()))?
        .to_string_lossy()
        .replace('\\', "/"))
}

fn simulate(config: &RunConfig, out: &mut Outputs) -> Result<Outcome> {
    let settings = &config.simulation;
    let (spec, theta, names, source) = match &config.fit {
        Some(path) => {
            let fit = FitArtifact::read(path)?;
            (fit.spec, fit.theta.clone(), fit.asset_names.clone(), format!("fit {}", path.display()))
        }
        None => {
            let spec = ModelSpec::new(config.model, settings.n_assets, settings.n_global, settings.n_local)?;
            let theta = illustrative_theta(&spec)?;
            (spec, theta, default_asset_names(spec.n_assets), "illustrative".to_string())
        }
    };
    let names = if settings.assets.is_empty() {
        names
    } else {
        if settings.assets.len() != spec.n_assets {
            bail!("{} asset names for {} assets", settings.assets.len(), spec.n_assets);
        }
        settings.assets.clone()
    };
    let sim_config = SimulationConfig {
        instruments: settings.instruments,
        burn_in: settings.burn_in,
        start: settings.start,
        ..SimulationConfig::new(theta.clone(), spec, settings.periods, config.seed)
    };
    let sim = simulate_panel(&sim_config)?;
    let panel = ReturnsPanel::new(
        sim.panel.dates().to_vec(),
        sim.panel.values().clone(),
        names.clone(),
        spec.n_assets - 1,
    )?;
    let data_dir = out.dir().join("data");
    let files = write_panel_csv(&panel, &sim.instruments, &data_dir)?;
    out.record(&files.returns)?;
    out.record(&files.global)?;
    for p in files.local.values() {
        out.record(p)?;
    }

    let labels = ParameterLayout::new(&spec)?.labels(&names, sim.instruments.global_names(), sim.instruments.local_names());
    let world = names.last().expect("at least two assets").clone();
    out.write_json(
        "truth.json",
        &Truth {
            source,
            spec,
            seed: config.seed,
            periods: settings.periods,
            burn_in: settings.burn_in,
            instruments: settings.instruments,
            asset_names: names,
            labels,
            theta_true: theta,
        },
    )?;
    let base = out.dir().to_path_buf();
    let data_config = DataConfig {
        returns: relative(&files.returns, &base)?,
        global: relative(&files.global, &base)?,
        world,
        model: spec.variant,
        local: files
            .local
            .iter()
            .map(|(k, p)| Ok((k.clone(), relative(p, &base)?)))
            .collect::<Result<_>>()?,
    };
    out.write_bytes("data.toml", toml::to_string(&data_config)?.as_bytes())?;
    Ok(Outcome::Success)
}

// ---------------------------------------------------------------- correlations

#[derive(Debug, Clone, PartialEq, Serialize)]
struct CorrelationReport {
    model: Variant,
    window: Option<String>,
    periods: usize,
    world: String,
    assets: Vec<NamedSummary>,
}

fn correlations(config: &RunConfig, out: &mut Outputs) -> Result<Outcome> {
    let fit = obtain_fit(config, out)?;
    let (data, path) = fit.reload()?;
    let rho = conditional_correlations(&path.covariance, data.panel.world_index())?;
    let dates = data.panel.dates();
    let locals = fit.local_assets();
    write_correlations_csv(out, dates, &locals, &rho)?;
    let report = CorrelationReport {
        model: fit.model,
        window: fit.window.clone(),
        periods: fit.periods,
        world: fit.asset_names.last().cloned().unwrap_or_default(),
        assets: locals
            .iter()
            .enumerate()
            .map(|(j, a)| NamedSummary {
                asset: a.clone(),
                summary: series_summary(&rho.column(j).iter().copied().collect::<Vec<_>>(), dates),
            })
            .collect(),
    };
    out.write_json("correlations.json", &report)?;
    Ok(convergence_outcome(fit.converged))
}

// ---------------------------------------------------------------- hp

#[derive(Debug, Clone, PartialEq, Serialize)]
struct HpReport {
    source: String,
    lambda: f64,
    periods: usize,
    series_mean: f64,
    trend_min: f64,
    trend_max: f64,
    cycle_std: f64,
}

/// Reads one numeric column (and the `date` column, if any) of a CSV file.
fn read_column(path: &Path, column: Option<&str>) -> Result<(String, Vec<String>, Vec<f64>)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<&str> = lines
        .next()
        .with_context(|| format!("{} is empty", path.display()))?
        .split(',')
        .map(str::trim)
        .collect();
    let date_col = header.iter().position(|h| *h == "date");
    let col = match column {
        Some(c) => header
            .iter()
            .position(|h| *h == c)
            .with_context(|| format!("no column `{c}` in {}", path.display()))?,
        None => {
            let candidates: Vec<usize> = (0..header.len()).filter(|&i| Some(i) != date_col).collect();
            match candidates.as_slice() {
                [only] => *only,
                _ => bail!("{} has several columns; choose one with --column", path.display()),
            }
        }
    };
    let mut labels = Vec::new();
    let mut values = Vec::new();
    for (row, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        let v: f64 = cells
            .get(col)
            .and_then(|c| c.parse().ok())
            .filter(|v: &f64| v.is_finite())
            .with_context(|| format!("{} data row {}: bad value in `{}`", path.display(), row + 1, header[col]))?;
        values.push(v);
        labels.push(match date_col {
            Some(d) => cells.get(d).copied().unwrap_or("").to_string(),
            None => (row + 1).to_string(),
        });
    }
    Ok((header[col].to_string(), labels, values))
}

fn hp(config: &RunConfig, out: &mut Outputs) -> Result<Outcome> {
    let (source, labels, series, outcome) = match &config.hp_input {
        Some(path) => {
            let (name, labels, values) = read_column(path, config.hp_column.as_deref())?;
            (format!("{}:{name}", path.display()), labels, values, Outcome::Success)
        }
        None => {
            let fit = obtain_fit(config, out)?;
            let (data, path) = fit.reload()?;
            let labels = data.panel.dates().iter().map(|d| d.to_string()).collect();
            let delta = path.prices.delta_world.iter().copied().collect();
            ("delta_world".to_string(), labels, delta, convergence_outcome(fit.converged))
        }
    };
    let hp = hp_filter(&series, config.hp_lambda)?;
    let header: Vec<String> = ["date", "series", "trend", "cycle"].iter().map(|s| s.to_string()).collect();
    let rows: Vec<Vec<String>> = (0..series.len())
        .map(|t| vec![labels[t].clone(), num(series[t]), num(hp.trend[t]), num(hp.cycle[t])])
        .collect();
    out.write_csv("hp.csv", &header, &rows)?;
    let fold = |f: fn(f64, f64) -> f64, init: f64| hp.trend.iter().copied().fold(init, f);
    out.write_json(
        "hp.json",
        &HpReport {
            source,
            lambda: config.hp_lambda,
            periods: series.len(),
            series_mean: mean(&series),
            trend_min: fold(f64::min, f64::INFINITY),
            trend_max: fold(f64::max, f64::NEG_INFINITY),
            cycle_std: sample_std(&hp.cycle),
        },
    )?;
    Ok(outcome)
}
