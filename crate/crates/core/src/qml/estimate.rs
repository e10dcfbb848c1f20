use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::bhhh::{bhhh_maximize, BhhhOptions, StepRecord, Termination};
use super::likelihood::QmlProblem;
use super::scores::per_period_scores;
use super::simplex::simplex_initialize;
use crate::data::{covariance, ModelSpec, ParameterLayout};
use crate::error::{Error, Result};

const INITIAL_WORLD_PRICE: f64 = 3.5;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EstimationOptions {
    /// Simplex evaluation budget; defaults to `200·K`.
    pub simplex_budget: Option<usize>,
    pub bhhh: BhhhOptions,
    /// Starting point; defaults to [`default_theta0`].
    pub theta0: Option<Vec<f64>>,
    /// Extra passes that reset `H_init` to the sample covariance of the
    /// fitted residuals and re-run BHHH from the previous optimum.
    #[serde(default)]
    pub h_init_passes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimplexSummary {
    pub evaluations: usize,
    pub iterations: usize,
    pub start_value: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    pub spec: ModelSpec,
    pub layout: ParameterLayout,
    pub labels: Vec<String>,
    pub theta: Vec<f64>,
    /// Unpenalized log-likelihood at `theta`.
    pub loglik: f64,
    pub penalty: f64,
    pub clamp_flag: bool,
    pub periods: usize,
    /// T×K per-period scores at `theta`.
    pub scores: DMatrix<f64>,
    pub h_init: DMatrix<f64>,
    pub simplex: SimplexSummary,
    pub iterations: usize,
    pub termination: Termination,
    pub converged: bool,
    pub gradient_norm: f64,
    pub history: Vec<StepRecord>,
}

/// Default start: world price constant `ln 3.5`, other prices zero, `C`
/// lower triangular with `C'C = ½·H_init`, `a = 0.3`, `b = 0.7`,
/// `s = z = 0.01`, augmented terms zero.
pub fn default_theta0(problem: &QmlProblem<'_>) -> Result<Vec<f64>> {
    let layout = problem.layout();
    let n = layout.n_assets;
    let half = problem.h_init() * 0.5;
    let reversed = DMatrix::from_fn(n, n, |i, j| half[(n - 1 - i, n - 1 - j)]);
    let l = reversed
        .cholesky()
        .ok_or_else(|| Error::DegenerateMoments("sample covariance is not positive definite".into()))?
        .unpack();
    let mut theta = vec![0.0; layout.len()];
    theta[layout.kappa_world.start] = INITIAL_WORLD_PRICE.ln();
    for i in 0..n {
        for j in 0..=i {
            theta[layout.c_index(i, j)] = l[(n - 1 - j, n - 1 - i)];
        }
    }
    for k in layout.a.clone() {
        theta[k] = 0.3;
    }
    for k in layout.b.clone() {
        theta[k] = 0.7;
    }
    for range in [&layout.s, &layout.z].into_iter().flatten() {
        for k in range.clone() {
            theta[k] = 0.01;
        }
    }
    Ok(theta)
}

/// Simplex initialization, BHHH maximization, sign normalization, and
/// scores at the final point, followed by `h_init_passes` refits with
/// `H_init` taken from the residuals.
pub fn estimate(problem: &QmlProblem<'_>, options: &EstimationOptions) -> Result<EstimationResult> {
    let mut fit = estimate_once(problem, options)?;
    let mut current = problem.clone();
    for _ in 0..options.h_init_passes {
        let path = current.evaluate_path(&fit.theta)?;
        current = current.with_h_init(covariance(&path.covariance.eps))?;
        let pass = EstimationOptions {
            simplex_budget: Some(1),
            bhhh: options.bhhh,
            theta0: Some(fit.theta.clone()),
            h_init_passes: 0,
        };
        let next = estimate_once(&current, &pass)?;
        let mut history = std::mem::take(&mut fit.history);
        history.extend(next.history.iter().cloned());
        fit = EstimationResult {
            simplex: fit.simplex,
            iterations: fit.iterations + next.iterations,
            history,
            ..next
        };
    }
    Ok(fit)
}

fn estimate_once(problem: &QmlProblem<'_>, options: &EstimationOptions) -> Result<EstimationResult> {
    let layout = problem.layout().clone();
    let theta0 = match &options.theta0 {
        Some(t) => t.clone(),
        None => default_theta0(problem)?,
    };
    if theta0.len() != layout.len() {
        return Err(Error::Shape(format!(
            "theta0 has {} entries, expected {}",
            theta0.len(),
            layout.len()
        )));
    }
    let start_value = problem
        .log_likelihood(&theta0)
        .map(|r| r.total_loglik)
        .map_err(|e| Error::Estimation(format!("likelihood undefined at the starting point: {e}")))?;
    let budget = options.simplex_budget.unwrap_or(200 * layout.len());
    let simplex = if budget > 1 {
        simplex_initialize(problem, &theta0, budget)?
    } else {
        super::simplex::SimplexOutcome {
            theta: theta0.clone(),
            value: start_value,
            evaluations: 1,
            iterations: 0,
        }
    };
    let outcome = bhhh_maximize(problem, &simplex.theta, &options.bhhh)?;

    let mut theta = outcome.theta.clone();
    layout.canonicalize(&mut theta);
    let fit = problem.log_likelihood(&theta)?;
    let scores = per_period_scores(problem, &theta, options.bhhh.mode)?;
    let labels = layout.labels(
        problem.panel().asset_names(),
        problem.instruments().global_names(),
        problem.instruments().local_names(),
    );
    Ok(EstimationResult {
        spec: *problem.spec(),
        layout,
        labels,
        loglik: fit.total_loglik + fit.penalty_applied,
        penalty: fit.penalty_applied,
        clamp_flag: fit.clamp_flag,
        periods: fit.per_period.len(),
        theta,
        scores,
        h_init: problem.h_init().clone(),
        simplex: SimplexSummary {
            evaluations: simplex.evaluations,
            iterations: simplex.iterations,
            start_value,
            value: simplex.value,
        },
        iterations: outcome.iterations,
        termination: outcome.termination,
        converged: outcome.converged,
        gradient_norm: outcome.gradient_norm,
        history: outcome.history,
    })
}
