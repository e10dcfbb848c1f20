use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::scores::{fd_step, penalty_gradient, penalty_hessian, per_period_scores, score_gradient, score_hessian};
use super::Objective;
use crate::error::Result;
use crate::linalg::solve_spd_with_ridge;
use crate::par::ExecMode;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BhhhOptions {
    pub max_iterations: usize,
    /// Stop when `‖g‖∞` falls below this.
    pub gradient_tolerance: f64,
    /// Stop when a near-full step (at most two halvings) changes the
    /// log-likelihood by less than this, relative, and the gradient norm has
    /// stopped shrinking (failed to halve since the previous iteration).
    pub relative_tolerance: f64,
    pub armijo: f64,
    pub max_halvings: usize,
    pub mode: ExecMode,
}

impl Default for BhhhOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            gradient_tolerance: 1e-5,
            relative_tolerance: 1e-9,
            armijo: 1e-4,
            max_halvings: 30,
            mode: ExecMode::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Gradient,
    RelativeChange,
    /// No step improved the objective, but the full BHHH step was predicted
    /// to gain less than the relative tolerance: the objective is flat to
    /// its numerical resolution.
    PredictedChange,
    /// The surrogate optimum lowers the true objective: what remains to be
    /// gained is below the size of the indicator jumps.
    IndicatorJump,
    LineSearchFailed,
    MaxIterations,
}

impl Termination {
    pub fn converged(self) -> bool {
        matches!(
            self,
            Termination::Gradient
                | Termination::RelativeChange
                | Termination::PredictedChange
                | Termination::IndicatorJump
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub iteration: usize,
    /// Surrogate round the step belongs to; `loglik` is the value of that
    /// round's surrogate.
    pub round: usize,
    pub loglik: f64,
    pub gradient_norm: f64,
    pub step_length: f64,
    pub ridge: f64,
    /// Levenberg–Marquardt damping used for the step, relative to the
    /// diagonal of `G'G`.
    pub damping: f64,
    /// The direction came from the numerical Hessian rather than `G'G`.
    #[serde(default)]
    pub newton: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BhhhOutcome {
    pub theta: Vec<f64>,
    /// Penalized objective at `theta`.
    pub value: f64,
    pub iterations: usize,
    pub termination: Termination,
    pub converged: bool,
    pub gradient_norm: f64,
    pub history: Vec<StepRecord>,
}

fn sup_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

const MIN_DAMPING: f64 = 1e-4;
const MAX_DAMPING: f64 = 1e4;
const DAMPING_FACTOR: f64 = 100.0;

/// Solves `(G'G + μD) d = g`, `D = diag(G'G)`, after scaling to unit
/// diagonal, so the ridge and the conditioning check see parameters on a
/// common scale. `μ = 0` is the plain BHHH step.
fn bhhh_direction(opg: &DMatrix<f64>, grad: &DVector<f64>, damping: f64) -> Option<(DVector<f64>, f64)> {
    let scale = opg.diagonal().map(|d| if d > 0.0 && d.is_finite() { d.sqrt() } else { 1.0 });
    let k = opg.nrows();
    let scaled = DMatrix::from_fn(k, k, |i, j| {
        opg[(i, j)] / (scale[i] * scale[j]) + if i == j { damping } else { 0.0 }
    });
    let rhs = grad.component_div(&scale);
    let (y, ridge) = solve_spd_with_ridge(&scaled, &rhs)?;
    Some((y.component_div(&scale), ridge))
}

/// Consecutive steps at the damping cap after which directions come from
/// the numerical Hessian.
const NEWTON_AFTER: usize = 3;

/// Ascent direction `|H|⁻¹g` in the unit-diagonal scaling, where `|H|`
/// replaces each eigenvalue of the Hessian by its floored magnitude.
fn newton_direction(hess: &DMatrix<f64>, grad: &DVector<f64>) -> Option<DVector<f64>> {
    let scale = hess.diagonal().map(|d| if d != 0.0 && d.is_finite() { d.abs().sqrt() } else { 1.0 });
    let k = grad.len();
    let scaled = DMatrix::from_fn(k, k, |i, j| -hess[(i, j)] / (scale[i] * scale[j]));
    if scaled.iter().any(|x| !x.is_finite()) {
        return None;
    }
    let eig = SymmetricEigen::new(scaled);
    let top = eig.eigenvalues.amax();
    if top == 0.0 {
        return None;
    }
    let floor = 1e-10 * top;
    let inv = eig.eigenvalues.map(|l| 1.0 / l.abs().max(floor));
    let q = &eig.eigenvectors;
    let y = q * DMatrix::from_diagonal(&inv) * q.transpose() * grad.component_div(&scale);
    Some(y.component_div(&scale))
}

/// Upper bound on surrogate rounds for piecewise-smooth objectives.
const MAX_ROUNDS: usize = 25;

/// BHHH ascent: direction `(G'G)⁻¹ g` with `g = G'1 − ∇P`, Armijo
/// backtracking by halving.
///
/// Besides the gradient test, two stops count as convergence: a near-full
/// step whose relative gain is below `relative_tolerance` once
/// the gradient norm has stopped shrinking, and a failed line search whose
/// predicted gain `½g'd` is below the same tolerance.
///
/// When the line search fails or needs three or more halvings, the next
/// direction is damped toward the scaled gradient; damping decays by ten on
/// each full step and vanishes near the optimum. If the damping stays at its
/// cap, `G'G` no longer describes the curvature (typically a variance
/// parameter near zero), and the remaining iterations use Newton directions
/// from the numerical Hessian, stopping when the predicted gain is below the
/// relative tolerance.
///
/// When the objective is only piecewise smooth (it offers a surrogate via
/// [`Objective::smooth_at`]), the ascent runs on the surrogate anchored at
/// the current point, then re-anchors at the result. The move is halved
/// until it raises the true objective, so the true value never decreases
/// from round to round. Rounds stop once a full move gains less than the
/// relative tolerance.
pub fn bhhh_maximize<O: Objective + ?Sized>(obj: &O, theta0: &[f64], options: &BhhhOptions) -> Result<BhhhOutcome> {
    if obj.smooth_at(theta0)?.is_none() {
        return ascend(obj, theta0, options, 0);
    }
    let mut theta = theta0.to_vec();
    let mut value = obj.value(&theta)?;
    let mut history = Vec::new();
    let mut iterations = 0;
    let mut termination = Termination::MaxIterations;
    let mut gnorm = f64::INFINITY;
    let mut finished = false;

    for round in 0..MAX_ROUNDS {
        let inner = match obj.smooth_at(&theta)? {
            Some(surrogate) => {
                let budget = BhhhOptions {
                    max_iterations: options.max_iterations - iterations,
                    ..*options
                };
                ascend(surrogate.as_ref(), &theta, &budget, round)?
            }
            None => ascend(obj, &theta, options, round)?,
        };
        iterations += inner.iterations;
        let start_gnorm = inner.history.first().map_or(inner.gradient_norm, |h| h.gradient_norm);
        history.extend(inner.history);
        termination = inner.termination;
        if inner.iterations == 0 {
            gnorm = inner.gradient_norm;
            finished = true;
            break;
        }
        let Some((next, next_value, full)) = improve_along(obj, &theta, value, &inner.theta, options.max_halvings) else {
            gnorm = start_gnorm;
            if inner.termination.converged() {
                termination = Termination::IndicatorJump;
            }
            finished = true;
            break;
        };
        let gain = (next_value - value) / value.abs().max(1.0);
        theta = next;
        value = next_value;
        gnorm = if full { inner.gradient_norm } else { f64::INFINITY };
        if full && (gain < options.relative_tolerance || !inner.termination.converged()) {
            finished = true;
            break;
        }
    }
    if !finished {
        termination = Termination::MaxIterations;
    }

    Ok(BhhhOutcome {
        converged: termination.converged(),
        theta,
        value,
        iterations,
        termination,
        gradient_norm: gnorm,
        history,
    })
}

/// Largest fraction `2⁻ᵏ` of the move from `from` to `to` that raises the
/// true objective. The flag is set when the full move was taken.
fn improve_along<O: Objective + ?Sized>(
    obj: &O,
    from: &[f64],
    value: f64,
    to: &[f64],
    max_halvings: usize,
) -> Option<(Vec<f64>, f64, bool)> {
    let mut fraction = 1.0;
    for k in 0..=max_halvings.min(10) {
        let trial: Vec<f64> = from.iter().zip(to).map(|(a, b)| a + fraction * (b - a)).collect();
        if let Ok(v) = obj.value(&trial) {
            if v > value || (k == 0 && v >= value) {
                return Some((trial, v, k == 0));
            }
        }
        fraction *= 0.5;
    }
    None
}

fn ascend<O: Objective + ?Sized>(obj: &O, theta0: &[f64], options: &BhhhOptions, round: usize) -> Result<BhhhOutcome> {
    let mut theta = theta0.to_vec();
    let mut value = obj.value(&theta)?;
    let mut history = Vec::new();
    let mut termination = Termination::MaxIterations;
    let mut gnorm = f64::INFINITY;
    let mut prev_gnorm = f64::INFINITY;
    let mut iterations = 0;
    let mut damping = 0.0;
    let mut saturated = 0;
    let mut newton = false;

    for iter in 0..=options.max_iterations {
        let scores = per_period_scores(obj, &theta, options.mode)?;
        let grad = score_gradient(&scores) - penalty_gradient(obj, &theta);
        gnorm = sup_norm(&grad);
        if gnorm < options.gradient_tolerance {
            termination = Termination::Gradient;
            break;
        }
        if iter == options.max_iterations {
            break;
        }
        iterations = iter + 1;
        let predicted_flat = |slope: f64| 0.5 * slope <= options.relative_tolerance * value.abs().max(1.0);

        if newton {
            let hess = score_hessian(obj, &theta, fd_step, options.mode)? - penalty_hessian(obj, &theta);
            let Some(direction) = newton_direction(&hess, &grad) else {
                termination = Termination::LineSearchFailed;
                break;
            };
            let slope = grad.dot(&direction);
            if predicted_flat(slope) {
                termination = Termination::PredictedChange;
                break;
            }
            let Some((next, next_value, step, _)) = line_search(obj, &theta, value, &direction, slope, options) else {
                termination = Termination::LineSearchFailed;
                break;
            };
            let change = (next_value - value).abs() / value.abs().max(1.0);
            theta = next;
            value = next_value;
            history.push(StepRecord {
                iteration: iterations,
                round,
                loglik: value,
                gradient_norm: gnorm,
                step_length: step,
                ridge: 0.0,
                damping: 0.0,
                newton: true,
            });
            if change < options.relative_tolerance && step >= 0.25 {
                termination = Termination::RelativeChange;
                break;
            }
            continue;
        }

        let opg: DMatrix<f64> = scores.tr_mul(&scores);
        let mut accepted = None;
        let mut flat = false;
        while let Some((direction, ridge)) = bhhh_direction(&opg, &grad, damping) {
            let slope = grad.dot(&direction);
            if let Some((next, next_value, step, halvings)) = line_search(obj, &theta, value, &direction, slope, options) {
                accepted = Some((next, next_value, step, halvings, ridge));
                break;
            }
            if damping == 0.0 && predicted_flat(slope) {
                flat = true;
                break;
            }
            if damping >= MAX_DAMPING {
                break;
            }
            damping = (damping * DAMPING_FACTOR).max(MIN_DAMPING);
        }
        let Some((next, next_value, step, halvings, ridge)) = accepted else {
            if flat {
                termination = Termination::PredictedChange;
                break;
            }
            newton = true;
            continue;
        };
        let change = (next_value - value).abs() / value.abs().max(1.0);
        theta = next;
        value = next_value;
        history.push(StepRecord {
            iteration: iterations,
            round,
            loglik: value,
            gradient_norm: gnorm,
            step_length: step,
            ridge,
            damping,
            newton: false,
        });
        saturated = if damping >= MAX_DAMPING { saturated + 1 } else { 0 };
        newton = saturated >= NEWTON_AFTER;
        damping = match halvings {
            0 if damping * 0.1 < MIN_DAMPING => 0.0,
            0 => damping * 0.1,
            h if h >= 3 => (damping * 10.0).clamp(MIN_DAMPING, MAX_DAMPING),
            _ => damping,
        };
        let stalled = !prev_gnorm.is_finite() || gnorm > 0.5 * prev_gnorm;
        prev_gnorm = gnorm;
        if change < options.relative_tolerance && stalled && step >= 0.25 {
            termination = Termination::RelativeChange;
            break;
        }
    }

    Ok(BhhhOutcome {
        converged: termination.converged(),
        theta,
        value,
        iterations,
        termination,
        gradient_norm: gnorm,
        history,
    })
}

/// Armijo backtracking from a unit step. Returns the accepted point, its
/// value, the step length and the number of halvings.
fn line_search<O: Objective + ?Sized>(
    obj: &O,
    theta: &[f64],
    value: f64,
    direction: &DVector<f64>,
    slope: f64,
    options: &BhhhOptions,
) -> Option<(Vec<f64>, f64, f64, usize)> {
    let mut step = 1.0;
    for halvings in 0..=options.max_halvings {
        let trial: Vec<f64> = theta.iter().zip(direction.iter()).map(|(t, d)| t + step * d).collect();
        if let Ok(v) = obj.value(&trial) {
            if v.is_finite() && v >= value + options.armijo * step * slope {
                return Some((trial, v, step, halvings));
            }
        }
        step *= 0.5;
    }
    None
}
