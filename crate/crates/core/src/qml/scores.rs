use nalgebra::{DMatrix, DVector};

use super::Objective;
use crate::error::{Error, Result};
use crate::par::{map_range, ExecMode};

/// Central-difference step `max(1e-5, 1e-5·|θ_k|)`.
pub fn fd_step(theta_k: f64) -> f64 {
    1e-5f64.max(1e-5 * theta_k.abs())
}

/// Central difference of every period's contribution in direction `k`.
/// The step is retried once at a tenth of its size if either side fails.
fn score_column<O: Objective + ?Sized>(obj: &O, theta: &[f64], k: usize) -> Result<Vec<f64>> {
    let mut h = fd_step(theta[k]);
    let mut last_err = None;
    for _ in 0..2 {
        let mut plus = theta.to_vec();
        let mut minus = theta.to_vec();
        plus[k] += h;
        minus[k] -= h;
        let width = plus[k] - minus[k];
        match (obj.contributions(&plus), obj.contributions(&minus)) {
            (Ok(fp), Ok(fm)) => {
                return Ok(fp.iter().zip(&fm).map(|(p, m)| (p - m) / width).collect());
            }
            (Err(e), _) | (_, Err(e)) => last_err = Some(e),
        }
        h /= 10.0;
    }
    Err(Error::Estimation(format!(
        "score for parameter {k} could not be evaluated: {}",
        last_err.map(|e| e.to_string()).unwrap_or_default()
    )))
}

/// T×K matrix of per-period numerical scores of the unpenalized
/// contributions, differenced on the objective's smooth surrogate at
/// `theta` when it has one. Columns are evaluated independently.
pub fn per_period_scores<O: Objective + ?Sized>(obj: &O, theta: &[f64], mode: ExecMode) -> Result<DMatrix<f64>> {
    let k = obj.dim();
    if theta.len() != k {
        return Err(Error::Shape(format!("theta has {} entries, expected {k}", theta.len())));
    }
    if let Some(smooth) = obj.smooth_at(theta)? {
        return score_matrix(smooth.as_ref(), theta, mode);
    }
    score_matrix(obj, theta, mode)
}

fn score_matrix<O: Objective + ?Sized>(obj: &O, theta: &[f64], mode: ExecMode) -> Result<DMatrix<f64>> {
    let k = obj.dim();
    let columns = map_range(k, mode, |j| score_column(obj, theta, j));
    let mut g: Option<DMatrix<f64>> = None;
    for (j, col) in columns.into_iter().enumerate() {
        let col = col?;
        let g = g.get_or_insert_with(|| DMatrix::zeros(col.len(), k));
        for (t, v) in col.into_iter().enumerate() {
            g[(t, j)] = v;
        }
    }
    Ok(g.unwrap_or_else(|| DMatrix::zeros(0, 0)))
}

/// Column sums `G'1` of a score matrix.
pub fn score_gradient(scores: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(
        scores.ncols(),
        scores.column_iter().map(|c| crate::linalg::compensated_sum(c.iter().copied())),
    )
}

/// Hessian of the summed contributions from central differences of the
/// score sum, column `j` stepped by `step(θ_j)`, symmetrized. Columns are
/// independent.
pub fn score_hessian<O, F>(obj: &O, theta: &[f64], step: F, mode: ExecMode) -> Result<DMatrix<f64>>
where
    O: Objective + ?Sized,
    F: Fn(f64) -> f64 + Sync + Send,
{
    let k = theta.len();
    let columns = map_range(k, mode, |j| -> Result<DVector<f64>> {
        let h = step(theta[j]);
        let mut plus = theta.to_vec();
        let mut minus = theta.to_vec();
        plus[j] += h;
        minus[j] -= h;
        let width = plus[j] - minus[j];
        let gp = score_gradient(&per_period_scores(obj, &plus, ExecMode::Sequential)?);
        let gm = score_gradient(&per_period_scores(obj, &minus, ExecMode::Sequential)?);
        Ok((gp - gm) / width)
    });
    let mut hess = DMatrix::zeros(k, k);
    for (j, col) in columns.into_iter().enumerate() {
        hess.set_column(j, &col?);
    }
    Ok((&hess + hess.transpose()) * 0.5)
}

/// Central-difference Hessian of the penalty, from its gradient.
pub fn penalty_hessian<O: Objective + ?Sized>(obj: &O, theta: &[f64]) -> DMatrix<f64> {
    let k = theta.len();
    let mut hess = DMatrix::zeros(k, k);
    if penalty_gradient(obj, theta).iter().all(|&g| g == 0.0) && obj.penalty(theta) == 0.0 {
        return hess;
    }
    let mut x = theta.to_vec();
    for j in 0..k {
        let h = fd_step(theta[j]);
        x[j] = theta[j] + h;
        let p = penalty_gradient(obj, &x);
        x[j] = theta[j] - h;
        let m = penalty_gradient(obj, &x);
        x[j] = theta[j];
        hess.set_column(j, &((p - m) / (2.0 * h)));
    }
    (&hess + hess.transpose()) * 0.5
}

/// Central-difference gradient of the penalty, zero where it is flat.
pub fn penalty_gradient<O: Objective + ?Sized>(obj: &O, theta: &[f64]) -> DVector<f64> {
    let base = obj.penalty(theta);
    let mut grad = DVector::zeros(theta.len());
    let mut x = theta.to_vec();
    for k in 0..theta.len() {
        let h = fd_step(theta[k]);
        x[k] = theta[k] + h;
        let p = obj.penalty(&x);
        x[k] = theta[k] - h;
        let m = obj.penalty(&x);
        x[k] = theta[k];
        if base == 0.0 && p == 0.0 && m == 0.0 {
            continue;
        }
        grad[k] = (p - m) / (2.0 * h);
    }
    grad
}
