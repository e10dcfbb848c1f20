use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::ExecMode;
use crate::qml::{score_hessian, Objective};

/// Relative eigenvalue cutoff below which `A` is treated as singular.
const SINGULAR_CUTOFF: f64 = 1e-12;

/// Robust QML covariance `V = A⁻¹BA⁻¹/T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SandwichCovariance {
    pub v: DMatrix<f64>,
    pub a_inv: DMatrix<f64>,
    pub b: DMatrix<f64>,
    /// Relative Hessian step; column k uses `hessian_step · max(1, |θ_k|)`.
    pub hessian_step: f64,
    /// Set when `A` was singular and a pseudo-inverse was used.
    pub pseudo_inverse: bool,
}

impl SandwichCovariance {
    pub fn standard_errors(&self) -> DVector<f64> {
        self.v.diagonal().map(|d| d.max(0.0).sqrt())
    }

    /// `A⁻¹/T`, the covariance under the information-matrix equality.
    pub fn hessian_covariance(&self, periods: usize) -> DMatrix<f64> {
        &self.a_inv / periods as f64
    }
}

/// Numerical Hessian of the unpenalized log-likelihood from central
/// differences of the score sum, on the objective's smooth surrogate at
/// `theta` when it has one. Columns are independent.
pub fn numerical_hessian<O: Objective + ?Sized>(
    obj: &O,
    theta: &[f64],
    step: f64,
    mode: ExecMode,
) -> Result<DMatrix<f64>> {
    if let Some(smooth) = obj.smooth_at(theta)? {
        return hessian_columns(smooth.as_ref(), theta, step, mode);
    }
    hessian_columns(obj, theta, step, mode)
}

fn hessian_columns<O: Objective + ?Sized>(obj: &O, theta: &[f64], step: f64, mode: ExecMode) -> Result<DMatrix<f64>> {
    score_hessian(obj, theta, |t| step * t.abs().max(1.0), mode)
}

/// Inverse of a symmetric matrix via its eigen-decomposition, dropping
/// eigenvalues below the relative cutoff. Returns whether any were dropped.
pub fn symmetric_pseudo_inverse(m: &DMatrix<f64>) -> (DMatrix<f64>, bool) {
    let eig = SymmetricEigen::new(m.clone());
    let scale = eig.eigenvalues.iter().fold(0.0f64, |a, l| a.max(l.abs()));
    let cutoff = SINGULAR_CUTOFF * scale;
    let mut dropped = scale == 0.0;
    let inv_vals = eig.eigenvalues.map(|l| {
        if l.abs() <= cutoff || !l.is_finite() {
            dropped = true;
            0.0
        } else {
            1.0 / l
        }
    });
    let q = &eig.eigenvectors;
    let inv = q * DMatrix::from_diagonal(&inv_vals) * q.transpose();
    (inv, dropped)
}

/// Sandwich covariance at `theta` from the stored T×K `scores`.
pub fn sandwich_covariance<O: Objective + ?Sized>(
    obj: &O,
    theta: &[f64],
    scores: &DMatrix<f64>,
    mode: ExecMode,
) -> Result<SandwichCovariance> {
    sandwich_with_step(obj, theta, scores, 1e-4, mode)
}

pub fn sandwich_with_step<O: Objective + ?Sized>(
    obj: &O,
    theta: &[f64],
    scores: &DMatrix<f64>,
    hessian_step: f64,
    mode: ExecMode,
) -> Result<SandwichCovariance> {
    let (t, k) = scores.shape();
    if k != theta.len() || t == 0 {
        return Err(Error::Shape(format!(
            "scores are {t}×{k} for {} parameters",
            theta.len()
        )));
    }
    let tf = t as f64;
    let b = scores.tr_mul(scores) / tf;
    let a = numerical_hessian(obj, theta, hessian_step, mode)? * (-1.0 / tf);
    let (a_inv, pseudo_inverse) = symmetric_pseudo_inverse(&a);
    let v = &a_inv * &b * &a_inv / tf;
    let v = (&v + v.transpose()) * 0.5;
    Ok(SandwichCovariance {
        v,
        a_inv,
        b,
        hessian_step,
        pseudo_inverse,
    })
}
