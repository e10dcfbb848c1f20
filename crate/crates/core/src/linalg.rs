//! Small dense helpers for the per-period hot loop.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Tolerance on the smallest eigenvalue before a matrix is declared non-PSD.
pub const PSD_TOLERANCE: f64 = 1e-8;

/// Condition-number ceiling for a conditional covariance matrix.
pub const MAX_CONDITION: f64 = 1e12;

/// In-place Cholesky of a column-major `n×n` SPD matrix; the lower triangle
/// receives `L`. Returns `None` if a pivot is not strictly positive.
pub(crate) fn cholesky_in_place(a: &mut [f64], n: usize) -> Option<()> {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            let l = a[k * n + j];
            d -= l * l;
        }
        if !(d > 0.0) {
            return None;
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[j * n + i];
            for k in 0..j {
                s -= a[k * n + i] * a[k * n + j];
            }
            a[j * n + i] = s / d;
        }
    }
    Some(())
}

/// Log-determinant and quadratic form `x' A^{-1} x` from a factor produced
/// by [`cholesky_in_place`]. `work` must have length `n`.
pub(crate) fn logdet_and_quad(l: &[f64], n: usize, x: &[f64], work: &mut [f64]) -> (f64, f64) {
    let mut logdet = 0.0;
    let mut quad = 0.0;
    for i in 0..n {
        let mut s = x[i];
        for k in 0..i {
            s -= l[k * n + i] * work[k];
        }
        let lii = l[i * n + i];
        work[i] = s / lii;
        quad += work[i] * work[i];
        logdet += lii.ln();
    }
    (2.0 * logdet, quad)
}

/// Lower bound on the 2-norm condition number from the Cholesky diagonal.
pub(crate) fn condition_estimate(l: &[f64], n: usize) -> f64 {
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for i in 0..n {
        let d = l[i * n + i];
        lo = lo.min(d);
        hi = hi.max(d);
    }
    (hi / lo).powi(2)
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    SymmetricEigen::new(sym).eigenvalues.min()
}

pub fn is_symmetric(m: &DMatrix<f64>) -> bool {
    let scale = m.amax().max(1.0);
    m.is_square() && (m - m.transpose()).amax() <= 1e-12 * scale
}

/// Cheap PSD test: Cholesky first, eigenvalues only when it fails.
pub fn psd_min_eigenvalue(m: &DMatrix<f64>) -> Option<f64> {
    let n = m.nrows();
    let mut buf = m.as_slice().to_vec();
    if cholesky_in_place(&mut buf, n).is_some() {
        return None;
    }
    let e = min_eigenvalue(m);
    (e < -PSD_TOLERANCE).then_some(e)
}

/// Neumaier-compensated sum.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut c = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}

/// Solves `A x = b` for symmetric positive definite `A`, falling back to a
/// ridge `1e-8·trace/K` (grown tenfold until it factors) when `A` is
/// ill-conditioned. Returns the solution and the ridge used.
pub fn solve_spd_with_ridge(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<(DVector<f64>, f64)> {
    let k = a.nrows();
    let try_solve = |m: DMatrix<f64>| {
        let chol = m.cholesky()?;
        let l = chol.l_dirty();
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for i in 0..k {
            lo = lo.min(l[(i, i)]);
            hi = hi.max(l[(i, i)]);
        }
        if (hi / lo).powi(2) > MAX_CONDITION {
            return None;
        }
        Some(chol.solve(b))
    };
    if let Some(x) = try_solve(a.clone()) {
        return Some((x, 0.0));
    }
    let trace = a.trace().abs().max(f64::MIN_POSITIVE);
    let mut ridge = 1e-8 * trace / k as f64;
    for _ in 0..12 {
        let mut m = a.clone();
        for i in 0..k {
            m[(i, i)] += ridge;
        }
        if let Some(chol) = m.cholesky() {
            return Some((chol.solve(b), ridge));
        }
        ridge *= 10.0;
    }
    None
}
