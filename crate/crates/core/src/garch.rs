//! Asymmetric diagonal multivariate GARCH recursion
//!
//! `H_t = C'C + aa'∘ε_{t-1}ε'_{t-1} + bb'∘H_{t-1} + ss'∘ξ_{t-1}ξ'_{t-1} + zz'∘η_{t-1}η'_{t-1}`
//!
//! where `ξ` keeps negative innovations and `η` keeps innovations larger in
//! magnitude than their conditional standard deviation. Every term is PSD,
//! so `H_t` stays PSD whenever `H_{t-1}` is.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{is_symmetric, min_eigenvalue, psd_min_eigenvalue};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GarchParams {
    /// Lower-triangular intercept factor; the intercept is `C'C`.
    pub c: DMatrix<f64>,
    pub a: DVector<f64>,
    pub b: DVector<f64>,
    pub s: DVector<f64>,
    pub z: DVector<f64>,
}

impl GarchParams {
    pub fn symmetric(c: DMatrix<f64>, a: DVector<f64>, b: DVector<f64>) -> Self {
        let n = a.len();
        Self {
            c,
            a,
            b,
            s: DVector::zeros(n),
            z: DVector::zeros(n),
        }
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }

    pub fn intercept(&self) -> DMatrix<f64> {
        self.c.transpose() * &self.c
    }

    pub fn is_symmetric_model(&self) -> bool {
        self.s.iter().chain(self.z.iter()).all(|&v| v == 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        if self.c.shape() != (n, n) || self.b.len() != n || self.s.len() != n || self.z.len() != n {
            return Err(Error::Shape(format!("GARCH blocks inconsistent with N={n}")));
        }
        for i in 0..n {
            for j in i + 1..n {
                if self.c[(i, j)] != 0.0 {
                    return Err(Error::Domain(format!("C[{i},{j}] above the diagonal is nonzero")));
                }
            }
        }
        Ok(())
    }
}

/// Sequence of conditional covariances with the innovations that drove it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariancePath {
    pub h: Vec<DMatrix<f64>>,
    /// T×N residuals.
    pub eps: DMatrix<f64>,
    pub xi: DMatrix<f64>,
    pub eta: DMatrix<f64>,
    /// T×N conditional variances (diagonal of each `H_t`).
    pub h_diag: DMatrix<f64>,
}

impl CovariancePath {
    pub fn periods(&self) -> usize {
        self.h.len()
    }

    /// Residuals divided by their conditional standard deviations.
    pub fn standardized_residuals(&self) -> Result<DMatrix<f64>> {
        let (t, n) = self.eps.shape();
        let mut out = DMatrix::zeros(t, n);
        for r in 0..t {
            for i in 0..n {
                let h = self.h_diag[(r, i)];
                if !(h > 0.0) {
                    return Err(Error::Domain(format!("nonpositive variance at t={r}, asset {i}")));
                }
                out[(r, i)] = self.eps[(r, i)] / h.sqrt();
            }
        }
        Ok(out)
    }
}

#[inline]
pub(crate) fn indicator_pair(eps: f64, h: f64) -> (f64, f64) {
    let xi = if eps < 0.0 { eps } else { 0.0 };
    let eta = if eps.abs() > h.sqrt() { eps } else { 0.0 };
    (xi, eta)
}

/// Sign (`ξ`) and size (`η`) innovations; inequalities are strict.
pub fn indicator_innovations(eps: &DVector<f64>, h_diag: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
    if eps.len() != h_diag.len() {
        return Err(Error::Shape("eps and variance vectors differ in length".into()));
    }
    if let Some(i) = h_diag.iter().position(|&h| !(h > 0.0)) {
        return Err(Error::Domain(format!("variance of asset {i} is not strictly positive")));
    }
    let n = eps.len();
    let mut xi = DVector::zeros(n);
    let mut eta = DVector::zeros(n);
    for i in 0..n {
        let (x, e) = indicator_pair(eps[i], h_diag[i]);
        xi[i] = x;
        eta[i] = e;
    }
    Ok((xi, eta))
}

/// Scratch vectors for [`step_into`].
#[derive(Debug, Clone)]
pub(crate) struct StepScratch {
    ae: Vec<f64>,
    se: Vec<f64>,
    ze: Vec<f64>,
    bb: Vec<f64>,
}

impl StepScratch {
    pub(crate) fn new(params: &GarchParams) -> Self {
        let n = params.dim();
        let mut bb = vec![0.0; n * n];
        for j in 0..n {
            for i in 0..n {
                bb[j * n + i] = params.b[i] * params.b[j];
            }
        }
        Self {
            ae: vec![0.0; n],
            se: vec![0.0; n],
            ze: vec![0.0; n],
            bb,
        }
    }
}

/// Unchecked step on column-major slices. `cc` is the precomputed `C'C`.
#[inline]
#[allow(clippy::too_many_arguments)]
pub(crate) fn step_into(
    out: &mut [f64],
    h_prev: &[f64],
    eps: &[f64],
    xi: &[f64],
    eta: &[f64],
    cc: &[f64],
    params: &GarchParams,
    scratch: &mut StepScratch,
) {
    let n = eps.len();
    for i in 0..n {
        scratch.ae[i] = params.a[i] * eps[i];
        scratch.se[i] = params.s[i] * xi[i];
        scratch.ze[i] = params.z[i] * eta[i];
    }
    for j in 0..n {
        for i in j..n {
            let k = j * n + i;
            let v = cc[k]
                + scratch.ae[i] * scratch.ae[j]
                + scratch.bb[k] * h_prev[k]
                + scratch.se[i] * scratch.se[j]
                + scratch.ze[i] * scratch.ze[j];
            out[k] = v;
            out[i * n + j] = v;
        }
    }
}

fn check_psd(h: &DMatrix<f64>, t: usize) -> Result<()> {
    if !is_symmetric(h) {
        return Err(Error::NotPsd {
            t,
            min_eigenvalue: f64::NAN,
        });
    }
    if let Some(e) = psd_min_eigenvalue(h) {
        return Err(Error::NotPsd { t, min_eigenvalue: e });
    }
    Ok(())
}

/// One step of the recursion from the previous period's state.
pub fn covariance_step(
    h_prev: &DMatrix<f64>,
    eps_prev: &DVector<f64>,
    xi_prev: &DVector<f64>,
    eta_prev: &DVector<f64>,
    params: &GarchParams,
) -> Result<DMatrix<f64>> {
    params.validate()?;
    let n = params.dim();
    if h_prev.shape() != (n, n) || eps_prev.len() != n || xi_prev.len() != n || eta_prev.len() != n {
        return Err(Error::Shape(format!("step inputs inconsistent with N={n}")));
    }
    check_psd(h_prev, 0)?;
    let cc = params.intercept();
    let mut out = DMatrix::zeros(n, n);
    let mut scratch = StepScratch::new(params);
    step_into(
        out.as_mut_slice(),
        h_prev.as_slice(),
        eps_prev.as_slice(),
        xi_prev.as_slice(),
        eta_prev.as_slice(),
        cc.as_slice(),
        params,
        &mut scratch,
    );
    Ok(out)
}

/// The symmetric recursion `C'C + aa'∘εε' + bb'∘H`, coded on its own so the
/// asymmetric engine's `s = z = 0` reduction can be checked against it.
pub fn symmetric_covariance_step(
    h_prev: &DMatrix<f64>,
    eps_prev: &DVector<f64>,
    c: &DMatrix<f64>,
    a: &DVector<f64>,
    b: &DVector<f64>,
) -> DMatrix<f64> {
    let n = a.len();
    let cc = c.transpose() * c;
    let ae = a.component_mul(eps_prev);
    DMatrix::from_fn(n, n, |i, j| {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        cc[(i, j)] + ae[i] * ae[j] + (b[i] * b[j]) * h_prev[(i, j)]
    })
}

/// Runs the recursion over a fixed residual matrix: `H_1 = H_init`, and each
/// later `H_t` uses `ε_{t-1}` with indicators built from `H_{t-1}`.
pub fn run_recursion(eps: &DMatrix<f64>, params: &GarchParams, h_init: &DMatrix<f64>) -> Result<CovariancePath> {
    params.validate()?;
    let (t_len, n) = eps.shape();
    if params.dim() != n || h_init.shape() != (n, n) {
        return Err(Error::Shape(format!("recursion inputs inconsistent with N={n}")));
    }
    if t_len == 0 {
        return Err(Error::Shape("empty residual matrix".into()));
    }
    check_psd(h_init, 0)?;
    let cc = params.intercept();
    let mut scratch = StepScratch::new(params);
    let mut h = Vec::with_capacity(t_len);
    let mut xi = DMatrix::zeros(t_len, n);
    let mut eta = DMatrix::zeros(t_len, n);
    let mut h_diag = DMatrix::zeros(t_len, n);
    let mut current = h_init.clone();
    let mut e_prev = vec![0.0; n];
    let mut x_prev = vec![0.0; n];
    let mut n_prev = vec![0.0; n];
    for t in 0..t_len {
        if t > 0 {
            let mut next = DMatrix::zeros(n, n);
            step_into(
                next.as_mut_slice(),
                current.as_slice(),
                &e_prev,
                &x_prev,
                &n_prev,
                cc.as_slice(),
                params,
                &mut scratch,
            );
            if let Some(e) = psd_min_eigenvalue(&next) {
                return Err(Error::NotPsd { t, min_eigenvalue: e });
            }
            current = next;
        }
        for i in 0..n {
            let hii = current[(i, i)];
            if !(hii > 0.0) {
                return Err(Error::Domain(format!("variance of asset {i} is not positive at t={t}")));
            }
            h_diag[(t, i)] = hii;
            let (x, e) = indicator_pair(eps[(t, i)], hii);
            xi[(t, i)] = x;
            eta[(t, i)] = e;
            e_prev[i] = eps[(t, i)];
            x_prev[i] = x;
            n_prev[i] = e;
        }
        h.push(current.clone());
    }
    Ok(CovariancePath {
        h,
        eps: eps.clone(),
        xi,
        eta,
        h_diag,
    })
}

/// Variance of each asset orthogonal to the world market,
/// `q_i = h_ii − h_iW² / h_WW`, with the world entry exactly zero.
pub fn residual_variance(h: &DMatrix<f64>, world_index: usize) -> Result<DVector<f64>> {
    let n = h.nrows();
    if world_index >= n {
        return Err(Error::Shape(format!("world index {world_index} outside N={n}")));
    }
    let hww = h[(world_index, world_index)];
    if !(hww > 0.0) {
        return Err(Error::Domain("world conditional variance is not positive".into()));
    }
    Ok(DVector::from_fn(n, |i, _| {
        if i == world_index {
            0.0
        } else {
            let hiw = h[(i, world_index)];
            (h[(i, i)] - hiw * hiw / hww).max(0.0)
        }
    }))
}

/// Conditional correlation of each non-world asset with the world market,
/// T×(N−1) in non-world column order.
pub fn conditional_correlations(path: &CovariancePath, world_index: usize) -> Result<DMatrix<f64>> {
    let t_len = path.periods();
    let n = path.h.first().map_or(0, |h| h.nrows());
    if world_index >= n {
        return Err(Error::Shape(format!("world index {world_index} outside N={n}")));
    }
    let others: Vec<usize> = (0..n).filter(|&i| i != world_index).collect();
    let mut out = DMatrix::zeros(t_len, others.len());
    for (t, h) in path.h.iter().enumerate() {
        let hww = h[(world_index, world_index)];
        for (col, &i) in others.iter().enumerate() {
            let hii = h[(i, i)];
            if !(hii > 0.0 && hww > 0.0) {
                return Err(Error::Domain(format!("zero variance at t={t}")));
            }
            out[(t, col)] = (h[(i, world_index)] / (hii * hww).sqrt()).clamp(-1.0, 1.0);
        }
    }
    Ok(out)
}

/// Minimum eigenvalue over a path; convenient for invariant checks.
pub fn path_min_eigenvalue(path: &CovariancePath) -> f64 {
    path.h.iter().map(min_eigenvalue).fold(f64::INFINITY, f64::min)
}
