//! Time-varying prices of world and domestic risk and the conditional mean
//! system they drive.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::InstrumentSet;
use crate::error::{Error, Result};
use crate::garch::residual_variance;

/// Exponents are clamped to this magnitude before `exp`.
pub const EXPONENT_BOUND: f64 = 50.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceParams {
    pub kappa_world: DVector<f64>,
    /// One vector per non-world asset.
    pub kappa_local: Vec<DVector<f64>>,
    /// Country constants (augmented model only).
    pub alpha: Option<DVector<f64>>,
    /// Loadings on the non-constant local instruments (augmented model only).
    pub phi: Option<Vec<DVector<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricePath {
    pub delta_world: DVector<f64>,
    /// T×(N−1), non-world asset order.
    pub delta_local: DMatrix<f64>,
    /// Number of exponent evaluations that hit the clamp.
    pub clamped: usize,
}

impl PricePath {
    pub fn was_clamped(&self) -> bool {
        self.clamped > 0
    }
}

#[inline]
pub(crate) fn clamped_exp(x: f64) -> (f64, bool) {
    if x > EXPONENT_BOUND {
        (EXPONENT_BOUND.exp(), true)
    } else if x < -EXPONENT_BOUND {
        ((-EXPONENT_BOUND).exp(), true)
    } else {
        (x.exp(), false)
    }
}

#[inline]
pub(crate) fn row_dot(m: &DMatrix<f64>, t: usize, kappa: &DVector<f64>) -> f64 {
    let mut s = 0.0;
    for (j, k) in kappa.iter().enumerate() {
        s += m[(t, j)] * k;
    }
    s
}

/// `δ_{t−1} = exp(κ_w'Z_{t−1})` and `δ_{di,t−1} = exp(κ_i'Z^i_{t−1})` for every row.
pub fn risk_prices(params: &PriceParams, instruments: &InstrumentSet) -> Result<PricePath> {
    if params.kappa_world.len() != instruments.n_global() {
        return Err(Error::Shape(format!(
            "kappa_world has {} entries for {} global instruments",
            params.kappa_world.len(),
            instruments.n_global()
        )));
    }
    if params.kappa_local.len() != instruments.local().len() {
        return Err(Error::Shape(format!(
            "{} local price vectors for {} local instrument sets",
            params.kappa_local.len(),
            instruments.local().len()
        )));
    }
    if let Some(k) = params.kappa_local.iter().find(|k| k.len() != instruments.n_local()) {
        return Err(Error::Shape(format!(
            "kappa_local has {} entries for {} local instruments",
            k.len(),
            instruments.n_local()
        )));
    }
    let t_len = instruments.periods();
    let n_local = params.kappa_local.len();
    let mut clamped = 0;
    let mut delta_world = DVector::zeros(t_len);
    let mut delta_local = DMatrix::zeros(t_len, n_local);
    for t in 0..t_len {
        let (d, c) = clamped_exp(row_dot(instruments.global(), t, &params.kappa_world));
        clamped += c as usize;
        delta_world[t] = d;
        for (i, (z, k)) in instruments.local().iter().zip(&params.kappa_local).enumerate() {
            let (d, c) = clamped_exp(row_dot(z, t, k));
            clamped += c as usize;
            delta_local[(t, i)] = d;
        }
    }
    Ok(PricePath {
        delta_world,
        delta_local,
        clamped,
    })
}

/// Writes `μ_i = δ·h_iW + δ_di·q_i` into `mu` without allocating.
/// `delta_local` is in non-world order.
#[inline]
pub(crate) fn mean_into(mu: &mut [f64], delta: f64, delta_local: &[f64], h: &[f64], n: usize, world: usize) {
    let hww = h[world * n + world];
    let mut local = 0;
    for i in 0..n {
        let hiw = h[world * n + i];
        if i == world {
            mu[i] = delta * hww;
        } else {
            let q = (h[i * n + i] - hiw * hiw / hww).max(0.0);
            mu[i] = delta * hiw + delta_local[local] * q;
            local += 1;
        }
    }
}

/// Conditional mean vector `μ_t = δ_t h_Wt + δ_d,t ∘ q_t`.
pub fn conditional_mean(
    delta: f64,
    delta_local: &DVector<f64>,
    h: &DMatrix<f64>,
    world_index: usize,
) -> Result<DVector<f64>> {
    let n = h.nrows();
    if delta_local.len() + 1 != n {
        return Err(Error::Shape(format!(
            "{} domestic prices for {n} assets",
            delta_local.len()
        )));
    }
    // validates world variance and index
    residual_variance(h, world_index)?;
    let mut mu = DVector::zeros(n);
    mean_into(mu.as_mut_slice(), delta, delta_local.as_slice(), h.as_slice(), n, world_index);
    Ok(mu)
}

/// Adds `α_i + φ_i'Z^i` (non-constant local instruments) to the non-world
/// entries of `base`. `local_rows[i]` is the full local instrument row of
/// the i-th non-world asset, constant first.
pub fn augmented_mean(
    params: &PriceParams,
    local_rows: &[DVector<f64>],
    base: &DVector<f64>,
    world_index: usize,
) -> Result<DVector<f64>> {
    let (Some(alpha), Some(phi)) = (&params.alpha, &params.phi) else {
        return Err(Error::Config("augmented mean requires alpha and phi (augmented variant)".into()));
    };
    let n = base.len();
    if alpha.len() + 1 != n || phi.len() + 1 != n || local_rows.len() + 1 != n {
        return Err(Error::Shape(format!("augmented blocks inconsistent with N={n}")));
    }
    let mut out = base.clone();
    let mut local = 0;
    for i in 0..n {
        if i == world_index {
            continue;
        }
        let row = &local_rows[local];
        if row.len() != phi[local].len() + 1 {
            return Err(Error::Shape(format!(
                "local row has {} entries, phi expects {}",
                row.len(),
                phi[local].len() + 1
            )));
        }
        let mut shift = alpha[local];
        for (k, p) in phi[local].iter().enumerate() {
            shift += p * row[k + 1];
        }
        out[i] += shift;
        local += 1;
    }
    Ok(out)
}

pub fn residuals(r: &DVector<f64>, mu: &DVector<f64>) -> Result<DVector<f64>> {
    if r.len() != mu.len() {
        return Err(Error::Shape(format!("return vector {} vs mean {}", r.len(), mu.len())));
    }
    Ok(r - mu)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    fn params(kw: &[f64], kl: &[&[f64]]) -> PriceParams {
        PriceParams {
            kappa_world: v(kw),
            kappa_local: kl.iter().map(|k| v(k)).collect(),
            alpha: None,
            phi: None,
        }
    }

    fn instruments(t: usize, lg: usize, ll: usize, n_local: usize, seed: u64) -> InstrumentSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut mk = |cols: usize| DMatrix::from_fn(t, cols, |_, j| if j == 0 { 1.0 } else { rng.random_range(-1.0..1.0) });
        let g = mk(lg);
        let l = (0..n_local).map(|_| mk(ll)).collect();
        InstrumentSet::new(g, l).unwrap()
    }

    #[test]
    fn zero_kappa_gives_unit_prices() {
        let z = instruments(10, 3, 2, 2, 1);
        let p = risk_prices(&params(&[0.0; 3], &[&[0.0; 2], &[0.0; 2]]), &z).unwrap();
        assert!(p.delta_world.iter().all(|&d| d == 1.0));
        assert!(p.delta_local.iter().all(|&d| d == 1.0));
        assert!(!p.was_clamped());
    }

    #[test]
    fn log_two_constant_gives_two() {
        let z = InstrumentSet::constant(5, 1);
        let p = risk_prices(&params(&[2f64.ln()], &[&[0.0]]), &z).unwrap();
        for d in p.delta_world.iter() {
            assert!((d - 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn exponent_clamp_is_flagged() {
        let z = InstrumentSet::constant(3, 1);
        let p = risk_prices(&params(&[80.0], &[&[-80.0]]), &z).unwrap();
        assert_eq!(p.clamped, 6);
        assert_eq!(p.delta_world[0], 50f64.exp());
    }

    #[test]
    fn dimension_mismatch() {
        let z = InstrumentSet::constant(3, 1);
        assert!(matches!(risk_prices(&params(&[0.0, 1.0], &[&[0.0]]), &z), Err(Error::Shape(_))));
    }

    #[test]
    fn mean_cases() {
        let h = DMatrix::from_row_slice(2, 2, &[4.0, 2.0, 2.0, 4.0]);
        assert_eq!(conditional_mean(0.0, &v(&[0.0]), &h, 1).unwrap(), v(&[0.0, 0.0]));
        assert_eq!(conditional_mean(2.0, &v(&[3.0]), &h, 1).unwrap(), v(&[13.0, 8.0]));
        let d = DMatrix::from_diagonal(&v(&[1.0, 2.0, 3.0]));
        assert_eq!(conditional_mean(1.0, &v(&[1.0, 1.0]), &d, 2).unwrap(), v(&[1.0, 2.0, 3.0]));
    }

    #[test]
    fn augmented_mean_cases() {
        let base = v(&[0.1, 0.2, 0.3]);
        let rows = vec![v(&[1.0, 0.5, -0.2]), v(&[1.0, 0.1, 0.4])];
        let mut p = params(&[0.0], &[&[0.0; 3], &[0.0; 3]]);
        assert!(matches!(augmented_mean(&p, &rows, &base, 2), Err(Error::Config(_))));
        p.alpha = Some(v(&[0.0, 0.0]));
        p.phi = Some(vec![v(&[0.0, 0.0]), v(&[0.0, 0.0])]);
        assert_eq!(augmented_mean(&p, &rows, &base, 2).unwrap(), base);
        p.alpha = Some(v(&[0.01, 0.0]));
        let out = augmented_mean(&p, &rows, &base, 2).unwrap();
        assert_eq!(out[0], base[0] + 0.01);
        assert_eq!(out[2], base[2]);

        p.alpha = Some(v(&[0.03, -0.02]));
        p.phi = Some(vec![v(&[0.5, 2.0]), v(&[-1.0, 0.25])]);
        let out = augmented_mean(&p, &rows, &base, 2).unwrap();
        let expect0 = 0.1 + 0.03 + 0.5 * 0.5 + 2.0 * -0.2;
        let expect1 = 0.2 - 0.02 - 1.0 * 0.1 + 0.25 * 0.4;
        assert!((out[0] - expect0).abs() < 1e-15);
        assert!((out[1] - expect1).abs() < 1e-15);
    }

    #[test]
    fn residual_cases() {
        let r = v(&[0.1, -0.2]);
        assert_eq!(residuals(&r, &r).unwrap(), v(&[0.0, 0.0]));
        assert_eq!(residuals(&r, &DVector::zeros(2)).unwrap(), r);
        assert_eq!(residuals(&r, &v(&[0.05, 0.05])).unwrap(), v(&[0.1 - 0.05, -0.2 - 0.05]));
    }

    proptest! {
        #[test]
        fn prices_are_positive(seed in 0u64..1000, scale in 0.0f64..200.0) {
            let z = instruments(20, 3, 2, 2, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
            let mut k = |n: usize| DVector::from_fn(n, |_, _| rng.random_range(-scale..scale));
            let p = PriceParams { kappa_world: k(3), kappa_local: vec![k(2), k(2)], alpha: None, phi: None };
            let path = risk_prices(&p, &z).unwrap();
            prop_assert!(path.delta_world.iter().chain(path.delta_local.iter()).all(|&d| d > 0.0));
        }

        #[test]
        fn world_mean_ignores_domestic_prices(d1 in 0.0f64..10.0, d2 in 0.0f64..10.0) {
            let h = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.5, 0.3, 1.0, 0.2, 0.5, 0.2, 1.5]);
            let a = conditional_mean(1.5, &v(&[d1, d2]), &h, 2).unwrap();
            let b = conditional_mean(1.5, &v(&[0.0, 0.0]), &h, 2).unwrap();
            prop_assert_eq!(a[2], b[2]);
        }
    }
}
