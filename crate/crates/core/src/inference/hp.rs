use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Conventional smoothing weight for monthly data.
pub const MONTHLY_LAMBDA: f64 = 14_400.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HpDecomposition {
    pub trend: Vec<f64>,
    pub cycle: Vec<f64>,
}

/// Hodrick–Prescott decomposition.
///
/// The trend minimizes `Σ(y−τ)² + λΣ(Δ²τ)²`. The cycle is computed directly
/// as `λD'w` with `(I + λDD')w = Dy`, where `D` is the second-difference
/// operator; this system is pentadiagonal and stays well conditioned for
/// large λ. The trend is `y − cycle`, so the two add back to the series up to one rounding.
pub fn hp_filter(series: &[f64], lambda: f64) -> Result<HpDecomposition> {
    let t = series.len();
    if t < 4 {
        return Err(Error::Domain(format!("HP filter needs at least 4 observations, got {t}")));
    }
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::Domain(format!("HP lambda must be positive, got {lambda}")));
    }
    if series.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain("HP filter input contains non-finite values".into()));
    }
    let m = t - 2;
    let dy: Vec<f64> = (0..m).map(|i| series[i] - 2.0 * series[i + 1] + series[i + 2]).collect();
    let w = solve_pentadiagonal(1.0 + 6.0 * lambda, -4.0 * lambda, lambda, &dy);
    // (D'w)_j = w_{j-2} − 2 w_{j-1} + w_j
    let at = |i: isize| if i >= 0 && (i as usize) < m { w[i as usize] } else { 0.0 };
    let cycle: Vec<f64> = (0..t as isize)
        .map(|j| lambda * (at(j - 2) - 2.0 * at(j - 1) + at(j)))
        .collect();
    let trend = series.iter().zip(&cycle).map(|(y, c)| y - c).collect();
    Ok(HpDecomposition { trend, cycle })
}

/// Solves the symmetric Toeplitz-banded system with diagonal `d`, first
/// off-diagonal `e` and second off-diagonal `f` by banded `LDL'`.
fn solve_pentadiagonal(d: f64, e: f64, f: f64, b: &[f64]) -> Vec<f64> {
    let m = b.len();
    let mut diag = vec![0.0; m];
    let mut l1 = vec![0.0; m];
    let mut l2 = vec![0.0; m];
    for i in 0..m {
        let mut di = d;
        if i >= 1 {
            di -= l1[i - 1] * l1[i - 1] * diag[i - 1];
        }
        if i >= 2 {
            di -= l2[i - 2] * l2[i - 2] * diag[i - 2];
        }
        diag[i] = di;
        let mut off = e;
        if i >= 1 {
            off -= l2[i - 1] * l1[i - 1] * diag[i - 1];
        }
        l1[i] = off / di;
        l2[i] = f / di;
    }
    let mut z = vec![0.0; m];
    for i in 0..m {
        let mut v = b[i];
        if i >= 1 {
            v -= l1[i - 1] * z[i - 1];
        }
        if i >= 2 {
            v -= l2[i - 2] * z[i - 2];
        }
        z[i] = v;
    }
    let mut x = vec![0.0; m];
    for i in (0..m).rev() {
        let mut v = z[i] / diag[i];
        if i + 1 < m {
            v -= l1[i] * x[i + 1];
        }
        if i + 2 < m {
            v -= l2[i] * x[i + 2];
        }
        x[i] = v;
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::*;

    fn dense_trend(y: &[f64], lambda: f64) -> Vec<f64> {
        let t = y.len();
        let mut d = DMatrix::zeros(t - 2, t);
        for i in 0..t - 2 {
            d[(i, i)] = 1.0;
            d[(i, i + 1)] = -2.0;
            d[(i, i + 2)] = 1.0;
        }
        let a = DMatrix::identity(t, t) + d.transpose() * &d * lambda;
        a.lu().solve(&DVector::from_column_slice(y)).unwrap().as_slice().to_vec()
    }

    #[test]
    fn matches_dense_solution() {
        let y: Vec<f64> = (0..40).map(|i| (i as f64 * 0.3).sin() + 0.05 * i as f64).collect();
        for lambda in [1.0, 100.0, 14400.0] {
            let hp = hp_filter(&y, lambda).unwrap();
            let dense = dense_trend(&y, lambda);
            for (a, b) in hp.trend.iter().zip(&dense) {
                assert!((a - b).abs() < 1e-9, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn constant_and_linear_have_zero_cycle() {
        let c = hp_filter(&[2.5; 30], MONTHLY_LAMBDA).unwrap();
        assert!(c.cycle.iter().all(|x| *x == 0.0));
        let line: Vec<f64> = (0..100).map(|i| 0.7 - 0.013 * i as f64).collect();
        let l = hp_filter(&line, MONTHLY_LAMBDA).unwrap();
        assert!(l.cycle.iter().all(|x| x.abs() < 1e-10));
    }

    #[test]
    fn short_series_and_bad_lambda_error() {
        assert!(hp_filter(&[1.0, 2.0, 3.0], 1.0).is_err());
        assert!(hp_filter(&[1.0; 5], 0.0).is_err());
    }

    proptest! {
        #[test]
        fn trend_plus_cycle_is_series(y in prop::collection::vec(-5.0f64..5.0, 4..60), lambda in 0.1f64..1e6) {
            let hp = hp_filter(&y, lambda).unwrap();
            for (i, &v) in y.iter().enumerate() {
                let scale = v.abs().max(hp.cycle[i].abs());
                prop_assert!((hp.trend[i] + hp.cycle[i] - v).abs() <= 2.0 * f64::EPSILON * scale);
            }
        }

        #[test]
        fn linear_in_the_series(
            x in prop::collection::vec(-1.0f64..1.0, 30),
            y in prop::collection::vec(-1.0f64..1.0, 30),
            a in -3.0f64..3.0,
            b in -3.0f64..3.0,
        ) {
            let combo: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
            let hx = hp_filter(&x, 1600.0).unwrap();
            let hy = hp_filter(&y, 1600.0).unwrap();
            let hc = hp_filter(&combo, 1600.0).unwrap();
            for i in 0..30 {
                prop_assert!((hc.trend[i] - (a * hx.trend[i] + b * hy.trend[i])).abs() < 1e-10);
            }
        }
    }
}
