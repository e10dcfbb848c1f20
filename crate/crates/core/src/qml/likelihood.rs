use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::Objective;
use crate::data::{InstrumentSet, ModelParams, ModelSpec, ParameterLayout, ReturnsPanel};
use crate::error::{Error, Result};
use crate::garch::{indicator_pair, step_into, CovariancePath, StepScratch};
use crate::linalg::{cholesky_in_place, compensated_sum, condition_estimate, logdet_and_quad, MAX_CONDITION};
use crate::pricing::{mean_into, risk_prices, PricePath};

const PENALTY_WEIGHT: f64 = 1e4;
const PERSISTENCE_CEILING: f64 = 0.9999;

/// `1e4 · Σ_i max(0, a_i² + b_i² + ½s_i² + ½z_i² − 0.9999)²`.
pub fn stationarity_penalty(params: &ModelParams) -> f64 {
    let g = &params.garch;
    (0..g.dim())
        .map(|i| {
            let p = g.a[i].powi(2) + g.b[i].powi(2) + 0.5 * g.s[i].powi(2) + 0.5 * g.z[i].powi(2);
            (p - PERSISTENCE_CEILING).max(0.0).powi(2)
        })
        .sum::<f64>()
        * PENALTY_WEIGHT
}

/// `−½(N ln 2π + ln|H| + ε′H⁻¹ε)`, the Gaussian log density of one period,
/// computed with the same kernel as the fused likelihood loop.
pub fn gaussian_log_density(eps: &DVector<f64>, h: &DMatrix<f64>) -> Result<f64> {
    let n = eps.len();
    if n == 0 || h.shape() != (n, n) {
        return Err(Error::Shape(format!("density needs a {n}x{n} covariance, got {:?}", h.shape())));
    }
    let mut factor = h.as_slice().to_vec();
    if cholesky_in_place(&mut factor, n).is_none() || condition_estimate(&factor, n) > MAX_CONDITION {
        return Err(Error::SingularCovariance { t: 0 });
    }
    let mut work = vec![0.0; n];
    let (logdet, quad) = logdet_and_quad(&factor, n, eps.as_slice(), &mut work);
    Ok(-0.5 * n as f64 * (2.0 * PI).ln() - 0.5 * logdet - 0.5 * quad)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodResult {
    pub total_loglik: f64,
    pub per_period: Vec<f64>,
    pub clamp_flag: bool,
    pub penalty_applied: f64,
}

/// Everything the fused mean/covariance loop produces along the sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusedPath {
    pub covariance: CovariancePath,
    pub prices: PricePath,
    /// T×N conditional means.
    pub mean: DMatrix<f64>,
    pub per_period: Vec<f64>,
}

/// The estimation problem: aligned data, model specification and the
/// covariance used to start the recursion.
#[derive(Debug, Clone)]
pub struct QmlProblem<'a> {
    panel: &'a ReturnsPanel,
    instruments: &'a InstrumentSet,
    spec: ModelSpec,
    layout: ParameterLayout,
    h_init: DMatrix<f64>,
    penalize: bool,
    frozen: Option<Arc<FrozenIndicators>>,
}

/// Indicator pattern (`ε < 0`, `|ε| > √h`) of every period and asset,
/// row-major T×N.
#[derive(Debug, Clone, PartialEq)]
struct FrozenIndicators {
    negative: Vec<bool>,
    large: Vec<bool>,
}

struct Recorder {
    h: Vec<DMatrix<f64>>,
    eps: DMatrix<f64>,
    xi: DMatrix<f64>,
    eta: DMatrix<f64>,
    h_diag: DMatrix<f64>,
    mean: DMatrix<f64>,
}

impl<'a> QmlProblem<'a> {
    /// `H_init` defaults to the sample covariance of the demeaned returns.
    pub fn new(panel: &'a ReturnsPanel, instruments: &'a InstrumentSet, spec: ModelSpec) -> Result<Self> {
        spec.check_data(panel, instruments)?;
        if panel.world_index() != panel.n_assets() - 1 {
            return Err(Error::Config("the world market must be the last column".into()));
        }
        let layout = ParameterLayout::new(&spec)?;
        Ok(Self {
            panel,
            instruments,
            spec,
            layout,
            h_init: panel.sample_covariance(),
            penalize: true,
            frozen: None,
        })
    }

    pub fn with_h_init(mut self, h_init: DMatrix<f64>) -> Result<Self> {
        let n = self.spec.n_assets;
        if h_init.shape() != (n, n) {
            return Err(Error::Shape(format!("H_init must be {n}×{n}")));
        }
        if let Some(e) = crate::linalg::psd_min_eigenvalue(&h_init) {
            return Err(Error::NotPsd { t: 0, min_eigenvalue: e });
        }
        self.h_init = h_init;
        Ok(self)
    }

    /// Disables the stationarity penalty.
    pub fn without_penalty(mut self) -> Self {
        self.penalize = false;
        self
    }

    /// Copy of the problem whose threshold indicators are fixed at the
    /// pattern realized at `theta`.
    ///
    /// The size indicator makes the likelihood jump where `|ε_it| = √h_iit`,
    /// so finite differences that straddle a switch are meaningless. With
    /// the pattern frozen the likelihood is smooth, agrees with the original
    /// at `theta`, and its derivatives are the almost-everywhere derivatives
    /// of the original.
    pub fn frozen_at(&self, theta: &[f64]) -> Result<Self> {
        let path = self.evaluate_path(theta)?;
        let (t_len, n) = path.covariance.eps.shape();
        let mut negative = Vec::with_capacity(t_len * n);
        let mut large = Vec::with_capacity(t_len * n);
        for t in 0..t_len {
            for i in 0..n {
                negative.push(path.covariance.xi[(t, i)] != 0.0);
                large.push(path.covariance.eta[(t, i)] != 0.0);
            }
        }
        let mut out = self.clone();
        out.frozen = Some(Arc::new(FrozenIndicators { negative, large }));
        Ok(out)
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen.is_some()
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn layout(&self) -> &ParameterLayout {
        &self.layout
    }

    pub fn panel(&self) -> &ReturnsPanel {
        self.panel
    }

    pub fn instruments(&self) -> &InstrumentSet {
        self.instruments
    }

    pub fn h_init(&self) -> &DMatrix<f64> {
        &self.h_init
    }

    pub fn penalty_for(&self, theta: &[f64]) -> Result<f64> {
        if !self.penalize {
            return Ok(0.0);
        }
        Ok(stationarity_penalty(&self.layout.unpack(theta)?))
    }

    pub fn log_likelihood(&self, theta: &[f64]) -> Result<LikelihoodResult> {
        let params = self.layout.unpack(theta)?;
        let (per_period, clamped) = self.run(&params, None)?;
        let penalty = if self.penalize { stationarity_penalty(&params) } else { 0.0 };
        Ok(LikelihoodResult {
            total_loglik: compensated_sum(per_period.iter().copied()) - penalty,
            per_period,
            clamp_flag: clamped > 0,
            penalty_applied: penalty,
        })
    }

    /// Full path (covariances, residuals, prices, means) at `theta`.
    pub fn evaluate_path(&self, theta: &[f64]) -> Result<FusedPath> {
        let params = self.layout.unpack(theta)?;
        let (t_len, n) = self.panel.values().shape();
        let mut rec = Recorder {
            h: Vec::with_capacity(t_len),
            eps: DMatrix::zeros(t_len, n),
            xi: DMatrix::zeros(t_len, n),
            eta: DMatrix::zeros(t_len, n),
            h_diag: DMatrix::zeros(t_len, n),
            mean: DMatrix::zeros(t_len, n),
        };
        let (per_period, _) = self.run(&params, Some(&mut rec))?;
        let prices = risk_prices(&params.prices, self.instruments)?;
        Ok(FusedPath {
            covariance: CovariancePath {
                h: rec.h,
                eps: rec.eps,
                xi: rec.xi,
                eta: rec.eta,
                h_diag: rec.h_diag,
            },
            prices,
            mean: rec.mean,
            per_period,
        })
    }

    /// The fused loop: at each t, build `H_t` from period t−1, form the
    /// mean from `H_t` and the prices, take residuals, and score the period.
    fn run(&self, params: &ModelParams, mut rec: Option<&mut Recorder>) -> Result<(Vec<f64>, usize)> {
        let returns = self.panel.values();
        let (t_len, n) = returns.shape();
        let world = self.panel.world_index();
        let prices = risk_prices(&params.prices, self.instruments)?;
        let garch = &params.garch;
        let cc = garch.intercept();
        let mut scratch = StepScratch::new(garch);
        let augmented = match (&params.prices.alpha, &params.prices.phi) {
            (Some(alpha), Some(phi)) => Some((alpha, phi)),
            _ => None,
        };

        let mut h = self.h_init.as_slice().to_vec();
        let mut h_next = vec![0.0; n * n];
        let mut factor = vec![0.0; n * n];
        let mut eps = vec![0.0; n];
        let mut xi = vec![0.0; n];
        let mut eta = vec![0.0; n];
        let mut mu = vec![0.0; n];
        let mut dl = vec![0.0; n - 1];
        let mut work = vec![0.0; n];
        let constant = -0.5 * n as f64 * (2.0 * PI).ln();
        let mut out = Vec::with_capacity(t_len);

        for t in 0..t_len {
            if t > 0 {
                step_into(&mut h_next, &h, &eps, &xi, &eta, cc.as_slice(), garch, &mut scratch);
                std::mem::swap(&mut h, &mut h_next);
            }
            for (i, d) in dl.iter_mut().enumerate() {
                *d = prices.delta_local[(t, i)];
            }
            mean_into(&mut mu, prices.delta_world[t], &dl, &h, n, world);
            if let Some((alpha, phi)) = augmented {
                let mut local = 0;
                for (i, m) in mu.iter_mut().enumerate() {
                    if i == world {
                        continue;
                    }
                    let z = &self.instruments.local()[local];
                    let mut shift = alpha[local];
                    for (k, p) in phi[local].iter().enumerate() {
                        shift += p * z[(t, k + 1)];
                    }
                    *m += shift;
                    local += 1;
                }
            }
            for i in 0..n {
                eps[i] = returns[(t, i)] - mu[i];
                let hii = h[i * n + i];
                if !(hii > 0.0) || !hii.is_finite() {
                    return Err(Error::SingularCovariance { t });
                }
                let (x, e) = match self.frozen.as_deref() {
                    Some(f) => {
                        let k = t * n + i;
                        (
                            if f.negative[k] { eps[i] } else { 0.0 },
                            if f.large[k] { eps[i] } else { 0.0 },
                        )
                    }
                    None => indicator_pair(eps[i], hii),
                };
                xi[i] = x;
                eta[i] = e;
            }
            factor.copy_from_slice(&h);
            if cholesky_in_place(&mut factor, n).is_none() || condition_estimate(&factor, n) > MAX_CONDITION {
                return Err(Error::SingularCovariance { t });
            }
            let (logdet, quad) = logdet_and_quad(&factor, n, &eps, &mut work);
            let ll = constant - 0.5 * logdet - 0.5 * quad;
            if !ll.is_finite() {
                return Err(Error::SingularCovariance { t });
            }
            out.push(ll);

            if let Some(rec) = rec.as_deref_mut() {
                rec.h.push(DMatrix::from_column_slice(n, n, &h));
                for i in 0..n {
                    rec.eps[(t, i)] = eps[i];
                    rec.xi[(t, i)] = xi[i];
                    rec.eta[(t, i)] = eta[i];
                    rec.h_diag[(t, i)] = h[i * n + i];
                    rec.mean[(t, i)] = mu[i];
                }
            }
        }
        Ok((out, prices.clamped))
    }

    /// Residual row helper for callers that need `ε_t` as a vector.
    pub fn residual_row(path: &FusedPath, t: usize) -> DVector<f64> {
        path.covariance.eps.row(t).transpose()
    }
}

impl Objective for QmlProblem<'_> {
    fn dim(&self) -> usize {
        self.layout.len()
    }

    fn contributions(&self, theta: &[f64]) -> Result<Vec<f64>> {
        let params = self.layout.unpack(theta)?;
        Ok(self.run(&params, None)?.0)
    }

    fn penalty(&self, theta: &[f64]) -> f64 {
        self.penalty_for(theta).unwrap_or(f64::INFINITY)
    }

    fn smooth_at(&self, theta: &[f64]) -> Result<Option<Box<dyn Objective + '_>>> {
        if self.frozen.is_some() || !self.spec.variant.has_asymmetry() {
            return Ok(None);
        }
        Ok(Some(Box::new(self.frozen_at(theta)?)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Variant, YearMonth};
    use crate::garch::{covariance_step, indicator_innovations};
    use crate::pricing::{augmented_mean, conditional_mean, residuals};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dates(t: usize) -> Vec<YearMonth> {
        let s: YearMonth = "2000-01".parse().unwrap();
        (0..t as i64).map(|k| s.offset(k)).collect()
    }

    fn fixture(variant: Variant, n: usize, t: usize, seed: u64) -> (ReturnsPanel, InstrumentSet, ModelSpec) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = DMatrix::from_fn(t, n, |_, _| rng.random_range(-0.1..0.1));
        let names = (0..n).map(|i| format!("A{i}")).collect();
        let panel = ReturnsPanel::new(dates(t), values, names, n - 1).unwrap();
        let mut mk = |cols: usize| DMatrix::from_fn(t, cols, |_, j| if j == 0 { 1.0 } else { rng.random_range(-0.5..0.5) });
        let g = mk(3);
        let l = (0..n - 1).map(|_| mk(3)).collect();
        let inst = InstrumentSet::new(g, l).unwrap();
        let spec = ModelSpec::for_data(variant, &panel, &inst).unwrap();
        (panel, inst, spec)
    }

    fn theta_for(layout: &ParameterLayout, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut theta: Vec<f64> = (0..layout.len()).map(|_| rng.random_range(-0.3..0.3)).collect();
        for i in 0..layout.n_assets {
            for j in 0..=i {
                theta[layout.c_index(i, j)] = if i == j { 0.05 } else { 0.01 };
            }
        }
        for k in layout.a.clone() {
            theta[k] = 0.3;
        }
        for k in layout.b.clone() {
            theta[k] = 0.8;
        }
        theta
    }

    #[test]
    fn single_period_closed_forms() {
        // N=2, T=2 panel; check period 1 (index 0) where H = H_init and ε = r − μ
        let t = 2;
        let panel = ReturnsPanel::new(
            dates(t),
            DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 0.0]),
            vec!["A".into(), "W".into()],
            1,
        )
        .unwrap();
        let inst = InstrumentSet::constant(t, 1);
        let spec = ModelSpec::for_data(Variant::Symmetric, &panel, &inst).unwrap();
        let problem = QmlProblem::new(&panel, &inst, spec)
            .unwrap()
            .with_h_init(DMatrix::identity(2, 2))
            .unwrap();
        let layout = problem.layout().clone();
        let mut theta = vec![0.0; layout.len()];
        // δ = exp(-50) keeps the mean negligible but not exactly zero, so use huge negative
        theta[layout.kappa_world.start] = -1e3;
        theta[layout.kappa_local[0].start] = -1e3;
        theta[layout.c_index(0, 0)] = 1.0;
        theta[layout.c_index(1, 1)] = 1.0;
        let res = problem.log_likelihood(&theta).unwrap();
        assert!(res.clamp_flag);
        let mu = (-50f64).exp();
        let expected = -(2.0 * PI).ln() - 0.5 * ((1.0 - mu).powi(2) + (1.0 - mu).powi(2));
        assert!((res.per_period[0] - expected).abs() < 1e-12);
        assert!((res.per_period[0] - (-2.8378770664093453)).abs() < 1e-6);
    }

    #[test]
    fn density_closed_forms() {
        let one = gaussian_log_density(&DVector::from_element(1, 0.0), &DMatrix::identity(1, 1)).unwrap();
        assert!((one - (-0.5 * (2.0 * PI).ln())).abs() < 1e-15);
        let two = gaussian_log_density(&DVector::from_element(2, 1.0), &DMatrix::identity(2, 2)).unwrap();
        assert!((two - (-(2.0 * PI).ln() - 1.0)).abs() < 1e-15);
        assert!(gaussian_log_density(&DVector::from_element(2, 1.0), &DMatrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn symmetric_equals_embedded_asymmetric() {
        let (panel, inst, spec) = fixture(Variant::Symmetric, 3, 40, 1);
        let sym = QmlProblem::new(&panel, &inst, spec).unwrap();
        let asym = QmlProblem::new(&panel, &inst, spec.with_variant(Variant::Asymmetric)).unwrap();
        let theta = theta_for(sym.layout(), 2);
        let embedded = sym.layout().embed(&theta, asym.layout()).unwrap();
        let a = sym.log_likelihood(&theta).unwrap();
        let b = asym.log_likelihood(&embedded).unwrap();
        assert_eq!(a.per_period, b.per_period);
    }

    #[test]
    fn augmented_with_zero_blocks_equals_asymmetric() {
        let (panel, inst, spec) = fixture(Variant::Asymmetric, 3, 30, 3);
        let asym = QmlProblem::new(&panel, &inst, spec).unwrap();
        let aug = QmlProblem::new(&panel, &inst, spec.with_variant(Variant::Augmented)).unwrap();
        let theta = theta_for(asym.layout(), 4);
        let embedded = asym.layout().embed(&theta, aug.layout()).unwrap();
        assert_eq!(
            asym.log_likelihood(&theta).unwrap().per_period,
            aug.log_likelihood(&embedded).unwrap().per_period
        );
    }

    #[test]
    fn fused_path_matches_composed_public_operations() {
        for variant in [Variant::Asymmetric, Variant::Augmented] {
            let (panel, inst, spec) = fixture(variant, 3, 25, 5);
            let problem = QmlProblem::new(&panel, &inst, spec).unwrap();
            let theta = theta_for(problem.layout(), 6);
            let path = problem.evaluate_path(&theta).unwrap();
            let params = problem.layout().unpack(&theta).unwrap();
            let prices = risk_prices(&params.prices, &inst).unwrap();
            let mut h = problem.h_init().clone();
            let mut prev: Option<(DVector<f64>, DVector<f64>, DVector<f64>)> = None;
            for t in 0..panel.periods() {
                if let Some((e, x, n)) = &prev {
                    h = covariance_step(&h, e, x, n, &params.garch).unwrap();
                }
                let dl = prices.delta_local.row(t).transpose();
                let mut mu = conditional_mean(prices.delta_world[t], &dl, &h, 2).unwrap();
                if variant == Variant::Augmented {
                    let rows: Vec<DVector<f64>> = inst.local().iter().map(|z| z.row(t).transpose()).collect();
                    mu = augmented_mean(&params.prices, &rows, &mu, 2).unwrap();
                }
                let eps = residuals(&panel.row(t), &mu).unwrap();
                let (xi, eta) = indicator_innovations(&eps, &h.diagonal()).unwrap();
                assert_eq!(path.covariance.h[t], h);
                assert_eq!(path.mean.row(t).transpose(), mu);
                assert_eq!(QmlProblem::residual_row(&path, t), eps);
                prev = Some((eps, xi, eta));
            }
        }
    }

    #[test]
    fn row_sign_flip_of_c_is_invariant() {
        let (panel, inst, spec) = fixture(Variant::Asymmetric, 3, 30, 7);
        let problem = QmlProblem::new(&panel, &inst, spec).unwrap();
        let layout = problem.layout().clone();
        let theta = theta_for(&layout, 8);
        let mut flipped = theta.clone();
        for j in 0..=1 {
            let k = layout.c_index(1, j);
            flipped[k] = -flipped[k];
        }
        let a = problem.log_likelihood(&theta).unwrap().total_loglik;
        let b = problem.log_likelihood(&flipped).unwrap().total_loglik;
        assert!((a - b).abs() <= 1e-12 * a.abs());
    }

    #[test]
    fn penalty_applies_beyond_ceiling() {
        let (panel, inst, spec) = fixture(Variant::Asymmetric, 2, 20, 9);
        let problem = QmlProblem::new(&panel, &inst, spec).unwrap();
        let layout = problem.layout().clone();
        let mut theta = theta_for(&layout, 10);
        assert_eq!(problem.log_likelihood(&theta).unwrap().penalty_applied, 0.0);
        theta[layout.b.start] = 1.0;
        let res = problem.log_likelihood(&theta).unwrap();
        let p = 0.3f64.powi(2) + 1.0 + 0.5 * theta[layout.s.clone().unwrap().start].powi(2)
            + 0.5 * theta[layout.z.clone().unwrap().start].powi(2);
        let expected = 1e4 * (p - 0.9999f64).powi(2);
        assert!((res.penalty_applied - expected).abs() < 1e-9);
        let sum = compensated_sum(res.per_period.iter().copied());
        assert!((res.total_loglik - (sum - res.penalty_applied)).abs() < 1e-9);
    }

    #[test]
    fn frozen_problem_agrees_at_its_anchor_and_is_smooth() {
        let (panel, inst, spec) = fixture(Variant::Asymmetric, 3, 60, 12);
        let problem = QmlProblem::new(&panel, &inst, spec).unwrap();
        let layout = problem.layout().clone();
        let theta = theta_for(&layout, 13);
        let frozen = problem.frozen_at(&theta).unwrap();
        assert_eq!(
            problem.log_likelihood(&theta).unwrap(),
            frozen.log_likelihood(&theta).unwrap()
        );
        // second differences along z stay small for the frozen problem
        let k = layout.z.clone().unwrap().start;
        let f = |x: f64| {
            let mut th = theta.clone();
            th[k] = x;
            frozen.log_likelihood(&th).unwrap().total_loglik
        };
        let z0 = theta[k];
        let h = 1e-3;
        let second = (f(z0 + h) - 2.0 * f(z0) + f(z0 - h)) / (h * h);
        let second_half = (f(z0 + h / 2.0) - 2.0 * f(z0) + f(z0 - h / 2.0)) / (h * h / 4.0);
        assert!((second - second_half).abs() < 1e-2 * second.abs().max(1.0));
    }

    #[test]
    fn singular_covariance_is_reported() {
        let (panel, inst, spec) = fixture(Variant::Symmetric, 2, 10, 11);
        let problem = QmlProblem::new(&panel, &inst, spec)
            .unwrap()
            .with_h_init(DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]))
            .unwrap();
        let theta = vec![0.0; problem.layout().len()];
        assert!(matches!(problem.log_likelihood(&theta), Err(Error::SingularCovariance { t: 0 })));
    }
}
