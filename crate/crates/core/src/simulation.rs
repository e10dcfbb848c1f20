//! Synthetic panels drawn from the model itself, for recovery and size
//! experiments.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{InstrumentSet, ModelSpec, ParameterLayout, ReturnsPanel, YearMonth};
use crate::error::{Error, Result};
use crate::garch::{indicator_pair, step_into, CovariancePath, StepScratch};
use crate::pricing::{mean_into, risk_prices, PricePath};

/// Variances above this multiple of their starting level abort the run.
const EXPLOSION_FACTOR: f64 = 1e6;

/// Process generating the non-constant instrument columns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InstrumentProcess {
    /// Non-constant columns are zero.
    Constant,
    IidGaussian { scale: f64 },
    /// Stationary AR(1) with unconditional standard deviation `scale`.
    Ar1 { rho: f64, scale: f64 },
}

impl Default for InstrumentProcess {
    fn default() -> Self {
        InstrumentProcess::IidGaussian { scale: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub theta_true: Vec<f64>,
    pub spec: ModelSpec,
    pub periods: usize,
    pub seed: u64,
    #[serde(default)]
    pub instruments: InstrumentProcess,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    /// Date of the first retained period.
    #[serde(default = "default_start")]
    pub start: YearMonth,
}

fn default_burn_in() -> usize {
    200
}

fn default_start() -> YearMonth {
    YearMonth::new(1970, 2).expect("valid month")
}

impl SimulationConfig {
    pub fn new(theta_true: Vec<f64>, spec: ModelSpec, periods: usize, seed: u64) -> Self {
        Self {
            theta_true,
            spec,
            periods,
            seed,
            instruments: InstrumentProcess::default(),
            burn_in: default_burn_in(),
            start: default_start(),
        }
    }

    pub fn with_instruments(mut self, process: InstrumentProcess) -> Self {
        self.instruments = process;
        self
    }

    pub fn with_burn_in(mut self, burn_in: usize) -> Self {
        self.burn_in = burn_in;
        self
    }

    fn validate(&self) -> Result<ParameterLayout> {
        self.spec.validate()?;
        let layout = ParameterLayout::new(&self.spec)?;
        if self.theta_true.len() != layout.len() {
            return Err(Error::Config(format!(
                "theta_true has {} entries, the {} layout needs {}",
                self.theta_true.len(),
                self.spec.variant,
                layout.len()
            )));
        }
        if self.periods < 2 {
            return Err(Error::Config("simulation needs at least 2 periods".into()));
        }
        match self.instruments {
            InstrumentProcess::Constant => {}
            InstrumentProcess::IidGaussian { scale } if scale > 0.0 => {}
            InstrumentProcess::Ar1 { rho, scale } if scale > 0.0 && rho.abs() < 1.0 => {}
            p => return Err(Error::Config(format!("invalid instrument process {p:?}"))),
        }
        Ok(layout)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedPanel {
    pub panel: ReturnsPanel,
    pub instruments: InstrumentSet,
    pub covariance: CovariancePath,
    pub prices: PricePath,
}

pub fn default_asset_names(n: usize) -> Vec<String> {
    (1..n).map(|i| format!("A{i}")).chain(std::iter::once("World".to_string())).collect()
}

/// A stationary, well-identified parameter vector for `spec`, used as a
/// default data-generating process. Non-world assets cycle through four
/// profiles; prices are ln 3.5 (world) and ln 2 (domestic) on the constant
/// instrument, with all other price coefficients zero. `C` is chosen so the
/// unconditional covariance is close to a fixed matrix with correlation 0.5.
pub fn illustrative_theta(spec: &ModelSpec) -> Result<Vec<f64>> {
    const VAR: [f64; 4] = [0.0045, 0.0035, 0.006, 0.002];
    const A: [f64; 4] = [0.314, 0.206, 0.278, 0.225];
    const B: [f64; 4] = [0.517, 0.753, 0.717, 0.706];
    const S: [f64; 4] = [0.56, 0.045, 0.045, 0.075];
    const Z: [f64; 4] = [0.255, -0.13, -0.025, -0.085];
    const WORLD: (f64, f64, f64, f64, f64) = (0.0018, 0.286, 0.705, -0.025, -0.135);

    spec.validate()?;
    let layout = ParameterLayout::new(spec)?;
    let n = spec.n_assets;
    let pick = |i: usize, local: &[f64; 4], world: f64| if i == n - 1 { world } else { local[i % 4] };
    let var: Vec<f64> = (0..n).map(|i| pick(i, &VAR, WORLD.0)).collect();
    let a: Vec<f64> = (0..n).map(|i| pick(i, &A, WORLD.1)).collect();
    let b: Vec<f64> = (0..n).map(|i| pick(i, &B, WORLD.2)).collect();

    let mut theta = vec![0.0; layout.len()];
    theta[layout.kappa_world.start] = 3.5f64.ln();
    for block in &layout.kappa_local {
        theta[block.start] = 2.0f64.ln();
    }
    for i in 0..n {
        theta[layout.a.start + i] = a[i];
        theta[layout.b.start + i] = b[i];
        if let Some(r) = &layout.s {
            theta[r.start + i] = pick(i, &S, WORLD.3);
        }
        if let Some(r) = &layout.z {
            theta[r.start + i] = pick(i, &Z, WORLD.4);
        }
    }

    // Reverse Cholesky: lower-triangular C with C'C equal to the target.
    let target = DMatrix::from_fn(n, n, |i, j| {
        let rho = if i == j { 1.0 } else { 0.5 };
        let m = rho * (var[i] * var[j]).sqrt();
        m * (1.0 - 0.5 * (a[i] * a[i] + b[i] * b[i] + a[j] * a[j] + b[j] * b[j]))
    });
    let reversed = DMatrix::from_fn(n, n, |i, j| target[(n - 1 - i, n - 1 - j)]);
    let lo = reversed
        .cholesky()
        .ok_or_else(|| Error::Config("illustrative intercept is not positive definite".into()))?
        .unpack();
    for i in 0..n {
        for j in 0..=i {
            theta[layout.c_index(i, j)] = lo[(n - 1 - j, n - 1 - i)];
        }
    }
    Ok(theta)
}

fn instrument_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, process: InstrumentProcess) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(rows, cols);
    for t in 0..rows {
        m[(t, 0)] = 1.0;
    }
    for j in 1..cols {
        match process {
            InstrumentProcess::Constant => {}
            InstrumentProcess::IidGaussian { scale } => {
                for t in 0..rows {
                    let u: f64 = StandardNormal.sample(rng);
                    m[(t, j)] = scale * u;
                }
            }
            InstrumentProcess::Ar1 { rho, scale } => {
                let innovation = scale * (1.0 - rho * rho).sqrt();
                let u: f64 = StandardNormal.sample(rng);
                let mut x = scale * u;
                for t in 0..rows {
                    let u: f64 = StandardNormal.sample(rng);
                    x = rho * x + innovation * u;
                    m[(t, j)] = x;
                }
            }
        }
    }
    m
}

/// Lower Cholesky factor, falling back to a clipped eigen square root for
/// numerically semidefinite matrices.
fn psd_factor(h: &DMatrix<f64>) -> DMatrix<f64> {
    if let Some(c) = h.clone().cholesky() {
        return c.unpack();
    }
    let eig = h.clone().symmetric_eigen();
    let sqrt = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&sqrt)
}

/// Draws a panel from the model: `ε_t ~ N(0, H_t)`, `r_t = μ_t + ε_t`, with
/// `H_t` from the recursion and `μ_t` from the pricing equations. The first
/// `burn_in` periods are discarded. Deterministic in `seed`.
pub fn simulate_panel(config: &SimulationConfig) -> Result<SimulatedPanel> {
    let layout = config.validate()?;
    let spec = config.spec;
    let n = spec.n_assets;
    let world = n - 1;
    let total = config.burn_in + config.periods;
    let params = layout.unpack(&config.theta_true)?;
    let garch = &params.garch;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let global = instrument_matrix(&mut rng, total, spec.n_global, config.instruments);
    let local: Vec<DMatrix<f64>> = (0..n - 1)
        .map(|_| instrument_matrix(&mut rng, total, spec.n_local, config.instruments))
        .collect();
    let instruments = InstrumentSet::new(global, local)?;
    let prices = risk_prices(&params.prices, &instruments)?;

    let cc = garch.intercept();
    let persistence = (0..n)
        .map(|i| garch.a[i].powi(2) + garch.b[i].powi(2) + 0.5 * garch.s[i].powi(2) + 0.5 * garch.z[i].powi(2))
        .fold(0.0f64, f64::max)
        .min(0.95);
    let h0 = &cc / (1.0 - persistence);
    let ceiling: Vec<f64> = (0..n).map(|i| EXPLOSION_FACTOR * h0[(i, i)].max(f64::MIN_POSITIVE)).collect();

    let mut scratch = StepScratch::new(garch);
    let mut h = h0.as_slice().to_vec();
    let mut h_next = vec![0.0; n * n];
    let mut eps = vec![0.0; n];
    let mut xi = vec![0.0; n];
    let mut eta = vec![0.0; n];
    let mut mu = vec![0.0; n];
    let mut dl = vec![0.0; n - 1];

    let keep = config.periods;
    let mut returns = DMatrix::zeros(keep, n);
    let mut path = CovariancePath {
        h: Vec::with_capacity(keep),
        eps: DMatrix::zeros(keep, n),
        xi: DMatrix::zeros(keep, n),
        eta: DMatrix::zeros(keep, n),
        h_diag: DMatrix::zeros(keep, n),
    };

    for t in 0..total {
        if t > 0 {
            step_into(&mut h_next, &h, &eps, &xi, &eta, cc.as_slice(), garch, &mut scratch);
            std::mem::swap(&mut h, &mut h_next);
        }
        for i in 0..n {
            let hii = h[i * n + i];
            if !hii.is_finite() || hii > ceiling[i] {
                return Err(Error::Simulation(format!(
                    "variance of asset {i} exploded at period {t}; choose smaller a/b (or s/z) so that \
                     a² + b² + ½s² + ½z² stays below one"
                )));
            }
        }
        for (i, d) in dl.iter_mut().enumerate() {
            *d = prices.delta_local[(t, i)];
        }
        mean_into(&mut mu, prices.delta_world[t], &dl, &h, n, world);
        if let (Some(alpha), Some(phi)) = (&params.prices.alpha, &params.prices.phi) {
            for i in 0..n - 1 {
                let z = &instruments.local()[i];
                let mut shift = alpha[i];
                for (k, p) in phi[i].iter().enumerate() {
                    shift += p * z[(t, k + 1)];
                }
                mu[i] += shift;
            }
        }
        let hm = DMatrix::from_column_slice(n, n, &h);
        let factor = psd_factor(&hm);
        let draw = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
        let shock = factor * draw;
        for i in 0..n {
            eps[i] = shock[i];
            let (x, e) = indicator_pair(eps[i], h[i * n + i]);
            xi[i] = x;
            eta[i] = e;
        }
        if t >= config.burn_in {
            let r = t - config.burn_in;
            for i in 0..n {
                returns[(r, i)] = mu[i] + eps[i];
                path.eps[(r, i)] = eps[i];
                path.xi[(r, i)] = xi[i];
                path.eta[(r, i)] = eta[i];
                path.h_diag[(r, i)] = h[i * n + i];
            }
            path.h.push(hm);
        }
    }

    let first = config.burn_in;
    let last = total - 1;
    let dates = (0..keep as i64).map(|k| config.start.offset(k)).collect();
    let panel = ReturnsPanel::new(dates, returns, default_asset_names(n), world)?;
    let instruments = instruments.slice_rows(first, last)?;
    let prices = PricePath {
        delta_world: prices.delta_world.rows(first, keep).into_owned(),
        delta_local: prices.delta_local.rows(first, keep).into_owned(),
        clamped: prices.clamped,
    };
    Ok(SimulatedPanel {
        panel,
        instruments,
        covariance: path,
        prices,
    })
}
