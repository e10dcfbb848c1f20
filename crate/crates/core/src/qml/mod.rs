//! Gaussian quasi-likelihood, numerical scores, simplex initialization and
//! BHHH maximization.

mod bhhh;
mod estimate;
mod likelihood;
mod scores;
mod simplex;

pub use bhhh::{bhhh_maximize, BhhhOptions, BhhhOutcome, StepRecord, Termination};
pub use estimate::{default_theta0, estimate, EstimationOptions, EstimationResult, SimplexSummary};
pub use likelihood::{gaussian_log_density, stationarity_penalty, FusedPath, LikelihoodResult, QmlProblem};
pub use scores::{fd_step, penalty_gradient, penalty_hessian, per_period_scores, score_gradient, score_hessian};
pub use simplex::{nelder_mead, simplex_initialize, SimplexOutcome};

use crate::error::Result;
use crate::linalg::compensated_sum;

/// A likelihood made of per-period contributions, optionally penalized.
///
/// Implementations must be pure: the same `theta` always yields the same
/// contributions, so finite-difference columns can be evaluated in parallel.
pub trait Objective: Sync {
    fn dim(&self) -> usize;

    /// Unpenalized log-likelihood contribution of each period.
    fn contributions(&self, theta: &[f64]) -> Result<Vec<f64>>;

    /// Nonnegative penalty subtracted from the summed contributions.
    fn penalty(&self, _theta: &[f64]) -> f64 {
        0.0
    }

    /// A smooth objective that agrees with this one at `theta`, used for
    /// derivatives when this one is only piecewise smooth. `None` means this
    /// objective is already smooth.
    fn smooth_at(&self, _theta: &[f64]) -> Result<Option<Box<dyn Objective + '_>>> {
        Ok(None)
    }

    /// Penalized total `Σ contributions − penalty`.
    fn value(&self, theta: &[f64]) -> Result<f64> {
        let c = self.contributions(theta)?;
        Ok(compensated_sum(c) - self.penalty(theta))
    }
}
