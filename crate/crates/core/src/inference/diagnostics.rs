use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::garch::CovariancePath;
use crate::stats::{mean, summarize};

/// Moments and specification statistics of one asset's standardized
/// residuals `ε_it/√h_iit`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualDiagnostics {
    pub asset: String,
    /// Mean × 100.
    pub mean_x100: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub jarque_bera: f64,
    pub jarque_bera_p: f64,
    pub q12: f64,
    pub q12_p: f64,
}

pub fn standardized_residual_diagnostics(path: &CovariancePath, asset_names: &[String]) -> Result<Vec<ResidualDiagnostics>> {
    let z = path.standardized_residuals()?;
    if asset_names.len() != z.ncols() {
        return Err(Error::Shape(format!("{} names for {} assets", asset_names.len(), z.ncols())));
    }
    asset_names
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let col: Vec<f64> = z.column(i).iter().copied().collect();
            let s = summarize(&col, None)
                .map_err(|e| Error::DegenerateMoments(format!("standardized residuals of {name}: {e}")))?;
            Ok(ResidualDiagnostics {
                asset: name.clone(),
                mean_x100: mean(&col) * 100.0,
                skewness: s.skewness,
                excess_kurtosis: s.excess_kurtosis,
                jarque_bera: s.jarque_bera,
                jarque_bera_p: s.jarque_bera_p,
                q12: s.q12,
                q12_p: s.q12_p,
            })
        })
        .collect()
}
