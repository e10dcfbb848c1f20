use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use icapm_core::data::{ingest_panel, IngestConfig};
use icapm_core::inference::{
    information_criteria, sandwich_covariance, standardized_residual_diagnostics, InformationCriteria,
    ResidualDiagnostics, SandwichCovariance,
};
use icapm_core::qml::{estimate, EstimationResult, FusedPath, QmlProblem, Termination};
use icapm_core::{ExecMode, InstrumentSet, ModelSpec, ReturnsPanel, Variant, YearMonth};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::config::{EstimationSettings, RunConfig};

/// Returns and instruments restricted to the configured window.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub source: IngestConfig,
    pub window: Option<String>,
    pub panel: ReturnsPanel,
    pub instruments: InstrumentSet,
}

impl Dataset {
    pub fn load(config: &RunConfig) -> Result<Self> {
        Self::from_source(config.ingest_config()?, config.window.clone())
    }

    pub fn from_source(source: IngestConfig, window: Option<String>) -> Result<Self> {
        let (panel, instruments) = ingest_panel(&source)?;
        let (panel, instruments) = match &window {
            Some(w) => {
                let (first, last) = panel.window_rows(w.parse()?)?;
                (panel.slice_rows(first, last)?, instruments.slice_rows(first, last)?)
            }
            None => (panel, instruments),
        };
        Ok(Self {
            source,
            window,
            panel,
            instruments,
        })
    }

    pub fn local_assets(&self) -> Vec<String> {
        let names = self.panel.asset_names();
        self.panel.local_indices().iter().map(|&i| names[i].clone()).collect()
    }

    pub fn first_date(&self) -> YearMonth {
        self.panel.dates()[0]
    }

    pub fn last_date(&self) -> YearMonth {
        *self.panel.dates().last().expect("non-empty panel")
    }
}

/// A completed estimation with everything derived from it.
pub struct Fitted {
    pub data: Dataset,
    pub result: EstimationResult,
    pub sandwich: SandwichCovariance,
    pub path: FusedPath,
    pub artifact: FitArtifact,
}

/// The persisted form of a fit, read back by `test`, `correlations`, `hp`
/// and `simulate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitArtifact {
    pub model: Variant,
    pub spec: ModelSpec,
    pub data: IngestConfig,
    pub window: Option<String>,
    pub first_date: YearMonth,
    pub last_date: YearMonth,
    pub periods: usize,
    pub asset_names: Vec<String>,
    pub labels: Vec<String>,
    pub theta: Vec<f64>,
    pub standard_errors: Vec<f64>,
    /// Sandwich covariance of `theta`.
    pub covariance: DMatrix<f64>,
    pub pseudo_inverse: bool,
    pub loglik: f64,
    pub n_params: usize,
    pub information_criteria: InformationCriteria,
    pub converged: bool,
    pub termination: Termination,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub clamp_flag: bool,
    pub h_init: DMatrix<f64>,
    pub residual_diagnostics: Vec<ResidualDiagnostics>,
}

impl FitArtifact {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading fit {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing fit {}", path.display()))
    }

    /// Re-reads the data the fit was computed on and evaluates the fitted
    /// covariance and price paths.
    pub fn reload(&self) -> Result<(Dataset, FusedPath)> {
        let data = Dataset::from_source(self.data.clone(), self.window.clone())?;
        if data.panel.periods() != self.periods || data.first_date() != self.first_date {
            bail!(
                "data no longer matches the fit: {} periods from {}, fit used {} from {}",
                data.panel.periods(),
                data.first_date(),
                self.periods,
                self.first_date
            );
        }
        let problem = QmlProblem::new(&data.panel, &data.instruments, self.spec)?.with_h_init(self.h_init.clone())?;
        let path = problem.evaluate_path(&self.theta)?;
        Ok((data, path))
    }

    pub fn local_assets(&self) -> Vec<String> {
        self.asset_names[..self.asset_names.len() - 1].to_vec()
    }
}

/// Simplex, BHHH, sandwich covariance and residual diagnostics.
pub fn fit_model(data: Dataset, variant: Variant, settings: &EstimationSettings, theta0: Option<Vec<f64>>) -> Result<Fitted> {
    let spec = ModelSpec::for_data(variant, &data.panel, &data.instruments)?;
    let problem = QmlProblem::new(&data.panel, &data.instruments, spec)?;
    let result = estimate(&problem, &settings.options(theta0))?;
    let problem = problem.with_h_init(result.h_init.clone())?;
    let sandwich = sandwich_covariance(&problem, &result.theta, &result.scores, ExecMode::Parallel)?;
    let path = problem.evaluate_path(&result.theta)?;
    let residual_diagnostics = standardized_residual_diagnostics(&path.covariance, data.panel.asset_names())?;
    let n_params = result.theta.len();
    let artifact = FitArtifact {
        model: variant,
        spec,
        data: data.source.clone(),
        window: data.window.clone(),
        first_date: data.first_date(),
        last_date: data.last_date(),
        periods: result.periods,
        asset_names: data.panel.asset_names().to_vec(),
        labels: result.labels.clone(),
        theta: result.theta.clone(),
        standard_errors: sandwich.standard_errors().iter().copied().collect(),
        covariance: sandwich.v.clone(),
        pseudo_inverse: sandwich.pseudo_inverse,
        loglik: result.loglik,
        n_params,
        information_criteria: information_criteria(result.loglik, n_params, result.periods),
        converged: result.converged,
        termination: result.termination,
        iterations: result.iterations,
        gradient_norm: result.gradient_norm,
        clamp_flag: result.clamp_flag,
        h_init: result.h_init.clone(),
        residual_diagnostics,
    };
    Ok(Fitted {
        data,
        result,
        sandwich,
        path,
        artifact,
    })
}
