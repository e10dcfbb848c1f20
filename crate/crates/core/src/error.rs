use std::path::PathBuf;

use thiserror::Error;

use crate::data::YearMonth;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("missing or invalid value in {path} at data row {row}, column `{column}`")]
    MissingValue {
        path: PathBuf,
        row: usize,
        column: String,
    },

    #[error("date alignment error ({context}); offending months: {}", format_months(.months))]
    Alignment {
        context: String,
        months: Vec<YearMonth>,
    },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("degenerate moments: {0}")]
    DegenerateMoments(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("covariance matrix not positive semi-definite at t={t} (min eigenvalue {min_eigenvalue:e})")]
    NotPsd { t: usize, min_eigenvalue: f64 },

    #[error("conditional covariance numerically singular at t={t}")]
    SingularCovariance { t: usize },

    #[error("estimation error: {0}")]
    Estimation(String),

    #[error("simulation error: {0}")]
    Simulation(String),

    #[error("unknown hypothesis `{name}`; valid names: {}", .valid.join(", "))]
    UnknownHypothesis { name: String, valid: Vec<String> },
}

fn format_months(months: &[YearMonth]) -> String {
    months
        .iter()
        .map(|m| m.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}
