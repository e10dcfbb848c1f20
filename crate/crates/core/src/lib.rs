//! Quasi-maximum-likelihood estimation of a partially segmented conditional
//! international CAPM whose covariances follow an asymmetric diagonal
//! multivariate GARCH.
//!
//! The pipeline is: ingest a returns panel and instruments ([`data`]),
//! describe it ([`stats`]), fit a model variant ([`qml`]), then compute
//! robust standard errors and tests ([`inference`]). [`simulation`] draws
//! synthetic panels from known parameters.

pub mod data;
pub mod error;
pub mod garch;
pub mod inference;
pub mod linalg;
pub mod par;
pub mod pricing;
pub mod qml;
pub mod simulation;
pub mod stats;

pub use data::{InstrumentSet, ModelSpec, ParameterLayout, ReturnsPanel, Variant, Window, YearMonth};
pub use error::{Error, Result};
pub use par::ExecMode;
