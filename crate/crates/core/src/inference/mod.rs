//! Robust covariance, hypothesis tests, information criteria, residual
//! diagnostics and trend extraction.

mod diagnostics;
mod hp;
mod hypothesis;
mod sandwich;

pub use diagnostics::{standardized_residual_diagnostics, ResidualDiagnostics};
pub use hp::{hp_filter, HpDecomposition, MONTHLY_LAMBDA};
pub use hypothesis::{Hypothesis, HYPOTHESIS_NAMES};
pub use sandwich::{
    numerical_hessian, sandwich_covariance, sandwich_with_step, symmetric_pseudo_inverse, SandwichCovariance,
};
pub use tests::{information_criteria, lr_test, wald_test, wald_test_indices, InformationCriteria, TestResult};
