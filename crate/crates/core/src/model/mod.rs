//! Four-factor Heston-CIR model driven by a gamma-subordinated Brownian motion.
//!
//! The state is `X = (S, V, r_d, r_f)`: FX spot, variance, domestic and foreign
//! short rates. Between grid points the system is advanced with the drift
//! vector [`drift`] and the jump coefficient [`jump_coeff`], evaluated against
//! the subordinator increment and the four subordinated Gaussian increments.

mod coefficients;
mod correlation;
mod levy;
mod localization;
mod params;

pub use coefficients::{drift, jump_coeff};
pub use correlation::{cholesky_factor, Correlations, CorrelationStructure, Matrix4};
pub use levy::{levy_measure_moment, MomentKind};
pub use localization::{
    jump_bound_constant, localized_coeffs, CutoffProfile, LocalizationConfig, LocalizedCoeffs,
};
pub use params::{ModelParams, StateVector, SubordinatorParams};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("correlation matrix is not positive definite (pivot {pivot} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },
    #[error("invalid correlation matrix: {0}")]
    InvalidCorrelation(String),
    #[error("invalid model parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("moment exponent must be >= 1, got {0}")]
    InvalidExponent(f64),
    #[error("localization level {n} is below the minimal level {n0} covering the initial state")]
    LocalizationTooSmall { n: u32, n0: u32 },
}
