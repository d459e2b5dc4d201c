//! Monte Carlo engine for FX options under a four-factor Heston–CIR model
//! (spot, variance, domestic and foreign short rates) whose Brownian drivers
//! are time-changed by a gamma subordinator, i.e. variance-gamma noise.
//!
//! * [`model`] — parameters, correlation/Cholesky, coefficients, localization
//!   and Lévy-measure moments;
//! * [`subordinator`] — gamma clock and subordinated Gaussian increments on
//!   per-path random streams;
//! * [`engine`] — Euler–Maruyama paths, convergence studies, path I/O;
//! * [`pricing`] — European Monte Carlo and Longstaff–Schwartz American prices;
//! * [`analytics`] — moments, chi-square, NRMSE, ECDF/histograms;
//! * [`market_data`] — rate series and option-chain files.
//!
//! Model, engine and statistics kernels are generic over [`Scalar`]
//! (`f32`/`f64`); sampling, pricing and I/O work in `f64`. The aliases below
//! fix the scalar to `f64`.

pub mod analytics;
pub mod engine;
pub mod market_data;
pub mod model;
pub mod pricing;
pub mod scalar;
pub mod subordinator;

pub use scalar::Scalar;

pub type Params = model::ModelParams<f64>;
pub type State = model::StateVector<f64>;
pub type Correlation = model::CorrelationStructure<f64>;
pub type Paths = engine::PathSet<f64>;
pub type Paths32 = engine::PathSet<f32>;
pub type Comparison = analytics::QuoteComparison<f64>;
