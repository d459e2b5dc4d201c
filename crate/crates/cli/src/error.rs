use std::process::ExitCode;

use fxvg_core::analytics::AnalyticsError;
use fxvg_core::engine::EngineError;
use fxvg_core::market_data::MarketDataError;
use fxvg_core::model::ModelError;
use fxvg_core::pricing::PricingError;
use thiserror::Error;

/// Invalid or inconsistent run configuration.
#[derive(Debug, Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

impl ConfigError {
    pub fn new(msg: impl Into<String>) -> Self {
        Self(msg.into())
    }
}

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_IO: u8 = 3;
pub const EXIT_NUMERICAL: u8 = 4;

fn model_code(e: &ModelError) -> u8 {
    match e {
        ModelError::NotPositiveDefinite { .. } => EXIT_NUMERICAL,
        _ => EXIT_CONFIG,
    }
}

fn analytics_code(e: &AnalyticsError) -> u8 {
    match e {
        AnalyticsError::EmptyBins(_) | AnalyticsError::DegenerateRange | AnalyticsError::InvalidBins(_) => {
            EXIT_NUMERICAL
        }
        AnalyticsError::TooFewSamples { .. } | AnalyticsError::InvalidQuotes(_) => EXIT_CONFIG,
    }
}

/// Maps an error chain to the process exit code: 2 configuration, 3 I/O or
/// unreadable input files, 4 numerical failure.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<ConfigError>() {
            return EXIT_CONFIG;
        }
        if cause.is::<std::io::Error>() {
            return EXIT_IO;
        }
        if let Some(e) = cause.downcast_ref::<ModelError>() {
            return model_code(e);
        }
        if let Some(e) = cause.downcast_ref::<EngineError>() {
            return match e {
                EngineError::Model(m) => model_code(m),
                EngineError::Config(_) => EXIT_CONFIG,
                EngineError::Pool(_) => EXIT_IO,
            };
        }
        if let Some(e) = cause.downcast_ref::<PricingError>() {
            return match e {
                PricingError::Analytics(a) => analytics_code(a),
                _ => EXIT_CONFIG,
            };
        }
        if let Some(e) = cause.downcast_ref::<AnalyticsError>() {
            return analytics_code(e);
        }
        if let Some(e) = cause.downcast_ref::<MarketDataError>() {
            return match e {
                MarketDataError::MissingStrike(_) | MarketDataError::AmbiguousStrike(_) => EXIT_CONFIG,
                MarketDataError::Analytics(a) => analytics_code(a),
                _ => EXIT_IO,
            };
        }
    }
    1
}

pub fn report(err: &anyhow::Error) -> ExitCode {
    eprintln!("error: {err:#}");
    ExitCode::from(exit_code(err))
}
