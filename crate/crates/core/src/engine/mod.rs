//! Forward Euler–Maruyama path generation on an equidistant grid.

mod convergence;
pub mod io;
mod step;

pub use convergence::{convergence_study, ConvergenceReport, ConvergenceRow};
pub use step::step;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    CorrelationStructure, LocalizationConfig, ModelError, ModelParams, StateVector,
    SubordinatorParams,
};
use crate::scalar::Scalar;
use crate::subordinator::{IncrementBlock, RngStream, TimeChange};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("failed to build worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

/// Clock multiplying the drift `b(x)` in each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DriftClock {
    /// Drift advances with the subordinator increment `Δγ`.
    #[default]
    Subordinated,
    /// Drift advances with the calendar step `Δt`.
    Calendar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Truncation {
    /// Square-root arguments are clamped at zero; the state keeps its sign.
    #[default]
    #[serde(alias = "full")]
    FullTruncation,
    /// The state itself is clamped at zero after every step.
    #[serde(alias = "absorb")]
    Absorption,
}

/// Equidistant grid `t_j = t0 + j Δt`, `j = 0..=n_steps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t0: f64,
    pub horizon: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, horizon: f64, n_steps: usize) -> Result<Self, EngineError> {
        let grid = Self { t0, horizon, n_steps };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if !(self.t0 >= 0.0) || !self.t0.is_finite() {
            return Err(EngineError::Config(format!("t0 = {} must be >= 0", self.t0)));
        }
        if !(self.horizon > self.t0) || !self.horizon.is_finite() {
            return Err(EngineError::Config(format!(
                "horizon = {} must exceed t0 = {}",
                self.horizon, self.t0
            )));
        }
        if self.n_steps == 0 {
            return Err(EngineError::Config("step count must be >= 1".into()));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        (self.horizon - self.t0) / self.n_steps as f64
    }

    pub fn time(&self, j: usize) -> f64 {
        self.t0 + j as f64 * self.dt()
    }

    /// Length of the priced interval `T - t0`.
    pub fn span(&self) -> f64 {
        self.horizon - self.t0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_paths: usize,
    pub seed: u64,
    #[serde(default)]
    pub drift_clock: DriftClock,
    #[serde(default)]
    pub truncation: Truncation,
    #[serde(default)]
    pub time_change: TimeChange,
    #[serde(default)]
    pub localization: Option<LocalizationConfig>,
    /// Worker threads; `0` uses the global pool. Results do not depend on it.
    #[serde(default)]
    pub workers: usize,
}

impl SimConfig {
    pub fn new(n_paths: usize, seed: u64) -> Self {
        Self {
            n_paths,
            seed,
            drift_clock: DriftClock::default(),
            truncation: Truncation::default(),
            time_change: TimeChange::default(),
            localization: None,
            workers: 0,
        }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if self.n_paths == 0 {
            return Err(EngineError::Config("path count must be >= 1".into()));
        }
        Ok(())
    }

    pub(crate) fn run<R: Send>(&self, job: impl FnOnce() -> R + Send) -> Result<R, EngineError> {
        if self.workers == 0 {
            Ok(job())
        } else {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(self.workers)
                .build()?;
            Ok(pool.install(job))
        }
    }
}

/// Where a path set came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub drift_clock: DriftClock,
    pub truncation: Truncation,
    pub time_change: TimeChange,
    pub localization: Option<u32>,
    pub alpha: f64,
    pub beta: f64,
}

/// Simulated trajectories, stored path-major: path `i` occupies
/// `states[i*(N+1)..(i+1)*(N+1)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSet<T> {
    pub grid: TimeGrid,
    pub n_paths: usize,
    pub states: Vec<StateVector<T>>,
    /// First grid index at which the path left `[1/n, n]^4`, when a
    /// localization level was configured.
    pub exit_step: Vec<Option<usize>>,
    pub provenance: Option<Provenance>,
}

impl<T: Scalar> PathSet<T> {
    pub fn n_steps(&self) -> usize {
        self.grid.n_steps
    }

    pub fn path(&self, i: usize) -> &[StateVector<T>] {
        let w = self.grid.n_steps + 1;
        &self.states[i * w..(i + 1) * w]
    }

    pub fn state(&self, i: usize, j: usize) -> &StateVector<T> {
        &self.states[i * (self.grid.n_steps + 1) + j]
    }

    pub fn paths(&self) -> impl Iterator<Item = &[StateVector<T>]> {
        self.states.chunks(self.grid.n_steps + 1)
    }

    pub fn terminal_spots(&self) -> Vec<T> {
        self.paths().map(|p| p[p.len() - 1].s).collect()
    }

    pub fn has_nan(&self) -> bool {
        self.states.iter().any(|x| !x.is_finite())
    }
}

/// Runs the scheme over one increment block.
pub(crate) fn integrate<T: Scalar>(
    x0: StateVector<T>,
    block: &IncrementBlock,
    dt: f64,
    p: &ModelParams<T>,
    corr: &CorrelationStructure<T>,
    cfg: &SimConfig,
) -> Vec<StateVector<T>> {
    let dt = T::lit(dt);
    let mut out = Vec::with_capacity(block.len() + 1);
    let mut x = x0;
    out.push(x);
    for (dg, z) in block.dgamma.iter().zip(&block.dgauss) {
        x = step(&x, T::lit(*dg), &z.map(T::lit), dt, p, corr, cfg);
        out.push(x);
    }
    out
}

pub(crate) fn first_exit<T: Scalar>(
    path: &[StateVector<T>],
    loc: Option<&LocalizationConfig>,
) -> Option<usize> {
    let loc = loc?;
    path.iter().position(|x| !loc.contains(x))
}

/// Simulates `cfg.n_paths` independent paths of the system.
pub fn simulate<T: Scalar>(
    p: &ModelParams<T>,
    corr: &CorrelationStructure<T>,
    sub: &SubordinatorParams,
    grid: &TimeGrid,
    cfg: &SimConfig,
) -> Result<PathSet<T>, EngineError> {
    grid.validate()?;
    cfg.validate()?;
    sub.validate()?;
    let dt = grid.dt();
    let x0 = p.initial_state();
    let per_path: Vec<(Vec<StateVector<T>>, Option<usize>)> = cfg.run(|| {
        (0..cfg.n_paths)
            .into_par_iter()
            .map(|i| {
                let block = IncrementBlock::generate(
                    sub,
                    cfg.time_change,
                    dt,
                    grid.n_steps,
                    RngStream::new(cfg.seed, i as u64),
                );
                let path = integrate(x0, &block, dt, p, corr, cfg);
                let exit = first_exit(&path, cfg.localization.as_ref());
                (path, exit)
            })
            .collect()
    })?;

    let mut states = Vec::with_capacity(cfg.n_paths * (grid.n_steps + 1));
    let mut exit_step = Vec::with_capacity(cfg.n_paths);
    for (path, exit) in per_path {
        states.extend(path);
        exit_step.push(exit);
    }
    Ok(PathSet {
        grid: *grid,
        n_paths: cfg.n_paths,
        states,
        exit_step,
        provenance: Some(Provenance {
            seed: cfg.seed,
            drift_clock: cfg.drift_clock,
            truncation: cfg.truncation,
            time_change: cfg.time_change,
            localization: cfg.localization.map(|l| l.n),
            alpha: sub.alpha,
            beta: sub.beta,
        }),
    })
}
