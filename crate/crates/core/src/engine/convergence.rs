//! Pathwise (strong) error of the scheme under grid refinement.
//!
//! Level `m` uses `m²` steps over the horizon, i.e. `Δt_m = T/m²`. All levels
//! of one path are driven by the same noise: increments are drawn once on the
//! reference grid and aggregated upward with [`IncrementBlock::coarsen`].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{first_exit, integrate, EngineError, SimConfig};
use crate::model::{CorrelationStructure, ModelParams, SubordinatorParams};
use crate::scalar::Scalar;
use crate::subordinator::{IncrementBlock, RngStream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub m: usize,
    pub n_steps: usize,
    /// Mean over paths of `max_j |X_ref(t_j) - X_m(t_j)|` on the level-`m` nodes.
    pub mean_sup_error: f64,
    /// Paths whose comparison window was shortened by a box exit.
    pub censored_paths: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub reference_level: usize,
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares slope of `ln(error)` against `ln(m)` over rows with a
    /// positive error; `None` with fewer than two such rows.
    pub slope: Option<f64>,
}

/// Runs the refinement study.
///
/// `reference_level` defaults to four times the largest requested level. Every
/// requested `m` must divide it. When `cfg.localization` is set, each
/// comparison stops at the first node where either path has left
/// `[1/n, n]^4`.
pub fn convergence_study<T: Scalar>(
    p: &ModelParams<T>,
    corr: &CorrelationStructure<T>,
    sub: &SubordinatorParams,
    horizon: f64,
    cfg: &SimConfig,
    m_values: &[usize],
    reference_level: Option<usize>,
) -> Result<ConvergenceReport, EngineError> {
    cfg.validate()?;
    sub.validate()?;
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(EngineError::Config(format!("horizon = {horizon} must be positive")));
    }
    if m_values.is_empty() || m_values.contains(&0) {
        return Err(EngineError::Config("refinement levels must be non-empty and >= 1".into()));
    }
    if m_values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(EngineError::Config("refinement levels must be strictly increasing".into()));
    }
    let m_max = *m_values.last().expect("non-empty");
    let m_ref = reference_level.unwrap_or(4 * m_max);
    if let Some(bad) = m_values.iter().find(|m| m_ref % **m != 0 || **m > m_ref) {
        return Err(EngineError::Config(format!(
            "level {bad} does not divide the reference level {m_ref}"
        )));
    }

    let n_ref = m_ref * m_ref;
    let dt_ref = horizon / n_ref as f64;
    let x0 = p.initial_state();
    let loc = cfg.localization;

    // per path: (sup error, censored) for every level
    let per_path: Vec<Vec<(f64, bool)>> = cfg.run(|| {
        (0..cfg.n_paths)
            .into_par_iter()
            .map(|i| {
                let fine = IncrementBlock::generate(
                    sub,
                    cfg.time_change,
                    dt_ref,
                    n_ref,
                    RngStream::new(cfg.seed, i as u64),
                );
                let reference = integrate(x0, &fine, dt_ref, p, corr, cfg);
                let ref_exit = first_exit(&reference, loc.as_ref());
                m_values
                    .iter()
                    .map(|&m| {
                        let ratio = m_ref / m;
                        let factor = ratio * ratio;
                        let coarse = fine.coarsen(factor);
                        let dt = horizon / (m * m) as f64;
                        let path = integrate(x0, &coarse, dt, p, corr, cfg);
                        let own_exit = first_exit(&path, loc.as_ref());
                        let ref_exit_coarse = ref_exit.map(|e| e.div_ceil(factor));
                        let stop = match (own_exit, ref_exit_coarse) {
                            (Some(a), Some(b)) => Some(a.min(b)),
                            (a, b) => a.or(b),
                        };
                        let end = stop.unwrap_or(path.len());
                        let err = (0..end)
                            .map(|j| path[j].distance(&reference[j * factor]).to_f64_lossy())
                            .fold(0.0, f64::max);
                        (err, stop.is_some())
                    })
                    .collect()
            })
            .collect()
    })?;

    let rows: Vec<ConvergenceRow> = m_values
        .iter()
        .enumerate()
        .map(|(k, &m)| {
            let total: f64 = per_path.iter().map(|r| r[k].0).sum();
            ConvergenceRow {
                m,
                n_steps: m * m,
                mean_sup_error: total / cfg.n_paths as f64,
                censored_paths: per_path.iter().filter(|r| r[k].1).count(),
            }
        })
        .collect();
    let slope = fit_log_log_slope(&rows);
    Ok(ConvergenceReport {
        reference_level: m_ref,
        rows,
        slope,
    })
}

fn fit_log_log_slope(rows: &[ConvergenceRow]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.mean_sup_error > 0.0 && r.mean_sup_error.is_finite())
        .map(|r| ((r.m as f64).ln(), r.mean_sup_error.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    Some(sxy / sxx)
}
