//! European and American (Longstaff–Schwartz) option pricing on simulated
//! paths, discounted with the simulated domestic short rate.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytics::{moment_report, AnalyticsError, Moments};
use crate::engine::PathSet;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PricingError {
    #[error("contract style {found:?} cannot be priced by the {expected:?} pricer")]
    StyleMismatch {
        expected: OptionStyle,
        found: OptionStyle,
    },
    #[error("contract maturity {contract} does not match the path horizon {paths}")]
    MaturityMismatch { contract: f64, paths: f64 },
    #[error("invalid contract: {0}")]
    InvalidContract(String),
    #[error("invalid LSM configuration: {0}")]
    InvalidConfig(String),
    #[error("American pricing needs at least 2 time steps, got {0}")]
    TooFewSteps(usize),
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptionStyle {
    American,
    European,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptionRight {
    Put,
    Call,
}

impl OptionRight {
    pub fn payoff(self, strike: f64, spot: f64) -> f64 {
        match self {
            OptionRight::Put => (strike - spot).max(0.0),
            OptionRight::Call => (spot - strike).max(0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptionContract {
    pub style: OptionStyle,
    pub right: OptionRight,
    pub strike: f64,
    pub maturity: f64,
}

impl OptionContract {
    pub fn new(style: OptionStyle, right: OptionRight, strike: f64, maturity: f64) -> Result<Self, PricingError> {
        let c = Self {
            style,
            right,
            strike,
            maturity,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), PricingError> {
        if !(self.strike > 0.0) || !self.strike.is_finite() {
            return Err(PricingError::InvalidContract(format!("strike {} must be > 0", self.strike)));
        }
        if !(self.maturity > 0.0) || !self.maturity.is_finite() {
            return Err(PricingError::InvalidContract(format!(
                "maturity {} must be > 0",
                self.maturity
            )));
        }
        Ok(())
    }

    fn check_against(&self, paths: &PathSet<f64>, expected: OptionStyle) -> Result<(), PricingError> {
        if self.style != expected {
            return Err(PricingError::StyleMismatch {
                expected,
                found: self.style,
            });
        }
        self.validate()?;
        let horizon = paths.grid.horizon;
        if (self.maturity - horizon).abs() > 1e-12 * horizon.abs().max(1.0) {
            return Err(PricingError::MaturityMismatch {
                contract: self.maturity,
                paths: horizon,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    /// `1, x, x², …` in the moneyness `x = S/E`.
    #[default]
    Monomial,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LsmConfig {
    pub basis: Basis,
    pub degree: usize,
    pub itm_only: bool,
}

impl Default for LsmConfig {
    fn default() -> Self {
        Self {
            basis: Basis::Monomial,
            degree: 3,
            itm_only: true,
        }
    }
}

impl LsmConfig {
    pub fn validate(&self) -> Result<(), PricingError> {
        if self.degree == 0 || self.degree > 8 {
            return Err(PricingError::InvalidConfig(format!(
                "degree {} outside 1..=8",
                self.degree
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceResult {
    pub price: f64,
    pub std_error: f64,
    pub n_paths: usize,
    /// Fraction of paths whose cash flow is realized at each grid index
    /// `0..=N`. Index 0 is always zero; index `N` counts terminal exercise.
    pub exercise_fraction_per_step: Vec<f64>,
    /// Steps at which the regression was skipped for lack of data.
    pub degenerate_steps: Vec<usize>,
}

impl PriceResult {
    pub const CSV_HEADER: &'static str = "price,std_error,n_paths";

    pub fn csv_row(&self) -> String {
        format!("{},{},{}", self.price, self.std_error, self.n_paths)
    }

    fn from_cashflows(values: &[f64], exercise_fraction_per_step: Vec<f64>, degenerate_steps: Vec<usize>) -> Self {
        let m = values.len();
        let price = values.iter().sum::<f64>() / m as f64;
        let std_error = if m > 1 {
            let var = values.iter().map(|v| (v - price) * (v - price)).sum::<f64>() / (m - 1) as f64;
            (var / m as f64).sqrt()
        } else {
            0.0
        };
        Self {
            price,
            std_error,
            n_paths: m,
            exercise_fraction_per_step,
            degenerate_steps,
        }
    }
}

/// Row-major `M × (N+1)` discount factors
/// `D[i][j] = exp(-Σ_{k<j} r^d_{i,k} Δt)` on calendar time.
pub fn discount_factors(paths: &PathSet<f64>) -> Vec<f64> {
    let width = paths.n_steps() + 1;
    let dt = paths.grid.dt();
    let mut out = vec![0.0; paths.n_paths * width];
    out.par_chunks_mut(width).enumerate().for_each(|(i, row)| {
        let path = paths.path(i);
        let mut integral = 0.0;
        row[0] = 1.0;
        for j in 1..width {
            integral += path[j - 1].rd * dt;
            row[j] = (-integral).exp();
        }
    });
    out
}

pub fn price_european(paths: &PathSet<f64>, c: &OptionContract) -> Result<PriceResult, PricingError> {
    c.check_against(paths, OptionStyle::European)?;
    let n = paths.n_steps();
    let dt = paths.grid.dt();
    let values: Vec<f64> = (0..paths.n_paths)
        .into_par_iter()
        .map(|i| {
            let path = paths.path(i);
            let integral: f64 = path[..n].iter().map(|x| x.rd * dt).sum();
            c.right.payoff(c.strike, path[n].s) * (-integral).exp()
        })
        .collect();
    let mut fractions = vec![0.0; n + 1];
    fractions[n] = values.iter().filter(|v| **v > 0.0).count() as f64 / paths.n_paths as f64;
    Ok(PriceResult::from_cashflows(&values, fractions, Vec::new()))
}

pub fn price_american_lsm(
    paths: &PathSet<f64>,
    c: &OptionContract,
    cfg: &LsmConfig,
) -> Result<PriceResult, PricingError> {
    c.check_against(paths, OptionStyle::American)?;
    cfg.validate()?;
    let n = paths.n_steps();
    if n < 2 {
        return Err(PricingError::TooFewSteps(n));
    }
    let m = paths.n_paths;
    let width = n + 1;
    let disc = discount_factors(paths);
    let intrinsic: Vec<f64> = (0..m)
        .into_par_iter()
        .flat_map_iter(|i| paths.path(i).iter().map(|x| c.right.payoff(c.strike, x.s)).collect::<Vec<_>>())
        .collect();

    // Realized cash flow per path, discounted to t0, and its grid index.
    let mut cash: Vec<f64> = (0..m).map(|i| intrinsic[i * width + n] * disc[i * width + n]).collect();
    let mut when: Vec<usize> = vec![n; m];
    let cols = cfg.degree + 1;
    let mut degenerate_steps = Vec::new();

    for j in (1..n).rev() {
        let candidates: Vec<usize> = (0..m)
            .filter(|&i| !cfg.itm_only || intrinsic[i * width + j] > 0.0)
            .collect();
        if candidates.is_empty() {
            continue;
        }
        let coeffs = if candidates.len() < cols {
            None
        } else {
            // Regress the continuation value, discounted to t_j, on the basis.
            let mut ata = vec![0.0; cols * cols];
            let mut atb = vec![0.0; cols];
            let mut row = vec![0.0; cols];
            for &i in &candidates {
                basis_row(paths.state(i, j).s / c.strike, &mut row);
                let y = cash[i] / disc[i * width + j];
                for a in 0..cols {
                    atb[a] += row[a] * y;
                    for b in 0..cols {
                        ata[a * cols + b] += row[a] * row[b];
                    }
                }
            }
            solve_normal_equations(&ata, &atb, cols)
        };
        let Some(beta) = coeffs else {
            log::warn!(
                "LSM regression degenerate at step {j} ({} candidate paths, {cols} basis columns); holding",
                candidates.len()
            );
            degenerate_steps.push(j);
            continue;
        };
        let mut row = vec![0.0; cols];
        for &i in &candidates {
            let ex = intrinsic[i * width + j];
            if ex <= 0.0 {
                continue;
            }
            basis_row(paths.state(i, j).s / c.strike, &mut row);
            let continuation: f64 = row.iter().zip(&beta).map(|(x, b)| x * b).sum();
            if ex > continuation {
                cash[i] = ex * disc[i * width + j];
                when[i] = j;
            }
        }
    }

    let mut fractions = vec![0.0; width];
    for (i, &j) in when.iter().enumerate() {
        if cash[i] > 0.0 {
            fractions[j] += 1.0 / m as f64;
        }
    }
    degenerate_steps.reverse();
    Ok(PriceResult::from_cashflows(&cash, fractions, degenerate_steps))
}

fn basis_row(x: f64, row: &mut [f64]) {
    let mut p = 1.0;
    for r in row.iter_mut() {
        *r = p;
        p *= x;
    }
}

/// Solves `A β = b` for symmetric `A` by Cholesky, retrying with a ridge
/// `1e-10 · trace(A)` on the diagonal when `A` is numerically singular.
fn solve_normal_equations(a: &[f64], b: &[f64], n: usize) -> Option<Vec<f64>> {
    if let Some(x) = cholesky_solve(a, b, n) {
        return Some(x);
    }
    let trace: f64 = (0..n).map(|k| a[k * n + k]).sum();
    let lambda = 1e-10 * trace;
    if !(lambda > 0.0) {
        return None;
    }
    let mut ridge = a.to_vec();
    for k in 0..n {
        ridge[k * n + k] += lambda;
    }
    cholesky_solve(&ridge, b, n)
}

fn cholesky_solve(a: &[f64], b: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i * n + k] * l[j * n + k]).sum();
            if i == j {
                let d = a[i * n + i] - s;
                // Relative pivot test: treat loss of ~12 digits as rank deficiency.
                if !(d > 1e-12 * a[i * n + i].abs()) {
                    return None;
                }
                l[i * n + i] = d.sqrt();
            } else {
                l[i * n + j] = (a[i * n + j] - s) / l[j * n + j];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l[i * n + k] * y[k]).sum();
        y[i] = (b[i] - s) / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| l[k * n + i] * x[k]).sum();
        x[i] = (y[i] - s) / l[i * n + i];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Sample moments of the terminal spot `S_T`.
pub fn moments_of_terminal(paths: &PathSet<f64>) -> Result<Moments<f64>, PricingError> {
    Ok(moment_report(&paths.terminal_spots())?)
}
