use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::scalar::Scalar;

/// Coefficients of the Heston-CIR system.
///
/// `a_*` are long-run means, `theta_*` the loadings on the subordinator
/// `dγ`. All fields are public so degenerate (noise-free) configurations can
/// be built for testing; [`ModelParams::validate`] enforces the model's
/// admissibility conditions and is applied by the config loaders.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams<T> {
    pub kappa_v: T,
    pub kappa_d: T,
    pub kappa_f: T,
    pub a_v: T,
    pub a_d: T,
    pub a_f: T,
    pub sigma_v: T,
    pub sigma_d: T,
    pub sigma_f: T,
    #[serde(default)]
    pub theta_s: T,
    #[serde(default)]
    pub theta_v: T,
    #[serde(default)]
    pub theta_d: T,
    #[serde(default)]
    pub theta_f: T,
    pub s0: T,
    pub v0: T,
    pub rd0: T,
    pub rf0: T,
}

impl<T: Scalar> ModelParams<T> {
    /// The FX parameter set used for the American put experiments
    /// (EUR/USD-like rates, `S0 = 100`). Subordinator loadings are zero.
    pub fn fx_reference() -> Self {
        let l = T::lit;
        Self {
            kappa_v: l(1.70),
            kappa_d: l(0.20),
            kappa_f: l(0.32),
            a_v: l(0.0232),
            a_d: l(0.0475),
            a_f: l(0.0248),
            sigma_v: l(0.150),
            sigma_d: l(0.0352),
            sigma_f: l(0.0317),
            theta_s: T::zero(),
            theta_v: T::zero(),
            theta_d: T::zero(),
            theta_f: T::zero(),
            s0: l(100.0),
            v0: l(0.0275),
            rd0: l(0.0524),
            rf0: l(0.0291),
        }
    }

    pub fn initial_state(&self) -> StateVector<T> {
        StateVector::new(self.s0, self.v0, self.rd0, self.rf0)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let positive = [
            ("kappa_v", self.kappa_v),
            ("kappa_d", self.kappa_d),
            ("kappa_f", self.kappa_f),
            ("a_v", self.a_v),
            ("a_d", self.a_d),
            ("a_f", self.a_f),
            ("sigma_v", self.sigma_v),
            ("sigma_d", self.sigma_d),
            ("sigma_f", self.sigma_f),
            ("s0", self.s0),
            ("v0", self.v0),
            ("rd0", self.rd0),
            ("rf0", self.rf0),
        ];
        for (name, value) in positive {
            if !(value > T::zero()) || !value.is_finite() {
                return Err(ModelError::InvalidParameter {
                    name,
                    value: value.to_f64_lossy(),
                    reason: "must be finite and strictly positive",
                });
            }
        }
        let non_negative = [
            ("theta_s", self.theta_s),
            ("theta_v", self.theta_v),
            ("theta_d", self.theta_d),
            ("theta_f", self.theta_f),
        ];
        for (name, value) in non_negative {
            if !(value >= T::zero()) || !value.is_finite() {
                return Err(ModelError::InvalidParameter {
                    name,
                    value: value.to_f64_lossy(),
                    reason: "must be finite and non-negative",
                });
            }
        }
        Ok(())
    }
}

/// `X(t) = (S, V, r_d, r_f)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StateVector<T> {
    pub s: T,
    pub v: T,
    pub rd: T,
    pub rf: T,
}

impl<T: Scalar> StateVector<T> {
    pub fn new(s: T, v: T, rd: T, rf: T) -> Self {
        Self { s, v, rd, rf }
    }

    pub fn from_array(a: [T; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn to_array(self) -> [T; 4] {
        [self.s, self.v, self.rd, self.rf]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|c| c.is_finite())
    }

    /// Euclidean distance between two states.
    pub fn distance(&self, other: &Self) -> T {
        self.to_array()
            .iter()
            .zip(other.to_array())
            .fold(T::zero(), |acc, (a, b)| acc + (*a - b) * (*a - b))
            .sqrt()
    }
}

/// Gamma subordinator: increments over a horizon `h` are
/// `Gamma(shape = alpha * h, rate = beta)`, so the mean is `alpha*h/beta`
/// and the variance `alpha*h/beta^2`. Its Lévy density is
/// `alpha/s * exp(-beta*s)` on `s > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubordinatorParams {
    pub alpha: f64,
    pub beta: f64,
}

impl SubordinatorParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self, ModelError> {
        let p = Self { alpha, beta };
        p.validate()?;
        Ok(p)
    }

    /// Parametrization by mean rate `mu` and variance rate `nu` of the clock:
    /// `alpha = mu^2/nu`, `beta = mu/nu`.
    ///
    /// With `mu = 1` the clock is unbiased (`E[γ(t)] = t`) and `nu` alone
    /// controls the excess kurtosis of the subordinated Brownian motion.
    pub fn from_mean_variance_rate(mu: f64, nu: f64) -> Result<Self, ModelError> {
        if !(mu > 0.0) || !mu.is_finite() {
            return Err(ModelError::InvalidParameter {
                name: "mu",
                value: mu,
                reason: "must be finite and strictly positive",
            });
        }
        if !(nu > 0.0) || !nu.is_finite() {
            return Err(ModelError::InvalidParameter {
                name: "nu",
                value: nu,
                reason: "must be finite and strictly positive",
            });
        }
        Self::new(mu * mu / nu, mu / nu)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(ModelError::InvalidParameter {
                name: "alpha",
                value: self.alpha,
                reason: "must be finite and strictly positive",
            });
        }
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(ModelError::InvalidParameter {
                name: "beta",
                value: self.beta,
                reason: "must be finite and strictly positive",
            });
        }
        Ok(())
    }

    /// Gamma shape of an increment over `h`.
    pub fn shape(&self, h: f64) -> f64 {
        self.alpha * h
    }

    pub fn increment_mean(&self, h: f64) -> f64 {
        self.alpha * h / self.beta
    }

    pub fn increment_variance(&self, h: f64) -> f64 {
        self.alpha * h / (self.beta * self.beta)
    }
}
