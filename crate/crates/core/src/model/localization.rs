//! Smooth cutoff of the coefficients outside the box `[1/n, n]^4`.

use serde::{Deserialize, Serialize};

use super::{drift, jump_coeff, CorrelationStructure, ModelError, ModelParams, StateVector};
use crate::scalar::Scalar;

/// Transition profile of the one-dimensional cutoff on its two bands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CutoffProfile {
    /// Cubic smoothstep `3t^2 - 2t^3`: C¹ and monotone on each band.
    #[default]
    Smoothstep,
}

/// Localization level `n`: the cutoff equals one on `[1/n, n]` and vanishes
/// outside `(1/(n+1), n+1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalizationConfig {
    pub n: u32,
    #[serde(default)]
    pub band_shape: CutoffProfile,
}

impl LocalizationConfig {
    /// Level `n` without checking it against an initial state.
    pub fn unchecked(n: u32) -> Self {
        Self {
            n,
            band_shape: CutoffProfile::Smoothstep,
        }
    }

    /// Level `n`, rejected when the plateau does not contain `x0`.
    pub fn new<T: Scalar>(n: u32, x0: &StateVector<T>) -> Result<Self, ModelError> {
        let n0 = Self::minimal_level(x0);
        if n < n0 {
            return Err(ModelError::LocalizationTooSmall { n, n0 });
        }
        Ok(Self::unchecked(n))
    }

    /// Smallest `n0` with every component of `x0` in `[1/n0, n0]`.
    pub fn minimal_level<T: Scalar>(x0: &StateVector<T>) -> u32 {
        x0.to_array()
            .iter()
            .map(|c| {
                let c = c.to_f64_lossy();
                if !(c > 0.0) || !c.is_finite() {
                    return u32::MAX;
                }
                let need = c.max(1.0 / c).ceil();
                need.min(u32::MAX as f64) as u32
            })
            .max()
            .unwrap_or(1)
            .max(1)
    }

    fn bounds<T: Scalar>(&self) -> (T, T, T, T) {
        let n = T::lit(self.n as f64);
        let one = T::one();
        (one / (n + one), one / n, n, n + one)
    }

    /// One-dimensional cutoff `ψ_n(x)`.
    pub fn psi<T: Scalar>(&self, x: T) -> T {
        let (outer_lo, inner_lo, inner_hi, outer_hi) = self.bounds::<T>();
        if x >= inner_lo && x <= inner_hi {
            return T::one();
        }
        if x <= outer_lo || x >= outer_hi || x.is_nan() {
            return T::zero();
        }
        let t = if x < inner_lo {
            (x - outer_lo) / (inner_lo - outer_lo)
        } else {
            outer_hi - x
        };
        match self.band_shape {
            CutoffProfile::Smoothstep => t * t * (T::lit(3.0) - T::lit(2.0) * t),
        }
    }

    /// Product cutoff over the four components.
    pub fn weight<T: Scalar>(&self, x: &StateVector<T>) -> T {
        x.to_array()
            .iter()
            .fold(T::one(), |acc, c| acc * self.psi(*c))
    }

    /// Whether every component lies in the plateau `[1/n, n]`.
    pub fn contains<T: Scalar>(&self, x: &StateVector<T>) -> bool {
        let (_, lo, hi, _) = self.bounds::<T>();
        x.to_array().iter().all(|c| *c >= lo && *c <= hi)
    }
}

/// Localized coefficients at a fixed state: `b_n(x) = ψ(x) b(x)` and
/// `g_n(·,·,x) = ψ(x) g(·,·,x)`.
#[derive(Debug, Clone, Copy)]
pub struct LocalizedCoeffs<'a, T> {
    pub weight: T,
    pub drift: [T; 4],
    state: StateVector<T>,
    params: &'a ModelParams<T>,
    corr: &'a CorrelationStructure<T>,
}

impl<T: Scalar> LocalizedCoeffs<'_, T> {
    pub fn jump(&self, s: T, u: &[T; 4]) -> [T; 4] {
        if self.weight == T::zero() {
            return [T::zero(); 4];
        }
        let g = jump_coeff(s, u, &self.state, self.params, self.corr);
        if self.weight == T::one() {
            g
        } else {
            g.map(|c| c * self.weight)
        }
    }
}

pub fn localized_coeffs<'a, T: Scalar>(
    x: &StateVector<T>,
    p: &'a ModelParams<T>,
    corr: &'a CorrelationStructure<T>,
    loc: &LocalizationConfig,
) -> LocalizedCoeffs<'a, T> {
    let weight = loc.weight(x);
    let drift = if weight == T::zero() {
        [T::zero(); 4]
    } else if weight == T::one() {
        drift(x, p, corr)
    } else {
        drift(x, p, corr).map(|c| c * weight)
    };
    LocalizedCoeffs {
        weight,
        drift,
        state: *x,
        params: p,
        corr,
    }
}

/// Constant `C_n` with `|g_n(s,u,x)| <= C_n (|s| + |u1| + ... + |u4|)` for
/// every `x`, obtained by bounding each component on `[1/(n+1), n+1]^4` and
/// summing absolute values.
pub fn jump_bound_constant<T: Scalar>(
    p: &ModelParams<T>,
    corr: &CorrelationStructure<T>,
    loc: &LocalizationConfig,
) -> T {
    let top = T::lit(loc.n as f64) + T::one();
    let root = top.sqrt();
    let h = corr.cholesky();
    let row_scale = [top * root, p.sigma_v * root, p.sigma_d * root, p.sigma_f * root];
    let s_coef = top * p.theta_s.abs() + p.theta_v.abs() + p.theta_d.abs() + p.theta_f.abs();
    let mut c = s_coef;
    for j in 0..4 {
        let u_coef = (0..4).fold(T::zero(), |acc, i| acc + row_scale[i] * h[i][j].abs());
        c = c.max(u_coef);
    }
    c
}
