use super::{CorrelationStructure, ModelParams, StateVector};
use crate::scalar::Scalar;

/// Drift vector `b(x)`:
///
/// ```text
/// b(x) = ( x1 (x3 - x4),
///          κv (av - x2),
///          κd (ad - x3),
///          κf (af - x4) - σf ρsf sqrt(x2 x4) )
/// ```
///
/// The square-root argument is built from `max(x2, 0)` and `max(x4, 0)`, so
/// the function is total on the whole of `R^4`.
pub fn drift<T: Scalar>(
    x: &StateVector<T>,
    p: &ModelParams<T>,
    corr: &CorrelationStructure<T>,
) -> [T; 4] {
    let zero = T::zero();
    let vr = x.v.max(zero) * x.rf.max(zero);
    [
        x.s * (x.rd - x.rf),
        p.kappa_v * (p.a_v - x.v),
        p.kappa_d * (p.a_d - x.rd),
        p.kappa_f * (p.a_f - x.rf) - p.sigma_f * corr.rho_sf() * vr.sqrt_pos(),
    ]
}

/// Jump coefficient `g(s, u, x)` multiplying a joint jump `(s, u)` of the
/// subordinator and the four uncorrelated subordinated Brownian motions.
///
/// Row `i` loads on `u` through row `i` of the Cholesky factor `H`; negative
/// square-root arguments are clamped to zero.
pub fn jump_coeff<T: Scalar>(
    s: T,
    u: &[T; 4],
    x: &StateVector<T>,
    p: &ModelParams<T>,
    corr: &CorrelationStructure<T>,
) -> [T; 4] {
    let phi = corr.correlate(u);
    let sv = x.v.sqrt_pos();
    [
        x.s * (p.theta_s * s + phi[0] * sv),
        p.theta_v * s + phi[1] * p.sigma_v * sv,
        p.theta_d * s + phi[2] * p.sigma_d * x.rd.sqrt_pos(),
        p.theta_f * s + phi[3] * p.sigma_f * x.rf.sqrt_pos(),
    ]
}
