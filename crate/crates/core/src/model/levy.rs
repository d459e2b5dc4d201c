use statrs::function::gamma::gamma;

use super::{ModelError, SubordinatorParams};

/// Which coordinate of the joint jump `(s, u)` the moment is taken over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MomentKind {
    /// `∫ s^p ν(ds du)`
    Time,
    /// `∫ |u_j|^p ν(ds du)`, identical for every `j`.
    Space,
}

/// Absolute moments of the Lévy measure of `(γ, Γ̄)`, whose density is
/// `α/s e^{-βs}` times a centred Gaussian kernel of variance `s` per
/// coordinate.
///
/// * time: `α Γ(p) / β^p`
/// * space: `C_p α Γ(p/2) / β^{p/2}`, with `C_p = 2^{p/2} Γ((p+1)/2) / sqrt(π)`
pub fn levy_measure_moment(
    p: f64,
    kind: MomentKind,
    sub: &SubordinatorParams,
) -> Result<f64, ModelError> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(ModelError::InvalidExponent(p));
    }
    let SubordinatorParams { alpha, beta } = *sub;
    Ok(match kind {
        MomentKind::Time => alpha * gamma(p) / beta.powf(p),
        MomentKind::Space => {
            let c_p = 2f64.powf(p / 2.0) * gamma((p + 1.0) / 2.0) / std::f64::consts::PI.sqrt();
            c_p * alpha * gamma(p / 2.0) / beta.powf(p / 2.0)
        }
    })
}
