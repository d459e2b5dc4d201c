use super::{DriftClock, SimConfig, Truncation};
use crate::model::{CorrelationStructure, ModelParams, StateVector};
use crate::scalar::Scalar;

/// One Euler–Maruyama step.
///
/// With `h = Δγ` (subordinated clock) or `h = Δt` (calendar clock),
/// `φ = H z` and `x⁺ = max(x, 0)`:
///
/// ```text
/// S'  = S  + S (rd - rf) h          + S θs Δγ + S sqrt(V⁺ Δγ) H11 z1
/// V'  = V  + κv (av - V) h          + θv Δγ   + σv sqrt(V⁺ Δγ) φ2
/// rd' = rd + κd (ad - rd) h         + θd Δγ   + σd sqrt(rd⁺ Δγ) φ3
/// rf' = rf + (κf (af - rf)
///            - σf ρsf sqrt(V⁺ rf⁺)) h + θf Δγ + σf sqrt(rf⁺ Δγ) φ4
/// ```
///
/// Terms are accumulated left to right in exactly this order. When a
/// localization level is configured the increment is scaled by the cutoff
/// weight of `x`; on the plateau (weight one) the unscaled expression is used
/// so results are bitwise identical to the unlocalized scheme.
pub fn step<T: Scalar>(
    x: &StateVector<T>,
    dgamma: T,
    z: &[T; 4],
    dt: T,
    p: &ModelParams<T>,
    corr: &CorrelationStructure<T>,
    cfg: &SimConfig,
) -> StateVector<T> {
    let h = match cfg.drift_clock {
        DriftClock::Subordinated => dgamma,
        DriftClock::Calendar => dt,
    };
    let hm = corr.cholesky();
    let phi1 = hm[1][0] * z[0] + hm[1][1] * z[1];
    let phi2 = hm[2][0] * z[0] + hm[2][1] * z[1] + hm[2][2] * z[2];
    let phi3 = hm[3][0] * z[0] + hm[3][1] * z[1] + hm[3][2] * z[2] + hm[3][3] * z[3];

    let zero = T::zero();
    let v = x.v.max(zero);
    let rd = x.rd.max(zero);
    let rf = x.rf.max(zero);

    let ds = [
        x.s * (x.rd - x.rf) * h,
        x.s * p.theta_s * dgamma,
        x.s * (v * dgamma).sqrt() * hm[0][0] * z[0],
    ];
    let dv = [
        p.kappa_v * (p.a_v - x.v) * h,
        p.theta_v * dgamma,
        p.sigma_v * (v * dgamma).sqrt() * phi1,
    ];
    let drd = [
        p.kappa_d * (p.a_d - x.rd) * h,
        p.theta_d * dgamma,
        p.sigma_d * (rd * dgamma).sqrt() * phi2,
    ];
    let drf = [
        (p.kappa_f * (p.a_f - x.rf) - p.sigma_f * corr.rho_sf() * (v * rf).sqrt()) * h,
        p.theta_f * dgamma,
        p.sigma_f * (rf * dgamma).sqrt() * phi3,
    ];

    let weight = cfg
        .localization
        .as_ref()
        .map_or(T::one(), |loc| loc.weight(x));
    let advance = |x0: T, d: [T; 3]| {
        if weight == T::one() {
            x0 + d[0] + d[1] + d[2]
        } else {
            x0 + weight * (d[0] + d[1] + d[2])
        }
    };
    let next = StateVector::new(
        advance(x.s, ds),
        advance(x.v, dv),
        advance(x.rd, drd),
        advance(x.rf, drf),
    );
    match cfg.truncation {
        Truncation::FullTruncation => next,
        Truncation::Absorption => {
            StateVector::from_array(next.to_array().map(|c| c.max(zero)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{drift, Correlations, LocalizationConfig};

    fn quiet_params() -> ModelParams<f64> {
        ModelParams {
            sigma_v: 0.0,
            sigma_d: 0.0,
            sigma_f: 0.0,
            ..ModelParams::fx_reference()
        }
    }

    #[test]
    fn noise_free_mean_reversion() {
        let p = ModelParams {
            v0: 0.0,
            a_v: 0.0,
            rd0: 0.03,
            rf0: 0.03,
            a_d: 0.03,
            a_f: 0.03,
            ..quiet_params()
        };
        let corr = CorrelationStructure::new(Correlations::fx_reference()).unwrap();
        let cfg = SimConfig::new(1, 0);
        let mut x = p.initial_state();
        for k in 0..20 {
            let z = [1.3 - k as f64, -0.4, 2.2, -1.9 + 0.1 * k as f64];
            x = step(&x, 0.05, &z, 0.02, &p, &corr, &cfg);
            assert_eq!(x, p.initial_state());
        }

        // variance and rates relax monotonically towards their means
        let p = ModelParams {
            v0: 0.08,
            rd0: 0.01,
            rf0: 0.06,
            ..quiet_params()
        };
        let mut x = p.initial_state();
        for _ in 0..50 {
            let prev = x;
            x = step(&x, 0.05, &[0.7, -2.0, 1.0, 0.3], 0.02, &p, &corr, &cfg);
            assert!(x.v < prev.v && x.v > p.a_v);
            assert!(x.rd > prev.rd && x.rd < p.a_d);
            assert!(x.rf < prev.rf);
        }
    }

    #[test]
    fn pure_drift_step_under_calendar_clock() {
        let p = ModelParams::<f64>::fx_reference();
        let corr = CorrelationStructure::new(Correlations::fx_reference()).unwrap();
        let cfg = SimConfig {
            drift_clock: DriftClock::Calendar,
            ..SimConfig::new(1, 0)
        };
        let x = p.initial_state();
        let dt = 0.02;
        let next = step(&x, 1e-300, &[0.0; 4], dt, &p, &corr, &cfg);
        let b = drift(&x, &p, &corr);
        let want = [x.s + b[0] * dt, x.v + b[1] * dt, x.rd + b[2] * dt, x.rf + b[3] * dt];
        for (got, want) in next.to_array().iter().zip(want) {
            assert!((got - want).abs() <= 1e-15 * want.abs().max(1.0));
        }
    }

    #[test]
    fn plateau_localization_is_bitwise_neutral() {
        let p = ModelParams::<f64>::fx_reference();
        let corr = CorrelationStructure::new(Correlations::fx_reference()).unwrap();
        let plain = SimConfig::new(1, 0);
        let local = SimConfig {
            localization: Some(LocalizationConfig::new(200, &p.initial_state()).unwrap()),
            ..plain
        };
        let x = p.initial_state();
        let z = [0.4, -1.0, 0.2, 0.9];
        assert_eq!(
            step(&x, 0.03, &z, 0.02, &p, &corr, &plain),
            step(&x, 0.03, &z, 0.02, &p, &corr, &local)
        );
    }

    #[test]
    fn localization_freezes_states_outside_support() {
        let p = ModelParams::<f64>::fx_reference();
        let corr = CorrelationStructure::identity();
        let cfg = SimConfig {
            localization: Some(LocalizationConfig::unchecked(100)),
            ..SimConfig::new(1, 0)
        };
        let x = StateVector::new(150.0, 0.03, 0.03, 0.03);
        assert_eq!(step(&x, 0.5, &[1.0; 4], 0.02, &p, &corr, &cfg), x);
    }

    #[test]
    fn absorption_clamps_the_state() {
        let p = ModelParams::<f64>::fx_reference();
        let corr = CorrelationStructure::identity();
        let x = StateVector::new(100.0, 0.001, 0.001, 0.001);
        let z = [0.0, -30.0, -30.0, -30.0];
        let full = step(&x, 1.0, &z, 0.02, &p, &corr, &SimConfig::new(1, 0));
        assert!(full.v < 0.0 && full.rd < 0.0 && full.rf < 0.0);
        let cfg = SimConfig {
            truncation: Truncation::Absorption,
            ..SimConfig::new(1, 0)
        };
        let absorbed = step(&x, 1.0, &z, 0.02, &p, &corr, &cfg);
        assert_eq!((absorbed.v, absorbed.rd, absorbed.rf), (0.0, 0.0, 0.0));
        // negative state under full truncation stays finite
        let again = step(&full, 1.0, &z, 0.02, &p, &corr, &SimConfig::new(1, 0));
        assert!(again.is_finite());
    }
}
