use approx::assert_relative_eq;
use fxvg_core::model::{
    cholesky_factor, levy_measure_moment, CorrelationStructure, Correlations, Matrix4, ModelError, MomentKind,
    SubordinatorParams,
};
use nalgebra::{DMatrix, Matrix4 as NaMatrix4};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random correlation matrix from normalized random factor loadings.
fn random_correlation(rng: &mut ChaCha8Rng) -> Matrix4<f64> {
    let k = 6;
    let a = DMatrix::<f64>::from_fn(4, k, |_, _| rng.random_range(-1.0..1.0));
    let cov = &a * a.transpose();
    let mut rho = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            rho[i][j] = if i == j { 1.0 } else { cov[(i, j)] / (cov[(i, i)] * cov[(j, j)]).sqrt() };
        }
    }
    rho
}

fn reconstruction_error(rho: &Matrix4<f64>, h: &Matrix4<f64>) -> f64 {
    let mut err: f64 = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            let hh: f64 = (0..4).map(|k| h[i][k] * h[j][k]).sum();
            err = err.max((hh - rho[i][j]).abs());
        }
    }
    err
}

#[test]
fn cholesky_agrees_with_nalgebra() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..1000 {
        let rho = random_correlation(&mut rng);
        let h = cholesky_factor(&rho).unwrap();
        assert!(reconstruction_error(&rho, &h) <= 1e-12);
        let na = NaMatrix4::from_fn(|i, j| rho[i][j]).cholesky().unwrap().l();
        for i in 0..4 {
            for j in 0..4 {
                assert!((na[(i, j)] - h[i][j]).abs() < 1e-12);
            }
            assert!(h[i][i] > 0.0);
            for j in i + 1..4 {
                assert_eq!(h[i][j], 0.0);
            }
        }
    }
}

#[test]
fn reference_correlations_factor() {
    let c = CorrelationStructure::new(Correlations::<f64>::fx_reference()).unwrap();
    assert!(reconstruction_error(c.rho(), c.cholesky()) <= 1e-15);
    let id = CorrelationStructure::<f64>::identity();
    assert_eq!(*id.cholesky(), *id.rho());
}

#[test]
fn singular_and_invalid_matrices_are_rejected() {
    let mut rho = [[0.0; 4]; 4];
    for (i, row) in rho.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let mut ones = rho;
    ones[0][1] = 1.0;
    ones[1][0] = 1.0;
    assert!(matches!(cholesky_factor(&ones), Err(ModelError::NotPositiveDefinite { row: 1, .. })));
    assert!(CorrelationStructure::from_matrix(ones).is_err());
    let mut asym = rho;
    asym[0][1] = 0.3;
    assert!(CorrelationStructure::from_matrix(asym).is_err());
    // Pairwise valid but jointly indefinite.
    let c = Correlations { sv: 0.9, sd: 0.9, sf: 0.0, vd: -0.9, vf: 0.0, df: 0.0 };
    assert!(CorrelationStructure::new(c).is_err());
}

fn quad(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let out = quadrature::double_exponential::integrate(f, a, b, 1e-14);
    out.integral
}

/// `∫_0^∞ s^{q-1} α e^{-βs} ds` via `s = t²`, truncated where the integrand
/// is below double precision.
fn time_integral(q: f64, sub: &SubordinatorParams) -> f64 {
    let upper = (800.0 / sub.beta).sqrt();
    quad(|t| 2.0 * t.powf(2.0 * q - 1.0) * sub.alpha * (-sub.beta * t * t).exp(), 0.0, upper)
}

/// `E|W|^p` for a standard normal `W`.
fn gaussian_abs_moment(p: f64) -> f64 {
    2.0 * quad(|w| w.powf(p) * (-0.5 * w * w).exp() / (2.0 * std::f64::consts::PI).sqrt(), 0.0, 40.0)
}

#[test]
fn levy_moments_match_quadrature() {
    for (alpha, beta) in [(1.0, 0.5), (2.0, 2.0), (0.7, 5.0)] {
        let sub = SubordinatorParams::new(alpha, beta).unwrap();
        for p in [1.0, 1.5, 2.0, 3.0, 4.0] {
            let time = levy_measure_moment(p, MomentKind::Time, &sub).unwrap();
            assert_relative_eq!(time, time_integral(p, &sub), max_relative = 1e-8);
            // Given a jump of size s each coordinate of u is N(0, s), so the
            // space moment factors as E|W|^p ∫ s^{p/2} ν(ds).
            let space = levy_measure_moment(p, MomentKind::Space, &sub).unwrap();
            let oracle = gaussian_abs_moment(p) * time_integral(p / 2.0, &sub);
            assert_relative_eq!(space, oracle, max_relative = 1e-8);
        }
    }
}

proptest! {
    #[test]
    fn cholesky_reconstructs_random_correlations(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = random_correlation(&mut rng);
        match cholesky_factor(&rho) {
            Ok(h) => prop_assert!(reconstruction_error(&rho, &h) <= 1e-12),
            // Loadings can occasionally produce a near-singular matrix.
            Err(ModelError::NotPositiveDefinite { pivot, .. }) => prop_assert!(pivot <= 1e-12),
            Err(e) => prop_assert!(false, "unexpected {e}"),
        }
    }

    #[test]
    fn time_moments_scale_with_alpha(p in 1.0f64..6.0, alpha in 0.1f64..10.0, beta in 0.1f64..10.0) {
        let one = levy_measure_moment(p, MomentKind::Time, &SubordinatorParams::new(1.0, beta).unwrap()).unwrap();
        let many = levy_measure_moment(p, MomentKind::Time, &SubordinatorParams::new(alpha, beta).unwrap()).unwrap();
        prop_assert!((many - alpha * one).abs() <= 1e-12 * many.abs());
    }
}
