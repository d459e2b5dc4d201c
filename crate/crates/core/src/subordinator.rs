//! Gamma-subordinator increments and subordinated Gaussian increments.
//!
//! Every path owns an [`RngStream`]: a ChaCha8 generator keyed by the run
//! seed and positioned on the stream selected by the path index. Path `i`
//! therefore draws the same numbers no matter how paths are distributed
//! over worker threads.
//!
//! Gamma variates use the Marsaglia–Tsang squeeze method, with the
//! `U^{1/shape}` boost for shapes below one. Standard normals come from
//! `rand_distr::StandardNormal` (ziggurat).

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Open01, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::model::SubordinatorParams;

/// Counter-based random stream identified by `(seed, stream_id)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

/// How the business clock advances over one grid step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeChange {
    /// `Δγ ~ Gamma(α Δt, rate β)`.
    #[default]
    Gamma,
    /// `Δγ = Δt` exactly: the diffusion limit, no jumps.
    Identity,
}

/// Draw from `Gamma(shape, rate)`.
///
/// Results that underflow `f64` (possible for very small shapes) are
/// returned as `f64::MIN_POSITIVE` so increments stay strictly positive.
pub fn sample_gamma<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> f64 {
    debug_assert!(shape > 0.0 && rate > 0.0);
    let draw = if shape < 1.0 {
        let g = marsaglia_tsang(shape + 1.0, rng);
        let u: f64 = Open01.sample(rng);
        (g.ln() + u.ln() / shape).exp()
    } else {
        marsaglia_tsang(shape, rng)
    };
    (draw / rate).max(f64::MIN_POSITIVE)
}

fn marsaglia_tsang<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x: f64 = StandardNormal.sample(rng);
        let v = 1.0 + c * x;
        if v <= 0.0 {
            continue;
        }
        let v = v * v * v;
        let u: f64 = Open01.sample(rng);
        let x2 = x * x;
        if u < 1.0 - 0.0331 * x2 * x2 {
            return d * v;
        }
        if u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
            return d * v;
        }
    }
}

/// `n_steps` i.i.d. subordinator increments over steps of length `dt`.
pub fn sample_gamma_increments<R: Rng + ?Sized>(
    sub: &SubordinatorParams,
    dt: f64,
    n_steps: usize,
    rng: &mut R,
) -> Vec<f64> {
    let shape = sub.shape(dt);
    (0..n_steps)
        .map(|_| sample_gamma(shape, sub.beta, rng))
        .collect()
}

/// Rows `sqrt(Δγ_j) Z_j` with `Z_j ~ N(0, I_4)`. Correlation is applied later
/// by the scheme through the Cholesky factor.
pub fn sample_subordinated_increments<R: Rng + ?Sized>(dgamma: &[f64], rng: &mut R) -> Vec<[f64; 4]> {
    dgamma
        .iter()
        .map(|dg| {
            let z = standard_normal4(rng);
            let s = dg.sqrt();
            z.map(|zi| s * zi)
        })
        .collect()
}

fn standard_normal4<R: Rng + ?Sized>(rng: &mut R) -> [f64; 4] {
    let mut z = [0.0; 4];
    for zi in &mut z {
        *zi = StandardNormal.sample(rng);
    }
    z
}

/// `n` independent standard normal draws from one stream, e.g. for
/// synthetic goodness-of-fit samples.
pub fn standard_normals(n: usize, stream: RngStream) -> Vec<f64> {
    let mut rng = stream.rng();
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// Driving noise of one path: clock increments and raw standard normals.
#[derive(Debug, Clone, PartialEq)]
pub struct IncrementBlock {
    pub dgamma: Vec<f64>,
    /// Unscaled `N(0, I_4)` draws, one row per step.
    pub dgauss: Vec<[f64; 4]>,
}

impl IncrementBlock {
    /// Draws all clock increments first, then all normal rows, from the
    /// path's own stream.
    pub fn generate(
        sub: &SubordinatorParams,
        time_change: TimeChange,
        dt: f64,
        n_steps: usize,
        stream: RngStream,
    ) -> Self {
        let mut rng = stream.rng();
        let dgamma = match time_change {
            TimeChange::Gamma => sample_gamma_increments(sub, dt, n_steps, &mut rng),
            TimeChange::Identity => vec![dt; n_steps],
        };
        let dgauss = (0..n_steps).map(|_| standard_normal4(&mut rng)).collect();
        Self { dgamma, dgauss }
    }

    pub fn len(&self) -> usize {
        self.dgamma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dgamma.is_empty()
    }

    /// Aggregates consecutive groups of `factor` steps into one.
    ///
    /// The coarse clock increment is the exact sum of the fine ones, and the
    /// coarse Gaussian row is `Σ sqrt(Δγ_k) Z_k / sqrt(Σ Δγ_k)`, so the
    /// subordinated increment `sqrt(Δγ) Z` of the coarse step equals the sum
    /// of the fine subordinated increments.
    pub fn coarsen(&self, factor: usize) -> Self {
        assert!(factor >= 1 && self.len() % factor == 0, "factor must divide the step count");
        if factor == 1 {
            return self.clone();
        }
        let n = self.len() / factor;
        let mut dgamma = Vec::with_capacity(n);
        let mut dgauss = Vec::with_capacity(n);
        for chunk in 0..n {
            let range = chunk * factor..(chunk + 1) * factor;
            let mut dg = 0.0;
            let mut gbar = [0.0; 4];
            for k in range {
                dg += self.dgamma[k];
                let s = self.dgamma[k].sqrt();
                for (g, z) in gbar.iter_mut().zip(self.dgauss[k]) {
                    *g += s * z;
                }
            }
            let scale = dg.sqrt();
            let z = if scale > 0.0 { gbar.map(|g| g / scale) } else { [0.0; 4] };
            dgamma.push(dg);
            dgauss.push(z);
        }
        Self { dgamma, dgauss }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{ContinuousCDF, Gamma as GammaDist};

    fn mean_var(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
        (m, v)
    }

    #[test]
    fn gamma_moments_at_four_sigma() {
        let sub = SubordinatorParams::new(1.0, 1.0).unwrap();
        let mut rng = RngStream::new(7, 0).rng();
        let n = 1_000_000;
        let xs = sample_gamma_increments(&sub, 0.1, n, &mut rng);
        assert!(xs.iter().all(|x| *x > 0.0));
        let (m, v) = mean_var(&xs);
        // Gamma(k, rate b): mean k/b, var k/b^2, 4th central 3k(k+2)/b^4
        let k = 0.1;
        let sd_mean = (k / n as f64).sqrt();
        let mu4 = 3.0 * k * (k + 2.0);
        let sd_var = ((mu4 - k * k) / n as f64).sqrt();
        assert!((m - 0.1).abs() < 4.0 * sd_mean, "mean {m}");
        assert!((v - 0.1).abs() < 4.0 * sd_var, "var {v}");
    }

    #[test]
    fn rate_half_doubles_the_mean() {
        let sub = SubordinatorParams::new(1.0, 0.5).unwrap();
        let mut rng = RngStream::new(11, 3).rng();
        let n = 200_000;
        let dt = 5.0 / 50.0;
        let xs = sample_gamma_increments(&sub, dt, n, &mut rng);
        let (m, _) = mean_var(&xs);
        let sd = (sub.increment_variance(dt) / n as f64).sqrt();
        assert!((m - dt / 0.5).abs() < 4.0 * sd);
    }

    #[test]
    fn small_shape_passes_kolmogorov_smirnov() {
        // shape α·dt = 0.01; oracle: Gamma CDF (regularized lower incomplete gamma)
        let sub = SubordinatorParams::new(1.0, 1.0).unwrap();
        let mut rng = RngStream::new(2024, 1).rng();
        let n = 100_000;
        let mut xs = sample_gamma_increments(&sub, 0.01, n, &mut rng);
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let dist = GammaDist::new(0.01, 1.0).unwrap();
        let mut d = 0.0f64;
        for (i, x) in xs.iter().enumerate() {
            let f = dist.cdf(*x);
            d = d.max((f - i as f64 / n as f64).abs()).max(((i + 1) as f64 / n as f64 - f).abs());
        }
        let critical = 1.628 / (n as f64).sqrt();
        assert!(d < critical, "KS statistic {d} >= {critical}");
    }

    #[test]
    fn large_shape_passes_kolmogorov_smirnov() {
        let mut rng = RngStream::new(5, 5).rng();
        let n = 50_000;
        let mut xs: Vec<f64> = (0..n).map(|_| sample_gamma(3.7, 2.0, &mut rng)).collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let dist = GammaDist::new(3.7, 2.0).unwrap();
        let d = xs
            .iter()
            .enumerate()
            .map(|(i, x)| {
                let f = dist.cdf(*x);
                (f - i as f64 / n as f64).abs().max(((i + 1) as f64 / n as f64 - f).abs())
            })
            .fold(0.0, f64::max);
        assert!(d < 1.628 / (n as f64).sqrt());
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let sub = SubordinatorParams::new(1.0, 0.5).unwrap();
        let a = IncrementBlock::generate(&sub, TimeChange::Gamma, 0.02, 50, RngStream::new(1, 4));
        let b = IncrementBlock::generate(&sub, TimeChange::Gamma, 0.02, 50, RngStream::new(1, 4));
        let c = IncrementBlock::generate(&sub, TimeChange::Gamma, 0.02, 50, RngStream::new(1, 5));
        let d = IncrementBlock::generate(&sub, TimeChange::Gamma, 0.02, 50, RngStream::new(2, 4));
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }

    #[test]
    fn unit_clock_scaled_normals() {
        let mut rng = RngStream::new(99, 0).rng();
        let n = 1_000_000;
        let rows = sample_subordinated_increments(&vec![1.0; n], &mut rng);
        let sd_var = (2.0 / n as f64).sqrt();
        let sd_corr = 1.0 / (n as f64).sqrt();
        for j in 0..4 {
            let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            let (_, v) = mean_var(&col);
            assert!((v - 1.0).abs() < 4.0 * sd_var, "column {j} var {v}");
        }
        for i in 0..4 {
            for j in (i + 1)..4 {
                let c = rows.iter().map(|r| r[i] * r[j]).sum::<f64>() / n as f64;
                assert!(c.abs() < 4.0 * sd_corr, "corr({i},{j}) = {c}");
            }
        }
        let mut rng = RngStream::new(98, 0).rng();
        let rows = sample_subordinated_increments(&vec![0.25; 100_000], &mut rng);
        let col: Vec<f64> = rows.iter().map(|r| r[2]).collect();
        let (_, v) = mean_var(&col);
        assert!((v.sqrt() - 0.5).abs() < 0.01);
    }

    #[test]
    fn coarsening_preserves_sums() {
        let sub = SubordinatorParams::new(2.0, 2.0).unwrap();
        let fine = IncrementBlock::generate(&sub, TimeChange::Gamma, 1.0 / 64.0, 64, RngStream::new(3, 0));
        let coarse = fine.coarsen(16);
        assert_eq!(coarse.len(), 4);
        for c in 0..4 {
            let sum: f64 = fine.dgamma[c * 16..(c + 1) * 16].iter().sum();
            assert_eq!(coarse.dgamma[c], sum);
            for j in 0..4 {
                let gbar: f64 = (c * 16..(c + 1) * 16)
                    .map(|k| fine.dgamma[k].sqrt() * fine.dgauss[k][j])
                    .sum();
                assert!((coarse.dgamma[c].sqrt() * coarse.dgauss[c][j] - gbar).abs() < 1e-12);
            }
        }
        assert_eq!(fine.coarsen(1), fine);
    }

    #[test]
    fn identity_clock_is_calendar_time() {
        let sub = SubordinatorParams::new(1.0, 1.0).unwrap();
        let b = IncrementBlock::generate(&sub, TimeChange::Identity, 0.02, 10, RngStream::new(0, 0));
        assert!(b.dgamma.iter().all(|d| *d == 0.02));
    }
}
