//! Distribution diagnostics: sample moments, chi-square goodness of fit,
//! NRMSE against market quotes, empirical CDF and histogram densities.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticsError {
    #[error("expected count in bin {0} is not positive")]
    EmptyBins(usize),
    #[error("bin layout is inconsistent: {0}")]
    InvalidBins(String),
    #[error("market prices have zero range; NRMSE is undefined")]
    DegenerateRange,
    #[error("sample too small: need at least {need}, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("quote vectors are inconsistent: {0}")]
    InvalidQuotes(String),
}

/// Sample moments. `variance` is the unbiased estimator; skewness and
/// kurtosis are the central third and fourth moments (divided by `n`)
/// normalized by the corresponding power of the unbiased standard
/// deviation. Kurtosis is not excess kurtosis: a Gaussian sample gives 3.
/// Both are `None` when the sample variance is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments<T> {
    pub n: usize,
    pub mean: T,
    pub variance: T,
    pub skewness: Option<T>,
    pub kurtosis: Option<T>,
}

pub const MIN_MOMENT_SAMPLE: usize = 4;

pub fn moment_report<T: Scalar>(sample: &[T]) -> Result<Moments<T>, AnalyticsError> {
    let n = sample.len();
    if n < MIN_MOMENT_SAMPLE {
        return Err(AnalyticsError::TooFewSamples {
            need: MIN_MOMENT_SAMPLE,
            got: n,
        });
    }
    let nf = T::lit(n as f64);
    let mean = sample.iter().fold(T::zero(), |a, x| a + *x) / nf;
    let (mut m2, mut m3, mut m4) = (T::zero(), T::zero(), T::zero());
    for x in sample {
        let d = *x - mean;
        let d2 = d * d;
        m2 = m2 + d2;
        m3 = m3 + d2 * d;
        m4 = m4 + d2 * d2;
    }
    let variance = m2 / (nf - T::one());
    let (skewness, kurtosis) = if variance > T::zero() {
        let sd = variance.sqrt();
        (
            Some(m3 / nf / (sd * sd * sd)),
            Some(m4 / nf / (variance * variance)),
        )
    } else {
        (None, None)
    };
    Ok(Moments {
        n,
        mean,
        variance,
        skewness,
        kurtosis,
    })
}

/// Observed and expected counts over `K` bins bounded by `K+1` edges.
/// The outer edges may be infinite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinnedCounts<T> {
    pub edges: Vec<T>,
    pub observed: Vec<u64>,
    pub expected: Vec<T>,
}

impl<T: Scalar> BinnedCounts<T> {
    pub fn new(edges: Vec<T>, observed: Vec<u64>, expected: Vec<T>) -> Result<Self, AnalyticsError> {
        let b = Self {
            edges,
            observed,
            expected,
        };
        b.check_layout()?;
        Ok(b)
    }

    fn check_layout(&self) -> Result<(), AnalyticsError> {
        let k = self.observed.len();
        if k == 0 || self.expected.len() != k || self.edges.len() != k + 1 {
            return Err(AnalyticsError::InvalidBins(format!(
                "{} edges, {} observed, {} expected",
                self.edges.len(),
                k,
                self.expected.len()
            )));
        }
        if self.edges.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(AnalyticsError::InvalidBins("edges must be strictly increasing".into()));
        }
        Ok(())
    }

    pub fn sample_size(&self) -> u64 {
        self.observed.iter().sum()
    }
}

/// Pearson statistic `Σ (O_i - E_i)^2 / E_i`.
///
/// Per-bin terms are summed in ascending order, which makes the result
/// independent of the order of the bins.
pub fn chi_square<T: Scalar>(b: &BinnedCounts<T>) -> Result<T, AnalyticsError> {
    b.check_layout()?;
    let mut terms = Vec::with_capacity(b.observed.len());
    for (i, (o, e)) in b.observed.iter().zip(&b.expected).enumerate() {
        if !(*e > T::zero()) {
            return Err(AnalyticsError::EmptyBins(i));
        }
        let d = T::lit(*o as f64) - *e;
        terms.push(d * d / *e);
    }
    terms.sort_by(|a, b| a.partial_cmp(b).expect("finite chi-square terms"));
    Ok(terms.into_iter().fold(T::zero(), |a, t| a + t))
}

/// Upper-tail critical value of the chi-square distribution with `dof`
/// degrees of freedom at significance `level` (e.g. 0.05).
pub fn chi_square_critical_value(dof: f64, level: f64) -> f64 {
    ChiSquared::new(dof)
        .expect("positive degrees of freedom")
        .inverse_cdf(1.0 - level)
}

/// Survival function `P(χ²_dof > stat)`.
pub fn chi_square_p_value(stat: f64, dof: f64) -> f64 {
    1.0 - ChiSquared::new(dof).expect("positive degrees of freedom").cdf(stat)
}

/// Edges of `k` bins with equal probability under `N(mean, sd²)`; the
/// outer edges are `±∞`.
pub fn normal_equiprobable_edges(mean: f64, sd: f64, k: usize) -> Vec<f64> {
    assert!(k >= 2 && sd > 0.0);
    let dist = Normal::new(mean, sd).expect("valid normal");
    let mut edges = Vec::with_capacity(k + 1);
    edges.push(f64::NEG_INFINITY);
    for i in 1..k {
        edges.push(dist.inverse_cdf(i as f64 / k as f64));
    }
    edges.push(f64::INFINITY);
    edges
}

/// Counts per half-open bin `[e_i, e_{i+1})`; the last bin is closed.
/// Values outside the edges are not counted.
pub fn bin_counts(sample: &[f64], edges: &[f64]) -> Vec<u64> {
    let k = edges.len() - 1;
    let mut counts = vec![0u64; k];
    for &x in sample {
        if x.is_nan() || x < edges[0] || x > edges[k] {
            continue;
        }
        let idx = edges.partition_point(|e| *e <= x).saturating_sub(1).min(k - 1);
        counts[idx] += 1;
    }
    counts
}

/// Expected counts `n (F(e_{i+1}) - F(e_i))` for a reference CDF `F`.
pub fn expected_counts(edges: &[f64], n: u64, cdf: impl Fn(f64) -> f64) -> Vec<f64> {
    edges
        .windows(2)
        .map(|w| n as f64 * (cdf(w[1]) - cdf(w[0])))
        .collect()
}

/// Reference distribution of a goodness-of-fit test.
#[derive(Debug, Clone)]
pub enum Reference {
    /// Gaussian with the sample's own mean and standard deviation.
    FittedNormal,
    /// Empirical distribution of a (typically large) model sample.
    Empirical(Ecdf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GofResult {
    pub bins: BinnedCounts<f64>,
    pub statistic: f64,
    pub dof: usize,
    pub critical_95: f64,
}

/// Chi-square test of `sample` against `reference` on `k` bins that are
/// equiprobable under the normal fitted to `sample`. Using the same bins
/// for every reference makes statistics comparable.
pub fn chi_square_gof(sample: &[f64], reference: &Reference, k: usize) -> Result<GofResult, AnalyticsError> {
    let m = moment_report(sample)?;
    let sd = m.variance.sqrt();
    if !(sd > 0.0) {
        return Err(AnalyticsError::InvalidBins("sample has zero variance".into()));
    }
    let edges = normal_equiprobable_edges(m.mean, sd, k);
    let observed = bin_counts(sample, &edges);
    let n = sample.len() as u64;
    let expected = match reference {
        Reference::FittedNormal => {
            let dist = Normal::new(m.mean, sd).expect("valid normal");
            expected_counts(&edges, n, |x| dist.cdf(x))
        }
        Reference::Empirical(ecdf) => expected_counts(&edges, n, |x| ecdf.eval(x)),
    };
    let bins = BinnedCounts::new(edges, observed, expected)?;
    let statistic = chi_square(&bins)?;
    let dof = k - 1;
    Ok(GofResult {
        bins,
        statistic,
        dof,
        critical_95: chi_square_critical_value(dof as f64, 0.05),
    })
}

/// Normalization of the root-mean-square pricing error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalizer {
    /// `max(market) - min(market)`
    #[default]
    Range,
    /// `max(market)`
    Max,
}

/// Simulated and market prices aligned by strike.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuoteComparison<T> {
    pub strikes: Vec<T>,
    pub simulated: Vec<T>,
    pub market: Vec<T>,
}

impl<T: Scalar> QuoteComparison<T> {
    pub fn new(strikes: Vec<T>, simulated: Vec<T>, market: Vec<T>) -> Result<Self, AnalyticsError> {
        if strikes.is_empty() || strikes.len() != simulated.len() || strikes.len() != market.len() {
            return Err(AnalyticsError::InvalidQuotes(format!(
                "lengths {} / {} / {}",
                strikes.len(),
                simulated.len(),
                market.len()
            )));
        }
        if market.iter().any(|m| !(*m >= T::zero())) {
            return Err(AnalyticsError::InvalidQuotes("market prices must be non-negative".into()));
        }
        Ok(Self {
            strikes,
            simulated,
            market,
        })
    }

    pub fn len(&self) -> usize {
        self.strikes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strikes.is_empty()
    }
}

/// `sqrt(mean((sim - mkt)^2)) / normalizer(mkt)`.
pub fn nrmse<T: Scalar>(q: &QuoteComparison<T>, normalizer: Normalizer) -> Result<T, AnalyticsError> {
    let n = T::lit(q.len() as f64);
    let sse = q
        .simulated
        .iter()
        .zip(&q.market)
        .fold(T::zero(), |a, (s, m)| a + (*s - *m) * (*s - *m));
    let rmse = (sse / n).sqrt();
    let hi = q.market.iter().fold(T::neg_infinity(), |a, m| a.max(*m));
    let lo = q.market.iter().fold(T::infinity(), |a, m| a.min(*m));
    let scale = match normalizer {
        Normalizer::Range => hi - lo,
        Normalizer::Max => hi,
    };
    if !(scale > T::zero()) {
        return Err(AnalyticsError::DegenerateRange);
    }
    Ok(rmse / scale)
}

/// Right-continuous empirical distribution function.
#[derive(Debug, Clone, PartialEq)]
pub struct Ecdf {
    sorted: Vec<f64>,
}

impl Ecdf {
    /// NaNs are dropped.
    pub fn new(sample: &[f64]) -> Self {
        let mut sorted: Vec<f64> = sample.iter().copied().filter(|x| !x.is_nan()).collect();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("no NaN"));
        Self { sorted }
    }

    /// Fraction of the sample `<= x`.
    pub fn eval(&self, x: f64) -> f64 {
        if self.sorted.is_empty() {
            return 0.0;
        }
        self.sorted.partition_point(|v| *v <= x) as f64 / self.sorted.len() as f64
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    /// Jump points with the ECDF value reached at each, one row per distinct
    /// value.
    pub fn steps(&self) -> Vec<(f64, f64)> {
        let n = self.sorted.len() as f64;
        let mut out: Vec<(f64, f64)> = Vec::new();
        for (i, x) in self.sorted.iter().enumerate() {
            let f = (i + 1) as f64 / n;
            match out.last_mut() {
                Some(last) if last.0 == *x => last.1 = f,
                _ => out.push((*x, f)),
            }
        }
        out
    }
}

/// Histogram normalized to a probability density over its edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub densities: Vec<f64>,
}

/// Empirical CDF and histogram of `sample`.
///
/// Without explicit edges, `ceil(log2 n) + 1` equal-width bins span the
/// sample range (a unit-width bin centred on the value for a constant
/// sample). Densities are normalized by the number of values falling inside
/// the edges, so they integrate to one.
pub fn ecdf_epdf(sample: &[f64], edges: Option<&[f64]>) -> Result<(Ecdf, Histogram), AnalyticsError> {
    let ecdf = Ecdf::new(sample);
    if ecdf.is_empty() {
        return Err(AnalyticsError::TooFewSamples { need: 1, got: 0 });
    }
    let edges: Vec<f64> = match edges {
        Some(e) => {
            if e.len() < 2 || e.windows(2).any(|w| !(w[0] < w[1])) || e.iter().any(|x| !x.is_finite()) {
                return Err(AnalyticsError::InvalidBins(
                    "histogram edges must be finite and strictly increasing".into(),
                ));
            }
            e.to_vec()
        }
        None => {
            let lo = ecdf.sorted[0];
            let hi = ecdf.sorted[ecdf.len() - 1];
            if lo == hi {
                vec![lo - 0.5, lo + 0.5]
            } else {
                let k = ((ecdf.len() as f64).log2().ceil() as usize + 1).max(1);
                let w = (hi - lo) / k as f64;
                let mut e: Vec<f64> = (0..k).map(|i| lo + i as f64 * w).collect();
                e.push(hi);
                e
            }
        }
    };
    let counts = bin_counts(&ecdf.sorted, &edges);
    let inside: u64 = counts.iter().sum();
    let densities = counts
        .iter()
        .zip(edges.windows(2))
        .map(|(c, w)| {
            if inside == 0 {
                0.0
            } else {
                *c as f64 / (inside as f64 * (w[1] - w[0]))
            }
        })
        .collect();
    Ok((
        ecdf,
        Histogram {
            edges,
            counts,
            densities,
        },
    ))
}

/// Fraction of the sample farther than `k` sample standard deviations from
/// the sample mean.
pub fn tail_fraction(sample: &[f64], k: f64) -> Result<f64, AnalyticsError> {
    let m = moment_report(sample)?;
    let sd = m.variance.sqrt();
    let count = sample.iter().filter(|x| (**x - m.mean).abs() > k * sd).count();
    Ok(count as f64 / sample.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_computed_statistics() {
        let b = BinnedCounts::new(vec![0.0, 1.0, 2.0], vec![5, 5], vec![5.0, 5.0]).unwrap();
        assert_eq!(chi_square(&b).unwrap(), 0.0);
        let b = BinnedCounts::new(vec![0.0, 1.0, 2.0], vec![10, 0], vec![5.0, 5.0]).unwrap();
        assert_eq!(chi_square(&b).unwrap(), 10.0);
    }

    #[test]
    fn empty_bins_are_rejected() {
        let b = BinnedCounts {
            edges: vec![0.0, 1.0, 2.0],
            observed: vec![3, 1],
            expected: vec![4.0, 0.0],
        };
        assert_eq!(chi_square(&b), Err(AnalyticsError::EmptyBins(1)));
        assert!(BinnedCounts::new(vec![0.0, 0.0, 1.0], vec![1, 1], vec![1.0, 1.0]).is_err());
        assert!(BinnedCounts::new(vec![0.0, 1.0], vec![1, 1], vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn critical_value_for_nineteen_dof() {
        assert!((chi_square_critical_value(19.0, 0.05) - 30.1435).abs() < 1e-3);
        assert!((chi_square_p_value(30.1435, 19.0) - 0.05).abs() < 1e-5);
    }

    #[test]
    fn nrmse_hand_cases() {
        let q = QuoteComparison::new(vec![1.0, 2.0], vec![1.0, 3.0], vec![0.0, 2.0]).unwrap();
        assert_eq!(nrmse(&q, Normalizer::Range).unwrap(), 0.5);
        assert_eq!(nrmse(&q, Normalizer::Max).unwrap(), 0.5);
        let same = QuoteComparison::new(vec![1.0, 2.0], vec![0.3, 0.1], vec![0.3, 0.1]).unwrap();
        assert_eq!(nrmse(&same, Normalizer::Range).unwrap(), 0.0);
        let flat = QuoteComparison::new(vec![1.0, 2.0], vec![0.3, 0.1], vec![0.2, 0.2]).unwrap();
        assert_eq!(nrmse(&flat, Normalizer::Range), Err(AnalyticsError::DegenerateRange));
        assert!(QuoteComparison::new(vec![1.0], vec![0.1, 0.2], vec![0.1]).is_err());
        assert!(QuoteComparison::new(vec![1.0], vec![0.1], vec![-0.1]).is_err());
    }

    #[test]
    fn constant_sample_has_undefined_shape_moments() {
        let m = moment_report(&[2.5f64; 10]).unwrap();
        assert_eq!(m.variance, 0.0);
        assert_eq!(m.skewness, None);
        assert_eq!(m.kurtosis, None);
        assert!(moment_report(&[1.0f64, 2.0, 3.0]).is_err());
    }

    #[test]
    fn moments_of_small_sample() {
        let m = moment_report(&[1.0f64, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(m.mean, 2.5);
        assert!((m.variance - 5.0 / 3.0).abs() < 1e-15);
        assert!(m.skewness.unwrap().abs() < 1e-15);
        // m4/n = (2*5.0625 + 2*0.0625)/4 = 2.5625; / (5/3)^2
        assert!((m.kurtosis.unwrap() - 2.5625 / (25.0 / 9.0)).abs() < 1e-14);
        let m32 = moment_report(&[1.0f32, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(m32.mean, 2.5f32);
    }

    #[test]
    fn ecdf_single_value_and_grid() {
        let (ecdf, hist) = ecdf_epdf(&[5.0], None).unwrap();
        assert_eq!(ecdf.eval(4.999), 0.0);
        assert_eq!(ecdf.eval(5.0), 1.0);
        assert_eq!(hist.densities, vec![1.0]);

        let n = 20;
        let sample: Vec<f64> = (1..=n).map(|k| k as f64 / n as f64).collect();
        let (ecdf, hist) = ecdf_epdf(&sample, None).unwrap();
        for k in 1..=n {
            assert_eq!(ecdf.eval(k as f64 / n as f64), k as f64 / n as f64);
        }
        assert_eq!(ecdf.eval(0.0), 0.0);
        let area: f64 = hist
            .densities
            .iter()
            .zip(hist.edges.windows(2))
            .map(|(d, w)| d * (w[1] - w[0]))
            .sum();
        assert!((area - 1.0).abs() < 1e-12);
    }

    #[test]
    fn explicit_edges_are_validated() {
        assert!(ecdf_epdf(&[1.0], Some(&[1.0, 0.0])).is_err());
        assert!(ecdf_epdf(&[], None).is_err());
        let (_, h) = ecdf_epdf(&[0.5, 1.5, 9.0], Some(&[0.0, 1.0, 2.0])).unwrap();
        assert_eq!(h.counts, vec![1, 1]);
        assert_eq!(h.densities, vec![0.5, 0.5]);
    }

    #[test]
    fn ecdf_steps_merge_ties() {
        let e = Ecdf::new(&[1.0, 2.0, 2.0, 3.0]);
        assert_eq!(e.steps(), vec![(1.0, 0.25), (2.0, 0.75), (3.0, 1.0)]);
    }

    #[test]
    fn bin_counts_edges() {
        let edges = [0.0, 1.0, 2.0];
        assert_eq!(bin_counts(&[0.0, 0.99, 1.0, 2.0, -1.0, 3.0], &edges), vec![2, 2]);
        let inf = [f64::NEG_INFINITY, 0.0, f64::INFINITY];
        assert_eq!(bin_counts(&[-5.0, 0.0, 7.0], &inf), vec![1, 2]);
    }
}
