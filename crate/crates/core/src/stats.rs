//! Small statistical toolkit used by the experiments: empirical survival
//! functions with binomial half-widths, two-sample KS, the exact sign
//! test, least squares and correlation.

use serde::Serialize;
use statrs::distribution::{Binomial, DiscreteCDF};

use crate::error::{invalid, Error, Result};

/// Empirical survival `P(X > t)` at fixed thresholds.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TailEstimate {
    pub thresholds: Vec<f64>,
    pub survival: Vec<f64>,
    pub trials: usize,
    /// `3 √(p̂(1 − p̂)/trials)` per threshold.
    pub half_width: Vec<f64>,
}

impl TailEstimate {
    /// Survival of `samples` at each threshold. Thresholds must be sorted
    /// ascending so that the survival column is non-increasing.
    pub fn from_samples(samples: &[f64], thresholds: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InsufficientData("no samples".into()));
        }
        if thresholds.windows(2).any(|w| !(w[0] <= w[1])) {
            return Err(invalid("thresholds must be sorted ascending"));
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let survival: Vec<f64> = thresholds
            .iter()
            .map(|&t| {
                let at_most = sorted.partition_point(|&x| x <= t);
                (n - at_most) as f64 / n as f64
            })
            .collect();
        let half_width = survival.iter().map(|&p| binomial_half_width(p, n)).collect();
        Ok(Self { thresholds: thresholds.to_vec(), survival, trials: n, half_width })
    }

    pub fn is_monotone(&self) -> bool {
        self.survival.windows(2).all(|w| w[1] <= w[0])
    }
}

/// `3 √(p(1 − p)/n)`.
pub fn binomial_half_width(p: f64, n: usize) -> f64 {
    3.0 * (p * (1.0 - p) / n as f64).sqrt()
}

/// Two-sided two-sample Kolmogorov–Smirnov test (asymptotic p-value).
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InsufficientData("KS test needs two nonempty samples".into()));
    }
    if a.iter().chain(b).any(|x| x.is_nan()) {
        return Err(invalid("KS test samples contain NaN"));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (m, n) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut statistic = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] == x {
            i += 1;
        }
        while j < b.len() && b[j] == x {
            j += 1;
        }
        statistic = statistic.max((i as f64 / m - j as f64 / n).abs());
    }
    let p_value = kolmogorov_sf(statistic * (m * n / (m + n)).sqrt());
    Ok(KsResult { statistic, p_value })
}

/// `P(K > x)` for the Kolmogorov distribution,
/// `2 Σ_{k>=1} (−1)^{k−1} e^{−2k²x²}`. Below `x = 0.2` the tail equals 1
/// to within `1e−9` and the alternating series converges too slowly to be
/// useful, so 1 is returned.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = (-2.0 * k * k * x * x).exp();
        sum += if k as u64 % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Exact two-sided binomial sign test of `P(X > 0) = 1/2`; zeros dropped.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SignTest {
    pub positive: u64,
    pub negative: u64,
    pub p_value: f64,
}

pub fn sign_test(values: &[f64]) -> Result<SignTest> {
    let positive = values.iter().filter(|&&v| v > 0.0).count() as u64;
    let negative = values.iter().filter(|&&v| v < 0.0).count() as u64;
    let n = positive + negative;
    if n == 0 {
        return Err(Error::InsufficientData("sign test needs nonzero values".into()));
    }
    let dist = Binomial::new(0.5, n).expect("valid binomial parameters");
    let k = positive.min(negative);
    let p_value = (2.0 * dist.cdf(k)).min(1.0);
    Ok(SignTest { positive, negative, p_value })
}

/// Mean and standard error of the mean.
pub fn mean_and_se(values: &[f64]) -> Option<(f64, f64)> {
    let n = values.len();
    if n < 2 {
        return None;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Some((mean, (var / n as f64).sqrt()))
}

/// Least-squares slope and intercept of `y` on `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Pearson correlation coefficient.
pub fn correlation(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// Median of a sample (mean of the two middle values for even sizes).
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}

/// Empirical quantile by the nearest-rank rule on the sorted sample.
pub fn quantile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() || !(0.0..=1.0).contains(&q) {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len());
    Some(v[rank - 1])
}
