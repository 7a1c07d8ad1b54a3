//! Order-independent reductions and sample summaries.

use serde::Serialize;

/// Pairwise (cascade) summation; the association order depends only on the
/// length, so the result is identical however the inputs were produced.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 16 {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

/// Monte Carlo estimate: sample mean, its standard error and the count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

impl McEstimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        let mean = pairwise_sum(xs) / n as f64;
        let dev: Vec<f64> = xs.iter().map(|x| (x - mean).powi(2)).collect();
        let var = if n > 1 { pairwise_sum(&dev) / (n - 1) as f64 } else { 0.0 };
        Self { mean, stderr: (var / n as f64).sqrt(), n }
    }
}

/// Mean, unbiased variance and the standard errors of both.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Moments {
    pub mean: f64,
    pub var: f64,
    pub mean_stderr: f64,
    pub var_stderr: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
    pub n: usize,
}

impl Moments {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        let nf = n as f64;
        let mean = pairwise_sum(xs) / nf;
        let pow = |k: i32| pairwise_sum(&xs.iter().map(|x| (x - mean).powi(k)).collect::<Vec<_>>()) / nf;
        let (m2, m3, m4) = (pow(2), pow(3), pow(4));
        let var = m2 * nf / (nf - 1.0);
        Self {
            mean,
            var,
            mean_stderr: (var / nf).sqrt(),
            var_stderr: ((m4 - m2 * m2) / nf).max(0.0).sqrt(),
            skewness: m3 / m2.powf(1.5),
            excess_kurtosis: m4 / (m2 * m2) - 3.0,
            n,
        }
    }
}
