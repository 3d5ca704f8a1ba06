//! Independent reference computations for the statistical tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{Continuous, Gamma};

/// Mean and covariance of the local-level path posterior by a dense
/// precision-matrix solve.
pub fn dense_local_level_posterior(
    y: &[f64],
    obs_var: &[f64],
    trans_var: &[f64],
    prior_mean: f64,
    prior_var: f64,
) -> (DVector<f64>, DMatrix<f64>) {
    let n = y.len();
    let mut precision = DMatrix::<f64>::zeros(n, n);
    let mut rhs = DVector::<f64>::zeros(n);
    precision[(0, 0)] += 1.0 / prior_var;
    rhs[0] += prior_mean / prior_var;
    for j in 0..n {
        precision[(j, j)] += 1.0 / obs_var[j];
        rhs[j] += y[j] / obs_var[j];
    }
    for j in 0..n - 1 {
        let w = 1.0 / trans_var[j];
        precision[(j, j)] += w;
        precision[(j + 1, j + 1)] += w;
        precision[(j, j + 1)] -= w;
        precision[(j + 1, j)] -= w;
    }
    let cov = precision.try_inverse().expect("posterior precision is invertible");
    let mean = &cov * rhs;
    (mean, cov)
}

/// Unnormalised log density of a degrees-of-freedom parameter, written out
/// term by term with library Gamma densities.
pub fn nu_log_density(nu: f64, weights: &[f64], prior_shape: f64, prior_rate: f64) -> f64 {
    let g = Gamma::new(nu / 2.0, nu / 2.0).unwrap();
    let prior = Gamma::new(prior_shape, prior_rate).unwrap();
    weights.iter().map(|w| g.ln_pdf(*w)).sum::<f64>() + prior.ln_pdf(nu)
}

/// Bin probabilities of a 1-D density on `(lo, hi)` by midpoint quadrature
/// with `sub` points per bin.
pub fn binned_probabilities<F: Fn(f64) -> f64>(
    ln_density: F,
    lo: f64,
    hi: f64,
    bins: usize,
    sub: usize,
) -> Vec<f64> {
    let width = (hi - lo) / (bins * sub) as f64;
    let logs: Vec<f64> = (0..bins * sub)
        .map(|i| ln_density(lo + (i as f64 + 0.5) * width))
        .collect();
    let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = weights.iter().sum();
    weights
        .chunks(sub)
        .map(|c| c.iter().sum::<f64>() / total)
        .collect()
}

pub fn histogram(samples: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    let mut counts = vec![0.0; bins];
    for s in samples {
        let b = (((s - lo) / (hi - lo)) * bins as f64).floor() as usize;
        counts[b.min(bins - 1)] += 1.0;
    }
    counts.iter().map(|c| c / samples.len() as f64).collect()
}

pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn var(v: &[f64]) -> f64 {
    let m = mean(v);
    v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
}

/// Standard error of a chain mean by non-overlapping batch means.
pub fn batch_mean_se(v: &[f64], batches: usize) -> f64 {
    let size = v.len() / batches;
    let means: Vec<f64> = v.chunks_exact(size).map(mean).collect();
    (var(&means) / means.len() as f64).sqrt()
}
