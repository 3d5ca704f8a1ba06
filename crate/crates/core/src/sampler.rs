//! Gibbs sampler for the robust state space model.
//!
//! One sweep updates, in order: the whole signal path (forward filtering,
//! backward sampling), the observation weights, `nu_eps`, `tau_eps`, the
//! transition weights, `nu_xi` and `tau_xi`.

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::model::{
    GammaPrior, LatentState, ParameterTraces, PosteriorDraws, Priors, ProbeSeries, TauXiShape,
    Truncation,
};
use crate::rng;

/// Lower bound applied to every variance entering the filter.
pub const VARIANCE_FLOOR: f64 = 1e-12;

const MAX_SLICE_SHRINKS: usize = 10_000;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitPolicy {
    /// `mu = Y`, unit weights, precisions `1 / var(Y)`, mid-interval
    /// degrees of freedom.
    #[default]
    DataDriven,
    Fixed(LatentState),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChainConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub init: InitPolicy,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            iterations: 75_000,
            burn_in: 25_000,
            thin: 50,
            seed: 0,
            init: InitPolicy::DataDriven,
        }
    }
}

impl ChainConfig {
    pub fn new(iterations: usize, burn_in: usize, thin: usize, seed: u64) -> Self {
        Self {
            iterations,
            burn_in,
            thin,
            seed,
            init: InitPolicy::DataDriven,
        }
    }

    /// Number of retained draws, `floor((iterations - burn_in) / thin)`.
    pub fn retained(&self) -> usize {
        if self.thin == 0 || self.burn_in >= self.iterations {
            return 0;
        }
        (self.iterations - self.burn_in) / self.thin
    }

    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.iterations {
            return Err(Error::contract(format!(
                "burn-in {} must be smaller than the iteration count {}",
                self.burn_in, self.iterations
            )));
        }
        if self.thin == 0 {
            return Err(Error::contract("thinning stride must be at least 1"));
        }
        if self.retained() < 1 {
            return Err(Error::contract(format!(
                "{} iterations with burn-in {} and stride {} retain no draws",
                self.iterations, self.burn_in, self.thin
            )));
        }
        Ok(())
    }
}

/// Exact draw from the Gaussian posterior of a local-level path.
///
/// `obs_var[j]` is the variance of `y[j]` around the signal, `trans_var[j]`
/// the variance of `mu[j + 1] - mu[j]`, and `mu[0] ~ N(prior_mean, prior_var)`.
/// Works for any `J >= 1`.
pub fn sample_local_level<R: Rng + ?Sized>(
    y: &[f64],
    obs_var: &[f64],
    trans_var: &[f64],
    prior_mean: f64,
    prior_var: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let n = y.len();
    if n == 0 || obs_var.len() != n || trans_var.len() + 1 != n {
        return Err(Error::contract(format!(
            "smoother inputs have inconsistent lengths: y {}, obs {}, transitions {}",
            n,
            obs_var.len(),
            trans_var.len()
        )));
    }

    let mut filt_mean = vec![0.0; n];
    let mut filt_var = vec![0.0; n];
    let (mut pred_mean, mut pred_var) = (prior_mean, prior_var.max(VARIANCE_FLOOR));
    for j in 0..n {
        if j > 0 {
            pred_mean = filt_mean[j - 1];
            pred_var = filt_var[j - 1] + trans_var[j - 1].max(VARIANCE_FLOOR);
        }
        let h = obs_var[j].max(VARIANCE_FLOOR);
        let total = pred_var + h;
        let gain = pred_var / total;
        let mean = pred_mean + gain * (y[j] - pred_mean);
        let var = gain * h;
        if !(mean.is_finite() && var.is_finite() && var > 0.0) {
            return Err(Error::numerical(
                j,
                format!("filter produced mean {mean}, variance {var}"),
            ));
        }
        filt_mean[j] = mean;
        filt_var[j] = var;
    }

    let mut mu = vec![0.0; n];
    let z: f64 = rng.sample(StandardNormal);
    mu[n - 1] = filt_mean[n - 1] + filt_var[n - 1].sqrt() * z;
    for j in (0..n - 1).rev() {
        let c = filt_var[j];
        let q = trans_var[j].max(VARIANCE_FLOOR);
        let total = c + q;
        let mean = filt_mean[j] + (c / total) * (mu[j + 1] - filt_mean[j]);
        let var = c * (q / total);
        if !(mean.is_finite() && var.is_finite() && var >= 0.0) {
            return Err(Error::numerical(
                j,
                format!("backward pass produced mean {mean}, variance {var}"),
            ));
        }
        let z: f64 = rng.sample(StandardNormal);
        mu[j] = mean + var.sqrt() * z;
    }
    Ok(mu)
}

/// Draws the signal path given data and all variance parameters.
pub fn draw_signal<R: Rng + ?Sized>(
    series: &ProbeSeries,
    state: &LatentState,
    priors: &Priors,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let obs = state.observation_variances();
    let trans = state.transition_variances(&series.gaps());
    sample_local_level(
        series.values(),
        &obs,
        &trans,
        priors.mu1_mean_for(series),
        priors.mu1_variance,
        rng,
    )
}

/// Gamma draw parameterised by shape and rate.
fn gamma_draw<R: Rng + ?Sized>(shape: f64, rate: f64, index: usize, rng: &mut R) -> Result<f64> {
    let dist = Gamma::new(shape, 1.0 / rate).map_err(|e| {
        Error::numerical(index, format!("Gamma({shape}, rate {rate}) rejected: {e}"))
    })?;
    // Shapes below one can underflow to exactly zero.
    Ok(dist.sample(rng).max(f64::MIN_POSITIVE))
}

/// Observation weights: `Gamma(nu/2 + 1/2, nu/2 + (Y_j - mu_j)^2 tau_eps / 2)`.
pub fn update_lambda_eps<R: Rng + ?Sized>(
    series: &ProbeSeries,
    state: &LatentState,
    _priors: &Priors,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let half = state.nu_eps / 2.0;
    series
        .values()
        .iter()
        .zip(&state.mu)
        .enumerate()
        .map(|(j, (y, m))| {
            let r = y - m;
            gamma_draw(half + 0.5, half + r * r * state.tau_eps / 2.0, j, rng)
        })
        .collect()
}

/// Transition weights:
/// `Gamma(nu/2 + 1/2, nu/2 + (mu_{j+1} - mu_j)^2 tau_xi / (2 delta_j))`.
pub fn update_lambda_xi<R: Rng + ?Sized>(
    state: &LatentState,
    gaps: &[f64],
    _priors: &Priors,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if gaps.len() + 1 != state.mu.len() {
        return Err(Error::contract(format!(
            "{} gaps for {} signal values",
            gaps.len(),
            state.mu.len()
        )));
    }
    let half = state.nu_xi / 2.0;
    state
        .mu
        .windows(2)
        .zip(gaps)
        .enumerate()
        .map(|(j, (w, d))| {
            let diff = w[1] - w[0];
            gamma_draw(
                half + 0.5,
                half + diff * diff * state.tau_xi / (2.0 * d),
                j,
                rng,
            )
        })
        .collect()
}

/// `Gamma(J/2 + a, sum_j (Y_j - mu_j)^2 lambda_eps_j / 2 + b)`.
pub fn update_tau_eps<R: Rng + ?Sized>(
    series: &ProbeSeries,
    state: &LatentState,
    priors: &Priors,
    rng: &mut R,
) -> Result<f64> {
    let weighted: f64 = series
        .values()
        .iter()
        .zip(&state.mu)
        .zip(&state.lambda_eps)
        .map(|((y, m), l)| (y - m).powi(2) * l)
        .sum();
    let shape = series.len() as f64 / 2.0 + priors.tau_eps.shape;
    gamma_draw(shape, weighted / 2.0 + priors.tau_eps.rate, 0, rng)
}

/// `Gamma(K/2 + a, sum_j (mu_{j+1} - mu_j)^2 lambda_xi_j / (2 delta_j) + b)`
/// where `K` is `J - 1` or `J` depending on [`TauXiShape`].
pub fn update_tau_xi<R: Rng + ?Sized>(
    state: &LatentState,
    gaps: &[f64],
    priors: &Priors,
    rng: &mut R,
) -> Result<f64> {
    if gaps.len() + 1 != state.mu.len() {
        return Err(Error::contract(format!(
            "{} gaps for {} signal values",
            gaps.len(),
            state.mu.len()
        )));
    }
    let weighted: f64 = state
        .mu
        .windows(2)
        .zip(gaps)
        .zip(&state.lambda_xi)
        .map(|((w, d), l)| (w[1] - w[0]).powi(2) * l / (2.0 * d))
        .sum();
    let count = match priors.tau_xi_shape {
        TauXiShape::Conjugate => gaps.len(),
        TauXiShape::JOverTwo => state.mu.len(),
    };
    let shape = count as f64 / 2.0 + priors.tau_xi.shape;
    gamma_draw(shape, weighted + priors.tau_xi.rate, 0, rng)
}

/// Unnormalised log full conditional of a degrees-of-freedom parameter:
/// `prod_j Gamma(lambda_j | nu/2, nu/2) * Gamma(nu | a, b)` on the truncation.
///
/// Depends on the weights only through their count, sum and sum of logs.
#[derive(Clone, Copy, Debug)]
pub struct NuTarget {
    count: f64,
    sum: f64,
    sum_ln: f64,
    prior: GammaPrior,
    range: Truncation,
}

impl NuTarget {
    pub fn new(weights: &[f64], prior: GammaPrior, range: Truncation) -> Result<Self> {
        if let Some(j) = weights.iter().position(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::contract(format!(
                "weight {j} = {} must be positive",
                weights[j]
            )));
        }
        Ok(Self {
            count: weights.len() as f64,
            sum: weights.iter().sum(),
            sum_ln: weights.iter().map(|w| w.ln()).sum(),
            prior,
            range,
        })
    }

    pub fn ln_density(&self, nu: f64) -> f64 {
        if !self.range.contains(nu) {
            return f64::NEG_INFINITY;
        }
        let h = nu / 2.0;
        self.count * (h * h.ln() - ln_gamma(h)) + (h - 1.0) * self.sum_ln - h * self.sum
            + (self.prior.shape - 1.0) * nu.ln()
            - self.prior.rate * nu
    }
}

/// One slice-sampling transition for a truncated degrees-of-freedom
/// parameter. The initial bracket is the whole truncation interval, so no
/// step-size tuning is needed; shrinkage always terminates near `current`.
pub fn sample_nu<R: Rng + ?Sized>(
    current: f64,
    weights: &[f64],
    range: Truncation,
    prior: GammaPrior,
    rng: &mut R,
) -> Result<f64> {
    if !range.contains(current) {
        return Err(Error::contract(format!(
            "current value {current} outside ({}, {})",
            range.lower, range.upper
        )));
    }
    let target = NuTarget::new(weights, prior, range)?;
    slice_step(current, |x| target.ln_density(x), range, rng)
}

fn slice_step<R, F>(current: f64, ln_f: F, range: Truncation, rng: &mut R) -> Result<f64>
where
    R: Rng + ?Sized,
    F: Fn(f64) -> f64,
{
    let f0 = ln_f(current);
    if !f0.is_finite() {
        return Err(Error::numerical(
            0,
            format!("log target is {f0} at the current value {current}"),
        ));
    }
    let u: f64 = rng.random();
    let level = f0 + u.ln();
    let (mut lo, mut hi) = (range.lower, range.upper);
    for _ in 0..MAX_SLICE_SHRINKS {
        let x = lo + rng.random::<f64>() * (hi - lo);
        if !range.contains(x) {
            continue;
        }
        if ln_f(x) > level {
            return Ok(x);
        }
        if x < current {
            lo = x;
        } else {
            hi = x;
        }
    }
    Err(Error::numerical(
        0,
        format!("slice sampler failed to accept after {MAX_SLICE_SHRINKS} shrinks"),
    ))
}

/// Runs one full Gibbs sweep in place.
pub fn sweep<R: Rng + ?Sized>(
    series: &ProbeSeries,
    gaps: &[f64],
    state: &mut LatentState,
    priors: &Priors,
    rng: &mut R,
) -> Result<()> {
    state.mu = draw_signal(series, state, priors, rng)?;

    state.lambda_eps = update_lambda_eps(series, state, priors, rng)?;
    state.nu_eps = sample_nu(
        state.nu_eps,
        &state.lambda_eps,
        priors.nu_eps_range,
        priors.nu_eps,
        rng,
    )?;
    state.tau_eps = update_tau_eps(series, state, priors, rng)?;

    state.lambda_xi = update_lambda_xi(state, gaps, priors, rng)?;
    state.nu_xi = sample_nu(
        state.nu_xi,
        &state.lambda_xi,
        priors.nu_xi_range,
        priors.nu_xi,
        rng,
    )?;
    state.tau_xi = update_tau_xi(state, gaps, priors, rng)?;
    Ok(())
}

/// Runs a single chain and keeps every `thin`-th post-burn-in state.
///
/// Output is a pure function of `(series, priors, config)`.
pub fn run_chain(
    series: &ProbeSeries,
    priors: &Priors,
    config: &ChainConfig,
) -> Result<PosteriorDraws> {
    priors.validate()?;
    config.validate()?;
    let mut state = match &config.init {
        InitPolicy::DataDriven => LatentState::initial(series, priors),
        InitPolicy::Fixed(s) => s.clone(),
    };
    state.validate(series, priors)?;

    let gaps = series.gaps();
    let m = config.retained();
    let j = series.len();
    let mut mu_draws = Array2::zeros((m, j));
    let mut traces = ParameterTraces::with_capacity(m);
    let mut rng = rng::seeded(config.seed);

    let mut kept = 0;
    for iteration in 1..=config.iterations {
        sweep(series, &gaps, &mut state, priors, &mut rng).map_err(|e| Error::AtIteration {
            iteration,
            source: Box::new(e),
        })?;
        if iteration > config.burn_in && (iteration - config.burn_in) % config.thin == 0 {
            mu_draws
                .row_mut(kept)
                .assign(&ndarray::ArrayView1::from(&state.mu));
            traces.push(&state);
            kept += 1;
        }
    }
    debug_assert_eq!(kept, m);
    PosteriorDraws::from_signal_draws(series, mu_draws, traces)
}
