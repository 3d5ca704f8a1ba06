//! Domain types for the robust state space model and the deterministic
//! quantities derived from them.
//!
//! Observation equation: `Y_j = mu_j + eps_j`, with
//! `eps_j ~ N(0, 1 / (lambda_eps_j * tau_eps))` and
//! `lambda_eps_j ~ Gamma(nu_eps / 2, nu_eps / 2)`, i.e. Student-t errors
//! written as a scale mixture of normals.
//!
//! State equation: `mu_{j+1} = mu_j + xi_j`, with
//! `xi_j ~ N(0, delta_j / (lambda_xi_j * tau_xi))`,
//! `delta_j = t_{j+1} - t_j` and `lambda_xi_j ~ Gamma(nu_xi / 2, nu_xi / 2)`.
//!
//! Difference index convention: `xi[j] = mu[j + 1] - mu[j]` (0-based), so a
//! call at difference position `j` lies between probes `j` and `j + 1`.

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::stats;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Ordered probe positions and log2 ratios for one chromosome.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeSeries {
    positions: Vec<f64>,
    values: Vec<f64>,
}

impl ProbeSeries {
    pub fn new(positions: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if positions.len() != values.len() {
            return Err(Error::contract(format!(
                "{} positions but {} values",
                positions.len(),
                values.len()
            )));
        }
        if values.len() < 2 {
            return Err(Error::contract(format!(
                "a series needs at least 2 probes, got {}",
                values.len()
            )));
        }
        if let Some(j) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::contract(format!("value at probe {j} is not finite")));
        }
        if let Some(j) = positions.iter().position(|t| !t.is_finite()) {
            return Err(Error::contract(format!("position at probe {j} is not finite")));
        }
        if let Some(j) = positions.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::contract(format!(
                "positions must be strictly increasing: t[{}] = {} follows t[{}] = {}",
                j + 1,
                positions[j + 1],
                j,
                positions[j]
            )));
        }
        Ok(Self { positions, values })
    }

    /// Series with unit-gap positions `1, 2, ..., J`.
    pub fn with_unit_gaps(values: Vec<f64>) -> Result<Self> {
        let positions = (1..=values.len()).map(|t| t as f64).collect();
        Self::new(positions, values)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Physical distances `delta_j = t_{j+1} - t_j`, length `J - 1`.
    pub fn gaps(&self) -> Vec<f64> {
        self.positions.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

/// A `Gamma(shape, rate)` prior.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaPrior {
    pub shape: f64,
    pub rate: f64,
}

impl GammaPrior {
    pub const VAGUE: GammaPrior = GammaPrior {
        shape: 1e-3,
        rate: 1e-3,
    };

    pub fn ln_pdf(&self, x: f64) -> f64 {
        gamma_ln_pdf(x, self.shape, self.rate)
    }
}

/// Open interval restricting a degrees-of-freedom parameter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    pub lower: f64,
    pub upper: f64,
}

impl Truncation {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        let t = Self { lower, upper };
        t.validate("truncation")?;
        Ok(t)
    }

    pub fn contains(&self, x: f64) -> bool {
        x > self.lower && x < self.upper
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lower + self.upper)
    }

    fn validate(&self, name: &str) -> Result<()> {
        if !(self.lower.is_finite() && self.upper.is_finite() && self.lower < self.upper) {
            return Err(Error::contract(format!(
                "{name} interval ({}, {}) is empty or not finite",
                self.lower, self.upper
            )));
        }
        Ok(())
    }
}

/// Shape of the `tau_xi` full conditional.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TauXiShape {
    /// `(J - 1) / 2 + a`: one half per signal difference.
    #[default]
    Conjugate,
    /// `J / 2 + a`, as printed in the original description of the sampler.
    JOverTwo,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Priors {
    pub tau_eps: GammaPrior,
    pub tau_xi: GammaPrior,
    pub nu_eps: GammaPrior,
    pub nu_xi: GammaPrior,
    pub nu_eps_range: Truncation,
    pub nu_xi_range: Truncation,
    /// Prior mean of `mu_1`; `None` centres it on the first observation.
    pub mu1_mean: Option<f64>,
    pub mu1_variance: f64,
    pub tau_xi_shape: TauXiShape,
}

impl Default for Priors {
    fn default() -> Self {
        Self {
            tau_eps: GammaPrior::VAGUE,
            tau_xi: GammaPrior::VAGUE,
            nu_eps: GammaPrior::VAGUE,
            nu_xi: GammaPrior::VAGUE,
            nu_eps_range: Truncation {
                lower: 2.0,
                upper: 10.0,
            },
            nu_xi_range: Truncation {
                lower: 0.01,
                upper: 2.0,
            },
            mu1_mean: None,
            mu1_variance: 1e7,
            tau_xi_shape: TauXiShape::Conjugate,
        }
    }
}

impl Priors {
    pub fn validate(&self) -> Result<()> {
        for (name, g) in [
            ("tau_eps", self.tau_eps),
            ("tau_xi", self.tau_xi),
            ("nu_eps", self.nu_eps),
            ("nu_xi", self.nu_xi),
        ] {
            if !(g.shape > 0.0 && g.rate > 0.0 && g.shape.is_finite() && g.rate.is_finite()) {
                return Err(Error::contract(format!(
                    "{name} prior needs positive finite shape and rate, got ({}, {})",
                    g.shape, g.rate
                )));
            }
        }
        self.nu_eps_range.validate("nu_eps")?;
        self.nu_xi_range.validate("nu_xi")?;
        if !(self.mu1_variance > 0.0 && self.mu1_variance.is_finite()) {
            return Err(Error::contract("mu_1 prior variance must be positive"));
        }
        if let Some(m) = self.mu1_mean {
            if !m.is_finite() {
                return Err(Error::contract("mu_1 prior mean must be finite"));
            }
        }
        Ok(())
    }

    pub fn mu1_mean_for(&self, series: &ProbeSeries) -> f64 {
        self.mu1_mean.unwrap_or(series.values()[0])
    }
}

/// One complete MCMC state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatentState {
    pub mu: Vec<f64>,
    pub lambda_eps: Vec<f64>,
    pub lambda_xi: Vec<f64>,
    pub tau_eps: f64,
    pub tau_xi: f64,
    pub nu_eps: f64,
    pub nu_xi: f64,
}

impl LatentState {
    /// Default starting point: `mu = Y`, unit weights, both precisions at
    /// `1 / var(Y)` and degrees of freedom at their interval midpoints.
    pub fn initial(series: &ProbeSeries, priors: &Priors) -> Self {
        let j = series.len();
        let var = stats::variance(series.values());
        let tau = if var > 0.0 && var.is_finite() { 1.0 / var } else { 1.0 };
        Self {
            mu: series.values().to_vec(),
            lambda_eps: vec![1.0; j],
            lambda_xi: vec![1.0; j - 1],
            tau_eps: tau,
            tau_xi: tau,
            nu_eps: priors.nu_eps_range.midpoint(),
            nu_xi: priors.nu_xi_range.midpoint(),
        }
    }

    pub fn validate(&self, series: &ProbeSeries, priors: &Priors) -> Result<()> {
        let j = series.len();
        if self.mu.len() != j || self.lambda_eps.len() != j || self.lambda_xi.len() + 1 != j {
            return Err(Error::contract(format!(
                "state dimensions (mu {}, lambda_eps {}, lambda_xi {}) do not fit J = {j}",
                self.mu.len(),
                self.lambda_eps.len(),
                self.lambda_xi.len()
            )));
        }
        if let Some(i) = self.mu.iter().position(|m| !m.is_finite()) {
            return Err(Error::contract(format!("mu[{i}] is not finite")));
        }
        for (name, w) in [("lambda_eps", &self.lambda_eps), ("lambda_xi", &self.lambda_xi)] {
            if let Some(i) = w.iter().position(|l| !(*l > 0.0 && l.is_finite())) {
                return Err(Error::contract(format!(
                    "{name}[{i}] = {} must be positive and finite",
                    w[i]
                )));
            }
        }
        for (name, t) in [("tau_eps", self.tau_eps), ("tau_xi", self.tau_xi)] {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::contract(format!("{name} = {t} must be positive")));
            }
        }
        if !priors.nu_eps_range.contains(self.nu_eps) {
            return Err(Error::contract(format!(
                "nu_eps = {} outside its truncation",
                self.nu_eps
            )));
        }
        if !priors.nu_xi_range.contains(self.nu_xi) {
            return Err(Error::contract(format!(
                "nu_xi = {} outside its truncation",
                self.nu_xi
            )));
        }
        Ok(())
    }

    /// Per-probe observation variances `1 / (lambda_eps_j * tau_eps)`.
    pub fn observation_variances(&self) -> Vec<f64> {
        self.lambda_eps
            .iter()
            .map(|l| 1.0 / (l * self.tau_eps))
            .collect()
    }

    /// Per-transition state variances `delta_j / (lambda_xi_j * tau_xi)`.
    pub fn transition_variances(&self, gaps: &[f64]) -> Vec<f64> {
        self.lambda_xi
            .iter()
            .zip(gaps)
            .map(|(l, d)| d / (l * self.tau_xi))
            .collect()
    }
}

/// Scalar parameter traces, one entry per retained draw.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParameterTraces {
    pub tau_eps: Vec<f64>,
    pub tau_xi: Vec<f64>,
    pub nu_eps: Vec<f64>,
    pub nu_xi: Vec<f64>,
}

impl ParameterTraces {
    pub fn with_capacity(m: usize) -> Self {
        Self {
            tau_eps: Vec::with_capacity(m),
            tau_xi: Vec::with_capacity(m),
            nu_eps: Vec::with_capacity(m),
            nu_xi: Vec::with_capacity(m),
        }
    }

    pub fn push(&mut self, state: &LatentState) {
        self.tau_eps.push(state.tau_eps);
        self.tau_xi.push(state.tau_xi);
        self.nu_eps.push(state.nu_eps);
        self.nu_xi.push(state.nu_xi);
    }

    pub fn len(&self) -> usize {
        self.tau_eps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau_eps.is_empty()
    }
}

/// Retained posterior draws. Rows are draws; columns are probes
/// (`mu`, `eps`) or transitions (`xi`).
#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorDraws {
    pub mu: Array2<f64>,
    pub eps: Array2<f64>,
    pub xi: Array2<f64>,
    pub traces: ParameterTraces,
}

impl PosteriorDraws {
    /// Builds the error and difference matrices from signal draws.
    pub fn from_signal_draws(
        series: &ProbeSeries,
        mu: Array2<f64>,
        traces: ParameterTraces,
    ) -> Result<Self> {
        let (m, j) = mu.dim();
        if j != series.len() {
            return Err(Error::contract(format!(
                "signal draws have {j} columns for a series of {} probes",
                series.len()
            )));
        }
        if traces.len() != m {
            return Err(Error::contract(format!(
                "{} trace entries for {m} draws",
                traces.len()
            )));
        }
        let mut eps = Array2::zeros((m, j));
        let mut xi = Array2::zeros((m, j - 1));
        for (k, row) in mu.axis_iter(Axis(0)).enumerate() {
            let row = row.as_slice().expect("standard layout");
            let e = derive_errors(series, row)?;
            let d = derive_differences(row)?;
            eps.row_mut(k).assign(&ndarray::ArrayView1::from(&e));
            xi.row_mut(k).assign(&ndarray::ArrayView1::from(&d));
        }
        Ok(Self {
            mu,
            eps,
            xi,
            traces,
        })
    }

    pub fn draw_count(&self) -> usize {
        self.mu.nrows()
    }

    pub fn probe_count(&self) -> usize {
        self.mu.ncols()
    }

    /// Posterior mean of the signal at each probe.
    pub fn signal_mean(&self) -> Vec<f64> {
        self.mu
            .mean_axis(Axis(0))
            .expect("at least one draw")
            .to_vec()
    }
}

/// `eps = Y - mu`, elementwise.
pub fn derive_errors(series: &ProbeSeries, mu: &[f64]) -> Result<Vec<f64>> {
    if mu.len() != series.len() {
        return Err(Error::contract(format!(
            "signal length {} does not match series length {}",
            mu.len(),
            series.len()
        )));
    }
    Ok(series.values().iter().zip(mu).map(|(y, m)| y - m).collect())
}

/// First differences `mu[j + 1] - mu[j]`, length `J - 1`.
pub fn derive_differences(mu: &[f64]) -> Result<Vec<f64>> {
    if mu.len() < 2 {
        return Err(Error::contract(format!(
            "differences need at least 2 signal values, got {}",
            mu.len()
        )));
    }
    Ok(mu.windows(2).map(|w| w[1] - w[0]).collect())
}

pub(crate) fn gamma_ln_pdf(x: f64, shape: f64, rate: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x
}

fn normal_ln_pdf(x: f64, mean: f64, variance: f64) -> f64 {
    -0.5 * (LN_2PI + variance.ln()) - (x - mean).powi(2) / (2.0 * variance)
}

/// Log joint density of data and state.
///
/// Sums the observation and transition Gaussians, the `mu_1` prior, the
/// Gamma mixture-weight densities and the Gamma priors on precisions and
/// degrees of freedom. The truncated degrees-of-freedom priors are not
/// renormalised over their intervals.
pub fn log_joint(series: &ProbeSeries, state: &LatentState, priors: &Priors) -> Result<f64> {
    priors.validate()?;
    state.validate(series, priors)?;
    let gaps = series.gaps();
    let y = series.values();

    let mut total = normal_ln_pdf(state.mu[0], priors.mu1_mean_for(series), priors.mu1_variance);
    for (j, var) in state.observation_variances().into_iter().enumerate() {
        total += normal_ln_pdf(y[j], state.mu[j], var);
    }
    for (j, var) in state.transition_variances(&gaps).into_iter().enumerate() {
        total += normal_ln_pdf(state.mu[j + 1], state.mu[j], var);
    }
    let half_eps = state.nu_eps / 2.0;
    total += state
        .lambda_eps
        .iter()
        .map(|l| gamma_ln_pdf(*l, half_eps, half_eps))
        .sum::<f64>();
    let half_xi = state.nu_xi / 2.0;
    total += state
        .lambda_xi
        .iter()
        .map(|l| gamma_ln_pdf(*l, half_xi, half_xi))
        .sum::<f64>();
    total += priors.tau_eps.ln_pdf(state.tau_eps)
        + priors.tau_xi.ln_pdf(state.tau_xi)
        + priors.nu_eps.ln_pdf(state.nu_eps)
        + priors.nu_xi.ln_pdf(state.nu_xi);

    if !total.is_finite() {
        return Err(Error::numerical(0, format!("log joint evaluated to {total}")));
    }
    Ok(total)
}
