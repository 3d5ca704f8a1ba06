//! Statistical checks of the sampler against independent computations.

mod common;

use common::*;
use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal};
use rssm::model::{GammaPrior, LatentState, Priors, ProbeSeries, Truncation};
use rssm::rng::seeded;
use rssm::sampler::{
    run_chain, sample_local_level, sample_nu, sweep, update_lambda_eps, update_lambda_xi,
    update_tau_eps, update_tau_xi, ChainConfig,
};

fn heteroscedastic_case() -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let y = vec![0.3, -0.1, 0.8, 1.2, 0.9, 1.5, 0.4, 0.2, -0.6, 0.1];
    let obs = vec![0.5, 1.0, 2.0, 0.7, 1.4, 0.6, 1.8, 0.9, 1.1, 0.8];
    let trans = vec![0.05, 0.1, 0.02, 0.08, 0.04, 0.1, 0.06, 0.03, 0.07];
    (y, obs, trans)
}

#[test]
fn smoother_draws_match_dense_posterior() {
    let (y, obs, trans) = heteroscedastic_case();
    let (prior_mean, prior_var) = (0.0, 4.0);
    let (mean, cov) = dense_local_level_posterior(&y, &obs, &trans, prior_mean, prior_var);

    let n = 50_000;
    let mut rng = seeded(11);
    let draws: Vec<Vec<f64>> = (0..n)
        .map(|_| sample_local_level(&y, &obs, &trans, prior_mean, prior_var, &mut rng).unwrap())
        .collect();

    let j = y.len();
    let emp_mean: Vec<f64> = (0..j)
        .map(|k| draws.iter().map(|d| d[k]).sum::<f64>() / n as f64)
        .collect();
    for k in 0..j {
        let se = (cov[(k, k)] / n as f64).sqrt();
        assert!(
            (emp_mean[k] - mean[k]).abs() < 3.0 * se,
            "coordinate {k}: {} vs {}",
            emp_mean[k],
            mean[k]
        );
    }
    for a in 0..j {
        for b in a..j {
            let emp = draws
                .iter()
                .map(|d| (d[a] - emp_mean[a]) * (d[b] - emp_mean[b]))
                .sum::<f64>()
                / (n - 1) as f64;
            let rel = (emp - cov[(a, b)]).abs() / cov[(a, b)].abs();
            assert!(rel < 0.05, "cov[{a},{b}] {emp} vs {}", cov[(a, b)]);
        }
    }
}

fn assert_moments(draws: &[f64], shape: f64, rate: f64) {
    let (m, v) = (mean(draws), var(draws));
    let (em, ev) = (shape / rate, shape / (rate * rate));
    assert!((m / em - 1.0).abs() < 0.01, "mean {m} vs {em}");
    assert!((v / ev - 1.0).abs() < 0.01, "variance {v} vs {ev}");
}

#[test]
fn lambda_eps_moments() {
    // nu = 4, tau = 1, residual 2: Gamma(2.5, 4).
    let n = 100_000;
    let series = ProbeSeries::with_unit_gaps(vec![2.0; n]).unwrap();
    let priors = Priors::default();
    let mut state = LatentState::initial(&series, &priors);
    state.mu = vec![0.0; n];
    state.tau_eps = 1.0;
    state.nu_eps = 4.0;
    let draws = update_lambda_eps(&series, &state, &priors, &mut seeded(21)).unwrap();
    assert_moments(&draws, 2.5, 4.0);
}

#[test]
fn lambda_xi_moments() {
    // nu = 1, tau = 2, difference 0.5, unit gap: Gamma(1, 0.75).
    let n = 100_001;
    let series = ProbeSeries::with_unit_gaps(vec![0.0; n]).unwrap();
    let priors = Priors::default();
    let mut state = LatentState::initial(&series, &priors);
    state.mu = (0..n).map(|i| 0.5 * i as f64).collect();
    state.tau_xi = 2.0;
    state.nu_xi = 1.0;
    let draws = update_lambda_xi(&state, &series.gaps(), &priors, &mut seeded(22)).unwrap();
    assert_moments(&draws, 1.0, 0.75);
}

#[test]
fn tau_eps_moments() {
    // 100 unit residuals with unit weights: Gamma(50.001, 50.001).
    let series = ProbeSeries::with_unit_gaps(vec![1.0; 100]).unwrap();
    let priors = Priors::default();
    let mut state = LatentState::initial(&series, &priors);
    state.mu = vec![0.0; 100];
    let mut rng = seeded(23);
    let draws: Vec<f64> = (0..100_000)
        .map(|_| update_tau_eps(&series, &state, &priors, &mut rng).unwrap())
        .collect();
    assert_moments(&draws, 50.001, 50.001);
}

#[test]
fn tau_xi_moments() {
    // 100 probes, differences of 0.2, weights 2: rate 99 * 0.04 * 2 / 2 + b.
    let series = ProbeSeries::with_unit_gaps(vec![0.0; 100]).unwrap();
    let priors = Priors::default();
    let mut state = LatentState::initial(&series, &priors);
    state.mu = (0..100).map(|i| 0.2 * i as f64).collect();
    state.lambda_xi = vec![2.0; 99];
    let mut rng = seeded(24);
    let gaps = series.gaps();
    let draws: Vec<f64> = (0..100_000)
        .map(|_| update_tau_xi(&state, &gaps, &priors, &mut rng).unwrap())
        .collect();
    assert_moments(&draws, 49.5 + 1e-3, 99.0 * 0.04 + 1e-3);
}

fn nu_histogram(weights: &[f64], range: Truncation, steps: usize, seed: u64) -> Vec<f64> {
    let mut rng = seeded(seed);
    let mut nu = range.midpoint();
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        nu = sample_nu(nu, weights, range, GammaPrior::VAGUE, &mut rng).unwrap();
        assert!(range.contains(nu));
        out.push(nu);
    }
    out
}

const NU_BINS: usize = 100;

#[test]
fn nu_kernel_matches_quadrature_with_unit_weights() {
    let weights = vec![1.0; 50];
    let range = Truncation::new(2.0, 10.0).unwrap();
    let samples = nu_histogram(&weights, range, 200_000, 31);
    let target = binned_probabilities(
        |nu| nu_log_density(nu, &weights, 1e-3, 1e-3),
        2.0,
        10.0,
        NU_BINS,
        20,
    );
    let tv = total_variation(&histogram(&samples, 2.0, 10.0, NU_BINS), &target);
    assert!(tv < 0.02, "total variation {tv}");
}

fn five_dof_weights() -> Vec<f64> {
    let mut rng = seeded(32);
    let g = Gamma::new(2.5, 1.0 / 2.5).unwrap();
    (0..500).map(|_| g.sample(&mut rng)).collect()
}

#[test]
fn nu_kernel_matches_quadrature_on_500_weights() {
    let weights = five_dof_weights();
    let range = Truncation::new(2.0, 10.0).unwrap();
    let samples = nu_histogram(&weights, range, 200_000, 33);
    let target = binned_probabilities(
        |nu| nu_log_density(nu, &weights, 1e-3, 1e-3),
        2.0,
        10.0,
        NU_BINS,
        20,
    );
    let empirical = histogram(&samples, 2.0, 10.0, NU_BINS);
    let tv = total_variation(&empirical, &target);
    assert!(tv < 0.02, "total variation {tv}");

    let mode_bin = (0..NU_BINS)
        .max_by(|a, b| empirical[*a].total_cmp(&empirical[*b]))
        .unwrap();
    let mode = 2.0 + (mode_bin as f64 + 0.5) * 8.0 / NU_BINS as f64;
    assert!((mode - 5.0).abs() <= 1.0, "mode {mode}");
}

// Proper priors so the joint distribution can be simulated directly. The
// evolution degrees of freedom stay above 0.5: near 0.01 a Gamma(nu/2, nu/2)
// weight falls below 1e-300 a few percent of the time and the forward
// simulation leaves double range.
fn geweke_priors() -> Priors {
    Priors {
        tau_eps: GammaPrior { shape: 5.0, rate: 5.0 },
        tau_xi: GammaPrior { shape: 5.0, rate: 2.0 },
        nu_eps: GammaPrior { shape: 3.0, rate: 0.5 },
        nu_xi: GammaPrior { shape: 2.0, rate: 2.0 },
        mu1_mean: Some(0.0),
        mu1_variance: 1.0,
        nu_xi_range: Truncation::new(0.5, 2.0).unwrap(),
        ..Priors::default()
    }
}

fn truncated_gamma<R: Rng>(prior: GammaPrior, range: Truncation, rng: &mut R) -> f64 {
    let g = Gamma::new(prior.shape, 1.0 / prior.rate).unwrap();
    loop {
        let x = g.sample(rng);
        if range.contains(x) {
            return x;
        }
    }
}

fn gamma<R: Rng>(shape: f64, rate: f64, rng: &mut R) -> f64 {
    Gamma::new(shape, 1.0 / rate).unwrap().sample(rng)
}

fn draw_parameters<R: Rng>(j: usize, p: &Priors, rng: &mut R) -> LatentState {
    let nu_eps = truncated_gamma(p.nu_eps, p.nu_eps_range, rng);
    let nu_xi = truncated_gamma(p.nu_xi, p.nu_xi_range, rng);
    let tau_eps = gamma(p.tau_eps.shape, p.tau_eps.rate, rng);
    let tau_xi = gamma(p.tau_xi.shape, p.tau_xi.rate, rng);
    let lambda_eps = (0..j).map(|_| gamma(nu_eps / 2.0, nu_eps / 2.0, rng)).collect();
    let lambda_xi: Vec<f64> = (0..j - 1).map(|_| gamma(nu_xi / 2.0, nu_xi / 2.0, rng)).collect();
    let mut mu = vec![Normal::new(0.0, p.mu1_variance.sqrt()).unwrap().sample(rng)];
    for l in &lambda_xi {
        let sd = (1.0 / (l * tau_xi)).sqrt();
        let last = *mu.last().unwrap();
        mu.push(last + Normal::new(0.0, sd).unwrap().sample(rng));
    }
    LatentState { mu, lambda_eps, lambda_xi, tau_eps, tau_xi, nu_eps, nu_xi }
}

fn draw_data<R: Rng>(state: &LatentState, rng: &mut R) -> ProbeSeries {
    let values = state
        .mu
        .iter()
        .zip(&state.lambda_eps)
        .map(|(m, l)| m + Normal::new(0.0, (1.0 / (l * state.tau_eps)).sqrt()).unwrap().sample(rng))
        .collect();
    ProbeSeries::with_unit_gaps(values).unwrap()
}

fn summaries(s: &LatentState) -> [f64; 5] {
    [s.tau_eps, s.tau_xi.ln(), s.nu_eps, s.nu_xi, s.mu[0]]
}

#[test]
fn successive_conditional_simulation_preserves_the_prior() {
    let j = 5;
    let priors = geweke_priors();
    let mut rng = seeded(41);

    let independent: Vec<[f64; 5]> = (0..100_000)
        .map(|_| summaries(&draw_parameters(j, &priors, &mut rng)))
        .collect();

    let mut state = draw_parameters(j, &priors, &mut rng);
    let gaps = vec![1.0; j - 1];
    let mut chain = Vec::with_capacity(200_000);
    for _ in 0..200_000 {
        let series = draw_data(&state, &mut rng);
        sweep(&series, &gaps, &mut state, &priors, &mut rng).unwrap();
        chain.push(summaries(&state));
    }

    for k in 0..5 {
        let a: Vec<f64> = independent.iter().map(|s| s[k]).collect();
        let b: Vec<f64> = chain.iter().map(|s| s[k]).collect();
        let se = (var(&a) / a.len() as f64 + batch_mean_se(&b, 50).powi(2)).sqrt();
        let z = (mean(&a) - mean(&b)) / se;
        assert!(z.abs() < 3.0, "summary {k}: prior {} chain {} (z = {z})", mean(&a), mean(&b));
    }
}

#[test]
fn pure_noise_is_shrunk_toward_a_smooth_signal() {
    let mut rng = seeded(51);
    let noise = Normal::new(0.0, 0.25).unwrap();
    let series = ProbeSeries::with_unit_gaps((0..100).map(|_| noise.sample(&mut rng)).collect()).unwrap();
    let draws = run_chain(&series, &Priors::default(), &ChainConfig::new(7_500, 2_500, 5, 52)).unwrap();
    let fitted = draws.signal_mean();
    assert!(var(&fitted) <= 0.5 * var(series.values()), "{} vs {}", var(&fitted), var(series.values()));
}

#[test]
fn step_levels_are_recovered_away_from_the_step() {
    let mut rng = seeded(53);
    let noise = Normal::new(0.0, 0.25).unwrap();
    let truth: Vec<f64> = (0..100).map(|i| if i < 50 { 0.0 } else { 1.0 }).collect();
    let series =
        ProbeSeries::with_unit_gaps(truth.iter().map(|t| t + noise.sample(&mut rng)).collect()).unwrap();
    let draws = run_chain(&series, &Priors::default(), &ChainConfig::new(7_500, 2_500, 5, 54)).unwrap();
    let fitted = draws.signal_mean();
    let away: Vec<usize> = (0..100).filter(|i| (*i as i64 - 49).abs() > 3 && (*i as i64 - 50).abs() > 3).collect();
    let close = away.iter().filter(|i| (fitted[**i] - truth[**i]).abs() < 0.15).count();
    assert!(close as f64 >= 0.9 * away.len() as f64, "{close} of {}", away.len());
}
