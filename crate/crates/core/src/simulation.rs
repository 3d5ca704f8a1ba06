//! Artificial chromosome generators, ROC metrics and the breakpoint-count
//! experiment.
//!
//! The generators follow the Lai et al. benchmark layout: a zero baseline,
//! one centred gain block whose level is `snr * noise_sd`, Gaussian noise,
//! and optional outlier contamination or a second narrow high-level block.

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ProbeSeries;
use crate::pipeline::{self, PipelineConfig};
use crate::rng;
use crate::stats;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SecondAberration {
    pub width: usize,
    pub snr: f64,
}

impl Default for SecondAberration {
    fn default() -> Self {
        Self { width: 5, snr: 4.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimSpec {
    pub count: usize,
    pub length: usize,
    pub width: usize,
    pub snr: f64,
    pub noise_sd: f64,
    pub outlier_fraction: f64,
    pub outlier_range: (f64, f64),
    pub second_aberration: Option<SecondAberration>,
    pub seed: u64,
}

impl Default for SimSpec {
    fn default() -> Self {
        Self {
            count: 100,
            length: 100,
            width: 40,
            snr: 1.0,
            noise_sd: 0.25,
            outlier_fraction: 0.0,
            outlier_range: (3.0, 6.0),
            second_aberration: None,
            seed: 0,
        }
    }
}

impl SimSpec {
    pub fn validate(&self) -> Result<()> {
        if self.length < 2 {
            return Err(Error::contract("chromosome length must be at least 2"));
        }
        if self.width > self.length {
            return Err(Error::contract(format!(
                "aberration width {} exceeds length {}",
                self.width, self.length
            )));
        }
        if !(self.snr > 0.0) || !(self.noise_sd > 0.0) {
            return Err(Error::contract("SNR and noise sd must be positive"));
        }
        if !(0.0..1.0).contains(&self.outlier_fraction) {
            return Err(Error::contract(format!(
                "outlier fraction {} must lie in [0, 1)",
                self.outlier_fraction
            )));
        }
        if !(self.outlier_range.0 < self.outlier_range.1) {
            return Err(Error::contract("outlier magnitude interval is empty"));
        }
        if let Some(second) = self.second_aberration {
            if !(second.snr > 0.0) || second.width == 0 {
                return Err(Error::contract("second aberration needs positive width and SNR"));
            }
        }
        Ok(())
    }
}

/// A simulated series with its ground truth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledSeries {
    pub series: ProbeSeries,
    pub aberrant: Vec<bool>,
    pub true_mean: Vec<f64>,
    /// Transitions `j` (between probes `j` and `j + 1`) where the mean changes.
    pub breakpoints: Vec<usize>,
    pub outliers: Vec<usize>,
}

impl LabeledSeries {
    fn from_mean_and_noise(true_mean: Vec<f64>, noise: Vec<f64>) -> Result<Self> {
        let values = true_mean.iter().zip(&noise).map(|(m, e)| m + e).collect();
        let mut s = Self {
            series: ProbeSeries::with_unit_gaps(values)?,
            aberrant: Vec::new(),
            true_mean,
            breakpoints: Vec::new(),
            outliers: Vec::new(),
        };
        s.refresh_truth();
        Ok(s)
    }

    fn refresh_truth(&mut self) {
        self.aberrant = self.true_mean.iter().map(|m| *m != 0.0).collect();
        self.breakpoints = self
            .true_mean
            .windows(2)
            .enumerate()
            .filter(|(_, w)| w[0] != w[1])
            .map(|(j, _)| j)
            .collect();
    }
}

/// Zero-based start of a centred block: `floor((length - width) / 2)`.
pub fn centered_block_start(length: usize, width: usize) -> usize {
    (length - width) / 2
}

fn gaussian_noise<R: Rng + ?Sized>(n: usize, sd: f64, rng: &mut R) -> Result<Vec<f64>> {
    let dist = Normal::new(0.0, sd).map_err(|e| Error::contract(e.to_string()))?;
    Ok((0..n).map(|_| dist.sample(rng)).collect())
}

/// One simulated suite; chromosome `c` draws from sub-stream `(seed, c)`.
pub fn generate_lai(spec: &SimSpec) -> Result<Vec<LabeledSeries>> {
    spec.validate()?;
    (0..spec.count)
        .map(|c| {
            let mut rng = rng::substream(spec.seed, &[c as u64]);
            let start = centered_block_start(spec.length, spec.width);
            let level = spec.snr * spec.noise_sd;
            let mean: Vec<f64> = (0..spec.length)
                .map(|j| {
                    if j >= start && j < start + spec.width {
                        level
                    } else {
                        0.0
                    }
                })
                .collect();
            let noise = gaussian_noise(spec.length, spec.noise_sd, &mut rng)?;
            let mut chrom = LabeledSeries::from_mean_and_noise(mean, noise)?;
            if let Some(second) = spec.second_aberration {
                chrom = add_second_aberration(
                    &chrom,
                    second.width,
                    second.snr,
                    spec.noise_sd,
                    &mut rng,
                )?;
            }
            if spec.outlier_fraction > 0.0 {
                chrom = add_outliers(&chrom, spec.outlier_fraction, spec.outlier_range, &mut rng)?;
            }
            Ok(chrom)
        })
        .collect()
}

/// Adds `+/- U(lo, hi)` to `round(fraction * J)` distinct probes.
pub fn add_outliers<R: Rng + ?Sized>(
    chrom: &LabeledSeries,
    fraction: f64,
    (lo, hi): (f64, f64),
    rng: &mut R,
) -> Result<LabeledSeries> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::contract(format!("outlier fraction {fraction} must lie in [0, 1)")));
    }
    if !(lo < hi) {
        return Err(Error::contract(format!("empty magnitude interval ({lo}, {hi})")));
    }
    let n = chrom.series.len();
    let count = (fraction * n as f64).round() as usize;
    let mut out = chrom.clone();
    if count == 0 {
        return Ok(out);
    }
    let mut values = chrom.series.values().to_vec();
    let mut picked: Vec<usize> = index::sample(rng, n, count).into_vec();
    picked.sort_unstable();
    for &j in &picked {
        let magnitude = rng.random_range(lo..hi);
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        values[j] += sign * magnitude;
    }
    out.series = ProbeSeries::new(chrom.series.positions().to_vec(), values)?;
    out.outliers.extend(picked);
    out.outliers.sort_unstable();
    out.outliers.dedup();
    Ok(out)
}

/// Raises one uniformly chosen all-normal window of `width` probes to level
/// `snr * noise_sd`.
///
/// The window must be flanked on both sides by normal probes, so the new
/// block always adds two breakpoints and never touches another aberration
/// or the chromosome ends.
pub fn add_second_aberration<R: Rng + ?Sized>(
    chrom: &LabeledSeries,
    width: usize,
    snr: f64,
    noise_sd: f64,
    rng: &mut R,
) -> Result<LabeledSeries> {
    let n = chrom.series.len();
    if width == 0 || width + 2 > n {
        return Err(Error::contract(format!(
            "no room for a flanked window of width {width} in {n} probes"
        )));
    }
    let feasible: Vec<usize> = (1..=n - width - 1)
        .filter(|&s| chrom.aberrant[s - 1..=s + width].iter().all(|a| !a))
        .collect();
    if feasible.is_empty() {
        return Err(Error::contract(format!(
            "no all-normal window of width {width} is available"
        )));
    }
    let start = feasible[rng.random_range(0..feasible.len())];
    let level = snr * noise_sd;
    let mut values = chrom.series.values().to_vec();
    let mut out = chrom.clone();
    for j in start..start + width {
        values[j] += level - out.true_mean[j];
        out.true_mean[j] = level;
    }
    out.series = ProbeSeries::new(chrom.series.positions().to_vec(), values)?;
    out.refresh_truth();
    Ok(out)
}

/// Aberration-free chromosomes of i.i.d. `N(0, sd^2)` probes.
pub fn generate_normal<R: Rng + ?Sized>(
    count: usize,
    length: usize,
    sd: f64,
    rng: &mut R,
) -> Result<Vec<LabeledSeries>> {
    let base = rng.next_u64();
    (0..count)
        .map(|c| {
            let mut sub = rng::substream(base, &[c as u64]);
            let noise = gaussian_noise(length, sd, &mut sub)?;
            LabeledSeries::from_mean_and_noise(vec![0.0; length], noise)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    /// Sorted from `(0, 0)` to `(1, 1)`. A rate with no reference probes
    /// (no positives or no negatives) is NaN.
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

/// Exact ROC curve of `estimate > cutoff` as an aberration classifier,
/// sweeping the cutoff across every distinct estimate value.
pub fn roc_curve(estimates: &[f64], truth: &[bool]) -> Result<RocCurve> {
    if estimates.len() != truth.len() {
        return Err(Error::contract(format!(
            "{} estimates for {} labels",
            estimates.len(),
            truth.len()
        )));
    }
    if let Some(j) = estimates.iter().position(|e| !e.is_finite()) {
        return Err(Error::contract(format!("estimate {j} is not finite")));
    }
    let positives = truth.iter().filter(|t| **t).count();
    let negatives = truth.len() - positives;
    let rate = |hits: usize, total: usize| {
        if total == 0 {
            f64::NAN
        } else {
            hits as f64 / total as f64
        }
    };

    let mut order: Vec<usize> = (0..estimates.len()).collect();
    order.sort_by(|a, b| estimates[*b].total_cmp(&estimates[*a]));

    let mut points = vec![RocPoint {
        fpr: rate(0, negatives),
        tpr: rate(0, positives),
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let v = estimates[order[i]];
        while i < order.len() && estimates[order[i]] == v {
            if truth[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            fpr: rate(fp, negatives),
            tpr: rate(tp, positives),
        });
    }
    let auc = points
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
        .sum();
    Ok(RocCurve { points, auc })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChromosomeRecord {
    pub index: usize,
    pub true_breakpoints: usize,
    pub called_breakpoints: Vec<usize>,
    pub called_outliers: Vec<usize>,
    pub q_alpha: f64,
    /// ROC AUC of the posterior mean signal; `None` without both classes.
    pub roc_auc: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub records: Vec<ChromosomeRecord>,
    pub total_called: usize,
    pub total_true: usize,
    /// Chromosomes whose call count equals their true breakpoint count.
    pub exact_count_matches: usize,
    pub median_called: Option<f64>,
    pub mean_roc_auc: Option<f64>,
}

impl ExperimentSummary {
    pub fn counts(&self) -> Vec<usize> {
        self.records
            .iter()
            .map(|r| r.called_breakpoints.len())
            .collect()
    }
}

/// Fits and calls every chromosome of a suite and tallies breakpoint counts
/// against the truth.
pub fn breakpoint_count_experiment(
    suite: &[LabeledSeries],
    config: &PipelineConfig,
) -> Result<ExperimentSummary> {
    if suite.is_empty() {
        return Ok(ExperimentSummary::default());
    }
    config.validate()?;
    let shared = pipeline::shared_threshold(config, suite[0].series.len())?;
    let mut records = Vec::with_capacity(suite.len());
    for (c, chrom) in suite.iter().enumerate() {
        let q_alpha = match &shared {
            Some(q) => *q,
            None => pipeline::pseudo_threshold(&chrom.series, config, c as u64)?.q_alpha,
        };
        let outcome = pipeline::fit_and_call(&chrom.series, config, q_alpha, c as u64)?;
        let mean = outcome.draws.signal_mean();
        let has_both = chrom.aberrant.iter().any(|a| *a) && chrom.aberrant.iter().any(|a| !a);
        let roc_auc = if has_both {
            Some(roc_curve(&mean, &chrom.aberrant)?.auc)
        } else {
            None
        };
        records.push(ChromosomeRecord {
            index: c,
            true_breakpoints: chrom.breakpoints.len(),
            called_breakpoints: outcome.breakpoints.positions(),
            called_outliers: outcome.outliers.positions(),
            q_alpha,
            roc_auc,
        });
    }
    Ok(summarize(records))
}

pub fn summarize(records: Vec<ChromosomeRecord>) -> ExperimentSummary {
    let counts: Vec<f64> = records
        .iter()
        .map(|r| r.called_breakpoints.len() as f64)
        .collect();
    let aucs: Vec<f64> = records.iter().filter_map(|r| r.roc_auc).collect();
    ExperimentSummary {
        total_called: records.iter().map(|r| r.called_breakpoints.len()).sum(),
        total_true: records.iter().map(|r| r.true_breakpoints).sum(),
        exact_count_matches: records
            .iter()
            .filter(|r| r.called_breakpoints.len() == r.true_breakpoints)
            .count(),
        median_called: (!counts.is_empty()).then(|| stats::median(&counts)),
        mean_roc_auc: (!aucs.is_empty()).then(|| stats::mean(&aucs)),
        records,
    }
}
