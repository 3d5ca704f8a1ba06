//! Fit, calibrate and call for one series, with every random stream derived
//! from a single pipeline seed.

use serde::{Deserialize, Serialize};

use crate::calling::{
    call_breakpoints, call_outliers, make_pseudo_reference, null_scores, CalibrationResult,
    CallResult, DEFAULT_OUTLIER_THRESHOLD,
};
use crate::error::{Error, Result};
use crate::model::{PosteriorDraws, Priors, ProbeSeries};
use crate::rng;
use crate::sampler::{run_chain, ChainConfig};

// Stream tags for rng::derive_seed.
const FIT_CHAIN: u64 = 1;
const FIT_CALLS: u64 = 2;
const PSEUDO_RESAMPLE: u64 = 3;
const PSEUDO_CHAIN: u64 = 4;
const PSEUDO_SCORES: u64 = 5;
const SIM_REFERENCE: u64 = 6;
const REFERENCE_CHAIN: u64 = 7;
const REFERENCE_SCORES: u64 = 8;

/// Where the breakpoint threshold comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceMode {
    /// One simulated `N(0, sd^2)` reference array shared by every series.
    SimulatedNormal { sd: f64 },
    /// A bootstrap resample of each series' own values.
    Pseudo,
    /// A measured normal-versus-normal array.
    Provided(ProbeSeries),
    /// A known threshold; no calibration.
    Fixed(f64),
}

/// How a reference array is cut before fitting.
///
/// Null score spread depends on the length of the fitted series, because the
/// evolution precision posterior grows with it. Fitting reference segments as
/// long as the analysed series keeps the null distribution comparable.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Segmentation {
    /// Fit the reference as one series.
    Whole,
    /// Consecutive segments as long as the series being called.
    #[default]
    MatchSeries,
    /// Consecutive segments of a fixed length.
    Length(usize),
}

impl Segmentation {
    pub fn segment_length(self, reference: usize, series: usize) -> usize {
        match self {
            Segmentation::Whole => reference,
            Segmentation::MatchSeries => series,
            Segmentation::Length(l) => l,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub priors: Priors,
    pub chain: ChainConfig,
    pub alpha: f64,
    pub q_eps: f64,
    pub reference_length: usize,
    pub reference: ReferenceMode,
    pub segmentation: Segmentation,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            priors: Priors::default(),
            chain: ChainConfig::default(),
            alpha: 0.001,
            q_eps: DEFAULT_OUTLIER_THRESHOLD,
            reference_length: 1000,
            reference: ReferenceMode::SimulatedNormal { sd: 0.25 },
            segmentation: Segmentation::default(),
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.priors.validate()?;
        self.chain.validate()?;
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::contract(format!("alpha {} must lie in (0, 1)", self.alpha)));
        }
        if !(0.0..=1.0).contains(&self.q_eps) {
            return Err(Error::contract(format!("q_eps {} outside [0, 1]", self.q_eps)));
        }
        if self.reference_length < 2 {
            return Err(Error::contract("reference length must be at least 2"));
        }
        if let Segmentation::Length(l) = self.segmentation {
            if l < 2 {
                return Err(Error::contract("reference segments need at least 2 probes"));
            }
        }
        Ok(())
    }

    fn chain_seeded(&self, tag: u64, index: u64) -> ChainConfig {
        ChainConfig {
            seed: rng::derive_seed(self.seed, &[tag, index]),
            ..self.chain.clone()
        }
    }
}

pub struct FitOutcome {
    pub draws: PosteriorDraws,
    pub breakpoints: CallResult,
    pub outliers: CallResult,
}

/// Threshold shared by all series of length `series_length`, or `None` for
/// per-series pseudo calibration.
pub fn shared_threshold(config: &PipelineConfig, series_length: usize) -> Result<Option<f64>> {
    if let ReferenceMode::Fixed(q) = config.reference {
        if !(0.0..=1.0).contains(&q) {
            return Err(Error::contract(format!("fixed threshold {q} outside [0, 1]")));
        }
        return Ok(Some(q));
    }
    Ok(shared_calibration(config, series_length)?.map(|c| c.q_alpha))
}

/// Full calibration against a simulated or provided reference; `None` for
/// the pseudo and fixed modes.
pub fn shared_calibration(
    config: &PipelineConfig,
    series_length: usize,
) -> Result<Option<CalibrationResult>> {
    match &config.reference {
        ReferenceMode::Fixed(_) | ReferenceMode::Pseudo => Ok(None),
        ReferenceMode::SimulatedNormal { sd } => {
            let mut gen = rng::substream(config.seed, &[SIM_REFERENCE]);
            let reference = simulated_reference(config.reference_length, *sd, &mut gen)?;
            calibrate_reference(&reference, config, series_length).map(Some)
        }
        ReferenceMode::Provided(reference) => {
            calibrate_reference(reference, config, series_length).map(Some)
        }
    }
}

pub fn simulated_reference<R: rand::Rng + ?Sized>(
    length: usize,
    sd: f64,
    rng: &mut R,
) -> Result<ProbeSeries> {
    use rand_distr::{Distribution, Normal};
    let dist = Normal::new(0.0, sd).map_err(|e| Error::contract(e.to_string()))?;
    ProbeSeries::with_unit_gaps((0..length).map(|_| dist.sample(rng)).collect())
}

/// Splits `reference` into consecutive pieces of `length` probes. A trailing
/// piece with fewer than two probes is dropped.
pub fn split_reference(reference: &ProbeSeries, length: usize) -> Result<Vec<ProbeSeries>> {
    if length < 2 {
        return Err(Error::contract(format!(
            "reference segments need at least 2 probes, got {length}"
        )));
    }
    let (pos, val) = (reference.positions(), reference.values());
    (0..reference.len())
        .step_by(length)
        .filter(|start| reference.len() - start >= 2)
        .map(|start| {
            let end = (start + length).min(reference.len());
            ProbeSeries::new(pos[start..end].to_vec(), val[start..end].to_vec())
        })
        .collect()
}

/// Fits each reference segment and pools the null scores.
fn calibrate_segments(
    reference: &ProbeSeries,
    config: &PipelineConfig,
    series_length: usize,
    chain_tag: u64,
    index: u64,
    scoring: &mut rng::ModelRng,
) -> Result<CalibrationResult> {
    if !(config.alpha > 0.0 && config.alpha < 1.0) {
        return Err(Error::contract(format!("alpha {} must lie in (0, 1)", config.alpha)));
    }
    let length = config
        .segmentation
        .segment_length(reference.len(), series_length);
    let mut scores = Vec::new();
    for (k, segment) in split_reference(reference, length)?.iter().enumerate() {
        let chain = ChainConfig {
            seed: rng::derive_seed(config.seed, &[chain_tag, index, k as u64]),
            ..config.chain.clone()
        };
        let draws = run_chain(segment, &config.priors, &chain)?;
        scores.extend(null_scores(&draws, scoring)?);
    }
    CalibrationResult::from_scores(scores, config.alpha)
}

/// Calibrates against a shared reference series.
pub fn calibrate_reference(
    reference: &ProbeSeries,
    config: &PipelineConfig,
    series_length: usize,
) -> Result<CalibrationResult> {
    let mut scoring = rng::substream(config.seed, &[REFERENCE_SCORES]);
    calibrate_segments(reference, config, series_length, REFERENCE_CHAIN, 0, &mut scoring)
}

/// Calibrates against a pseudo reference resampled from `series`.
pub fn pseudo_threshold(
    series: &ProbeSeries,
    config: &PipelineConfig,
    index: u64,
) -> Result<CalibrationResult> {
    let mut resample = rng::substream(config.seed, &[PSEUDO_RESAMPLE, index]);
    let reference = make_pseudo_reference(series, config.reference_length, &mut resample)?;
    let mut scoring = rng::substream(config.seed, &[PSEUDO_SCORES, index]);
    calibrate_segments(&reference, config, series.len(), PSEUDO_CHAIN, index, &mut scoring)
}

/// Runs the chain for series `index` of a run.
pub fn fit(series: &ProbeSeries, config: &PipelineConfig, index: u64) -> Result<PosteriorDraws> {
    run_chain(series, &config.priors, &config.chain_seeded(FIT_CHAIN, index))
}

/// Calls breakpoints at `q_alpha` and outliers at `config.q_eps`.
pub fn call(
    draws: &PosteriorDraws,
    config: &PipelineConfig,
    q_alpha: f64,
    index: u64,
) -> Result<(CallResult, CallResult)> {
    let mut calls = rng::substream(config.seed, &[FIT_CALLS, index]);
    let breakpoints = call_breakpoints(draws, q_alpha, &mut calls)?;
    let outliers = call_outliers(draws, config.q_eps, &mut calls)?;
    Ok((breakpoints, outliers))
}

/// [`fit`] followed by [`call`].
pub fn fit_and_call(
    series: &ProbeSeries,
    config: &PipelineConfig,
    q_alpha: f64,
    index: u64,
) -> Result<FitOutcome> {
    let draws = fit(series, config, index)?;
    let (breakpoints, outliers) = call(&draws, config, q_alpha, index)?;
    Ok(FitOutcome {
        draws,
        breakpoints,
        outliers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(n: usize) -> ProbeSeries {
        ProbeSeries::with_unit_gaps((0..n).map(|i| i as f64).collect()).unwrap()
    }

    #[test]
    fn split_covers_reference_in_order() {
        let parts = split_reference(&ramp(10), 4).unwrap();
        let lens: Vec<usize> = parts.iter().map(|p| p.len()).collect();
        assert_eq!(lens, vec![4, 4, 2]);
        let joined: Vec<f64> = parts.iter().flat_map(|p| p.values().to_vec()).collect();
        assert_eq!(joined, ramp(10).values());
    }

    #[test]
    fn split_drops_single_probe_tail() {
        let parts = split_reference(&ramp(9), 4).unwrap();
        assert_eq!(parts.len(), 2);
        assert!(split_reference(&ramp(9), 1).is_err());
    }

    #[test]
    fn whole_segmentation_keeps_one_piece() {
        assert_eq!(Segmentation::Whole.segment_length(1000, 100), 1000);
        assert_eq!(Segmentation::MatchSeries.segment_length(1000, 100), 100);
        assert_eq!(Segmentation::Length(50).segment_length(1000, 100), 50);
    }

    #[test]
    fn pooled_calibration_scores_every_segment() {
        let config = PipelineConfig {
            chain: ChainConfig::new(300, 100, 2, 0),
            reference_length: 60,
            seed: 3,
            ..PipelineConfig::default()
        };
        let mut gen = rng::seeded(1);
        let reference = simulated_reference(60, 0.25, &mut gen).unwrap();
        let cal = calibrate_reference(&reference, &config, 20).unwrap();
        // three segments of 19 transitions each
        assert_eq!(cal.null_scores.len(), 57);
        let whole = PipelineConfig {
            segmentation: Segmentation::Whole,
            ..config.clone()
        };
        assert_eq!(calibrate_reference(&reference, &whole, 20).unwrap().null_scores.len(), 59);
        assert_eq!(cal, calibrate_reference(&reference, &config, 20).unwrap());
    }

    #[test]
    fn fixed_threshold_is_checked() {
        let mut config = PipelineConfig {
            reference: ReferenceMode::Fixed(0.7),
            ..PipelineConfig::default()
        };
        assert_eq!(shared_threshold(&config, 100).unwrap(), Some(0.7));
        config.reference = ReferenceMode::Fixed(1.5);
        assert!(shared_threshold(&config, 100).is_err());
        config.reference = ReferenceMode::Pseudo;
        assert_eq!(shared_threshold(&config, 100).unwrap(), None);
    }
}
