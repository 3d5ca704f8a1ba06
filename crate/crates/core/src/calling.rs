//! Breakpoint and outlier calling by backward selection over posterior draws.
//!
//! For a draw matrix `M` (rows = draws, columns = positions) the score of a
//! column `j` is the AUC-type probability that `|M[., j]|` exceeds a draw
//! pooled from the other eligible columns:
//!
//! ```text
//! P_j = 1/m^2 * sum_k sum_k' 1{ |V_j[k]| > |V_-j[k']| }
//! ```
//!
//! where `V_-j` holds `m` entries sampled without replacement from the
//! flattened draws of every still-eligible column other than `j`. Selection
//! repeatedly takes the largest score above the threshold and removes that
//! column from later pools.

use std::collections::BTreeSet;

use ndarray::{Array2, Axis};
use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{PosteriorDraws, Priors, ProbeSeries};
use crate::rng;
use crate::sampler::{run_chain, ChainConfig};
use crate::stats;

/// Outlier threshold used when none is configured.
pub const DEFAULT_OUTLIER_THRESHOLD: f64 = 0.98;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CallKind {
    /// Columns are signal differences; position `j` is the transition
    /// between probes `j` and `j + 1`.
    Breakpoint,
    /// Columns are measurement errors, one per probe.
    Outlier,
}

impl std::fmt::Display for CallKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CallKind::Breakpoint => f.write_str("breakpoint"),
            CallKind::Outlier => f.write_str("outlier"),
        }
    }
}

/// Validated `m x n` matrix of posterior draws with per-column sorted
/// magnitudes cached for scoring.
#[derive(Clone, Debug)]
pub struct ScoreMatrix {
    kind: CallKind,
    m: usize,
    // column-major |M|
    columns: Vec<Vec<f64>>,
    sorted: Vec<Vec<f64>>,
}

impl ScoreMatrix {
    pub fn new(draws: &Array2<f64>, kind: CallKind) -> Result<Self> {
        let (m, n) = draws.dim();
        if m < 2 || n < 2 {
            return Err(Error::contract(format!(
                "score matrix must be at least 2 x 2, got {m} x {n}"
            )));
        }
        if let Some(((k, j), v)) = draws.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::contract(format!("entry ({k}, {j}) = {v} is not finite")));
        }
        let columns: Vec<Vec<f64>> = draws
            .axis_iter(Axis(1))
            .map(|c| c.iter().map(|v| v.abs()).collect())
            .collect();
        let sorted = columns
            .iter()
            .map(|c| {
                let mut s = c.clone();
                s.sort_by(f64::total_cmp);
                s
            })
            .collect();
        Ok(Self {
            kind,
            m,
            columns,
            sorted,
        })
    }

    pub fn breakpoints(draws: &PosteriorDraws) -> Result<Self> {
        Self::new(&draws.xi, CallKind::Breakpoint)
    }

    pub fn outliers(draws: &PosteriorDraws) -> Result<Self> {
        Self::new(&draws.eps, CallKind::Outlier)
    }

    pub fn kind(&self) -> CallKind {
        self.kind
    }

    pub fn draw_count(&self) -> usize {
        self.m
    }

    pub fn position_count(&self) -> usize {
        self.columns.len()
    }

    /// Magnitudes of column `j` in draw order.
    pub fn column_magnitudes(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    /// Samples the `m` comparison magnitudes `|V_-j|`, without replacement,
    /// from all columns except `j` and the excluded ones.
    pub fn comparison_pool<R: Rng + ?Sized>(
        &self,
        j: usize,
        excluded: &BTreeSet<usize>,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        let n = self.position_count();
        if j >= n {
            return Err(Error::contract(format!("position {j} out of range 0..{n}")));
        }
        if excluded.contains(&j) {
            return Err(Error::contract(format!("position {j} is already excluded")));
        }
        let others: Vec<usize> = (0..n)
            .filter(|i| *i != j && !excluded.contains(i))
            .collect();
        self.pool_from(&others, rng)
    }

    fn pool_from<R: Rng + ?Sized>(&self, others: &[usize], rng: &mut R) -> Result<Vec<f64>> {
        let size = others.len() * self.m;
        if size < self.m {
            return Err(Error::contract(format!(
                "comparison pool of {size} entries is smaller than the {} draws needed",
                self.m
            )));
        }
        Ok(index::sample(rng, size, self.m)
            .into_iter()
            .map(|flat| self.columns[others[flat / self.m]][flat % self.m])
            .collect())
    }

    /// Score of column `j` against an already sampled pool.
    fn score_against(&self, j: usize, mut pool: Vec<f64>) -> f64 {
        pool.sort_by(f64::total_cmp);
        let count = strict_exceedances(&self.sorted[j], &pool);
        count as f64 / (self.m as f64 * pool.len() as f64)
    }
}

/// Number of pairs `(a, b)` with `a > b`, for ascending-sorted inputs.
fn strict_exceedances(sorted_a: &[f64], sorted_b: &[f64]) -> u64 {
    let mut below = 0usize;
    let mut count = 0u64;
    for &a in sorted_a {
        while below < sorted_b.len() && sorted_b[below] < a {
            below += 1;
        }
        count += below as u64;
    }
    count
}

/// AUC score of position `j` with the given positions excluded from the pool.
pub fn auc_score<R: Rng + ?Sized>(
    matrix: &ScoreMatrix,
    j: usize,
    excluded: &BTreeSet<usize>,
    rng: &mut R,
) -> Result<f64> {
    let pool = matrix.comparison_pool(j, excluded, rng)?;
    Ok(matrix.score_against(j, pool))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Call {
    pub position: usize,
    /// Score at selection time; `None` for positions added by the
    /// all-selected terminal rule, which have no comparison pool left.
    pub score: Option<f64>,
    pub round: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CallResult {
    pub kind: CallKind,
    pub threshold: f64,
    pub calls: Vec<Call>,
    /// Set when selection reached `n - 1` positions and every position was
    /// returned.
    pub all_selected: bool,
}

impl CallResult {
    pub fn positions(&self) -> Vec<usize> {
        self.calls.iter().map(|c| c.position).collect()
    }

    pub fn len(&self) -> usize {
        self.calls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.calls.is_empty()
    }
}

/// Backward selection of positions whose score exceeds `threshold`.
///
/// Each round rescores every unselected position with a fresh pool drawn
/// from the sub-stream `(base, round, j)`; `base` is taken once from `rng`.
/// Exact score ties go to the smallest position.
pub fn backward_select<R: Rng + ?Sized>(
    matrix: &ScoreMatrix,
    threshold: f64,
    rng: &mut R,
) -> Result<CallResult> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::contract(format!(
            "threshold {threshold} must lie in [0, 1]"
        )));
    }
    let n = matrix.position_count();
    let base = rng.next_u64();
    let mut selected = vec![false; n];
    let mut calls: Vec<Call> = Vec::new();

    while calls.len() < n - 1 {
        let round = calls.len() + 1;
        let eligible: Vec<usize> = (0..n).filter(|i| !selected[*i]).collect();
        let mut best: Option<(usize, f64)> = None;
        let mut others = Vec::with_capacity(eligible.len());
        for (slot, &j) in eligible.iter().enumerate() {
            others.clear();
            others.extend_from_slice(&eligible[..slot]);
            others.extend_from_slice(&eligible[slot + 1..]);
            let mut sub = rng::substream(base, &[round as u64, j as u64]);
            let pool = matrix.pool_from(&others, &mut sub)?;
            let score = matrix.score_against(j, pool);
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((j, score));
            }
        }
        match best {
            Some((j, score)) if score > threshold => {
                selected[j] = true;
                calls.push(Call {
                    position: j,
                    score: Some(score),
                    round,
                });
            }
            _ => break,
        }
    }

    let all_selected = calls.len() == n - 1;
    if all_selected {
        if let Some(last) = (0..n).find(|i| !selected[*i]) {
            calls.push(Call {
                position: last,
                score: None,
                round: n,
            });
        }
    }
    Ok(CallResult {
        kind: matrix.kind(),
        threshold,
        calls,
        all_selected,
    })
}

pub fn call_breakpoints<R: Rng + ?Sized>(
    draws: &PosteriorDraws,
    q_alpha: f64,
    rng: &mut R,
) -> Result<CallResult> {
    backward_select(&ScoreMatrix::breakpoints(draws)?, q_alpha, rng)
}

pub fn call_outliers<R: Rng + ?Sized>(
    draws: &PosteriorDraws,
    q_eps: f64,
    rng: &mut R,
) -> Result<CallResult> {
    backward_select(&ScoreMatrix::outliers(draws)?, q_eps, rng)
}

/// Pseudo normal reference: `length` values resampled with replacement
/// from the observations, on unit-gap positions.
pub fn make_pseudo_reference<R: Rng + ?Sized>(
    series: &ProbeSeries,
    length: usize,
    rng: &mut R,
) -> Result<ProbeSeries> {
    if length < 2 {
        return Err(Error::contract(format!(
            "reference length must be at least 2, got {length}"
        )));
    }
    let values = series.values();
    let resampled = (0..length)
        .map(|_| values[rng.random_range(0..values.len())])
        .collect();
    ProbeSeries::with_unit_gaps(resampled)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub null_scores: Vec<f64>,
    pub alpha: f64,
    pub q_alpha: f64,
}

impl CalibrationResult {
    pub fn from_scores(null_scores: Vec<f64>, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::contract(format!("alpha {alpha} must lie in (0, 1)")));
        }
        if null_scores.is_empty() {
            return Err(Error::contract("no null scores to calibrate from"));
        }
        let q_alpha = stats::quantile(&null_scores, 1.0 - alpha);
        Ok(Self {
            null_scores,
            alpha,
            q_alpha,
        })
    }
}

/// Null scores for every difference position of a reference fit, each
/// scored once against all other positions.
pub fn null_scores<R: Rng + ?Sized>(draws: &PosteriorDraws, rng: &mut R) -> Result<Vec<f64>> {
    let matrix = ScoreMatrix::breakpoints(draws)?;
    let base = rng.next_u64();
    let none = BTreeSet::new();
    (0..matrix.position_count())
        .map(|j| {
            let mut sub = rng::substream(base, &[0, j as u64]);
            auc_score(&matrix, j, &none, &mut sub)
        })
        .collect()
}

/// Fits the reference series and returns the `(1 - alpha)` quantile of its
/// null scores.
pub fn calibrate_threshold<R: Rng + ?Sized>(
    reference: &ProbeSeries,
    alpha: f64,
    priors: &Priors,
    config: &ChainConfig,
    rng: &mut R,
) -> Result<CalibrationResult> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::contract(format!("alpha {alpha} must lie in (0, 1)")));
    }
    let draws = run_chain(reference, priors, config)?;
    CalibrationResult::from_scores(null_scores(&draws, rng)?, alpha)
}
