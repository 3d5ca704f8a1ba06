//! Probe tables, result files and run manifests.
//!
//! Tables are tab-separated with a fixed header. Floats are written in
//! shortest round-trip form, so re-reading a table gives back the exact
//! values that were written.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::calling::{CalibrationResult, CallResult, DEFAULT_OUTLIER_THRESHOLD};
use crate::error::{Error, Result};
use crate::model::{ParameterTraces, PosteriorDraws, Priors, ProbeSeries};
use crate::pipeline::{PipelineConfig, ReferenceMode, Segmentation};
use crate::sampler::ChainConfig;
use crate::simulation::SimSpec;
use crate::stats;

pub const SUMMARY_COLUMNS: [&str; 10] = [
    "position", "mu_mean", "mu_lower", "mu_upper", "eps_mean", "eps_lower", "eps_upper",
    "xi_mean", "xi_lower", "xi_upper",
];

pub const CALL_COLUMNS: [&str; 5] = ["kind", "index", "position", "score", "round"];

const MISSING: &str = "NA";

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Reads a two-column `position, value` table. The delimiter (comma or tab)
/// is taken from the first data line; a first line that does not parse as
/// numbers is treated as a header. Blank lines and `#` comments are skipped.
pub fn read_series(path: &Path) -> Result<ProbeSeries> {
    parse_series(&read_text(path)?, path)
}

/// [`read_series`] on in-memory text; `origin` only labels errors.
pub fn parse_series(text: &str, origin: &Path) -> Result<ProbeSeries> {
    let mut delimiter = None;
    let mut rows: Vec<(f64, f64, usize)> = Vec::new();
    let mut seen_content = false;

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let delim = *delimiter.get_or_insert_with(|| if line.contains('\t') { '\t' } else { ',' });
        let fields: Vec<&str> = line.split(delim).map(str::trim).collect();
        let first_content = !seen_content;
        seen_content = true;

        if fields.len() < 2 {
            return Err(parse_err(
                origin,
                line_no,
                format!("expected position and value, found {} field(s)", fields.len()),
            ));
        }
        let parsed: Vec<Option<f64>> = fields[..2]
            .iter()
            .map(|f| f.parse::<f64>().ok().filter(|x| x.is_finite()))
            .collect();
        match (parsed[0], parsed[1]) {
            (Some(p), Some(v)) => rows.push((p, v, line_no)),
            _ if first_content && parsed.iter().all(Option::is_none) && !is_missing(fields[1]) => {
                continue; // header
            }
            _ => {
                let (bad, what) = if parsed[0].is_none() {
                    (fields[0], "position")
                } else {
                    (fields[1], "value")
                };
                let msg = if is_missing(bad) {
                    format!("missing {what}; missing values are not imputed")
                } else {
                    format!("cannot parse {what} {bad:?}")
                };
                return Err(parse_err(origin, line_no, msg));
            }
        }
    }

    if rows.len() < 2 {
        return Err(parse_err(
            origin,
            text.lines().count(),
            format!("need at least 2 probes, found {}", rows.len()),
        ));
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(parse_err(
            origin,
            w[1].2,
            format!("duplicate position {} (also on line {})", w[1].0, w[0].2),
        ));
    }
    let (positions, values) = rows.iter().map(|r| (r.0, r.1)).unzip();
    ProbeSeries::new(positions, values)
}

fn is_missing(field: &str) -> bool {
    field.is_empty() || matches!(field.to_ascii_lowercase().as_str(), "na" | "nan" | "null")
}

pub fn format_series(series: &ProbeSeries) -> String {
    let mut out = String::from("position\tvalue\n");
    for (p, v) in series.positions().iter().zip(series.values()) {
        let _ = writeln!(out, "{p}\t{v}");
    }
    out
}

/// Posterior mean and equal-tailed credible interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    fn of(column: ndarray::ArrayView1<f64>, level: f64) -> Self {
        let mut v = column.to_vec();
        v.sort_by(f64::total_cmp);
        let tail = (1.0 - level) / 2.0;
        Self {
            mean: stats::mean(&v),
            lower: stats::quantile_sorted(&v, tail),
            upper: stats::quantile_sorted(&v, 1.0 - tail),
        }
    }
}

/// One row of the per-probe summary. `xi` describes the transition to the
/// next probe and is absent on the last row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeSummary {
    pub position: f64,
    pub mu: Interval,
    pub eps: Interval,
    pub xi: Option<Interval>,
}

pub fn summarize_draws(
    series: &ProbeSeries,
    draws: &PosteriorDraws,
    level: f64,
) -> Result<Vec<ProbeSummary>> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::contract(format!("credible level {level} must lie in (0, 1)")));
    }
    if draws.probe_count() != series.len() {
        return Err(Error::contract(format!(
            "draws cover {} probes, series has {}",
            draws.probe_count(),
            series.len()
        )));
    }
    Ok((0..series.len())
        .map(|j| ProbeSummary {
            position: series.positions()[j],
            mu: Interval::of(draws.mu.column(j), level),
            eps: Interval::of(draws.eps.column(j), level),
            xi: (j + 1 < series.len()).then(|| Interval::of(draws.xi.column(j), level)),
        })
        .collect())
}

pub fn format_summary_table(rows: &[ProbeSummary]) -> String {
    let mut out = SUMMARY_COLUMNS.join("\t");
    out.push('\n');
    for r in rows {
        let _ = write!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.position, r.mu.mean, r.mu.lower, r.mu.upper, r.eps.mean, r.eps.lower, r.eps.upper
        );
        match r.xi {
            Some(x) => {
                let _ = writeln!(out, "\t{}\t{}\t{}", x.mean, x.lower, x.upper);
            }
            None => {
                let _ = writeln!(out, "\t{MISSING}\t{MISSING}\t{MISSING}");
            }
        }
    }
    out
}

fn check_header(text: &str, expected: &[&str], origin: &Path) -> Result<()> {
    let header = text.lines().next().unwrap_or_default();
    if header.split('\t').ne(expected.iter().copied()) {
        return Err(parse_err(
            origin,
            1,
            format!("expected header {:?}", expected.join("\t")),
        ));
    }
    Ok(())
}

pub fn parse_summary_table(text: &str, origin: &Path) -> Result<Vec<ProbeSummary>> {
    check_header(text, &SUMMARY_COLUMNS, origin)?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != SUMMARY_COLUMNS.len() {
            return Err(parse_err(origin, i + 1, format!("expected 10 fields, found {}", fields.len())));
        }
        let num = |k: usize| -> Result<f64> {
            fields[k]
                .parse()
                .map_err(|_| parse_err(origin, i + 1, format!("bad number {:?}", fields[k])))
        };
        let xi = if fields[7] == MISSING {
            None
        } else {
            Some(Interval {
                mean: num(7)?,
                lower: num(8)?,
                upper: num(9)?,
            })
        };
        rows.push(ProbeSummary {
            position: num(0)?,
            mu: Interval {
                mean: num(1)?,
                lower: num(2)?,
                upper: num(3)?,
            },
            eps: Interval {
                mean: num(4)?,
                lower: num(5)?,
                upper: num(6)?,
            },
            xi,
        });
    }
    Ok(rows)
}

/// Call table for any number of call sets. `index` is the zero-based probe
/// (outliers) or transition (breakpoints); `position` is that probe's
/// coordinate, or for a transition the coordinate of its left probe.
pub fn format_call_table(series: &ProbeSeries, results: &[&CallResult]) -> String {
    let mut out = CALL_COLUMNS.join("\t");
    out.push('\n');
    for result in results {
        for call in &result.calls {
            let score = call.score.map_or(MISSING.to_string(), |s| s.to_string());
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                result.kind,
                call.position,
                series.positions()[call.position],
                score,
                call.round
            );
        }
    }
    out
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&read_text(path)?)?)
}

const DRAWS_MAGIC: &[u8; 8] = b"RSSMDRW1";

/// Binary snapshot of a fit: the series and the retained signal draws with
/// their parameter traces. Little-endian `u64` dimensions then `f64` data.
pub fn encode_draws(series: &ProbeSeries, draws: &PosteriorDraws) -> Vec<u8> {
    let (m, j) = draws.mu.dim();
    let mut out = Vec::with_capacity(24 + 8 * (2 * j + m * j + 4 * m));
    out.extend_from_slice(DRAWS_MAGIC);
    out.extend_from_slice(&(m as u64).to_le_bytes());
    out.extend_from_slice(&(j as u64).to_le_bytes());
    let t = &draws.traces;
    let columns = [series.positions(), series.values()];
    let traces = [&t.tau_eps[..], &t.tau_xi[..], &t.nu_eps[..], &t.nu_xi[..]];
    for x in columns
        .into_iter()
        .flatten()
        .chain(draws.mu.iter())
        .chain(traces.into_iter().flatten())
    {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

pub fn decode_draws(bytes: &[u8], origin: &Path) -> Result<(ProbeSeries, PosteriorDraws)> {
    let bad = |msg: &str| parse_err(origin, 0, msg.to_string());
    if bytes.len() < 24 || &bytes[..8] != DRAWS_MAGIC {
        return Err(bad("not a draws file"));
    }
    let word = |k: usize| u64::from_le_bytes(bytes[8 * k..8 * k + 8].try_into().unwrap());
    let (m, j) = (word(1) as usize, word(2) as usize);
    let expected = m
        .checked_mul(j)
        .and_then(|mj| mj.checked_add(2 * j + 4 * m))
        .and_then(|n| n.checked_mul(8))
        .and_then(|n| n.checked_add(24));
    if expected != Some(bytes.len()) {
        return Err(bad("draws file is truncated or has inconsistent dimensions"));
    }
    let mut values = bytes[24..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    let mut take = |n: usize| values.by_ref().take(n).collect::<Vec<f64>>();
    let series = ProbeSeries::new(take(j), take(j))?;
    let mu = Array2::from_shape_vec((m, j), take(m * j))
        .map_err(|e| Error::contract(e.to_string()))?;
    let traces = ParameterTraces {
        tau_eps: take(m),
        tau_xi: take(m),
        nu_eps: take(m),
        nu_xi: take(m),
    };
    let draws = PosteriorDraws::from_signal_draws(&series, mu, traces)?;
    Ok((series, draws))
}

pub fn write_draws(path: &Path, series: &ProbeSeries, draws: &PosteriorDraws) -> Result<()> {
    fs::write(path, encode_draws(series, draws)).map_err(|e| Error::io(path, e))
}

pub fn read_draws(path: &Path) -> Result<(ProbeSeries, PosteriorDraws)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_draws(&bytes, path)
}

/// Where a run's series comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputSource {
    File { path: PathBuf },
    /// Chromosome `index` of a simulated suite.
    Simulation { spec: SimSpec, index: usize },
}

/// Reference for threshold calibration as named in a manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceSource {
    SimulatedNormal { sd: f64 },
    Pseudo,
    Provided { path: PathBuf },
    Fixed { q_alpha: f64 },
}

/// Everything needed to reproduce a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    /// Series to fit; calibration against a simulated or provided reference
    /// needs none.
    pub input: Option<InputSource>,
    #[serde(default)]
    pub priors: Priors,
    #[serde(default)]
    pub chain: ChainConfig,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_q_eps")]
    pub q_eps: f64,
    #[serde(default = "default_reference")]
    pub reference: ReferenceSource,
    #[serde(default = "default_reference_length")]
    pub reference_length: usize,
    #[serde(default)]
    pub segmentation: Segmentation,
    #[serde(default = "default_level")]
    pub credible_level: f64,
    pub output_dir: PathBuf,
    pub seed: u64,
}

fn default_alpha() -> f64 {
    0.001
}
fn default_q_eps() -> f64 {
    DEFAULT_OUTLIER_THRESHOLD
}
fn default_reference() -> ReferenceSource {
    ReferenceSource::SimulatedNormal { sd: 0.25 }
}
fn default_reference_length() -> usize {
    1000
}
fn default_level() -> f64 {
    0.95
}

impl RunManifest {
    pub fn new(input: Option<InputSource>, output_dir: PathBuf, seed: u64) -> Self {
        Self {
            input,
            priors: Priors::default(),
            chain: ChainConfig::default(),
            alpha: default_alpha(),
            q_eps: default_q_eps(),
            reference: default_reference(),
            reference_length: default_reference_length(),
            segmentation: Segmentation::default(),
            credible_level: default_level(),
            output_dir,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(InputSource::Simulation { spec, index }) = &self.input {
            spec.validate()?;
            if *index >= spec.count {
                return Err(Error::contract(format!(
                    "chromosome {index} requested from a suite of {}",
                    spec.count
                )));
            }
        }
        if !(self.credible_level > 0.0 && self.credible_level < 1.0) {
            return Err(Error::contract(format!(
                "credible level {} must lie in (0, 1)",
                self.credible_level
            )));
        }
        self.pipeline(None)?.validate()
    }

    /// Pipeline settings. A provided reference must be passed in already
    /// loaded.
    pub fn pipeline(&self, provided: Option<ProbeSeries>) -> Result<PipelineConfig> {
        let reference = match (&self.reference, provided) {
            (ReferenceSource::SimulatedNormal { sd }, _) => ReferenceMode::SimulatedNormal { sd: *sd },
            (ReferenceSource::Pseudo, _) => ReferenceMode::Pseudo,
            (ReferenceSource::Fixed { q_alpha }, _) => ReferenceMode::Fixed(*q_alpha),
            (ReferenceSource::Provided { .. }, Some(series)) => ReferenceMode::Provided(series),
            // Placeholder for validation before the file is read.
            (ReferenceSource::Provided { .. }, None) => ReferenceMode::Pseudo,
        };
        Ok(PipelineConfig {
            priors: self.priors.clone(),
            chain: self.chain.clone(),
            alpha: self.alpha,
            q_eps: self.q_eps,
            reference_length: self.reference_length,
            reference,
            segmentation: self.segmentation,
            seed: self.seed,
        })
    }

    /// Loads the series named by the input source.
    pub fn load_series(&self) -> Result<ProbeSeries> {
        match &self.input {
            None => Err(Error::contract("the run has no input series")),
            Some(InputSource::File { path }) => read_series(path),
            Some(InputSource::Simulation { spec, index }) => {
                let mut suite = crate::simulation::generate_lai(spec)?;
                Ok(suite.swap_remove(*index).series)
            }
        }
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn config_hash(&self) -> Result<String> {
        let digest = Sha256::digest(serde_json::to_vec(self)?);
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }
}

/// Calibration output together with the run that produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRecord {
    pub manifest: RunManifest,
    pub config_hash: String,
    pub segment_length: usize,
    #[serde(flatten)]
    pub result: CalibrationResult,
}

/// Structured summary written next to the tables.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub manifest: RunManifest,
    pub config_hash: String,
    pub version: String,
    pub probes: usize,
    pub draws: usize,
    pub q_alpha: Option<f64>,
    pub breakpoints: Option<usize>,
    pub outliers: Option<usize>,
    pub mean_tau_eps: f64,
    pub mean_tau_xi: f64,
    pub mean_nu_eps: f64,
    pub mean_nu_xi: f64,
}

impl RunSummary {
    pub fn new(manifest: &RunManifest, draws: &PosteriorDraws) -> Result<Self> {
        let t = &draws.traces;
        Ok(Self {
            manifest: manifest.clone(),
            config_hash: manifest.config_hash()?,
            version: env!("CARGO_PKG_VERSION").to_string(),
            probes: draws.probe_count(),
            draws: draws.draw_count(),
            q_alpha: None,
            breakpoints: None,
            outliers: None,
            mean_tau_eps: stats::mean(&t.tau_eps),
            mean_tau_xi: stats::mean(&t.tau_xi),
            mean_nu_eps: stats::mean(&t.nu_eps),
            mean_nu_xi: stats::mean(&t.nu_xi),
        })
    }
}

/// Posterior mean of the signal per probe, as used for ROC curves.
pub fn signal_means(rows: &[ProbeSummary]) -> Vec<f64> {
    rows.iter().map(|r| r.mu.mean).collect()
}
