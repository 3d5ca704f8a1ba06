use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use rssm::io::{
    format_call_table, format_series, format_summary_table, parse_summary_table, read_draws,
    read_json, read_series, read_text, signal_means, summarize_draws, write_draws, write_json,
    write_text, CalibrationRecord, ReferenceSource, RunSummary,
};
use rssm::pipeline::{self, Segmentation};
use rssm::simulation::{generate_lai, roc_curve, RocCurve, SecondAberration, SimSpec};
use serde::{Deserialize, Serialize};

use crate::config::{input_source, manifest, read_structured, resolve_seed};
use crate::{CalibrateArgs, CallArgs, FitArgs, RocArgs, SimulateArgs};

pub const SUMMARY_FILE: &str = "summary.tsv";
pub const DRAWS_FILE: &str = "fit.draws";
pub const RUN_FILE: &str = "run.json";
pub const CALIBRATION_FILE: &str = "calibration.json";
pub const CALLS_FILE: &str = "calls.tsv";
pub const CALL_RUN_FILE: &str = "calls.json";

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

pub fn fit(args: FitArgs) -> Result<()> {
    let mut m = manifest(&args.common, input_source(&args.input)?)?;
    if let Some(level) = args.level {
        m.credible_level = level;
    }
    ensure!(m.input.is_some(), "fit needs --input or --sim-spec");
    m.validate()?;
    let series = m.load_series()?;
    let config = m.pipeline(None)?;
    let draws = pipeline::fit(&series, &config, 0)?;

    create_dir(&m.output_dir)?;
    let rows = summarize_draws(&series, &draws, m.credible_level)?;
    write_text(&m.output_dir.join(SUMMARY_FILE), &format_summary_table(&rows))?;
    write_draws(&m.output_dir.join(DRAWS_FILE), &series, &draws)?;
    write_json(&m.output_dir.join(RUN_FILE), &RunSummary::new(&m, &draws)?)?;
    println!(
        "fit {} probes, kept {} draws -> {}",
        series.len(),
        draws.draw_count(),
        m.output_dir.display()
    );
    Ok(())
}

pub fn calibrate(args: CalibrateArgs) -> Result<()> {
    let mut m = manifest(&args.common, input_source(&args.input)?)?;
    if args.pseudo {
        m.reference = ReferenceSource::Pseudo;
    } else if let Some(path) = &args.reference {
        m.reference = ReferenceSource::Provided { path: path.clone() };
    } else if let Some(sd) = args.simulated {
        m.reference = ReferenceSource::SimulatedNormal { sd };
    }
    if let Some(a) = args.alpha {
        m.alpha = a;
    }
    if let Some(l) = args.reference_length {
        m.reference_length = l;
    }
    if args.whole {
        m.segmentation = Segmentation::Whole;
    } else if let Some(l) = args.segment_length {
        m.segmentation = Segmentation::Length(l);
    }
    m.validate()?;

    let series = m.input.is_some().then(|| m.load_series()).transpose()?;
    let series_length = match (&series, m.segmentation) {
        (Some(s), _) => s.len(),
        (None, Segmentation::MatchSeries) => bail!(
            "reference segments follow the analysed series length; give --input, --segment-length or --whole"
        ),
        (None, _) => 0,
    };

    let (result, reference_length) = match &m.reference {
        ReferenceSource::Fixed { .. } => bail!("a fixed threshold needs no calibration"),
        ReferenceSource::Pseudo => {
            let series = series.as_ref().context("--pseudo needs the series: pass --input or --sim-spec")?;
            (pipeline::pseudo_threshold(series, &m.pipeline(None)?, 0)?, m.reference_length)
        }
        ReferenceSource::Provided { path } => {
            let reference = read_series(path)?;
            let len = reference.len();
            let config = m.pipeline(Some(reference))?;
            (pipeline::shared_calibration(&config, series_length)?.expect("provided reference"), len)
        }
        ReferenceSource::SimulatedNormal { .. } => {
            let config = m.pipeline(None)?;
            (pipeline::shared_calibration(&config, series_length)?.expect("simulated reference"), m.reference_length)
        }
    };

    create_dir(&m.output_dir)?;
    let record = CalibrationRecord {
        config_hash: m.config_hash()?,
        segment_length: m.segmentation.segment_length(reference_length, series_length),
        manifest: m,
        result,
    };
    write_json(&record.manifest.output_dir.join(CALIBRATION_FILE), &record)?;
    println!(
        "q_alpha {} from {} null scores (alpha {})",
        record.result.q_alpha,
        record.result.null_scores.len(),
        record.result.alpha
    );
    Ok(())
}

pub fn call(args: CallArgs) -> Result<()> {
    let run: RunSummary = read_json(&args.fit.join(RUN_FILE))
        .with_context(|| format!("{} is not a fit directory", args.fit.display()))?;
    let (series, draws) = read_draws(&args.fit.join(DRAWS_FILE))?;

    let q_alpha = match (&args.calibration, args.q_alpha) {
        (Some(path), _) => read_json::<CalibrationRecord>(path)?.result.q_alpha,
        (None, Some(q)) => q,
        (None, None) => bail!(
            "no breakpoint threshold: run `rssm calibrate` and pass --calibration FILE, or give --q-alpha"
        ),
    };
    let mut m = run.manifest;
    m.reference = ReferenceSource::Fixed { q_alpha };
    if let Some(q) = args.q_eps {
        m.q_eps = q;
    }
    if let Some(s) = args.seed {
        m.seed = s;
    }
    m.output_dir = args.out.unwrap_or(args.fit);
    m.validate()?;

    let (breakpoints, outliers) = pipeline::call(&draws, &m.pipeline(None)?, q_alpha, 0)?;
    create_dir(&m.output_dir)?;
    write_text(
        &m.output_dir.join(CALLS_FILE),
        &format_call_table(&series, &[&breakpoints, &outliers]),
    )?;
    let mut summary = RunSummary::new(&m, &draws)?;
    summary.q_alpha = Some(q_alpha);
    summary.breakpoints = Some(breakpoints.len());
    summary.outliers = Some(outliers.len());
    write_json(&m.output_dir.join(CALL_RUN_FILE), &summary)?;
    println!(
        "{} breakpoints at q_alpha {q_alpha}, {} outliers at q_eps {}",
        breakpoints.len(),
        outliers.len(),
        m.q_eps
    );
    Ok(())
}

pub const TRUTH_COLUMNS: &str = "position\ttrue_mean\taberrant\toutlier";

#[derive(Serialize, Deserialize)]
struct SuiteIndex {
    spec: SimSpec,
    chromosomes: Vec<ChromosomeIndex>,
}

#[derive(Serialize, Deserialize)]
struct ChromosomeIndex {
    index: usize,
    series: PathBuf,
    truth: PathBuf,
    breakpoints: Vec<usize>,
    outliers: Vec<usize>,
}

pub fn simulate(args: SimulateArgs) -> Result<()> {
    let mut spec = match &args.spec {
        Some(path) => read_structured::<SimSpec>(path)?,
        None => SimSpec {
            seed: resolve_seed(args.seed),
            ..SimSpec::default()
        },
    };
    macro_rules! set {
        ($($field:ident <- $arg:ident),*) => {$( if let Some(v) = args.$arg { spec.$field = v; } )*};
    }
    set!(count <- count, length <- length, width <- width, snr <- snr, noise_sd <- noise_sd,
         outlier_fraction <- outliers, seed <- seed);
    if args.second_aberration {
        spec.second_aberration = Some(SecondAberration::default());
    }
    let suite = generate_lai(&spec)?;

    create_dir(&args.out)?;
    let mut chromosomes = Vec::with_capacity(suite.len());
    for (c, chrom) in suite.iter().enumerate() {
        let series = PathBuf::from(format!("chrom_{c:03}.tsv"));
        let truth = PathBuf::from(format!("truth_{c:03}.tsv"));
        write_text(&args.out.join(&series), &format_series(&chrom.series))?;
        let mut t = format!("{TRUTH_COLUMNS}\n");
        for (j, p) in chrom.series.positions().iter().enumerate() {
            let _ = writeln!(
                t,
                "{p}\t{}\t{}\t{}",
                chrom.true_mean[j],
                chrom.aberrant[j] as u8,
                chrom.outliers.contains(&j) as u8
            );
        }
        write_text(&args.out.join(&truth), &t)?;
        chromosomes.push(ChromosomeIndex {
            index: c,
            series,
            truth,
            breakpoints: chrom.breakpoints.clone(),
            outliers: chrom.outliers.clone(),
        });
    }
    write_json(&args.out.join("suite.json"), &SuiteIndex { spec, chromosomes })?;
    println!("wrote {} chromosomes to {}", suite.len(), args.out.display());
    Ok(())
}

/// Positions and aberration labels from a truth table.
fn read_truth(path: &Path) -> Result<(Vec<f64>, Vec<bool>)> {
    let text = read_text(path)?;
    let mut lines = text.lines();
    ensure!(
        lines.next() == Some(TRUTH_COLUMNS),
        "{}: expected header {TRUTH_COLUMNS:?}",
        path.display()
    );
    let mut positions = Vec::new();
    let mut labels = Vec::new();
    for (i, line) in lines.enumerate() {
        let f: Vec<&str> = line.split('\t').collect();
        ensure!(f.len() == 4, "{}:{}: expected 4 fields", path.display(), i + 2);
        positions.push(f[0].parse::<f64>().with_context(|| format!("{}:{}", path.display(), i + 2))?);
        labels.push(f[2] == "1");
    }
    Ok((positions, labels))
}

#[derive(Serialize)]
struct RocEntry {
    summary: PathBuf,
    truth: PathBuf,
    auc: f64,
}

pub fn roc(args: RocArgs) -> Result<()> {
    ensure!(
        args.summary.len() == args.truth.len(),
        "{} summary tables but {} truth tables",
        args.summary.len(),
        args.truth.len()
    );
    create_dir(&args.out)?;
    let mut entries = Vec::new();
    for (k, (s, t)) in args.summary.iter().zip(&args.truth).enumerate() {
        let rows = parse_summary_table(&read_text(s)?, s)?;
        let (positions, labels) = read_truth(t)?;
        let fitted: Vec<f64> = rows.iter().map(|r| r.position).collect();
        ensure!(
            fitted == positions,
            "{} and {} describe different probes",
            s.display(),
            t.display()
        );
        let curve: RocCurve = roc_curve(&signal_means(&rows), &labels)?;
        let mut table = String::from("fpr\ttpr\n");
        for p in &curve.points {
            let _ = writeln!(table, "{}\t{}", p.fpr, p.tpr);
        }
        write_text(&args.out.join(format!("roc_{k:03}.tsv")), &table)?;
        entries.push(RocEntry {
            summary: s.clone(),
            truth: t.clone(),
            auc: curve.auc,
        });
    }
    let finite: Vec<f64> = entries.iter().map(|e| e.auc).filter(|a| a.is_finite()).collect();
    let mean_auc = (!finite.is_empty()).then(|| finite.iter().sum::<f64>() / finite.len() as f64);
    write_json(
        &args.out.join("roc.json"),
        &serde_json::json!({ "curves": entries, "mean_auc": mean_auc }),
    )?;
    match mean_auc {
        Some(a) => println!("mean AUC {a} over {} curves", finite.len()),
        None => println!("no curve has both aberrant and normal probes"),
    }
    Ok(())
}
