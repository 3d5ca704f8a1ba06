//! Run settings from a TOML file merged with command-line flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rssm::io::{InputSource, ReferenceSource, RunManifest};
use rssm::pipeline::Segmentation;
use rssm::simulation::SimSpec;
use rssm::{ChainConfig, Priors};
use serde::de::DeserializeOwned;
use serde::Deserialize;

use crate::{Common, InputArgs};

/// Mirror of [`RunManifest`] with every field optional.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub input: Option<InputSource>,
    pub priors: Option<Priors>,
    pub chain: Option<ChainConfig>,
    pub alpha: Option<f64>,
    pub q_eps: Option<f64>,
    pub reference: Option<ReferenceSource>,
    pub reference_length: Option<usize>,
    pub segmentation: Option<Segmentation>,
    pub credible_level: Option<f64>,
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
}

/// Reads JSON or TOML depending on the file extension.
pub fn read_structured<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))?;
    let parsed = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(anyhow::Error::from)
    } else {
        toml::from_str(&text).map_err(anyhow::Error::from)
    };
    parsed.with_context(|| format!("invalid settings in {}", path.display()))
}

pub fn input_source(args: &InputArgs) -> Result<Option<InputSource>> {
    Ok(match (&args.input, &args.sim_spec) {
        (Some(path), None) => Some(InputSource::File { path: path.clone() }),
        (None, Some(spec)) => Some(InputSource::Simulation {
            spec: read_structured::<SimSpec>(spec)?,
            index: args.sim_index,
        }),
        (None, None) => None,
        (Some(_), Some(_)) => bail!("give either --input or --sim-spec, not both"),
    })
}

/// Uses the given seed or draws one and reports it.
pub fn resolve_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let s = rand::random::<u64>();
        eprintln!("no seed given; using generated seed {s}");
        s
    })
}

/// Builds the manifest: defaults, then the config file, then flags.
pub fn manifest(common: &Common, input: Option<InputSource>) -> Result<RunManifest> {
    let file: FileConfig = match &common.config {
        Some(path) => read_structured(path)?,
        None => FileConfig::default(),
    };
    let input = input.or(file.input);
    let output_dir = common
        .out
        .clone()
        .or(file.output_dir)
        .context("no output directory; pass --out or set output_dir")?;
    let seed = resolve_seed(common.seed.or(file.seed));

    let mut m = RunManifest::new(input, output_dir, seed);
    if let Some(p) = file.priors {
        m.priors = p;
    }
    if let Some(c) = file.chain {
        m.chain = c;
    }
    macro_rules! take {
        ($($field:ident),*) => {$( if let Some(v) = file.$field { m.$field = v; } )*};
    }
    take!(alpha, q_eps, reference, reference_length, segmentation, credible_level);

    if let Some(v) = common.iterations {
        m.chain.iterations = v;
    }
    if let Some(v) = common.burn_in {
        m.chain.burn_in = v;
    }
    if let Some(v) = common.thin {
        m.chain.thin = v;
    }
    Ok(m)
}
