use std::path::{Path, PathBuf};

use mlp_logdet::{sampler, Architecture};
use ndarray::Array2;
use serde::Serialize;

use crate::config::{ExperimentConfig, LoadedConfig};
use crate::error::CliError;
use crate::output::{self, Provenance};

pub const DATASET_FILE: &str = "dataset.csv";
pub const TRUTH_FILE: &str = "truth.json";

#[derive(Serialize)]
struct Truth<'a> {
    provenance: Provenance,
    arch: &'a Architecture,
    w0: Vec<f64>,
    #[serde(serialize_with = "mlp_logdet::io::as_rows")]
    gamma0: Array2<f64>,
    seed: u64,
    n: usize,
    config: &'a ExperimentConfig,
}

/// Samples the configured dataset; returns the output directory.
pub fn run(config_path: &Path, out_dir: Option<&Path>) -> Result<PathBuf, CliError> {
    let cfg = LoadedConfig::read(config_path)?;
    let n = cfg.data()?.n;
    let spec = cfg.gen_spec(n)?;
    let data = sampler::sample_dataset(&spec)?;

    let dir = cfg.out_dir(out_dir);
    output::create_dir(&dir)?;
    let mut csv = Vec::new();
    mlp_logdet::io::write_dataset_csv(&data, &mut csv).map_err(CliError::io("rendering dataset"))?;
    output::write_text(&dir.join(DATASET_FILE), std::str::from_utf8(&csv).expect("ASCII CSV"))?;
    let truth = Truth {
        provenance: output::provenance(),
        arch: spec.w0.arch(),
        w0: spec.w0.values().to_vec(),
        gamma0: spec.noise.gamma0.entries().to_owned(),
        seed: spec.seed,
        n,
        config: &cfg.config,
    };
    output::write_json(&dir.join(TRUTH_FILE), &truth)?;
    Ok(dir)
}
