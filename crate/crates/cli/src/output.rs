use std::path::Path;

use serde::Serialize;

use crate::error::CliError;

/// Identification embedded in every report.
#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub rng_algorithm: &'static str,
}

pub fn provenance() -> Provenance {
    Provenance {
        tool: "mlp-logdet",
        version: env!("CARGO_PKG_VERSION"),
        rng_algorithm: mlp_logdet::rng::RNG_ALGORITHM,
    }
}

pub fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(CliError::io(format!("creating {}", dir.display())))
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), CliError> {
    write_text(path, &mlp_logdet::io::to_json_string(value))
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(CliError::io(format!("writing {}", path.display())))
}
