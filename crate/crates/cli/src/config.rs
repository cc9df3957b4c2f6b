//! Experiment configuration files (TOML, unknown keys rejected).
//!
//! ```toml
//! seed = 20240611
//! out_dir = "out"
//!
//! [model]
//! q = 1
//! hidden = [2]
//! d = 2
//! w0 = [2.0, 1.0, -1.0, 1.0, 1.0, 0.8, -0.8, 1.0, 0.0, 0.0]
//!
//! [noise]
//! kind = "ar-like"
//! rho = 0.9
//! scale = 0.01
//!
//! [data]          # generate
//! n = 2000
//!
//! [study]         # montecarlo
//! n = 2000
//! replications = 300
//! ```

use std::path::{Path, PathBuf};

use mlp_logdet::mlp::{self, Activation, Architecture};
use mlp_logdet::optimizer::Method;
use mlp_logdet::sampler::{make_gamma0, Gamma0Kind};
use mlp_logdet::{FitConfig, GenSpec, ParamVector};
use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Output directory; relative paths resolve against the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    pub model: ModelSection,
    pub noise: NoiseSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<DataSection>,
    #[serde(default)]
    pub fit: FitSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub study: Option<StudySection>,
    #[serde(default)]
    pub bands: BandsSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub q: usize,
    pub hidden: Vec<usize>,
    pub d: usize,
    #[serde(default = "default_activation")]
    pub activation: Activation,
    /// True weights; drawn with the seeded initializer when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w0: Option<Vec<f64>>,
}

fn default_activation() -> Activation {
    Activation::Tanh
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    Identity,
    Equicorrelated,
    ArLike,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    pub kind: NoiseKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default = "one")]
    pub scale: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitSection {
    pub method: Method,
    pub grad_tol: f64,
    pub cost_tol: f64,
    pub max_iters: usize,
    pub restarts: usize,
}

impl Default for FitSection {
    fn default() -> Self {
        let d = FitConfig::default();
        Self {
            method: d.method,
            grad_tol: d.grad_tol,
            cost_tol: d.cost_tol,
            max_iters: d.max_iters,
            // Monte Carlo fits start at the truth
            restarts: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudySection {
    /// Sample size of each comparison replication.
    pub n: usize,
    pub replications: usize,
    #[serde(default = "default_n_ref")]
    pub n_ref: usize,
    #[serde(default = "default_grid")]
    pub hessian_grid: Vec<usize>,
    #[serde(default = "default_score_n")]
    pub score_n: usize,
    #[serde(default = "default_score_replications")]
    pub score_replications: usize,
}

fn default_n_ref() -> usize {
    mlp_logdet::lab::DEFAULT_N_REF
}
fn default_grid() -> Vec<usize> {
    vec![100, 1000, 10_000]
}
fn default_score_n() -> usize {
    2000
}
fn default_score_replications() -> usize {
    500
}

/// Whether OLS is expected to lose efficiency against the log-det estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EfficiencyExpectation {
    /// `(ratio − 1)/se > sigmas`.
    Gain,
    /// `|ratio − 1|/se ≤ sigmas`.
    Parity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BandsSection {
    pub hessian_limit: f64,
    pub score_covariance: f64,
    pub bound_distance: f64,
    pub gls_distance: f64,
    pub efficiency: EfficiencyExpectation,
    pub efficiency_sigmas: f64,
    pub max_failure_rate: f64,
}

impl Default for BandsSection {
    fn default() -> Self {
        Self {
            hessian_limit: 0.1,
            score_covariance: 0.15,
            bound_distance: 0.25,
            gls_distance: 0.25,
            efficiency: EfficiencyExpectation::Gain,
            efficiency_sigmas: 2.0,
            max_failure_rate: 0.05,
        }
    }
}

/// A parsed configuration together with its source, for line-anchored errors.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub path: PathBuf,
    source: String,
}

impl LoadedConfig {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let source = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&source, path)
    }

    pub fn parse(source: &str, path: &Path) -> Result<Self, CliError> {
        let config: ExperimentConfig =
            toml::from_str(source).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let loaded = Self {
            config,
            path: path.to_path_buf(),
            source: source.to_string(),
        };
        loaded.validate_common()?;
        Ok(loaded)
    }

    /// `path:line: message`, anchored at `key` inside `[section]` (or the top level).
    fn err(&self, section: Option<&str>, key: &str, msg: impl std::fmt::Display) -> CliError {
        let line = locate(&self.source, section, key);
        let at = match line {
            Some(l) => format!("{}:{l}", self.path.display()),
            None => self.path.display().to_string(),
        };
        let name = match section {
            Some(s) => format!("{s}.{key}"),
            None => key.to_string(),
        };
        CliError::Config(format!("{at}: {name}: {msg}"))
    }

    fn validate_common(&self) -> Result<(), CliError> {
        let c = &self.config;
        let arch = self.architecture()?;
        if let Some(w0) = &c.model.w0 {
            if w0.len() != arch.param_count() {
                return Err(self.err(
                    Some("model"),
                    "w0",
                    format!("expected {} values for this architecture, found {}", arch.param_count(), w0.len()),
                ));
            }
            if w0.iter().any(|v| !v.is_finite()) {
                return Err(self.err(Some("model"), "w0", "values must be finite"));
            }
        }
        self.gamma0()?;
        let f = &c.fit;
        if !(f.grad_tol > 0.0) || !(f.cost_tol > 0.0) {
            return Err(self.err(Some("fit"), "grad_tol", "tolerances must be positive"));
        }
        if f.max_iters == 0 {
            return Err(self.err(Some("fit"), "max_iters", "must be at least 1"));
        }
        if f.restarts == 0 {
            return Err(self.err(Some("fit"), "restarts", "must be at least 1"));
        }
        Ok(())
    }

    pub fn architecture(&self) -> Result<Architecture, CliError> {
        let m = &self.config.model;
        let arch = Architecture {
            input_dim: m.q,
            hidden_dims: m.hidden.clone(),
            output_dim: m.d,
            activation: m.activation,
        };
        arch.validate().map_err(|e| self.err(Some("model"), "hidden", e))?;
        Ok(arch)
    }

    pub fn gamma0(&self) -> Result<mlp_logdet::SpdMatrix, CliError> {
        let n = &self.config.noise;
        let kind = match (n.kind, n.rho) {
            (NoiseKind::Identity, None) => Gamma0Kind::Identity,
            (NoiseKind::Identity, Some(_)) => {
                return Err(self.err(Some("noise"), "rho", "not used by the identity kind"))
            }
            (_, None) => return Err(self.err(Some("noise"), "kind", "this kind requires rho")),
            (NoiseKind::Equicorrelated, Some(r)) => Gamma0Kind::Equicorrelated(r),
            (NoiseKind::ArLike, Some(r)) => Gamma0Kind::ArLike(r),
        };
        if !(n.scale > 0.0) || !n.scale.is_finite() {
            return Err(self.err(Some("noise"), "scale", "must be positive"));
        }
        make_gamma0(kind, self.config.model.d, n.scale).map_err(|e| self.err(Some("noise"), "rho", e))
    }

    pub fn w0(&self) -> Result<ParamVector, CliError> {
        let arch = self.architecture()?;
        match &self.config.model.w0 {
            Some(v) => ParamVector::new(arch, Array1::from(v.clone())).map_err(|e| self.err(Some("model"), "w0", e)),
            None => Ok(mlp::init_random(&arch, self.config.seed)),
        }
    }

    pub fn gen_spec(&self, n: usize) -> Result<GenSpec, CliError> {
        GenSpec::new(self.w0()?, self.gamma0()?, n, self.config.seed).map_err(|e| CliError::Config(e.to_string()))
    }

    /// `[data]` for dataset generation.
    pub fn data(&self) -> Result<&DataSection, CliError> {
        let data = self
            .config
            .data
            .as_ref()
            .ok_or_else(|| CliError::Config(format!("{}: missing [data] section", self.path.display())))?;
        if data.n == 0 {
            return Err(self.err(Some("data"), "n", "must be at least 1"));
        }
        Ok(data)
    }

    /// `[study]` for Monte Carlo runs.
    pub fn study(&self) -> Result<&StudySection, CliError> {
        let s = self
            .config
            .study
            .as_ref()
            .ok_or_else(|| CliError::Config(format!("{}: missing [study] section", self.path.display())))?;
        let min = mlp_logdet::lab::MIN_REPLICATIONS;
        if s.replications < min {
            return Err(self.err(Some("study"), "replications", format!("must be at least {min}")));
        }
        if s.score_replications < min {
            return Err(self.err(Some("study"), "score_replications", format!("must be at least {min}")));
        }
        if s.n <= self.config.model.d || s.score_n <= self.config.model.d {
            return Err(self.err(Some("study"), "n", "sample sizes must exceed the output dimension"));
        }
        if s.n_ref == 0 {
            return Err(self.err(Some("study"), "n_ref", "must be at least 1"));
        }
        if s.hessian_grid.is_empty() || s.hessian_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(self.err(Some("study"), "hessian_grid", "must be non-empty and strictly increasing"));
        }
        let b = &self.config.bands;
        let positive = [
            ("hessian_limit", b.hessian_limit),
            ("score_covariance", b.score_covariance),
            ("bound_distance", b.bound_distance),
            ("gls_distance", b.gls_distance),
            ("efficiency_sigmas", b.efficiency_sigmas),
        ];
        for (key, v) in positive {
            if !(v > 0.0) {
                return Err(self.err(Some("bands"), key, "must be positive"));
            }
        }
        if !(0.0..=1.0).contains(&b.max_failure_rate) {
            return Err(self.err(Some("bands"), "max_failure_rate", "must lie in [0, 1]"));
        }
        Ok(s)
    }

    pub fn fit_config(&self) -> FitConfig {
        let f = &self.config.fit;
        FitConfig {
            method: f.method,
            grad_tol: f.grad_tol,
            cost_tol: f.cost_tol,
            max_iters: f.max_iters,
            restarts: f.restarts,
            seed: self.config.seed,
            warm_start: None,
        }
    }

    pub fn out_dir(&self, overridden: Option<&Path>) -> PathBuf {
        if let Some(p) = overridden {
            return p.to_path_buf();
        }
        let base = self.path.parent().unwrap_or(Path::new("."));
        match &self.config.out_dir {
            Some(p) if p.is_absolute() => p.clone(),
            Some(p) => base.join(p),
            None => base.join("out"),
        }
    }
}

/// 1-based line of `key = ...` inside `[section]`, or of the section header
/// when the key is absent.
fn locate(source: &str, section: Option<&str>, key: &str) -> Option<usize> {
    let mut current: Option<String> = None;
    let mut header_line = None;
    for (i, raw) in source.lines().enumerate() {
        let line = raw.trim();
        if line.starts_with('[') {
            let name = line.trim_start_matches('[').split(']').next().unwrap_or("").trim().to_string();
            if Some(name.as_str()) == section {
                header_line = Some(i + 1);
            }
            current = Some(name);
            continue;
        }
        if current.as_deref() == section {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    header_line
}
