use std::path::PathBuf;

use clap::{Args, ValueEnum};
use mlp_logdet::optimizer::{self, Method};
use mlp_logdet::{Architecture, CostKind, FitConfig, FitReport};
use serde::Serialize;

use crate::data;
use crate::error::{CliError, EXIT_NOT_CONVERGED, EXIT_OK};
use crate::output::{self, Provenance};

pub const REPORT_FILE: &str = "fit_report.json";
pub const WEIGHTS_FILE: &str = "weights.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CostArg {
    Logdet,
    Ols,
    Gls,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodArg {
    QuasiNewton,
    DampedNewton,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitArgs {
    /// Dataset CSV with columns z1..zq,y1..yd.
    pub dataset: PathBuf,
    /// Hidden layer widths, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub hidden: Vec<usize>,
    #[arg(long, value_enum)]
    pub cost: CostArg,
    /// JSON weight matrix for --cost gls (a d×d array, or a truth file).
    #[arg(long)]
    pub gamma: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "quasi-newton")]
    pub method: MethodArg,
    #[arg(long, default_value_t = 10)]
    pub restarts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-6)]
    pub grad_tol: f64,
    #[arg(long, default_value_t = 1e-10)]
    pub cost_tol: f64,
    #[arg(long, default_value_t = 5000)]
    pub max_iters: usize,
    /// Weights JSON used as the starting point of restart 0.
    #[arg(long)]
    pub warm_start: Option<PathBuf>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Serialize)]
struct FitOutput<'a> {
    provenance: Provenance,
    command: &'a FitArgs,
    cost_kind: &'static str,
    n: usize,
    report: &'a FitReport,
}

pub fn run(args: &FitArgs) -> Result<u8, CliError> {
    let kind = match (args.cost, &args.gamma) {
        (CostArg::Gls, None) => return Err(CliError::Usage("--cost gls requires --gamma <file>".into())),
        (CostArg::Gls, Some(path)) => CostKind::Gls(data::read_gamma(path)?),
        (_, Some(_)) => return Err(CliError::Usage("--gamma is only used with --cost gls".into())),
        (CostArg::Logdet, None) => CostKind::LogDet,
        (CostArg::Ols, None) => CostKind::Ols,
    };
    let data = data::read_dataset(&args.dataset)?;
    let arch = Architecture::new(data.input_dim(), args.hidden.clone(), data.output_dim())
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let warm_start = match &args.warm_start {
        Some(p) => {
            let w = data::read_weights(p)?;
            if w.arch() != &arch {
                return Err(CliError::Usage(format!(
                    "{}: warm-start architecture does not match the dataset and --hidden",
                    p.display()
                )));
            }
            Some(w)
        }
        None => None,
    };
    let cfg = FitConfig {
        method: match args.method {
            MethodArg::QuasiNewton => Method::QuasiNewton,
            MethodArg::DampedNewton => Method::DampedNewton,
        },
        grad_tol: args.grad_tol,
        cost_tol: args.cost_tol,
        max_iters: args.max_iters,
        restarts: args.restarts,
        seed: args.seed,
        warm_start,
    };
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let report = optimizer::minimize(&kind, &data, &arch, &cfg)?;

    output::create_dir(&args.out_dir)?;
    let out = FitOutput {
        provenance: output::provenance(),
        command: args,
        cost_kind: kind.name(),
        n: data.n(),
        report: &report,
    };
    output::write_json(&args.out_dir.join(REPORT_FILE), &out)?;
    output::write_json(&args.out_dir.join(WEIGHTS_FILE), &report.w_hat)?;
    println!(
        "{} fit: cost {} after {} iterations ({:?}), converged: {}",
        kind.name(),
        mlp_logdet::io::render_f64(report.final_cost),
        report.iterations,
        report.stop_reason,
        report.converged
    );
    Ok(if report.converged { EXIT_OK } else { EXIT_NOT_CONVERGED })
}
