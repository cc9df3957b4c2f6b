//! Monte Carlo study: Hessian limit, score covariance and the three-estimator
//! comparison, judged against the configured bands.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use mlp_logdet::lab::{self, HessianLimitTable, InfoMatrix, McReport, ScoreCltReport};
use serde::Serialize;

use crate::config::{EfficiencyExpectation, ExperimentConfig, LoadedConfig};
use crate::error::{CliError, EXIT_FAILURE, EXIT_OK};
use crate::output::{self, Provenance};

pub const REPORT_FILE: &str = "report.json";
pub const CSV_FILE: &str = "comparison.csv";
pub const MANIFEST_FILE: &str = "MANIFEST";

#[derive(Debug, Clone, Serialize)]
pub struct Band {
    pub name: &'static str,
    pub value: f64,
    pub threshold: f64,
    /// How `value` is compared with `threshold`.
    pub rule: &'static str,
    pub passed: bool,
}

impl Band {
    fn below(name: &'static str, value: f64, threshold: f64) -> Self {
        Band {
            name,
            value,
            threshold,
            rule: "value < threshold",
            passed: value < threshold,
        }
    }

    fn at_most(name: &'static str, value: f64, threshold: f64) -> Self {
        Band {
            name,
            value,
            threshold,
            rule: "value <= threshold",
            passed: value <= threshold,
        }
    }

    fn above(name: &'static str, value: f64, threshold: f64) -> Self {
        Band {
            name,
            value,
            threshold,
            rule: "value > threshold",
            passed: value > threshold,
        }
    }
}

#[derive(Debug, Serialize)]
struct StudyReport<'a> {
    provenance: Provenance,
    complete: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    warm_start_policy: &'static str,
    config: &'a ExperimentConfig,
    reference: Option<&'a InfoMatrix>,
    hessian_limit: Option<&'a HessianLimitTable>,
    score_clt: Option<&'a ScoreCltReport>,
    comparison: Option<&'a McReport>,
    bands: Vec<Band>,
    all_passed: bool,
}

/// Everything computed by a run; stages after a failure stay `None`.
#[derive(Debug, Default)]
pub struct StudyOutcome {
    pub reference: Option<InfoMatrix>,
    pub hessian_limit: Option<HessianLimitTable>,
    pub score_clt: Option<ScoreCltReport>,
    pub comparison: Option<McReport>,
    pub bands: Vec<Band>,
}

impl StudyOutcome {
    pub fn all_passed(&self) -> bool {
        !self.bands.is_empty() && self.bands.iter().all(|b| b.passed)
    }
}

pub fn evaluate_bands(
    cfg: &ExperimentConfig,
    hessian: &HessianLimitTable,
    score: &ScoreCltReport,
    cmp: &McReport,
) -> Vec<Band> {
    let b = &cfg.bands;
    let s = &cmp.summary;
    let score_half = score.ratio_band.1 - 1.0;
    let worst_ratio = score.variance_ratios.iter().fold(0.0f64, |m, r| m.max((r - 1.0).abs()));
    let worst_mean = score.mean_z.iter().fold(0.0f64, |m, z| m.max(z.abs()));
    let efficiency = match b.efficiency {
        EfficiencyExpectation::Gain => Band::above("efficiency_gain_sigmas", s.efficiency_z, b.efficiency_sigmas),
        EfficiencyExpectation::Parity => {
            Band::at_most("efficiency_parity_sigmas", s.efficiency_z.abs(), b.efficiency_sigmas)
        }
    };
    let mut trend = Band::at_most("hessian_limit_trend", 0.0, 0.0);
    if !hessian.trend_non_increasing {
        trend.value = 1.0;
        trend.passed = false;
    }
    vec![
        Band::below(
            "hessian_limit_final_distance",
            hessian.final_distance().unwrap_or(f64::INFINITY),
            b.hessian_limit,
        ),
        trend,
        Band::below("score_covariance_distance", score.distance, b.score_covariance),
        Band::at_most("score_variance_ratio_deviation", worst_ratio, score_half),
        Band::at_most("score_mean_sigmas", worst_mean, 4.0),
        Band::below("logdet_vs_bound", s.logdet_vs_bound, b.bound_distance),
        Band::below("logdet_vs_gls", s.logdet_vs_gls, b.gls_distance),
        efficiency,
        Band::at_most("failure_rate", s.max_failure_rate, b.max_failure_rate),
    ]
}

fn run_stages(cfg: &LoadedConfig, out: &mut StudyOutcome) -> Result<(), CliError> {
    let study = cfg.study()?.clone();
    let spec = cfg.gen_spec(study.n)?;
    let fit_cfg = cfg.fit_config();
    fit_cfg.validate()?;

    let i0 = lab::reference_i0(&spec, study.n_ref)?;
    // fail early on an unidentified truth: I₀ must be invertible
    i0.inverse()?;
    let i0 = out.reference.insert(i0);
    let hessian = lab::verify_hessian_limit(&spec.w0, &spec, &study.hessian_grid, i0)?;
    out.hessian_limit = Some(hessian);
    let score = lab::verify_score_clt(&spec.w0, &spec, study.score_replications, study.score_n, i0)?;
    out.score_clt = Some(score);
    let cmp = lab::run_comparison(&spec, study.n, study.replications, &fit_cfg, i0)?;
    out.comparison = Some(cmp);
    out.bands = evaluate_bands(
        &cfg.config,
        out.hessian_limit.as_ref().expect("set above"),
        out.score_clt.as_ref().expect("set above"),
        out.comparison.as_ref().expect("set above"),
    );
    Ok(())
}

/// `replication,estimator,converged,w1..wp,cost`; failed fits leave the
/// weight and cost fields empty.
pub fn comparison_csv(report: &McReport, p: usize) -> String {
    let render = mlp_logdet::io::render_f64;
    let mut s = String::from("replication,estimator,converged");
    for k in 1..=p {
        write!(s, ",w{k}").unwrap();
    }
    s.push_str(",cost\n");
    for r in &report.records {
        write!(s, "{},{},{}", r.replication, r.estimator.name(), r.converged).unwrap();
        match &r.w {
            Some(w) => w.iter().for_each(|v| write!(s, ",{}", render(*v)).unwrap()),
            None => (0..p).for_each(|_| s.push(',')),
        }
        match r.cost {
            Some(c) => writeln!(s, ",{}", render(c)).unwrap(),
            None => s.push_str(",\n"),
        }
    }
    s
}

fn write_manifest(dir: &Path, complete: bool, files: &[&str]) -> Result<(), CliError> {
    let mut text = format!("status: {}\n", if complete { "complete" } else { "incomplete" });
    for f in files {
        text.push_str(f);
        text.push('\n');
    }
    output::write_text(&dir.join(MANIFEST_FILE), &text)
}

pub fn run(config_path: &Path, out_dir: Option<&Path>) -> Result<u8, CliError> {
    let cfg = LoadedConfig::read(config_path)?;
    cfg.study()?;
    let dir: PathBuf = cfg.out_dir(out_dir);
    output::create_dir(&dir)?;
    write_manifest(&dir, false, &[])?;

    let mut outcome = StudyOutcome::default();
    let result = run_stages(&cfg, &mut outcome);
    let report = StudyReport {
        provenance: output::provenance(),
        complete: result.is_ok(),
        error: result.as_ref().err().map(|e| e.to_string()),
        warm_start_policy: lab::WARM_START_POLICY,
        config: &cfg.config,
        reference: outcome.reference.as_ref(),
        hessian_limit: outcome.hessian_limit.as_ref(),
        score_clt: outcome.score_clt.as_ref(),
        comparison: outcome.comparison.as_ref(),
        bands: outcome.bands.clone(),
        all_passed: outcome.all_passed(),
    };
    output::write_json(&dir.join(REPORT_FILE), &report)?;
    let mut files = vec![REPORT_FILE];
    if let Some(cmp) = &outcome.comparison {
        output::write_text(&dir.join(CSV_FILE), &comparison_csv(cmp, cfg.architecture()?.param_count()))?;
        files.push(CSV_FILE);
    }
    write_manifest(&dir, result.is_ok(), &files)?;
    result?;

    for b in &outcome.bands {
        println!(
            "[{}] {}: {} ({})",
            if b.passed { "PASS" } else { "FAIL" },
            b.name,
            mlp_logdet::io::render_f64(b.value),
            b.rule.replace("threshold", &mlp_logdet::io::render_f64(b.threshold))
        );
    }
    Ok(if outcome.all_passed() { EXIT_OK } else { EXIT_FAILURE })
}
