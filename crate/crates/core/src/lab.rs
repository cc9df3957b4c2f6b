//! Monte Carlo checks of the large-sample behaviour of the log-det estimator.
//!
//! Three experiments, all at a known truth `W⁰` and noise covariance `Γ₀`:
//!
//! * [`verify_hessian_limit`]: `H U_n(W⁰) → 2 I₀` along a grid of sample sizes;
//! * [`verify_score_clt`]: `cov(√n ∇U_n(W⁰)) → 4 I₀`;
//! * [`run_comparison`]: scaled-error covariances of the log-det, OLS and
//!   GLS(Γ₀) estimators against `I₀⁻¹`.
//!
//! with `I₀[k][l] = tr(Γ₀⁻¹ E[∂F/∂W_k ∂F/∂W_lᵀ])`.
//!
//! Fits in [`run_comparison`] start at `W⁰ + N(0, 0.01²)`: the limit theory is
//! local to `W⁰`, and hidden-unit permutation and sign symmetries would make
//! globally fitted weights incomparable across replications.

use ndarray::{Array1, Array2, Axis};
use rayon::prelude::*;
use serde::Serialize;

use crate::cost::{self, CostKind, Dataset};
use crate::error::{Error, Result};
use crate::io;
use crate::mlp::{self, ParamVector};
use crate::optimizer::{self, FitConfig};
use crate::rng::{Purpose, RNG_ALGORITHM};
use crate::sampler::{self, GenSpec};
use crate::spd::SpdMatrix;

/// Standard deviation of the warm-start perturbation around `W⁰`.
pub const WARM_START_SD: f64 = 0.01;
pub const WARM_START_POLICY: &str = "each fit starts at W0 + N(0, 0.01^2) per coordinate (warm start at truth)";
/// Input draws for the reference `I₀`.
pub const DEFAULT_N_REF: usize = 100_000;
pub const MIN_REPLICATIONS: usize = 200;

// Stream index bases so that the experiments never share datasets.
const SCORE_STREAM_BASE: u64 = 1 << 32;
const HESSIAN_STREAM_BASE: u64 = 2 << 32;
const CONSISTENCY_STREAM_BASE: u64 = 3 << 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum InfoSource {
    AtTrueGamma,
    PluginGamma,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InfoMatrix {
    #[serde(serialize_with = "io::as_rows")]
    pub i0: Array2<f64>,
    pub source: InfoSource,
    /// Number of inputs averaged in place of the expectation.
    pub n_inputs: usize,
}

impl InfoMatrix {
    pub fn inverse(&self) -> Result<Array2<f64>> {
        Ok(SpdMatrix::new(&self.i0)?.inverse()?.entries().to_owned())
    }
}

/// `I₀[k][l] = tr(Γ⁻¹ B̄_kl)` with `B̄` averaged over the dataset's inputs.
pub fn estimate_i0(
    w: &ParamVector<f64>,
    data: &Dataset<f64>,
    gamma: &SpdMatrix<f64>,
    source: InfoSource,
) -> Result<InfoMatrix> {
    data.check_arch(w.arch())?;
    if gamma.dim() != data.output_dim() {
        return Err(Error::dim("information weight dimension", data.output_dim(), gamma.dim()));
    }
    let p = w.len();
    let mut acc = Array2::<f64>::zeros((p, p));
    for z in data.inputs().rows() {
        let jac = mlp::jacobian(w, z)?;
        let jg = gamma.solve_rows(&jac)?;
        acc.scaled_add(1.0, &jg.dot(&jac.t()));
    }
    acc /= data.n() as f64;
    Ok(InfoMatrix {
        i0: cost::symmetrize(&acc),
        source,
        n_inputs: data.n(),
    })
}

/// `I₀` at `(spec.w0, Γ₀)` from `n_ref` dedicated input draws.
pub fn reference_i0(spec: &GenSpec<f64>, n_ref: usize) -> Result<InfoMatrix> {
    let arch = spec.w0.arch();
    let inputs = sampler::standard_normal_matrix(n_ref, arch.input_dim, spec.seed, Purpose::Reference, 0);
    let data = Dataset::new(inputs, Array2::zeros((n_ref, arch.output_dim)))?;
    estimate_i0(&spec.w0, &data, &spec.noise.gamma0, InfoSource::AtTrueGamma)
}

pub fn frobenius(m: &Array2<f64>) -> f64 {
    m.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `‖a − b‖_F / ‖b‖_F`.
pub fn rel_frobenius(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    frobenius(&(a - b)) / frobenius(b)
}

/// Empirical covariance of the rows of `x` (divisor `R − 1`).
pub fn covariance(x: &Array2<f64>) -> Array2<f64> {
    let r = x.nrows();
    let mean = x.mean_axis(Axis(0)).expect("at least one row");
    let centered = x - &mean;
    centered.t().dot(&centered) / (r as f64 - 1.0)
}

/// True when the sequence, after a 3-point running median (endpoints kept),
/// never increases.
pub fn non_increasing_trend(values: &[f64]) -> bool {
    let m = values.len();
    let filtered: Vec<f64> = (0..m)
        .map(|i| {
            if i == 0 || i + 1 == m {
                values[i]
            } else {
                let mut w = [values[i - 1], values[i], values[i + 1]];
                w.sort_by(f64::total_cmp);
                w[1]
            }
        })
        .collect();
    filtered.windows(2).all(|w| w[1] <= w[0])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HessianLimitRow {
    pub n: usize,
    /// `‖H U_n(w) − 2I₀‖_F / ‖2I₀‖_F`; absent when the evaluation failed.
    pub distance: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HessianLimitTable {
    pub rows: Vec<HessianLimitRow>,
    pub trend_non_increasing: bool,
}

impl HessianLimitTable {
    pub fn final_distance(&self) -> Option<f64> {
        self.rows.last().and_then(|r| r.distance)
    }
}

/// Distance of the log-det Hessian at `w` to `2 I₀` for each sample size in
/// `n_grid`. Meaningful only for `w` equal to (or near) `spec.w0`.
pub fn verify_hessian_limit(
    w: &ParamVector<f64>,
    spec: &GenSpec<f64>,
    n_grid: &[usize],
    i0: &InfoMatrix,
) -> Result<HessianLimitTable> {
    if n_grid.is_empty() || n_grid.windows(2).any(|p| p[1] <= p[0]) {
        return Err(Error::InvalidArgument("n_grid must be non-empty and increasing".into()));
    }
    let target = &i0.i0 * 2.0;
    let rows: Vec<HessianLimitRow> = n_grid
        .par_iter()
        .enumerate()
        .map(|(i, &n)| {
            let res = sampler::sample_replication(&spec.with_n(n), HESSIAN_STREAM_BASE + i as u64)
                .and_then(|data| cost::hessian(&CostKind::LogDet, w, &data));
            match res {
                Ok(h) => HessianLimitRow {
                    n,
                    distance: Some(rel_frobenius(&h, &target)),
                    error: None,
                },
                Err(e) => HessianLimitRow {
                    n,
                    distance: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    let dists: Vec<f64> = rows.iter().filter_map(|r| r.distance).collect();
    Ok(HessianLimitTable {
        trend_non_increasing: non_increasing_trend(&dists),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreCltReport {
    pub n: usize,
    pub replications: usize,
    pub failures: usize,
    /// Empirical covariance of `√n ∇U_n(W⁰)`.
    #[serde(serialize_with = "io::as_rows")]
    pub covariance: Array2<f64>,
    #[serde(serialize_with = "io::as_vec")]
    pub mean: Array1<f64>,
    /// `‖cov − 4I₀‖_F / ‖4I₀‖_F`.
    pub distance: f64,
    /// `var_k / (4 I₀[k][k])`.
    pub variance_ratios: Vec<f64>,
    /// Accepted band `1 ± 4/√R` for the variance ratios.
    pub ratio_band: (f64, f64),
    /// `mean_k / (σ̂_k/√R)`.
    pub mean_z: Vec<f64>,
}

impl ScoreCltReport {
    pub fn ratios_within_band(&self) -> bool {
        self.variance_ratios
            .iter()
            .all(|&r| r >= self.ratio_band.0 && r <= self.ratio_band.1)
    }
}

/// Covariance of the scaled score `√n ∇U_n(w)` over `replications` datasets.
pub fn verify_score_clt(
    w: &ParamVector<f64>,
    spec: &GenSpec<f64>,
    replications: usize,
    n: usize,
    i0: &InfoMatrix,
) -> Result<ScoreCltReport> {
    if replications < MIN_REPLICATIONS {
        return Err(Error::InvalidArgument(format!(
            "score study needs at least {MIN_REPLICATIONS} replications, got {replications}"
        )));
    }
    let spec_n = spec.with_n(n);
    let scale = (n as f64).sqrt();
    let scores: Vec<Result<Array1<f64>>> = (0..replications)
        .into_par_iter()
        .map(|r| {
            let data = sampler::sample_replication(&spec_n, SCORE_STREAM_BASE + r as u64)?;
            Ok(cost::gradient(&CostKind::LogDet, w, &data)? * scale)
        })
        .collect();
    let ok: Vec<Array1<f64>> = scores.into_iter().filter_map(Result::ok).collect();
    let failures = replications - ok.len();
    if ok.len() < 2 {
        return Err(Error::InvalidArgument("fewer than two successful score replications".into()));
    }
    let p = w.len();
    let mut x = Array2::zeros((ok.len(), p));
    for (i, s) in ok.iter().enumerate() {
        x.row_mut(i).assign(s);
    }
    let cov = covariance(&x);
    let mean = x.mean_axis(Axis(0)).expect("rows");
    let target = &i0.i0 * 4.0;
    let rr = ok.len() as f64;
    let half = 4.0 / (replications as f64).sqrt();
    Ok(ScoreCltReport {
        n,
        replications,
        failures,
        distance: rel_frobenius(&cov, &target),
        variance_ratios: (0..p).map(|k| cov[[k, k]] / target[[k, k]]).collect(),
        ratio_band: (1.0 - half, 1.0 + half),
        mean_z: (0..p).map(|k| mean[k] / (cov[[k, k]].sqrt() / rr.sqrt())).collect(),
        covariance: cov,
        mean,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    LogDet,
    Ols,
    GlsTrue,
}

impl Estimator {
    pub const ALL: [Estimator; 3] = [Estimator::LogDet, Estimator::Ols, Estimator::GlsTrue];

    pub fn name(self) -> &'static str {
        match self {
            Estimator::LogDet => "logdet",
            Estimator::Ols => "ols",
            Estimator::GlsTrue => "gls-true",
        }
    }

    fn cost_kind(self, gamma0: &SpdMatrix<f64>) -> CostKind<f64> {
        match self {
            Estimator::LogDet => CostKind::LogDet,
            Estimator::Ols => CostKind::Ols,
            Estimator::GlsTrue => CostKind::Gls(gamma0.clone()),
        }
    }
}

/// One fit inside one replication (persisted as a CSV row, not JSON).
#[derive(Debug, Clone, PartialEq)]
pub struct FitRecord {
    pub replication: usize,
    pub estimator: Estimator,
    pub converged: bool,
    /// Fitted weights; absent when every restart failed.
    pub w: Option<Array1<f64>>,
    pub cost: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorSummary {
    pub estimator: Estimator,
    pub converged: usize,
    pub failed: usize,
    /// Covariance of `√n(Ŵ − W⁰)` over the paired replications.
    #[serde(serialize_with = "io::as_rows")]
    pub scaled_cov: Array2<f64>,
    pub trace: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonSummary {
    /// `‖S_logdet − I₀⁻¹‖_F / ‖I₀⁻¹‖_F`.
    pub logdet_vs_bound: f64,
    /// `‖S_logdet − S_gls‖_F / ‖I₀⁻¹‖_F`.
    pub logdet_vs_gls: f64,
    /// `tr(S_ols) / tr(S_logdet)`.
    pub efficiency_ratio: f64,
    /// Delta-method standard error of the ratio over paired replications.
    pub efficiency_se: f64,
    /// `(ratio − 1) / se`.
    pub efficiency_z: f64,
    pub max_failure_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McReport {
    pub n: usize,
    pub replications: usize,
    /// Replications in which all three estimators converged.
    pub paired_replications: usize,
    pub warm_start_policy: &'static str,
    pub rng_algorithm: &'static str,
    #[serde(serialize_with = "io::as_rows")]
    pub i0: Array2<f64>,
    #[serde(serialize_with = "io::as_rows")]
    pub i0_inv: Array2<f64>,
    pub estimators: Vec<EstimatorSummary>,
    pub summary: ComparisonSummary,
    #[serde(skip)]
    pub records: Vec<FitRecord>,
}

impl McReport {
    pub fn estimator(&self, e: Estimator) -> &EstimatorSummary {
        self.estimators.iter().find(|s| s.estimator == e).expect("all estimators present")
    }
}

fn fit_one(
    est: Estimator,
    data: &Dataset<f64>,
    spec: &GenSpec<f64>,
    cfg: &FitConfig<f64>,
    replication: usize,
) -> FitRecord {
    let kind = est.cost_kind(&spec.noise.gamma0);
    match optimizer::minimize(&kind, data, spec.w0.arch(), cfg) {
        Ok(rep) => FitRecord {
            replication,
            estimator: est,
            converged: rep.converged,
            cost: Some(rep.final_cost),
            w: Some(rep.w_hat.into_values()),
            error: None,
        },
        Err(e) => FitRecord {
            replication,
            estimator: est,
            converged: false,
            w: None,
            cost: None,
            error: Some(e.to_string()),
        },
    }
}

/// Fits the log-det, OLS and GLS(Γ₀) estimators on `replications` datasets
/// of size `n` and compares their `√n`-scaled error covariances.
///
/// `cfg.warm_start` is overridden per replication with `W⁰ + N(0, 0.01²)`.
pub fn run_comparison(
    spec: &GenSpec<f64>,
    n: usize,
    replications: usize,
    cfg: &FitConfig<f64>,
    i0: &InfoMatrix,
) -> Result<McReport> {
    if replications < MIN_REPLICATIONS {
        return Err(Error::InvalidArgument(format!(
            "comparison needs at least {MIN_REPLICATIONS} replications, got {replications}"
        )));
    }
    cfg.validate()?;
    let spec_n = spec.with_n(n);
    let per_rep: Vec<Vec<FitRecord>> = (0..replications)
        .into_par_iter()
        .map(|r| {
            let warm = sampler::perturb(&spec.w0, WARM_START_SD, spec.seed, r as u64);
            let fit_cfg = FitConfig {
                warm_start: Some(warm),
                ..cfg.clone()
            };
            match sampler::sample_replication(&spec_n, r as u64) {
                Ok(data) => Estimator::ALL
                    .iter()
                    .map(|&e| fit_one(e, &data, spec, &fit_cfg, r))
                    .collect(),
                Err(err) => Estimator::ALL
                    .iter()
                    .map(|&e| FitRecord {
                        replication: r,
                        estimator: e,
                        converged: false,
                        w: None,
                        cost: None,
                        error: Some(err.to_string()),
                    })
                    .collect(),
            }
        })
        .collect();

    let paired: Vec<&Vec<FitRecord>> = per_rep
        .iter()
        .filter(|recs| recs.iter().all(|r| r.converged))
        .collect();
    if paired.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "only {} replications converged for all estimators",
            paired.len()
        )));
    }
    let p = spec.w0.len();
    let root_n = (n as f64).sqrt();
    let scaled = |idx: usize| {
        let mut x = Array2::<f64>::zeros((paired.len(), p));
        for (i, recs) in paired.iter().enumerate() {
            let w = recs[idx].w.as_ref().expect("converged fit has weights");
            x.row_mut(i).assign(&((w - spec.w0.values()) * root_n));
        }
        x
    };
    let xs: Vec<Array2<f64>> = (0..Estimator::ALL.len()).map(scaled).collect();
    let estimators: Vec<EstimatorSummary> = Estimator::ALL
        .iter()
        .enumerate()
        .map(|(i, &e)| {
            let converged = per_rep.iter().filter(|recs| recs[i].converged).count();
            let s = covariance(&xs[i]);
            EstimatorSummary {
                estimator: e,
                converged,
                failed: replications - converged,
                trace: s.diag().sum(),
                scaled_cov: s,
            }
        })
        .collect();

    let i0_inv = i0.inverse()?;
    let (s_ld, s_gls) = (&estimators[0].scaled_cov, &estimators[2].scaled_cov);
    let bound_norm = frobenius(&i0_inv);
    let (ratio, se) = trace_ratio_with_se(&xs[1], &xs[0]);
    let max_failure_rate = estimators
        .iter()
        .map(|s| s.failed as f64 / replications as f64)
        .fold(0.0, f64::max);
    let summary = ComparisonSummary {
        logdet_vs_bound: rel_frobenius(s_ld, &i0_inv),
        logdet_vs_gls: frobenius(&(s_ld - s_gls)) / bound_norm,
        efficiency_ratio: ratio,
        efficiency_se: se,
        efficiency_z: (ratio - 1.0) / se,
        max_failure_rate,
    };
    Ok(McReport {
        n,
        replications,
        paired_replications: paired.len(),
        warm_start_policy: WARM_START_POLICY,
        rng_algorithm: RNG_ALGORITHM,
        i0: i0.i0.clone(),
        i0_inv,
        estimators,
        summary,
        records: per_rep.into_iter().flatten().collect(),
    })
}

/// `tr(cov(num)) / tr(cov(den))` for paired rows, with its delta-method
/// standard error `sd(a − ρb) / (√R · mean(b))` where `a_r`, `b_r` are the
/// squared centered row norms.
pub fn trace_ratio_with_se(num: &Array2<f64>, den: &Array2<f64>) -> (f64, f64) {
    let sq_norms = |x: &Array2<f64>| {
        let mean = x.mean_axis(Axis(0)).expect("rows");
        (x - &mean).map_axis(Axis(1), |row| row.dot(&row))
    };
    let a = sq_norms(num);
    let b = sq_norms(den);
    let ratio = a.sum() / b.sum();
    let resid = &a - &(&b * ratio);
    let r = a.len() as f64;
    let m = resid.mean().expect("rows");
    let var = resid.mapv(|v| (v - m) * (v - m)).sum() / (r - 1.0);
    let se = (var / r).sqrt() / b.mean().expect("rows");
    (ratio, se)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyRow {
    pub n: usize,
    /// Median over converged replications of `‖Ŵ − W⁰‖∞`.
    pub median_sup_error: f64,
    pub failures: usize,
}

/// Median sup-norm error of the log-det estimator at each sample size.
pub fn consistency_study(
    spec: &GenSpec<f64>,
    ns: &[usize],
    replications: usize,
    cfg: &FitConfig<f64>,
) -> Result<Vec<ConsistencyRow>> {
    cfg.validate()?;
    ns.iter()
        .enumerate()
        .map(|(gi, &n)| {
            let spec_n = spec.with_n(n);
            let errs: Vec<Option<f64>> = (0..replications)
                .into_par_iter()
                .map(|r| {
                    let idx = CONSISTENCY_STREAM_BASE + (gi as u64) * (1 << 20) + r as u64;
                    let data = sampler::sample_replication(&spec_n, idx).ok()?;
                    let fit_cfg = FitConfig {
                        warm_start: Some(sampler::perturb(&spec.w0, WARM_START_SD, spec.seed, idx)),
                        ..cfg.clone()
                    };
                    let rep = optimizer::minimize(&CostKind::LogDet, &data, spec.w0.arch(), &fit_cfg).ok()?;
                    rep.converged.then(|| {
                        (rep.w_hat.values() - spec.w0.values())
                            .iter()
                            .fold(0.0f64, |m, v| m.max(v.abs()))
                    })
                })
                .collect();
            let mut ok: Vec<f64> = errs.iter().flatten().copied().collect();
            if ok.is_empty() {
                return Err(Error::InvalidArgument(format!("no converged fits at n = {n}")));
            }
            ok.sort_by(f64::total_cmp);
            let m = ok.len();
            let median = if m % 2 == 1 { ok[m / 2] } else { 0.5 * (ok[m / 2 - 1] + ok[m / 2]) };
            Ok(ConsistencyRow {
                n,
                median_sup_error: median,
                failures: replications - m,
            })
        })
        .collect()
}
