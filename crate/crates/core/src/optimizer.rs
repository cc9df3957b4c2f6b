//! Minimization of a [`CostKind`] over the MLP weights.
//!
//! The workhorse is a dense BFGS inverse-Hessian update with Armijo
//! backtracking. For the log-det criterion a damped Newton method driven by
//! the analytic Hessian is also available. Independent restarts run in
//! parallel; the selected result does not depend on the thread count.

use ndarray::{Array1, Array2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::{CostKind, Dataset, Objective};
use crate::error::{Error, RestartFailure, Result};
use crate::mlp::{self, Architecture, ParamVector};
use crate::scalar::Real;
use crate::spd::SpdMatrix;

/// Armijo sufficient-decrease constant.
pub const ARMIJO_C1: f64 = 1e-4;
pub const BACKTRACK_FACTOR: f64 = 0.5;
pub const MAX_HALVINGS: usize = 40;
/// BFGS updates are skipped when `yᵀs ≤ CURVATURE_SKIP·‖y‖‖s‖`.
pub const CURVATURE_SKIP: f64 = 1e-10;
pub const DAMPING_START: f64 = 1e-6;
pub const DAMPING_MAX: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    QuasiNewton,
    DampedNewton,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig<T> {
    pub method: Method,
    /// Sup-norm gradient tolerance.
    pub grad_tol: T,
    /// Relative cost decrease tolerance.
    pub cost_tol: T,
    pub max_iters: usize,
    pub restarts: usize,
    pub seed: u64,
    /// Starting point of restart 0. Later restarts always draw from
    /// [`mlp::init_random_stream`].
    pub warm_start: Option<ParamVector<T>>,
}

impl<T: Real> Default for FitConfig<T> {
    fn default() -> Self {
        Self {
            method: Method::QuasiNewton,
            grad_tol: T::lit(1e-6),
            cost_tol: T::lit(1e-10),
            max_iters: 5000,
            restarts: 10,
            seed: 0,
            warm_start: None,
        }
    }
}

impl<T: Real> FitConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.grad_tol > T::zero()) || !(self.cost_tol > T::zero()) {
            return Err(Error::InvalidArgument("tolerances must be positive".into()));
        }
        if self.max_iters == 0 || self.restarts == 0 {
            return Err(Error::InvalidArgument("max_iters and restarts must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    GradientTolerance,
    CostTolerance,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport<T> {
    pub w_hat: ParamVector<T>,
    pub final_cost: T,
    /// Sup norm of the gradient at `w_hat`.
    pub grad_norm: T,
    pub iterations: usize,
    pub converged: bool,
    pub stop_reason: StopReason,
    pub restarts_used: usize,
    /// Index of the restart that produced `w_hat`.
    pub best_restart: usize,
    pub initial_cost: T,
    /// Jitter added to `Γ_n` (nonzero only after a singular-covariance retry).
    pub jitter: T,
    /// Accepted costs of the selected restart, starting point first.
    pub cost_history: Vec<T>,
    pub failure_log: Vec<RestartFailure>,
}

/// Result of a successful backtracking search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineStep<T> {
    pub step: T,
    pub cost: T,
}

/// Armijo backtracking from step 1 with factor 1/2.
///
/// `cost_fn` returning an error at a trial point counts as a rejected step.
pub fn line_search<T, F>(
    mut cost_fn: F,
    x: &Array1<T>,
    f0: T,
    g0: &Array1<T>,
    direction: &Array1<T>,
) -> Result<LineStep<T>>
where
    T: Real,
    F: FnMut(&Array1<T>) -> Result<T>,
{
    let slope = g0.dot(direction);
    if !(slope < T::zero()) {
        return Err(Error::LineSearchBreakdown { halvings: 0 });
    }
    let c1 = T::lit(ARMIJO_C1);
    let mut step = T::one();
    for _ in 0..=MAX_HALVINGS {
        let trial = x + &(direction * step);
        if let Ok(f) = cost_fn(&trial) {
            if f <= f0 + c1 * step * slope {
                return Ok(LineStep { step, cost: f });
            }
        }
        step *= T::lit(BACKTRACK_FACTOR);
    }
    Err(Error::LineSearchBreakdown {
        halvings: MAX_HALVINGS,
    })
}

/// Outcome of [`damp_hessian`].
#[derive(Debug, Clone, PartialEq)]
pub enum Damped<T> {
    /// `H + lambda·I`, positive definite.
    Factored { matrix: SpdMatrix<T>, lambda: T },
    /// No damping up to the cap produced a positive definite matrix.
    Fallback,
}

/// Returns `H + λI` for the first `λ` in `lambda, 1e-6, 1e-5, …, 1e6` (values
/// not exceeding the given `lambda` are skipped) that factors.
pub fn damp_hessian<T: Real>(h: &Array2<T>, lambda: T) -> Damped<T> {
    let p = h.nrows();
    let mut lam = lambda.max(T::zero());
    let cap = T::lit(DAMPING_MAX);
    loop {
        let m = h + &(Array2::<T>::eye(p) * lam);
        if let Ok(matrix) = SpdMatrix::new(&m) {
            return Damped::Factored { matrix, lambda: lam };
        }
        lam = if lam < T::lit(DAMPING_START) {
            T::lit(DAMPING_START)
        } else {
            lam * T::lit(10.0)
        };
        if lam > cap * T::lit(1.000_001) {
            return Damped::Fallback;
        }
    }
}

fn sup_norm<T: Real>(v: &Array1<T>) -> T {
    v.iter().fold(T::zero(), |m, x| m.max(x.abs()))
}

/// One restart's trajectory.
struct Run<T> {
    w: ParamVector<T>,
    cost: T,
    grad_norm: T,
    iterations: usize,
    converged: bool,
    stop: StopReason,
    initial_cost: T,
    jitter: T,
    history: Vec<T>,
}

fn run_restart<T: Real>(
    kind: &CostKind<T>,
    data: &Dataset<T>,
    start: ParamVector<T>,
    cfg: &FitConfig<T>,
) -> Result<Run<T>> {
    let mut objective = Objective::new(kind, data);
    let first = match objective.value_and_gradient(&start) {
        Err(Error::SingularCovariance) => {
            objective = objective.with_jitter(objective.retry_jitter(&start)?);
            objective.value_and_gradient(&start)
        }
        other => other,
    };
    let (mut f, mut g) = first?;
    let mut w = start;
    let p = w.len();
    let newton = cfg.method == Method::DampedNewton;
    if newton && !matches!(kind, CostKind::LogDet) {
        return Err(Error::InvalidArgument(
            "damped Newton needs the analytic log-det Hessian".into(),
        ));
    }
    let mut hess = if newton {
        objective.evaluate(&w, true)?.hessian
    } else {
        None
    };
    let mut inv_h = Array2::<T>::eye(p);
    let mut identity_h = true;
    let initial_cost = f;
    let mut history = vec![f];
    let arch = w.arch().clone();
    let cost_fn = |x: &Array1<T>| objective.value(&ParamVector::new(arch.clone(), x.clone())?);

    let mut iterations = 0;
    let mut stop = StopReason::MaxIterations;
    while iterations < cfg.max_iters {
        if sup_norm(&g) <= cfg.grad_tol {
            stop = StopReason::GradientTolerance;
            break;
        }
        let steepest = g.mapv(|v| -v);
        let mut dir = match (&hess, newton) {
            (Some(h), true) => match damp_hessian(h, T::zero()) {
                Damped::Factored { matrix, .. } => matrix.solve_vec(steepest.view())?,
                Damped::Fallback => steepest.clone(),
            },
            _ => inv_h.dot(&steepest),
        };
        if !(g.dot(&dir) < T::zero()) {
            dir = steepest.clone();
            inv_h = Array2::eye(p);
            identity_h = true;
        }
        let x = w.values().clone();
        let (dir, step) = match line_search(cost_fn, &x, f, &g, &dir) {
            Ok(st) => (dir, st),
            Err(Error::LineSearchBreakdown { .. }) if dir != steepest => {
                inv_h = Array2::eye(p);
                identity_h = true;
                let st = line_search(cost_fn, &x, f, &g, &steepest)?;
                (steepest, st)
            }
            Err(e) => return Err(e),
        };
        let x_new = &x + &(&dir * step.step);
        let w_new = w.with_values(x_new)?;
        let (f_new, g_new, h_new) = if newton {
            let b = objective.evaluate(&w_new, true)?;
            (b.cost, b.gradient, b.hessian)
        } else {
            let (c, gr) = objective.value_and_gradient(&w_new)?;
            (c, gr, None)
        };
        iterations += 1;

        let s = w_new.values() - w.values();
        let y = &g_new - &g;
        let ys = y.dot(&s);
        let (ny, ns) = (y.dot(&y).sqrt(), s.dot(&s).sqrt());
        if !newton && ys > T::lit(CURVATURE_SKIP) * ny * ns {
            if identity_h {
                inv_h = Array2::eye(p) * (ys / y.dot(&y));
            }
            bfgs_update(&mut inv_h, &s, &y, ys);
            identity_h = false;
        }

        let decrease = f - f_new;
        let scale = f.abs().max(T::one());
        w = w_new;
        f = f_new;
        g = g_new;
        hess = h_new;
        history.push(f);
        if sup_norm(&g) <= cfg.grad_tol {
            stop = StopReason::GradientTolerance;
            break;
        }
        if decrease <= cfg.cost_tol * scale {
            stop = StopReason::CostTolerance;
            break;
        }
    }
    Ok(Run {
        grad_norm: sup_norm(&g),
        converged: stop != StopReason::MaxIterations,
        w,
        cost: f,
        iterations,
        stop,
        initial_cost,
        jitter: objective.jitter(),
        history,
    })
}

/// `H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ`, `ρ = 1/yᵀs`.
fn bfgs_update<T: Real>(h: &mut Array2<T>, s: &Array1<T>, y: &Array1<T>, ys: T) {
    let rho = T::one() / ys;
    let hy = h.dot(y);
    let yhy = y.dot(&hy);
    let p = s.len();
    let coef = (T::one() + rho * yhy) * rho;
    for i in 0..p {
        for j in 0..p {
            h[[i, j]] += coef * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
        }
    }
}

/// Best local minimizer of `kind` over `cfg.restarts` starts.
///
/// Among converged restarts the lowest final cost wins (ties go to the lower
/// restart index). If none converged the best unconverged run is returned
/// with `converged = false`. Fails only when every restart errored.
pub fn minimize<T: Real>(
    kind: &CostKind<T>,
    data: &Dataset<T>,
    arch: &Architecture,
    cfg: &FitConfig<T>,
) -> Result<FitReport<T>> {
    cfg.validate()?;
    data.check_arch(arch)?;
    if let Some(ws) = &cfg.warm_start {
        if ws.arch() != arch {
            return Err(Error::InvalidArgument("warm start architecture differs from the fit architecture".into()));
        }
    }
    let runs: Vec<Result<Run<T>>> = (0..cfg.restarts)
        .into_par_iter()
        .map(|i| {
            let start = match (&cfg.warm_start, i) {
                (Some(ws), 0) => ws.clone(),
                _ => mlp::init_random_stream(arch, cfg.seed, i as u64),
            };
            run_restart(kind, data, start, cfg)
        })
        .collect();

    let mut failures = Vec::new();
    let mut best: Option<(usize, Run<T>)> = None;
    for (i, run) in runs.into_iter().enumerate() {
        match run {
            Err(e) => failures.push(RestartFailure {
                restart: i,
                reason: e.to_string(),
            }),
            Ok(r) => {
                let better = match &best {
                    None => true,
                    Some((_, b)) => (r.converged, -r.cost) > (b.converged, -b.cost),
                };
                if better {
                    best = Some((i, r));
                }
            }
        }
    }
    let (idx, run) = best.ok_or_else(|| Error::AllRestartsFailed(failures.clone()))?;
    Ok(FitReport {
        w_hat: run.w,
        final_cost: run.cost,
        grad_norm: run.grad_norm,
        iterations: run.iterations,
        converged: run.converged,
        stop_reason: run.stop,
        restarts_used: cfg.restarts,
        best_restart: idx,
        initial_cost: run.initial_cost,
        jitter: run.jitter,
        cost_history: run.history,
        failure_log: failures,
    })
}

/// Second-order check at a log-det minimizer: the symmetrized analytic Hessian
/// plus `1e-6·(1 + max diag)·I` must factor.
pub fn local_min_certificate<T: Real>(w: &ParamVector<T>, data: &Dataset<T>) -> Result<bool> {
    let h = crate::cost::hessian(&CostKind::LogDet, w, data)?;
    let maxdiag = h.diag().iter().fold(T::neg_infinity(), |m, &v| m.max(v));
    let shift = T::lit(1e-6) * (T::one() + maxdiag.abs());
    let p = h.nrows();
    Ok(SpdMatrix::new(&(h + Array2::<T>::eye(p) * shift)).is_ok())
}
