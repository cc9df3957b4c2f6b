//! Finite-difference audit of the analytic gradient and Hessian.

use clap::Args;
use mlp_logdet::cost::{self, CostKind};
use mlp_logdet::mlp;
use mlp_logdet::rng::{substream, Purpose};
use mlp_logdet::{Architecture, Dataset, ParamVector, SpdMatrix};
use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{CliError, EXIT_FAILURE, EXIT_OK};

pub const GRADIENT_TOL: f64 = 1e-6;
pub const HESSIAN_TOL: f64 = 1e-5;
const GRADIENT_STEP: f64 = 1e-6;
const HESSIAN_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Args)]
pub struct GradcheckArgs {
    /// Input dimension (random in 1..=3 when omitted).
    #[arg(long)]
    pub q: Option<usize>,
    /// Hidden layer widths, comma separated (one layer of width 2..=3 when omitted).
    #[arg(long, value_delimiter = ',')]
    pub hidden: Option<Vec<usize>>,
    /// Output dimension (random in 1..=3 when omitted).
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    /// Perturbs the analytic gradient to confirm the check can fail.
    #[arg(long, hide = true)]
    pub corrupt_gradient: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradcheckSummary {
    pub trials: usize,
    /// `max |a − b| / max(|a|, |b|, 1)` over all gradient entries and cost kinds.
    pub max_gradient_rel_error: f64,
    /// Max absolute entrywise Hessian error.
    pub max_hessian_abs_error: f64,
}

impl GradcheckSummary {
    pub fn passed(&self) -> bool {
        self.max_gradient_rel_error < GRADIENT_TOL && self.max_hessian_abs_error < HESSIAN_TOL
    }
}

struct Instance {
    w: ParamVector,
    data: Dataset,
    weight: SpdMatrix,
}

fn instance(args: &GradcheckArgs, trial: usize) -> Result<Instance, CliError> {
    let mut rng = substream(args.seed, Purpose::Instance, trial as u64);
    let q = args.q.unwrap_or_else(|| rng.random_range(1..=3));
    let hidden = args.hidden.clone().unwrap_or_else(|| vec![rng.random_range(2..=3)]);
    let d = args.d.unwrap_or_else(|| rng.random_range(1..=3));
    let n = rng.random_range(20..=200).max(d + 1);
    let arch = Architecture::new(q, hidden, d).map_err(|e| CliError::Usage(e.to_string()))?;
    let p = arch.param_count();
    let w = ParamVector::new(arch.clone(), Array1::from_shape_fn(p, |_| rng.random_range(-2.0..2.0)))?;
    let truth = ParamVector::new(arch, Array1::from_shape_fn(p, |_| rng.random_range(-1.0..1.0)))?;
    let inputs = Array2::from_shape_fn((n, q), |_| rng.random_range(-3.0..3.0));
    let mut targets = Array2::zeros((n, d));
    for t in 0..n {
        let f = mlp::forward(&truth, inputs.row(t))?;
        for j in 0..d {
            let e: f64 = rng.sample(StandardNormal);
            targets[[t, j]] = f[j] + 0.5 * e;
        }
    }
    let g = Array2::from_shape_fn((d, d), |_| rng.random_range(-1.0..1.0));
    let weight = SpdMatrix::new(&(g.dot(&g.t()) + Array2::<f64>::eye(d)))?;
    Ok(Instance {
        w,
        data: Dataset::new(inputs, targets)?,
        weight,
    })
}

fn shifted(w: &ParamVector, k: usize, h: f64) -> Result<ParamVector, CliError> {
    let mut v = w.values().clone();
    v[k] += h;
    Ok(w.with_values(v)?)
}

pub fn check(args: &GradcheckArgs) -> Result<GradcheckSummary, CliError> {
    let mut grad_err = 0.0f64;
    let mut hess_err = 0.0f64;
    for trial in 0..args.trials {
        let inst = instance(args, trial)?;
        let (w, data) = (&inst.w, &inst.data);
        for kind in [CostKind::LogDet, CostKind::Ols, CostKind::Gls(inst.weight.clone())] {
            let mut analytic = cost::gradient(&kind, w, data)?;
            if args.corrupt_gradient {
                analytic[0] += 1e-3 * (1.0 + analytic[0].abs());
            }
            for k in 0..w.len() {
                let up = cost::cost(&kind, &shifted(w, k, GRADIENT_STEP)?, data)?;
                let dn = cost::cost(&kind, &shifted(w, k, -GRADIENT_STEP)?, data)?;
                let fd = (up - dn) / (2.0 * GRADIENT_STEP);
                let a = analytic[k];
                grad_err = grad_err.max((a - fd).abs() / a.abs().max(fd.abs()).max(1.0));
            }
        }
        let h = cost::hessian(&CostKind::LogDet, w, data)?;
        for l in 0..w.len() {
            let up = cost::gradient(&CostKind::LogDet, &shifted(w, l, HESSIAN_STEP)?, data)?;
            let dn = cost::gradient(&CostKind::LogDet, &shifted(w, l, -HESSIAN_STEP)?, data)?;
            let col = (up - dn) / (2.0 * HESSIAN_STEP);
            for k in 0..w.len() {
                hess_err = hess_err.max((h[[k, l]] - col[k]).abs());
            }
        }
    }
    Ok(GradcheckSummary {
        trials: args.trials,
        max_gradient_rel_error: grad_err,
        max_hessian_abs_error: hess_err,
    })
}

pub fn run(args: &GradcheckArgs) -> Result<u8, CliError> {
    if args.trials == 0 {
        return Err(CliError::Usage("--trials must be at least 1".into()));
    }
    let s = check(args)?;
    let verdict = |ok: bool| if ok { "ok" } else { "FAIL" };
    println!("trials: {}", s.trials);
    println!(
        "gradient max relative error: {} (tolerance {GRADIENT_TOL:e}) {}",
        mlp_logdet::io::render_f64(s.max_gradient_rel_error),
        verdict(s.max_gradient_rel_error < GRADIENT_TOL)
    );
    println!(
        "hessian max absolute error: {} (tolerance {HESSIAN_TOL:e}) {}",
        mlp_logdet::io::render_f64(s.max_hessian_abs_error),
        verdict(s.max_hessian_abs_error < HESSIAN_TOL)
    );
    Ok(if s.passed() { EXIT_OK } else { EXIT_FAILURE })
}
