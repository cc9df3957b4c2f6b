//! Cost kernels: the log-determinant criterion `U_n(W)` with its exact
//! gradient and Hessian, and the ordinary / generalized least squares
//! baselines.
//!
//! With residuals `r_t = Y_t − F_W(Z_t)`, Jacobian rows `j_{t,k} = ∂F_W(Z_t)/∂W_k`
//! and `Γ_n = (1/n) Σ r_t r_tᵀ`:
//!
//! * `∂U_n/∂W_k = 2 tr(Γ_n⁻¹ A_k)` with `A_k = −(1/n) Σ j_{t,k} r_tᵀ`,
//! * `∂²U_n/∂W_k∂W_l = −tr(Γ_n⁻¹ S_k Γ_n⁻¹ S_l) + 2 tr(Γ_n⁻¹ B_kl) + 2 tr(Γ_n⁻¹ C_kl)`
//!   with `S_k = A_k + A_kᵀ = ∂Γ_n/∂W_k`, `B_kl = (1/n) Σ j_{t,k} j_{t,l}ᵀ` and
//!   `C_kl = −(1/n) Σ r_t h_{t,kl}ᵀ`, `h_{t,kl} = ∂²F_W(Z_t)/∂W_k∂W_l`.
//!
//! `Γ_n⁻¹` is never formed: every product goes through the Cholesky factor.

use ndarray::{s, Array1, Array2, Array3, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::mlp::{self, Architecture, ParamVector};
use crate::scalar::Real;
use crate::spd::{self, SpdMatrix};

/// `n` paired observations, inputs `Z_t ∈ R^q` and targets `Y_t ∈ R^d` stored
/// row-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    inputs: Array2<T>,
    targets: Array2<T>,
}

impl<T: Real> Dataset<T> {
    pub fn new(inputs: Array2<T>, targets: Array2<T>) -> Result<Self> {
        if inputs.nrows() == 0 {
            return Err(Error::InvalidArgument("dataset needs at least one row".into()));
        }
        if inputs.nrows() != targets.nrows() {
            return Err(Error::dim("target rows", inputs.nrows(), targets.nrows()));
        }
        if inputs.ncols() == 0 || targets.ncols() == 0 {
            return Err(Error::InvalidArgument("inputs and targets need at least one column".into()));
        }
        Ok(Self { inputs, targets })
    }

    pub fn n(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.targets.ncols()
    }

    pub fn inputs(&self) -> ArrayView2<'_, T> {
        self.inputs.view()
    }

    pub fn targets(&self) -> ArrayView2<'_, T> {
        self.targets.view()
    }

    pub fn check_arch(&self, arch: &Architecture) -> Result<()> {
        if self.input_dim() != arch.input_dim {
            return Err(Error::dim("dataset input columns", arch.input_dim, self.input_dim()));
        }
        if self.output_dim() != arch.output_dim {
            return Err(Error::dim("dataset target columns", arch.output_dim, self.output_dim()));
        }
        Ok(())
    }
}

/// Which criterion to minimize.
#[derive(Debug, Clone, PartialEq)]
pub enum CostKind<T> {
    /// `ln det Γ_n(W)`.
    LogDet,
    /// `(1/n) Σ ‖r_t‖²`.
    Ols,
    /// `(1/n) Σ r_tᵀ Γ⁻¹ r_t` for a fixed weighting matrix `Γ`.
    Gls(SpdMatrix<T>),
}

impl<T> CostKind<T> {
    pub fn name(&self) -> &'static str {
        match self {
            CostKind::LogDet => "logdet",
            CostKind::Ols => "ols",
            CostKind::Gls(_) => "gls",
        }
    }
}

/// Cost value with its derivatives at one parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivBundle<T> {
    pub cost: T,
    pub gradient: Array1<T>,
    pub hessian: Option<Array2<T>>,
}

/// The three contributions to the log-det Hessian, before symmetrization.
#[derive(Debug, Clone, PartialEq)]
pub struct HessianTerms<T> {
    /// `−tr(Γ_n⁻¹ S_k Γ_n⁻¹ S_l)`; vanishes with the residual/Jacobian correlation.
    pub a_term: Array2<T>,
    /// `2 tr(Γ_n⁻¹ B_kl)`; the limit term.
    pub b_term: Array2<T>,
    /// `2 tr(Γ_n⁻¹ C_kl)`.
    pub c_term: Array2<T>,
}

impl<T: Real> HessianTerms<T> {
    pub fn total(&self) -> Array2<T> {
        &self.a_term + &self.b_term + &self.c_term
    }
}

fn check<T: Real>(w: &ParamVector<T>, data: &Dataset<T>) -> Result<()> {
    data.check_arch(w.arch())
}

fn check_index<T: Real>(w: &ParamVector<T>, k: usize) -> Result<()> {
    if k >= w.len() {
        return Err(Error::IndexOutOfRange {
            index: k,
            len: w.len(),
        });
    }
    Ok(())
}

fn finite<T: Real>(x: T, what: &'static str) -> Result<T> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::NonFinite(what))
    }
}

/// `n × d` matrix with row `t` equal to `Y_t − F_W(Z_t)`.
pub fn residuals<T: Real>(w: &ParamVector<T>, data: &Dataset<T>) -> Result<Array2<T>> {
    check(w, data)?;
    let mut r = data.targets.to_owned();
    for (z, mut row) in data.inputs.rows().into_iter().zip(r.rows_mut()) {
        let f = mlp::forward(w, z)?;
        row -= &f;
    }
    Ok(r)
}

/// `(1/n) Σ r_t r_tᵀ + jitter·I`, symmetrized and factored.
pub fn empirical_cov<T: Real>(r: ArrayView2<'_, T>, jitter: T) -> Result<SpdMatrix<T>> {
    let n = r.nrows();
    if n == 0 {
        return Err(Error::InvalidArgument("empirical covariance of zero rows".into()));
    }
    if jitter < T::zero() {
        return Err(Error::InvalidArgument(format!("jitter must be nonnegative, got {jitter}")));
    }
    let mut cov = r.t().dot(&r) / T::lit(n as f64);
    cov.diag_mut().mapv_inplace(|v| v + jitter);
    SpdMatrix::new(&cov).map_err(|e| match e {
        Error::NotPositiveDefinite { .. } => Error::SingularCovariance,
        other => other,
    })
}

/// `A_n(W_k) = −(1/n) Σ_t j_{t,k} r_tᵀ`.
pub fn a_matrix<T: Real>(w: &ParamVector<T>, data: &Dataset<T>, k: usize) -> Result<Array2<T>> {
    check(w, data)?;
    check_index(w, k)?;
    let d = data.output_dim();
    let mut acc = Array2::zeros((d, d));
    for (z, y) in data.inputs.rows().into_iter().zip(data.targets.rows()) {
        let (f, jac) = mlp::forward_jacobian(w, z)?;
        let r = &y - &f;
        let jk = jac.row(k);
        for i in 0..d {
            for j in 0..d {
                acc[[i, j]] -= jk[i] * r[j];
            }
        }
    }
    Ok(acc / T::lit(data.n() as f64))
}

/// `B_n(W_k, W_l) = (1/n) Σ_t j_{t,k} j_{t,l}ᵀ`.
pub fn b_matrix<T: Real>(
    w: &ParamVector<T>,
    data: &Dataset<T>,
    k: usize,
    l: usize,
) -> Result<Array2<T>> {
    check(w, data)?;
    check_index(w, k)?;
    check_index(w, l)?;
    let d = data.output_dim();
    let mut acc = Array2::zeros((d, d));
    for z in data.inputs.rows() {
        let jac = mlp::jacobian(w, z)?;
        let (jk, jl) = (jac.row(k), jac.row(l));
        for i in 0..d {
            for j in 0..d {
                acc[[i, j]] += jk[i] * jl[j];
            }
        }
    }
    Ok(acc / T::lit(data.n() as f64))
}

/// `C_n(W_k, W_l) = −(1/n) Σ_t r_t h_{t,kl}ᵀ`.
pub fn c_matrix<T: Real>(
    w: &ParamVector<T>,
    data: &Dataset<T>,
    k: usize,
    l: usize,
) -> Result<Array2<T>> {
    check(w, data)?;
    check_index(w, k)?;
    check_index(w, l)?;
    let d = data.output_dim();
    let mut acc = Array2::zeros((d, d));
    for (z, y) in data.inputs.rows().into_iter().zip(data.targets.rows()) {
        let r = &y - &mlp::forward(w, z)?;
        let h = mlp::second_derivative(w, z, k, l)?;
        for i in 0..d {
            for j in 0..d {
                acc[[i, j]] -= r[i] * h[j];
            }
        }
    }
    Ok(acc / T::lit(data.n() as f64))
}

/// A cost kind bound to a dataset, with the jitter used when forming `Γ_n`
/// for the log-det criterion.
#[derive(Debug, Clone, Copy)]
pub struct Objective<'a, T> {
    kind: &'a CostKind<T>,
    data: &'a Dataset<T>,
    jitter: T,
}

/// What [`Objective`] computes once residuals are known: the cost and the
/// weighted residuals `u_t` such that `∇ = −(2/n) Σ J_t u_t`.
struct Weighted<T> {
    cost: T,
    gamma: Option<SpdMatrix<T>>,
    residuals: Array2<T>,
    weighted: Array2<T>,
}

impl<'a, T: Real> Objective<'a, T> {
    pub fn new(kind: &'a CostKind<T>, data: &'a Dataset<T>) -> Self {
        Self {
            kind,
            data,
            jitter: T::zero(),
        }
    }

    pub fn with_jitter(mut self, jitter: T) -> Self {
        self.jitter = jitter;
        self
    }

    pub fn kind(&self) -> &'a CostKind<T> {
        self.kind
    }

    pub fn data(&self) -> &'a Dataset<T> {
        self.data
    }

    pub fn jitter(&self) -> T {
        self.jitter
    }

    /// `1e-8 · tr(Γ_n(W)) / d`, the fallback jitter after a singular `Γ_n`.
    pub fn retry_jitter(&self, w: &ParamVector<T>) -> Result<T> {
        let r = residuals(w, self.data)?;
        let n = T::lit(r.nrows() as f64);
        let tr = r.iter().map(|&v| v * v).sum::<T>() / n;
        finite(T::lit(1e-8) * tr / T::lit(r.ncols() as f64), "retry jitter")
    }

    fn weigh(&self, w: &ParamVector<T>) -> Result<Weighted<T>> {
        let r = residuals(w, self.data)?;
        let n = T::lit(r.nrows() as f64);
        let (cost, gamma, u) = match self.kind {
            CostKind::LogDet => {
                let gamma = empirical_cov(r.view(), self.jitter)?;
                let u = gamma.solve_rows(&r)?;
                (gamma.logdet(), Some(gamma), u)
            }
            CostKind::Ols => {
                let c = r.iter().map(|&v| v * v).sum::<T>() / n;
                (c, None, r.clone())
            }
            CostKind::Gls(weight) => {
                if weight.dim() != r.ncols() {
                    return Err(Error::dim("GLS weight dimension", r.ncols(), weight.dim()));
                }
                let u = weight.solve_rows(&r)?;
                let c = r.iter().zip(u.iter()).map(|(&a, &b)| a * b).sum::<T>() / n;
                (c, None, u)
            }
        };
        Ok(Weighted {
            cost: finite(cost, "cost")?,
            gamma,
            residuals: r,
            weighted: u,
        })
    }

    pub fn value(&self, w: &ParamVector<T>) -> Result<T> {
        Ok(self.weigh(w)?.cost)
    }

    pub fn value_and_gradient(&self, w: &ParamVector<T>) -> Result<(T, Array1<T>)> {
        let wt = self.weigh(w)?;
        let grad = self.gradient_from(w, &wt.weighted)?;
        Ok((wt.cost, grad))
    }

    fn gradient_from(&self, w: &ParamVector<T>, u: &Array2<T>) -> Result<Array1<T>> {
        let p = w.len();
        let d = self.data.output_dim();
        let mut jac = Array2::zeros((p, d));
        let mut grad = Array1::<T>::zeros(p);
        for (z, ut) in self.data.inputs.rows().into_iter().zip(u.rows()) {
            mlp::jacobian_into(w, z, &mut jac);
            grad.scaled_add(T::one(), &jac.dot(&ut));
        }
        let scale = -T::lit(2.0) / T::lit(self.data.n() as f64);
        grad.mapv_inplace(|g| g * scale);
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite("gradient"));
        }
        Ok(grad)
    }

    /// Cost, gradient and (for the log-det criterion, when requested) the
    /// symmetrized Hessian.
    pub fn evaluate(&self, w: &ParamVector<T>, with_hessian: bool) -> Result<DerivBundle<T>> {
        if !with_hessian {
            let (cost, gradient) = self.value_and_gradient(w)?;
            return Ok(DerivBundle {
                cost,
                gradient,
                hessian: None,
            });
        }
        let (cost, gradient, terms) = self.hessian_pass(w)?;
        Ok(DerivBundle {
            cost,
            gradient,
            hessian: Some(symmetrize(&terms.total())),
        })
    }

    /// The three Hessian contributions, unsymmetrized. Log-det criterion only.
    pub fn hessian_terms(&self, w: &ParamVector<T>) -> Result<HessianTerms<T>> {
        Ok(self.hessian_pass(w)?.2)
    }

    fn hessian_pass(&self, w: &ParamVector<T>) -> Result<(T, Array1<T>, HessianTerms<T>)> {
        if !matches!(self.kind, CostKind::LogDet) {
            return Err(Error::InvalidArgument(format!(
                "analytic Hessian is only available for the log-det cost, not {}",
                self.kind.name()
            )));
        }
        let wt = self.weigh(w)?;
        let gamma = wt.gamma.as_ref().expect("log-det keeps Γ_n");
        let arch = w.arch();
        let (p, d) = (w.len(), self.data.output_dim());
        let n = T::lit(self.data.n() as f64);
        let two = T::lit(2.0);

        // Pairs with a possibly nonzero second derivative of F.
        let pairs: Vec<(usize, usize)> = (0..p)
            .flat_map(|k| (k..p).map(move |l| (k, l)))
            .filter(|&(k, l)| {
                !(arch.in_output_layer(k) && arch.in_output_layer(l))
                    && !arch.is_output_bias(k)
                    && !arch.is_output_bias(l)
            })
            .collect();

        let mut a = Array3::<T>::zeros((p, d, d));
        let mut b_term = Array2::<T>::zeros((p, p));
        let mut c_term = Array2::<T>::zeros((p, p));
        let mut grad = Array1::<T>::zeros(p);
        let mut jac = Array2::<T>::zeros((p, d));
        let rows = self
            .data
            .inputs
            .rows()
            .into_iter()
            .zip(wt.residuals.rows())
            .zip(wt.weighted.rows());
        for ((z, r), u) in rows {
            mlp::jacobian_into(w, z, &mut jac);
            grad.scaled_add(T::one(), &jac.dot(&u));
            for k in 0..p {
                let mut ak = a.slice_mut(s![k, .., ..]);
                for i in 0..d {
                    for j in 0..d {
                        ak[[i, j]] -= jac[[k, i]] * r[j];
                    }
                }
            }
            // j_kᵀ Γ⁻¹ j_l for all (k, l)
            let jg = gamma.solve_rows(&jac)?;
            b_term.scaled_add(T::one(), &jg.dot(&jac.t()));
            for &(k, l) in &pairs {
                let h = mlp::second_derivative_unchecked(w, z, k, l);
                c_term[[k, l]] -= h.dot(&u);
            }
        }
        grad.mapv_inplace(|g| -g * two / n);
        b_term.mapv_inplace(|v| v * two / n);
        for &(k, l) in &pairs {
            c_term[[k, l]] = c_term[[k, l]] * two / n;
            c_term[[l, k]] = c_term[[k, l]];
        }
        a.mapv_inplace(|v| v / n);

        // M_k = Γ⁻¹ (A_k + A_kᵀ); a_term = −tr(M_k M_l)
        let m: Vec<Array2<T>> = a
            .axis_iter(Axis(0))
            .map(|ak| gamma.solve(&(&ak + &ak.t())))
            .collect::<Result<_>>()?;
        let mut a_term = Array2::<T>::zeros((p, p));
        for k in 0..p {
            for l in 0..p {
                a_term[[k, l]] = -spd::trace_product(m[k].view(), m[l].view())?;
            }
        }
        let terms = HessianTerms {
            a_term,
            b_term,
            c_term,
        };
        if terms.total().iter().any(|v| !v.is_finite()) || grad.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("hessian"));
        }
        Ok((wt.cost, grad, terms))
    }
}

/// `(H + Hᵀ)/2`.
pub fn symmetrize<T: Real>(h: &Array2<T>) -> Array2<T> {
    (h + &h.t()) * T::lit(0.5)
}

pub fn cost<T: Real>(kind: &CostKind<T>, w: &ParamVector<T>, data: &Dataset<T>) -> Result<T> {
    Objective::new(kind, data).value(w)
}

pub fn gradient<T: Real>(
    kind: &CostKind<T>,
    w: &ParamVector<T>,
    data: &Dataset<T>,
) -> Result<Array1<T>> {
    Ok(Objective::new(kind, data).value_and_gradient(w)?.1)
}

/// Symmetrized analytic Hessian of the log-det cost.
pub fn hessian<T: Real>(
    kind: &CostKind<T>,
    w: &ParamVector<T>,
    data: &Dataset<T>,
) -> Result<Array2<T>> {
    let bundle = Objective::new(kind, data).evaluate(w, true)?;
    Ok(bundle.hessian.expect("requested"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mlp::init_random;
    use ndarray::array;

    fn toy() -> (ParamVector<f64>, Dataset<f64>) {
        let arch = Architecture::new(2, vec![3], 2).unwrap();
        let w = init_random::<f64>(&arch, 1);
        let inputs = Array2::from_shape_fn((30, 2), |(t, j)| ((t * 7 + j * 3) as f64 * 0.37).sin() * 2.0);
        let targets = Array2::from_shape_fn((30, 2), |(t, j)| ((t * 5 + j * 11) as f64 * 0.53).cos());
        (w, Dataset::new(inputs, targets).unwrap())
    }

    #[test]
    fn dataset_validation() {
        assert!(Dataset::<f64>::new(Array2::zeros((0, 1)), Array2::zeros((0, 1))).is_err());
        assert!(matches!(
            Dataset::<f64>::new(Array2::zeros((3, 1)), Array2::zeros((2, 1))),
            Err(Error::DimensionMismatch { .. })
        ));
        let (w, data) = toy();
        let other = Architecture::new(3, vec![3], 2).unwrap();
        assert!(residuals(&ParamVector::zeros(other), &data).is_err());
        assert!(residuals(&w, &data).is_ok());
    }

    #[test]
    fn zero_output_residuals_are_targets() {
        let (w, data) = toy();
        let zero = ParamVector::zeros(w.arch().clone());
        assert_eq!(residuals(&zero, &data).unwrap(), data.targets());
    }

    #[test]
    fn exact_targets_give_zero_residuals() {
        let (w, data) = toy();
        let targets = Array2::from_shape_fn((data.n(), 2), |(t, j)| {
            mlp::forward(&w, data.inputs().row(t)).unwrap()[j]
        });
        let exact = Dataset::new(data.inputs().to_owned(), targets).unwrap();
        assert!(residuals(&w, &exact).unwrap().iter().all(|&v| v == 0.0));
        assert_eq!(cost(&CostKind::LogDet, &w, &exact), Err(Error::SingularCovariance));
        assert_eq!(a_matrix(&w, &exact, 0).unwrap(), Array2::<f64>::zeros((2, 2)));
        assert_eq!(c_matrix(&w, &exact, 0, 1).unwrap(), Array2::<f64>::zeros((2, 2)));
    }

    #[test]
    fn empirical_cov_examples() {
        let r = array![[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]];
        let g = empirical_cov(r.view(), 0.0).unwrap();
        assert_eq!(g.entries(), array![[0.5, 0.0], [0.0, 0.5]].view());
        let rank1 = array![[1.0, 1.0], [-1.0, -1.0]];
        assert_eq!(empirical_cov(rank1.view(), 0.0).unwrap_err(), Error::SingularCovariance);
        assert!(empirical_cov(rank1.view(), 1e-6).is_ok());
        assert!(empirical_cov(r.view(), -1.0).is_err());
    }

    #[test]
    fn scalar_costs() {
        let arch = Architecture::new(1, vec![1], 1).unwrap();
        let w = ParamVector::<f64>::zeros(arch);
        let data = Dataset::new(Array2::from_elem((5, 1), 0.3), Array2::from_elem((5, 1), 2.0)).unwrap();
        let ld = cost(&CostKind::LogDet, &w, &data).unwrap();
        assert!((ld - 4f64.ln()).abs() < 1e-15);
        assert_eq!(cost(&CostKind::Ols, &w, &data).unwrap(), 4.0);
    }

    #[test]
    fn gls_identity_is_ols() {
        let (w, data) = toy();
        let gls = CostKind::Gls(SpdMatrix::identity(2));
        assert_eq!(cost(&gls, &w, &data).unwrap(), cost(&CostKind::Ols, &w, &data).unwrap());
        let g1 = gradient(&gls, &w, &data).unwrap();
        let g2 = gradient(&CostKind::Ols, &w, &data).unwrap();
        for (a, b) in g1.iter().zip(g2.iter()) {
            assert!((a - b).abs() <= 1e-15);
        }
    }

    #[test]
    fn gls_at_frozen_gamma_matches_logdet_gradient() {
        let (w, data) = toy();
        let r = residuals(&w, &data).unwrap();
        let gamma = empirical_cov(r.view(), 0.0).unwrap();
        let g_gls = gradient(&CostKind::Gls(gamma), &w, &data).unwrap();
        let g_ld = gradient(&CostKind::LogDet, &w, &data).unwrap();
        for (a, b) in g_gls.iter().zip(g_ld.iter()) {
            assert!((a - b).abs() < 1e-14 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn gls_weight_dimension_is_checked() {
        let (w, data) = toy();
        let bad = CostKind::Gls(SpdMatrix::identity(3));
        assert!(matches!(cost(&bad, &w, &data), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn a_matrix_single_outer_product() {
        // F = output bias only path: arch q=1, h=[1], d=2 with zero weights;
        // the row for output bias 0 is e_0.
        let arch = Architecture::new(1, vec![1], 2).unwrap();
        let w = ParamVector::<f64>::zeros(arch.clone());
        let data = Dataset::new(array![[0.5]], array![[2.0, 3.0]]).unwrap();
        let k = arch.output_layer().bias_index(0);
        assert_eq!(a_matrix(&w, &data, k).unwrap(), array![[-2.0, -3.0], [0.0, 0.0]]);
        assert!(matches!(a_matrix(&w, &data, 99), Err(Error::IndexOutOfRange { .. })));
    }

    #[test]
    fn b_matrix_output_bias_pair() {
        let (w, data) = toy();
        let out = w.arch().output_layer();
        let b = b_matrix(&w, &data, out.bias_index(0), out.bias_index(1)).unwrap();
        assert_eq!(b, array![[0.0, 1.0], [0.0, 0.0]]);
        let bkk = b_matrix(&w, &data, 2, 2).unwrap();
        assert!(SpdMatrix::new(&(&bkk + &(Array2::<f64>::eye(2) * 1e-12))).is_ok());
        let bkl = b_matrix(&w, &data, 1, 4).unwrap();
        let blk = b_matrix(&w, &data, 4, 1).unwrap();
        assert_eq!(bkl, blk.t());
    }

    #[test]
    fn c_matrix_vanishes_in_output_layer() {
        let (w, data) = toy();
        let out = w.arch().output_layer();
        let c = c_matrix(&w, &data, out.weight_index(0, 1), out.weight_index(1, 2)).unwrap();
        assert_eq!(c, Array2::<f64>::zeros((2, 2)));
    }

    #[test]
    fn hessian_rejects_least_squares_kinds() {
        let (w, data) = toy();
        assert!(matches!(hessian(&CostKind::Ols, &w, &data), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn hessian_is_symmetric() {
        let (w, data) = toy();
        let h = hessian(&CostKind::LogDet, &w, &data).unwrap();
        assert_eq!(h, h.t());
    }
}
