//! Finite-difference and naive-algebra oracles for the cost derivatives.

use mlp_logdet::cost::{self, CostKind, Dataset, Objective};
use mlp_logdet::mlp::{self, Architecture, ParamVector};
use mlp_logdet::spd::{self, SpdMatrix};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

struct Instance {
    w: ParamVector<f64>,
    data: Dataset<f64>,
}

fn random_instance(rng: &mut ChaCha8Rng) -> Instance {
    let q = rng.random_range(1..=3);
    let h = rng.random_range(2..=3);
    let d = rng.random_range(1..=3);
    let n = rng.random_range(20..=200);
    let arch = Architecture::new(q, vec![h], d).unwrap();
    let p = arch.param_count();
    let w = ParamVector::new(arch.clone(), Array1::from_shape_fn(p, |_| rng.random_range(-2.0..2.0))).unwrap();
    let truth = ParamVector::new(arch, Array1::from_shape_fn(p, |_| rng.random_range(-1.0..1.0))).unwrap();
    let inputs = Array2::from_shape_fn((n, q), |_| rng.random_range(-3.0..3.0));
    let mut targets = Array2::zeros((n, d));
    for t in 0..n {
        let f = mlp::forward(&truth, inputs.row(t)).unwrap();
        for j in 0..d {
            let e: f64 = rng.sample(StandardNormal);
            targets[[t, j]] = f[j] + 0.5 * e;
        }
    }
    Instance {
        w,
        data: Dataset::new(inputs, targets).unwrap(),
    }
}

fn perturbed(w: &ParamVector<f64>, k: usize, h: f64) -> ParamVector<f64> {
    let mut v = w.values().clone();
    v[k] += h;
    w.with_values(v).unwrap()
}

fn fd_gradient(kind: &CostKind<f64>, w: &ParamVector<f64>, data: &Dataset<f64>) -> Array1<f64> {
    let h = 1e-6;
    Array1::from_shape_fn(w.len(), |k| {
        let up = cost::cost(kind, &perturbed(w, k, h), data).unwrap();
        let dn = cost::cost(kind, &perturbed(w, k, -h), data).unwrap();
        (up - dn) / (2.0 * h)
    })
}

fn fd_hessian(w: &ParamVector<f64>, data: &Dataset<f64>) -> Array2<f64> {
    let h = 1e-5;
    let p = w.len();
    let mut out = Array2::zeros((p, p));
    for l in 0..p {
        let up = cost::gradient(&CostKind::LogDet, &perturbed(w, l, h), data).unwrap();
        let dn = cost::gradient(&CostKind::LogDet, &perturbed(w, l, -h), data).unwrap();
        out.column_mut(l).assign(&((up - dn) / (2.0 * h)));
    }
    out
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

fn frob(m: &Array2<f64>) -> f64 {
    m.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[test]
fn gradient_matches_finite_differences_for_all_kinds() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let inst = random_instance(&mut rng);
        let d = inst.data.output_dim();
        let g = Array2::from_shape_fn((d, d), |_| rng.random_range(-1.0..1.0));
        let weight = SpdMatrix::new(&(g.dot(&g.t()) + Array2::<f64>::eye(d))).unwrap();
        for kind in [CostKind::LogDet, CostKind::Ols, CostKind::Gls(weight)] {
            let analytic = cost::gradient(&kind, &inst.w, &inst.data).unwrap();
            let numeric = fd_gradient(&kind, &inst.w, &inst.data);
            for (a, b) in analytic.iter().zip(numeric.iter()) {
                worst = worst.max(rel_err(*a, *b));
            }
        }
    }
    assert!(worst < 1e-6, "max relative gradient error {worst:e}");
}

#[test]
fn hessian_matches_finite_differences_of_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst: f64 = 0.0;
    for _ in 0..40 {
        let inst = random_instance(&mut rng);
        let h = cost::hessian(&CostKind::LogDet, &inst.w, &inst.data).unwrap();
        let fd = fd_hessian(&inst.w, &inst.data);
        let err = (&h - &fd).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        worst = worst.max(err);
    }
    assert!(worst < 1e-5, "max absolute Hessian error {worst:e}");
}

#[test]
fn hessian_is_symmetric_before_symmetrization() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let inst = random_instance(&mut rng);
        let raw = Objective::new(&CostKind::LogDet, &inst.data).hessian_terms(&inst.w).unwrap().total();
        let p = raw.nrows();
        for k in 0..p {
            for l in 0..p {
                assert!((raw[[k, l]] - raw[[l, k]]).abs() < 1e-8 * (1.0 + raw[[k, l]].abs()));
            }
        }
    }
}

/// Hessian terms rebuilt from the A/B/C matrices with an explicit `Γ_n⁻¹`.
#[test]
fn hessian_terms_match_explicit_inverse_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..5 {
        let inst = random_instance(&mut rng);
        let (w, data) = (&inst.w, &inst.data);
        let r = cost::residuals(w, data).unwrap();
        let n = data.n() as f64;
        let gamma = r.t().dot(&r) / n;
        let ginv = SpdMatrix::new(&gamma).unwrap().inverse().unwrap().entries().to_owned();
        let p = w.len();
        let s: Vec<Array2<f64>> = (0..p)
            .map(|k| {
                let a = cost::a_matrix(w, data, k).unwrap();
                &a + &a.t()
            })
            .collect();
        let terms = Objective::new(&CostKind::LogDet, data).hessian_terms(w).unwrap();
        for k in 0..p {
            for l in 0..p {
                let a = -ginv.dot(&s[k]).dot(&ginv).dot(&s[l]).diag().sum();
                let b = 2.0 * ginv.dot(&cost::b_matrix(w, data, k, l).unwrap()).diag().sum();
                let c = 2.0 * ginv.dot(&cost::c_matrix(w, data, k, l).unwrap()).diag().sum();
                assert!((terms.a_term[[k, l]] - a).abs() < 1e-10 * (1.0 + a.abs()), "a ({k},{l})");
                assert!((terms.b_term[[k, l]] - b).abs() < 1e-10 * (1.0 + b.abs()), "b ({k},{l})");
                assert!((terms.c_term[[k, l]] - c).abs() < 1e-10 * (1.0 + c.abs()), "c ({k},{l})");
            }
        }
    }
}

/// The first Hessian term written as `+4 tr(Γ⁻¹A_kΓ⁻¹A_k)` (or its mixed
/// variant `+4 tr(Γ⁻¹A_kΓ⁻¹A_l)`) does not reproduce the finite-difference
/// Hessian; the form implemented does.
#[test]
fn finite_differences_adjudicate_first_hessian_term() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let inst = random_instance_with_d(&mut rng, 2);
    let (w, data) = (&inst.w, &inst.data);
    let fd = fd_hessian(w, data);
    let terms = Objective::new(&CostKind::LogDet, data).hessian_terms(w).unwrap();
    let rest = &terms.b_term + &terms.c_term;
    let r = cost::residuals(w, data).unwrap();
    let ginv = SpdMatrix::new(&(r.t().dot(&r) / data.n() as f64))
        .unwrap()
        .inverse()
        .unwrap()
        .entries()
        .to_owned();
    let p = w.len();
    let a: Vec<Array2<f64>> = (0..p).map(|k| cost::a_matrix(w, data, k).unwrap()).collect();
    let literal = Array2::from_shape_fn((p, p), |(k, _)| 4.0 * ginv.dot(&a[k]).dot(&ginv).dot(&a[k]).diag().sum());
    let mixed = Array2::from_shape_fn((p, p), |(k, l)| 4.0 * ginv.dot(&a[k]).dot(&ginv).dot(&a[l]).diag().sum());

    let err = |m: &Array2<f64>| frob(&(m - &fd)) / frob(&fd);
    let implemented = err(&terms.total());
    assert!(implemented < 1e-7, "implemented form error {implemented:e}");
    assert!(err(&(&literal + &rest)) > 1e-3);
    assert!(err(&(&mixed + &rest)) > 1e-3);
}

fn random_instance_with_d(rng: &mut ChaCha8Rng, d: usize) -> Instance {
    loop {
        let inst = random_instance(rng);
        if inst.data.output_dim() == d {
            return inst;
        }
    }
}

#[test]
fn scalar_output_reduces_to_log_mean_square() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let inst = random_instance_with_d(&mut rng, 1);
    let (w, data) = (&inst.w, &inst.data);
    let n = data.n() as f64;
    let p = w.len();
    let r = cost::residuals(w, data).unwrap().column(0).to_owned();
    let jac: Vec<Array2<f64>> = (0..data.n()).map(|t| mlp::jacobian(w, data.inputs().row(t)).unwrap()).collect();
    let s = r.mapv(|v| v * v).sum() / n;
    let m = |k: usize| (0..data.n()).map(|t| r[t] * jac[t][[k, 0]]).sum::<f64>() / n;

    let g = cost::gradient(&CostKind::LogDet, w, data).unwrap();
    for k in 0..p {
        let expect = -2.0 * m(k) / s;
        assert!((g[k] - expect).abs() < 1e-12 * (1.0 + expect.abs()));
    }

    let h = cost::hessian(&CostKind::LogDet, w, data).unwrap();
    for k in 0..p {
        for l in 0..p {
            let jj = (0..data.n()).map(|t| jac[t][[k, 0]] * jac[t][[l, 0]]).sum::<f64>() / n;
            let rh = (0..data.n())
                .map(|t| r[t] * mlp::second_derivative(w, data.inputs().row(t), k, l).unwrap()[0])
                .sum::<f64>()
                / n;
            let expect = 2.0 * (jj - rh) / s - 4.0 * m(k) * m(l) / (s * s);
            assert!((h[[k, l]] - expect).abs() < 1e-10 * (1.0 + expect.abs()), "({k},{l})");
        }
    }
}

#[test]
fn trace_form_matches_solve_form_of_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..10 {
        let inst = random_instance(&mut rng);
        let (w, data) = (&inst.w, &inst.data);
        let r = cost::residuals(w, data).unwrap();
        let gamma = cost::empirical_cov(r.view(), 0.0).unwrap();
        let ginv = gamma.inverse().unwrap();
        let g = cost::gradient(&CostKind::LogDet, w, data).unwrap();
        for k in 0..w.len() {
            let a = cost::a_matrix(w, data, k).unwrap();
            let via_trace = 2.0 * spd::trace_product(ginv.entries(), a.view()).unwrap();
            assert!((via_trace - g[k]).abs() <= 1e-10 * g[k].abs().max(1e-3), "k={k}");
        }
    }
}

/// Near an interpolant the Hessian is dominated by `2 tr(Γ⁻¹B)`.
#[test]
fn near_interpolation_hessian_is_dominated_by_jacobian_term() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let arch = Architecture::new(2, vec![3], 2).unwrap();
    let w = mlp::init_random::<f64>(&arch, 4);
    let n = 400;
    let inputs = Array2::from_shape_fn((n, 2), |_| rng.random_range(-2.0..2.0));
    let mut targets = Array2::zeros((n, 2));
    for t in 0..n {
        let f = mlp::forward(&w, inputs.row(t)).unwrap();
        for j in 0..2 {
            let e: f64 = rng.sample(StandardNormal);
            targets[[t, j]] = f[j] + 1e-3 * e;
        }
    }
    let data = Dataset::new(inputs, targets).unwrap();
    let terms = Objective::new(&CostKind::LogDet, &data)
        .with_jitter(1e-12)
        .hessian_terms(&w)
        .unwrap();
    let total = terms.total();
    let rel = frob(&(&total - &terms.b_term)) / frob(&terms.b_term);
    assert!(rel < 0.2, "non-B share {rel}");
}

#[test]
fn jacobian_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let q = rng.random_range(1..=3);
        let arch = Architecture::new(q, vec![rng.random_range(1..=4), rng.random_range(1..=3)], rng.random_range(1..=3)).unwrap();
        let p = arch.param_count();
        let w = ParamVector::new(arch, Array1::from_shape_fn(p, |_| rng.random_range(-2.0..2.0))).unwrap();
        let z = Array1::from_shape_fn(q, |_| rng.random_range(-3.0..3.0));
        let jac = mlp::jacobian(&w, z.view()).unwrap();
        let h = 1e-6;
        for k in 0..p {
            let up = mlp::forward(&perturbed(&w, k, h), z.view()).unwrap();
            let dn = mlp::forward(&perturbed(&w, k, -h), z.view()).unwrap();
            let fd = (up - dn) / (2.0 * h);
            for (a, b) in jac.row(k).iter().zip(fd.iter()) {
                worst = worst.max(rel_err(*a, *b));
            }
        }
    }
    assert!(worst < 1e-6, "max relative jacobian error {worst:e}");
}

#[test]
fn second_derivative_matches_finite_differences_of_jacobian() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    for _ in 0..30 {
        let q = rng.random_range(1..=3);
        let arch = Architecture::new(q, vec![rng.random_range(1..=3), 2], rng.random_range(1..=3)).unwrap();
        let p = arch.param_count();
        let w = ParamVector::new(arch, Array1::from_shape_fn(p, |_| rng.random_range(-2.0..2.0))).unwrap();
        let z = Array1::from_shape_fn(q, |_| rng.random_range(-3.0..3.0));
        let h = 1e-5;
        for l in 0..p {
            let up = mlp::jacobian(&perturbed(&w, l, h), z.view()).unwrap();
            let dn = mlp::jacobian(&perturbed(&w, l, -h), z.view()).unwrap();
            let fd = (up - dn) / (2.0 * h);
            for k in 0..p {
                let exact = mlp::second_derivative(&w, z.view(), k, l).unwrap();
                let sym = mlp::second_derivative(&w, z.view(), l, k).unwrap();
                assert_eq!(exact, sym);
                for (a, b) in exact.iter().zip(fd.row(k).iter()) {
                    worst = worst.max((a - b).abs());
                }
            }
        }
    }
    assert!(worst < 1e-5, "max second-derivative error {worst:e}");
}
