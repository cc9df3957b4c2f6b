use mlp_logdet::cost::Dataset;
use mlp_logdet::lab::{self, InfoSource};
use mlp_logdet::mlp::{self, Architecture, ParamVector};
use mlp_logdet::optimizer::FitConfig;
use mlp_logdet::sampler::{self, make_gamma0, Gamma0Kind, GenSpec};
use mlp_logdet::spd::SpdMatrix;
use mlp_logdet::Error;
use ndarray::{array, Array2};

fn toy_spec(kind: Gamma0Kind, scale: f64) -> GenSpec<f64> {
    let arch = Architecture::new(1, vec![2], 2).unwrap();
    let w0 = ParamVector::new(arch, array![2.0, 1.0, -1.0, 1.0, 1.0, 0.8, -0.8, 1.0, 0.0, 0.0]).unwrap();
    GenSpec::new(w0, make_gamma0(kind, 2, scale).unwrap(), 1000, 20240611).unwrap()
}

fn inputs(n: usize, q: usize, seed: u64) -> Dataset<f64> {
    let z = sampler::standard_normal_matrix(n, q, seed, mlp_logdet::rng::Purpose::Inputs, 0);
    Dataset::new(z, Array2::zeros((n, 2))).unwrap()
}

#[test]
fn information_is_symmetric_positive_definite() {
    let spec = toy_spec(Gamma0Kind::ArLike(0.9), 1.0);
    let info = lab::reference_i0(&spec, 20_000).unwrap();
    assert_eq!(info.i0, info.i0.t());
    assert!(SpdMatrix::new(&info.i0).is_ok());
    assert_eq!(info.source, InfoSource::AtTrueGamma);
    assert_eq!(info.n_inputs, 20_000);
}

#[test]
fn information_scales_inversely_with_the_weight() {
    let spec = toy_spec(Gamma0Kind::ArLike(0.5), 1.0);
    let data = inputs(2000, 1, 4);
    let g = &spec.noise.gamma0;
    let base = lab::estimate_i0(&spec.w0, &data, g, InfoSource::AtTrueGamma).unwrap();
    for c in [0.5, 2.0, 10.0] {
        let scaled = lab::estimate_i0(&spec.w0, &data, &g.scaled(c).unwrap(), InfoSource::AtTrueGamma).unwrap();
        let expected = &base.i0 / c;
        assert!(lab::rel_frobenius(&scaled.i0, &expected) < 1e-12, "c = {c}");
    }
}

#[test]
fn output_bias_block_equals_the_inverse_weight() {
    // ∂F/∂b_i = e_i for every input, so that block is Γ⁻¹ exactly
    let arch = Architecture::new(2, vec![3], 2).unwrap();
    let w = mlp::init_random::<f64>(&arch, 12);
    let g = make_gamma0::<f64>(Gamma0Kind::ArLike(0.7), 2, 0.3).unwrap();
    let ginv = g.inverse().unwrap();
    let z = sampler::standard_normal_matrix(50, 2, 1, mlp_logdet::rng::Purpose::Inputs, 0);
    let data = Dataset::new(z, Array2::zeros((50, 2))).unwrap();
    let info = lab::estimate_i0(&w, &data, &g, InfoSource::PluginGamma).unwrap();
    let out = arch.output_layer();
    for i in 0..2 {
        for j in 0..2 {
            let got = info.i0[[out.bias_index(i), out.bias_index(j)]];
            assert!((got - ginv.entries()[[i, j]]).abs() < 1e-12);
        }
    }
}

#[test]
fn reference_information_is_stable_in_sample_size() {
    let spec = toy_spec(Gamma0Kind::ArLike(0.9), 1.0);
    let small = lab::reference_i0(&spec, 10_000).unwrap();
    let large = lab::reference_i0(&spec, 100_000).unwrap();
    let dist = lab::rel_frobenius(&small.i0, &large.i0);
    assert!(dist < 0.02, "{dist}");
}

#[test]
fn hessian_limit_trend_survives_noise_rescaling() {
    for scale in [0.01, 0.04] {
        let spec = toy_spec(Gamma0Kind::ArLike(0.9), scale);
        let info = lab::reference_i0(&spec, 50_000).unwrap();
        let table = lab::verify_hessian_limit(&spec.w0, &spec, &[100, 1000, 10_000], &info).unwrap();
        assert!(table.trend_non_increasing, "scale {scale}: {table:?}");
        assert!(table.final_distance().unwrap() < 0.1);
    }
}

#[test]
fn hessian_limit_reports_singular_rows_without_failing() {
    let spec = toy_spec(Gamma0Kind::Identity, 1.0);
    let info = lab::reference_i0(&spec, 5_000).unwrap();
    // n = 1 gives a rank-one residual covariance
    let table = lab::verify_hessian_limit(&spec.w0, &spec, &[1, 500], &info).unwrap();
    assert!(table.rows[0].distance.is_none() && table.rows[0].error.is_some());
    assert!(table.rows[1].distance.is_some());
    assert!(lab::verify_hessian_limit(&spec.w0, &spec, &[500, 100], &info).is_err());
}

#[test]
fn score_is_centered_at_the_truth() {
    let spec = toy_spec(Gamma0Kind::ArLike(0.9), 0.01);
    let info = lab::reference_i0(&spec, 50_000).unwrap();
    let rep = lab::verify_score_clt(&spec.w0, &spec, 200, 500, &info).unwrap();
    assert_eq!(rep.failures, 0);
    assert!(rep.mean_z.iter().all(|z| z.abs() < 4.0), "{:?}", rep.mean_z);
    assert!(matches!(
        lab::verify_score_clt(&spec.w0, &spec, 1, 500, &info),
        Err(Error::InvalidArgument(_))
    ));
}

#[test]
fn comparison_accounts_for_every_replication() {
    let spec = toy_spec(Gamma0Kind::ArLike(0.9), 0.01);
    let info = lab::reference_i0(&spec, 20_000).unwrap();
    let cfg = FitConfig {
        restarts: 1,
        ..FitConfig::default()
    };
    let rep = lab::run_comparison(&spec, 300, 200, &cfg, &info).unwrap();
    assert_eq!(rep.records.len(), 3 * 200);
    for est in &rep.estimators {
        assert_eq!(est.converged + est.failed, 200);
    }
    assert!(rep.paired_replications <= 200);
    let ordered: Vec<usize> = rep.records.iter().map(|r| r.replication).collect();
    assert!(ordered.windows(2).all(|w| w[0] <= w[1]));
    assert!(matches!(
        lab::run_comparison(&spec, 300, 1, &cfg, &info),
        Err(Error::InvalidArgument(_))
    ));
}
