//! Synthetic data for `Y = F_{W⁰}(Z) + ε` with standard Gaussian inputs and
//! Gaussian noise of covariance `Γ₀`.
//!
//! Inputs and noise come from separate substreams of the same seed, and
//! replication `r` uses its own pair of substreams.

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::cost::Dataset;
use crate::error::{Error, Result};
use crate::mlp::{self, ParamVector};
use crate::rng::{substream, Purpose};
use crate::scalar::Real;
use crate::spd::SpdMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseFamily {
    Gaussian,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec<T> {
    pub gamma0: SpdMatrix<T>,
    pub family: NoiseFamily,
}

impl<T: Real> NoiseSpec<T> {
    pub fn gaussian(gamma0: SpdMatrix<T>) -> Self {
        Self {
            gamma0,
            family: NoiseFamily::Gaussian,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputLaw {
    StandardGaussian,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenSpec<T> {
    pub w0: ParamVector<T>,
    pub noise: NoiseSpec<T>,
    pub input_law: InputLaw,
    pub n: usize,
    pub seed: u64,
}

impl<T: Real> GenSpec<T> {
    pub fn new(w0: ParamVector<T>, gamma0: SpdMatrix<T>, n: usize, seed: u64) -> Result<Self> {
        let spec = Self {
            w0,
            noise: NoiseSpec::gaussian(gamma0),
            input_law: InputLaw::StandardGaussian,
            n,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidArgument("sample count n must be at least 1".into()));
        }
        let d = self.w0.arch().output_dim;
        if self.noise.gamma0.dim() != d {
            return Err(Error::dim("noise covariance dimension", d, self.noise.gamma0.dim()));
        }
        Ok(())
    }

    pub fn with_n(&self, n: usize) -> Self {
        Self { n, ..self.clone() }
    }

    pub fn with_gamma0(&self, gamma0: SpdMatrix<T>) -> Self {
        Self {
            noise: NoiseSpec::gaussian(gamma0),
            ..self.clone()
        }
    }
}

/// `n × dim` matrix of standard normal draws from the given stream.
pub fn standard_normal_matrix<T: Real>(
    n: usize,
    dim: usize,
    seed: u64,
    purpose: Purpose,
    index: u64,
) -> Array2<T> {
    let mut rng = substream(seed, purpose, index);
    Array2::from_shape_simple_fn((n, dim), || {
        let v: f64 = rng.sample(StandardNormal);
        T::lit(v)
    })
}

/// Replication 0 of [`sample_replication`].
pub fn sample_dataset<T: Real>(spec: &GenSpec<T>) -> Result<Dataset<T>> {
    sample_replication(spec, 0)
}

/// Dataset for replication `index`: `Z_t ~ N(0, I_q)`, `ε_t = L u_t` with
/// `L Lᵀ = Γ₀` and `u_t ~ N(0, I_d)`, `Y_t = F_{W⁰}(Z_t) + ε_t`.
pub fn sample_replication<T: Real>(spec: &GenSpec<T>, index: u64) -> Result<Dataset<T>> {
    spec.validate()?;
    let arch = spec.w0.arch();
    let (q, d) = (arch.input_dim, arch.output_dim);
    let inputs = standard_normal_matrix::<T>(spec.n, q, spec.seed, Purpose::Inputs, index);
    let u = standard_normal_matrix::<T>(spec.n, d, spec.seed, Purpose::Noise, index);
    let noise = u.dot(&spec.noise.gamma0.factor().t());
    let mut targets = noise;
    for (z, mut y) in inputs.rows().into_iter().zip(targets.rows_mut()) {
        y += &mlp::forward(&spec.w0, z)?;
    }
    Dataset::new(inputs, targets)
}

/// `w + N(0, sd²)` per coordinate, from the warm-start stream `index`.
pub fn perturb<T: Real>(w: &ParamVector<T>, sd: T, seed: u64, index: u64) -> ParamVector<T> {
    let mut rng = substream(seed, Purpose::WarmStart, index);
    let values = w.values().mapv(|v| {
        let e: f64 = rng.sample(StandardNormal);
        v + sd * T::lit(e)
    });
    w.with_values(values).expect("same length")
}

/// Scenario library for the true noise covariance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "rho", rename_all = "kebab-case")]
pub enum Gamma0Kind {
    Identity,
    /// `(1−ρ)I + ρJ`.
    Equicorrelated(f64),
    /// `ρ^|i−j|`.
    ArLike(f64),
}

/// `scale` times the chosen correlation structure, validated positive definite.
pub fn make_gamma0<T: Real>(kind: Gamma0Kind, d: usize, scale: f64) -> Result<SpdMatrix<T>> {
    if d == 0 {
        return Err(Error::InvalidArgument("noise dimension must be positive".into()));
    }
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::InvalidArgument(format!("scale must be positive, got {scale}")));
    }
    let m: Array2<f64> = match kind {
        Gamma0Kind::Identity => Array2::eye(d),
        Gamma0Kind::Equicorrelated(rho) => {
            let lower = if d > 1 { -1.0 / (d as f64 - 1.0) } else { f64::NEG_INFINITY };
            if !(rho > lower && rho < 1.0) {
                return Err(Error::NotPositiveDefinite { pivot: d - 1 });
            }
            Array2::from_shape_fn((d, d), |(i, j)| if i == j { 1.0 } else { rho })
        }
        Gamma0Kind::ArLike(rho) => {
            if !(rho.abs() < 1.0) {
                return Err(Error::NotPositiveDefinite { pivot: d.min(2) - 1 });
            }
            Array2::from_shape_fn((d, d), |(i, j)| rho.powi(i.abs_diff(j) as i32))
        }
    };
    SpdMatrix::new(&m.mapv(|v| T::lit(v * scale)))
}
