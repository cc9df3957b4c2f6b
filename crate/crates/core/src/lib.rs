//! Estimation of multidimensional nonlinear regression models
//! `Y = F_W(Z) + ε` where `F_W` is a multilayer perceptron and the noise has
//! an unknown covariance.
//!
//! The central objective is the log-determinant of the empirical residual
//! covariance, `U_n(W) = ln det((1/n) Σ r_t r_tᵀ)`, provided with exact
//! gradient and Hessian. Ordinary and generalized least squares are provided
//! as baselines, together with a Monte Carlo harness that compares the three
//! estimators against the information bound.
//!
//! The numerical kernels are generic over [`Real`] (`f32` or `f64`); the
//! aliases at the crate root fix the scalar to `f64`, which is what the
//! optimizer tolerances and the Monte Carlo harness assume.

// `!(x > 0)` is deliberate throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]


pub mod cost;
pub mod error;
pub mod io;
pub mod lab;
pub mod mlp;
pub mod optimizer;
pub mod rng;
pub mod sampler;
pub mod scalar;
pub mod spd;

pub use error::{Error, RestartFailure, Result};
pub use mlp::{Activation, Architecture};
pub use scalar::Real;

pub type SpdMatrix = spd::SpdMatrix<f64>;
pub type ParamVector = mlp::ParamVector<f64>;
pub type Dataset = cost::Dataset<f64>;
pub type CostKind = cost::CostKind<f64>;
pub type DerivBundle = cost::DerivBundle<f64>;
pub type FitConfig = optimizer::FitConfig<f64>;
pub type FitReport = optimizer::FitReport<f64>;
pub type GenSpec = sampler::GenSpec<f64>;
