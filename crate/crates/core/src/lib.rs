//! Simulation and maximum-likelihood estimation for partially observed
//! multiscale diffusions.
//!
//! The hidden state `X` evolves on the fast time scale `1/δ` and is observed
//! through the noisy integral `dY = h_θ(X) dt + dW`. The crate provides:
//!
//! - [`models`]: the scalar model abstraction and the built-in OU / max(x, θ) model,
//! - [`sde`]: Euler–Maruyama simulation of the coupled system,
//! - [`spectral`]: Hermite eigen-coefficients and the likelihood CLT variances,
//! - [`likelihood`]: reduced and Monte-Carlo log-likelihoods, normalized filter,
//! - [`inference`]: reduced MLE with clamping, grid argmax, asymptotic std,
//! - [`stats`]: summaries, histograms and Kolmogorov–Smirnov tests,
//! - [`experiments`]: seeded batch experiments with CSV reports.
//!
//! Data-parallel loops run on rayon when the `parallel` feature is enabled
//! (the default) and fall back to plain iterators otherwise. Results are
//! bit-identical either way.

// `!(x > 0.0)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod exec;
pub mod experiments;
pub mod inference;
pub mod likelihood;
pub mod models;
pub mod sde;
pub mod seed;
pub mod spectral;
pub mod stats;

pub use error::{Error, Result};
pub use exec::Execution;
pub use models::{ModelSpec, ThetaBounds};
pub use sde::{PathPair, X0Mode};
