//! Scalar multiscale diffusion models.
//!
//! A [`ModelSpec`] stores the slow-time coefficients of
//!
//! ```text
//! dX = (1/δ) b_θ(X) dt + (1/√δ) σ_θ(X) dB      (hidden, fast)
//! dY = h_θ(X) dt + dW                          (observed)
//! ```
//!
//! together with the invariant law μ_θ of the fast process and the spectral
//! data (eigenvalues, eigenfunctions) of its generator. The `1/δ` scaling is
//! applied by the integrator, so one spec serves every δ.

use std::fmt;
use std::sync::Arc;

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::spectral::hermite;

/// The compact parameter set Θ = [lo, hi].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaBounds {
    pub lo: f64,
    pub hi: f64,
}

impl ThetaBounds {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::config(format!("invalid parameter interval [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    pub fn contains(&self, theta: f64) -> bool {
        theta >= self.lo && theta <= self.hi
    }

    pub fn check(&self, theta: f64) -> Result<()> {
        if self.contains(theta) {
            Ok(())
        } else {
            Err(Error::config(format!(
                "theta = {theta} outside [{}, {}]",
                self.lo, self.hi
            )))
        }
    }

    /// `n` evenly spaced points from `lo` to `hi` inclusive.
    pub fn grid(&self, n: usize) -> Vec<f64> {
        match n {
            0 => Vec::new(),
            1 => vec![self.lo],
            _ => {
                let step = (self.hi - self.lo) / (n - 1) as f64;
                (0..n)
                    .map(|i| if i == n - 1 { self.hi } else { self.lo + step * i as f64 })
                    .collect()
            }
        }
    }
}

/// Invariant law of a Gaussian fast process, as an affine image of N(0, 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianLaw {
    pub mean: f64,
    pub std: f64,
}

/// Extension hook for user-supplied models.
///
/// The built-in models do not go through this trait; they are matched
/// directly so the particle loops stay monomorphic.
pub trait ScalarDiffusion: Send + Sync {
    fn drift(&self, theta: f64, x: f64) -> f64;
    fn diffusion(&self, theta: f64, x: f64) -> f64;
    fn observation(&self, theta: f64, x: f64) -> f64;
    fn sample_invariant(&self, theta: f64, rng: &mut dyn RngCore) -> f64;
    fn eigenvalue(&self, i: usize, theta: f64) -> f64;
    fn basis(&self, i: usize, theta: f64, x: f64) -> f64;

    fn invariant_density(&self, _theta: f64, _x: f64) -> Option<f64> {
        None
    }

    /// Interval outside which the invariant density is negligible.
    fn invariant_support(&self, _theta: f64) -> (f64, f64) {
        (-40.0, 40.0)
    }

    /// Set when μ_θ is Gaussian; enables Gauss–Hermite quadrature.
    fn gaussian_invariant(&self, _theta: f64) -> Option<GaussianLaw> {
        None
    }

    /// Location of a derivative discontinuity of `h_θ`, if any.
    fn observation_kink(&self, _theta: f64) -> Option<f64> {
        None
    }
}

#[derive(Clone)]
pub enum ModelKind {
    /// OU hidden state with observation max(x, θ).
    OuMax,
    /// OU hidden state with observation ≡ c.
    ConstantH(f64),
    Custom(Arc<dyn ScalarDiffusion>),
}

impl fmt::Debug for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelKind::OuMax => write!(f, "OuMax"),
            ModelKind::ConstantH(c) => write!(f, "ConstantH({c})"),
            ModelKind::Custom(_) => write!(f, "Custom"),
        }
    }
}

const SQRT_2: f64 = std::f64::consts::SQRT_2;

#[derive(Debug, Clone)]
pub struct ModelSpec {
    pub name: String,
    pub theta_bounds: ThetaBounds,
    pub kind: ModelKind,
}

/// Benchmark model: `dX = (θ − X)/δ dt + √(2/δ) dB`, `h_θ(x) = max(x, θ)`.
///
/// The invariant law is N(θ, 1), eigenvalues are `λ_i = i` and the
/// orthonormal eigenfunctions are `ψ_i(x) = He_i(x − θ)/√(i!)`.
pub fn ou_max_model() -> ModelSpec {
    ModelSpec {
        name: "ou-max".to_string(),
        theta_bounds: ThetaBounds { lo: 0.0, hi: 2.0 },
        kind: ModelKind::OuMax,
    }
}

/// Same hidden dynamics as [`ou_max_model`] with observation `h ≡ c`.
///
/// Every particle then carries the same weight, so the Monte-Carlo and
/// reduced log-likelihoods coincide exactly.
pub fn constant_h_model(c: f64) -> ModelSpec {
    ModelSpec {
        name: "constant-h".to_string(),
        theta_bounds: ThetaBounds { lo: 0.0, hi: 2.0 },
        kind: ModelKind::ConstantH(c),
    }
}

pub fn custom_model(
    name: impl Into<String>,
    theta_bounds: ThetaBounds,
    model: Arc<dyn ScalarDiffusion>,
) -> ModelSpec {
    ModelSpec {
        name: name.into(),
        theta_bounds,
        kind: ModelKind::Custom(model),
    }
}

/// Looks up a built-in model by its CLI name.
pub fn by_name(name: &str, constant: f64) -> Result<ModelSpec> {
    match name {
        "ou-max" => Ok(ou_max_model()),
        "constant-h" => Ok(constant_h_model(constant)),
        other => Err(Error::config(format!(
            "unknown model '{other}' (expected 'ou-max' or 'constant-h')"
        ))),
    }
}

/// Orthonormal Hermite eigenfunction `He_i(x − θ)/√(i!)`.
#[inline]
fn hermite_basis(i: usize, theta: f64, x: f64) -> f64 {
    hermite(i, x - theta) / factorial_sqrt(i)
}

pub(crate) fn factorial_sqrt(i: usize) -> f64 {
    (1..=i).map(|k| (k as f64).sqrt()).product()
}

impl ModelSpec {
    pub fn with_bounds(mut self, bounds: ThetaBounds) -> Self {
        self.theta_bounds = bounds;
        self
    }

    #[inline]
    pub fn drift(&self, theta: f64, x: f64) -> f64 {
        match &self.kind {
            ModelKind::OuMax | ModelKind::ConstantH(_) => theta - x,
            ModelKind::Custom(m) => m.drift(theta, x),
        }
    }

    #[inline]
    pub fn diffusion(&self, theta: f64, x: f64) -> f64 {
        match &self.kind {
            ModelKind::OuMax | ModelKind::ConstantH(_) => SQRT_2,
            ModelKind::Custom(m) => m.diffusion(theta, x),
        }
    }

    #[inline]
    pub fn observation(&self, theta: f64, x: f64) -> f64 {
        match &self.kind {
            ModelKind::OuMax => x.max(theta),
            ModelKind::ConstantH(c) => *c,
            ModelKind::Custom(m) => m.observation(theta, x),
        }
    }

    pub fn sample_invariant<R: RngCore>(&self, theta: f64, rng: &mut R) -> f64 {
        match &self.kind {
            ModelKind::OuMax | ModelKind::ConstantH(_) => {
                let z: f64 = StandardNormal.sample(rng);
                theta + z
            }
            ModelKind::Custom(m) => m.sample_invariant(theta, rng),
        }
    }

    pub fn invariant_density(&self, theta: f64, x: f64) -> Option<f64> {
        match &self.kind {
            ModelKind::OuMax | ModelKind::ConstantH(_) => {
                let u = x - theta;
                Some((-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt())
            }
            ModelKind::Custom(m) => m.invariant_density(theta, x),
        }
    }

    pub fn invariant_support(&self, theta: f64) -> (f64, f64) {
        match &self.kind {
            ModelKind::OuMax | ModelKind::ConstantH(_) => (theta - 40.0, theta + 40.0),
            ModelKind::Custom(m) => m.invariant_support(theta),
        }
    }

    pub fn gaussian_invariant(&self, theta: f64) -> Option<GaussianLaw> {
        match &self.kind {
            ModelKind::OuMax | ModelKind::ConstantH(_) => Some(GaussianLaw { mean: theta, std: 1.0 }),
            ModelKind::Custom(m) => m.gaussian_invariant(theta),
        }
    }

    pub fn observation_kink(&self, theta: f64) -> Option<f64> {
        match &self.kind {
            ModelKind::OuMax => Some(theta),
            ModelKind::ConstantH(_) => None,
            ModelKind::Custom(m) => m.observation_kink(theta),
        }
    }

    pub fn eigenvalue(&self, i: usize, theta: f64) -> f64 {
        match &self.kind {
            ModelKind::OuMax | ModelKind::ConstantH(_) => i as f64,
            ModelKind::Custom(m) => m.eigenvalue(i, theta),
        }
    }

    pub fn basis(&self, i: usize, theta: f64, x: f64) -> f64 {
        match &self.kind {
            ModelKind::OuMax | ModelKind::ConstantH(_) => hermite_basis(i, theta, x),
            ModelKind::Custom(m) => m.basis(i, theta, x),
        }
    }
}
