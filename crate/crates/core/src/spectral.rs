//! Hermite eigen-expansions of the observation function.
//!
//! For a fast process with discrete spectrum `0 = λ_0 < λ_1 ≤ …` and
//! orthonormal eigenfunctions `ψ_i` (with `ψ_0 ≡ 1`), the coefficients
//! `c_i = ⟨h_θ, ψ_i⟩` under the invariant law determine
//!
//! ```text
//! h̄_θ = c_0
//! v²_θ = Σ_{i,j≥1} (c_i c_j)² / (λ_i + λ_j)
//! u²_θ = Σ_{i,j≥1} c_i c_j π0[ψ_i] π0[ψ_j] / (λ_i + λ_j)
//! ```
//!
//! Integrals against a Gaussian invariant law use Gauss–Hermite rules. When
//! `h_θ` has a kink at the invariant mean (as `max(x, θ)` does) the integral
//! is split there and each half uses a half-range Gauss rule for the weight
//! `φ(u)` on `[0, ∞)`, so the polynomial integrand on each side is
//! integrated exactly.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::models::ModelSpec;
use crate::sde::X0Mode;

/// Probabilist Hermite polynomial `He_i(x)`.
pub fn hermite(i: usize, x: f64) -> f64 {
    match i {
        0 => 1.0,
        1 => x,
        _ => {
            let (mut prev, mut cur) = (1.0, x);
            for k in 1..i {
                let next = x * cur - k as f64 * prev;
                prev = cur;
                cur = next;
            }
            cur
        }
    }
}

/// A Gauss rule: `Σ w_j f(x_j)` approximates an integral against some weight.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadrature {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Quadrature {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// Golub–Welsch: nodes are the eigenvalues of the Jacobi matrix built from
/// the three-term recurrence of the orthonormal polynomials; weights come
/// from the Christoffel function `1 / Σ_k q_k(x)²`.
///
/// `alpha[k]`, `beta[k]` (k = 0..n) define
/// `√β_{k+1} q_{k+1} = (x − α_k) q_k − √β_k q_{k−1}`, and `beta[0]` is the
/// total mass of the weight.
fn gauss_from_recurrence(alpha: &[f64], beta: &[f64]) -> Result<Quadrature> {
    let n = alpha.len();
    if n == 0 || beta.len() < n {
        return Err(Error::config("quadrature needs at least one node"));
    }
    let mut jacobi = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        jacobi[(k, k)] = alpha[k];
        if k + 1 < n {
            let b = beta[k + 1].sqrt();
            jacobi[(k, k + 1)] = b;
            jacobi[(k + 1, k)] = b;
        }
    }
    let mut nodes: Vec<f64> = jacobi.symmetric_eigenvalues().iter().copied().collect();
    nodes.sort_by(f64::total_cmp);

    let mass = beta[0];
    let weights: Vec<f64> = nodes
        .iter()
        .map(|&x| {
            let mut prev = 0.0;
            let mut cur = 1.0 / mass.sqrt();
            let mut sum = cur * cur;
            for k in 0..n - 1 {
                let next = ((x - alpha[k]) * cur - beta[k].sqrt() * prev) / beta[k + 1].sqrt();
                prev = cur;
                cur = next;
                sum += cur * cur;
            }
            1.0 / sum
        })
        .collect();

    if nodes.iter().chain(&weights).any(|v| !v.is_finite()) {
        return Err(Error::config(format!("quadrature construction failed for n = {n}")));
    }
    Ok(Quadrature { nodes, weights })
}

/// Gauss–Hermite rule for the standard normal density (weights sum to 1).
pub fn gh_nodes(n: usize) -> Result<Quadrature> {
    if n == 0 {
        return Err(Error::config("gh_nodes: n must be at least 1"));
    }
    let alpha = vec![0.0; n];
    let beta: Vec<f64> = (0..n).map(|k| if k == 0 { 1.0 } else { k as f64 }).collect();
    gauss_from_recurrence(&alpha, &beta)
}

/// Gauss–Legendre rule on `[-1, 1]`.
pub fn gl_nodes(n: usize) -> Result<Quadrature> {
    if n == 0 {
        return Err(Error::config("gl_nodes: n must be at least 1"));
    }
    let alpha = vec![0.0; n];
    let beta: Vec<f64> = (0..n)
        .map(|k| {
            if k == 0 {
                2.0
            } else {
                let k = k as f64;
                k * k / (4.0 * k * k - 1.0)
            }
        })
        .collect();
    gauss_from_recurrence(&alpha, &beta)
}

const HALF_RANGE_CUTOFF: f64 = 40.0;
const HALF_RANGE_PANEL_NODES: usize = 40;

fn std_normal_pdf(u: f64) -> f64 {
    (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Gauss rule for the weight `φ(u) = exp(−u²/2)/√(2π)` on `[0, ∞)`
/// (weights sum to 1/2).
///
/// Recurrence coefficients come from the discretized Stieltjes procedure on
/// a composite Gauss–Legendre grid over `[0, 40]`; `φ(40)` is below 1e-340.
pub fn half_gh_nodes(n: usize) -> Result<Quadrature> {
    if n == 0 {
        return Err(Error::config("half_gh_nodes: n must be at least 1"));
    }
    let panel = gl_nodes(HALF_RANGE_PANEL_NODES)?;
    let panels = HALF_RANGE_CUTOFF as usize;
    let mut u = Vec::with_capacity(panels * panel.len());
    let mut w = Vec::with_capacity(panels * panel.len());
    for p in 0..panels {
        let a = p as f64;
        for (x, wt) in panel.nodes.iter().zip(&panel.weights) {
            let t = a + 0.5 * (x + 1.0);
            u.push(t);
            w.push(0.5 * wt * std_normal_pdf(t));
        }
    }

    let mass: f64 = w.iter().sum();
    let mut alpha = Vec::with_capacity(n);
    let mut beta = Vec::with_capacity(n + 1);
    beta.push(mass);
    let mut prev = vec![0.0; u.len()];
    let mut cur = vec![1.0 / mass.sqrt(); u.len()];
    for k in 0..n {
        let a: f64 = (0..u.len()).map(|j| w[j] * u[j] * cur[j] * cur[j]).sum();
        alpha.push(a);
        let sb = if k == 0 { 0.0 } else { beta[k].sqrt() };
        let next: Vec<f64> = (0..u.len())
            .map(|j| (u[j] - a) * cur[j] - sb * prev[j])
            .collect();
        let b: f64 = (0..u.len()).map(|j| w[j] * next[j] * next[j]).sum();
        beta.push(b);
        let sb_next = b.sqrt();
        prev = cur;
        cur = next.into_iter().map(|v| v / sb_next).collect();
    }
    gauss_from_recurrence(&alpha, &beta)
}

/// Prepared quadrature rules for integrals against an invariant law.
#[derive(Debug)]
pub struct InvariantIntegrator {
    n_quad: usize,
    full: Quadrature,
    half: Quadrature,
    panel: Quadrature,
}

fn integrator_cache() -> &'static Mutex<HashMap<usize, Arc<InvariantIntegrator>>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<InvariantIntegrator>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

impl InvariantIntegrator {
    pub fn new(n_quad: usize) -> Result<Self> {
        Ok(Self {
            n_quad,
            full: gh_nodes(n_quad)?,
            half: half_gh_nodes(n_quad)?,
            panel: gl_nodes(n_quad)?,
        })
    }

    /// Process-wide cached integrator for `n_quad` nodes.
    pub fn shared(n_quad: usize) -> Result<Arc<Self>> {
        let mut cache = integrator_cache().lock().expect("integrator cache poisoned");
        if let Some(found) = cache.get(&n_quad) {
            return Ok(Arc::clone(found));
        }
        let built = Arc::new(Self::new(n_quad)?);
        cache.insert(n_quad, Arc::clone(&built));
        Ok(built)
    }

    pub fn n_quad(&self) -> usize {
        self.n_quad
    }

    /// Composite Gauss–Legendre over `[a, b]` in unit-length panels.
    fn panels(&self, a: f64, b: f64, f: &dyn Fn(f64) -> f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let count = (b - a).ceil().max(1.0) as usize;
        let width = (b - a) / count as f64;
        let mut total = 0.0;
        for p in 0..count {
            let left = a + width * p as f64;
            total += 0.5 * width * self.panel.integrate(|x| f(left + 0.5 * width * (x + 1.0)));
        }
        total
    }

    /// Integrates each of `fs` against the invariant law μ_θ of `model`.
    ///
    /// `fs(x, out)` writes the integrand values at `x` into `out`.
    pub fn integrate_many(
        &self,
        model: &ModelSpec,
        theta: f64,
        count: usize,
        fs: impl Fn(f64, &mut [f64]),
    ) -> Result<Vec<f64>> {
        let mut acc = vec![0.0; count];
        let mut buf = vec![0.0; count];
        let kink = model.observation_kink(theta);

        let mut add = |x: f64, w: f64, acc: &mut [f64]| {
            fs(x, &mut buf);
            for (a, v) in acc.iter_mut().zip(&buf) {
                *a += w * v;
            }
        };

        if let Some(law) = model.gaussian_invariant(theta) {
            match kink.map(|k| (k - law.mean) / law.std) {
                None => {
                    for (&u, &w) in self.full.nodes.iter().zip(&self.full.weights) {
                        add(law.mean + law.std * u, w, &mut acc);
                    }
                }
                Some(0.0) => {
                    for (&u, &w) in self.half.nodes.iter().zip(&self.half.weights) {
                        add(law.mean + law.std * u, w, &mut acc);
                        add(law.mean - law.std * u, w, &mut acc);
                    }
                }
                Some(u0) => {
                    let left = u0.min(0.0) - HALF_RANGE_CUTOFF;
                    let right = u0.max(0.0) + HALF_RANGE_CUTOFF;
                    for (lo, hi) in [(left, u0), (u0, right)] {
                        let count = (hi - lo).ceil().max(1.0) as usize;
                        let width = (hi - lo) / count as f64;
                        for p in 0..count {
                            let left = lo + width * p as f64;
                            for (&t, &w) in self.panel.nodes.iter().zip(&self.panel.weights) {
                                let u = left + 0.5 * width * (t + 1.0);
                                add(law.mean + law.std * u, 0.5 * width * w * std_normal_pdf(u), &mut acc);
                            }
                        }
                    }
                }
            }
        } else {
            if model.invariant_density(theta, 0.0).is_none() {
                return Err(Error::config(format!(
                    "model '{}' has neither a Gaussian invariant law nor an invariant density",
                    model.name
                )));
            }
            let (lo, hi) = model.invariant_support(theta);
            let segments = match kink {
                Some(k) if k > lo && k < hi => vec![(lo, k), (k, hi)],
                _ => vec![(lo, hi)],
            };
            for j in 0..count {
                let integrand = |x: f64| {
                    let mut out = vec![0.0; count];
                    fs(x, &mut out);
                    out[j] * model.invariant_density(theta, x).unwrap_or(0.0)
                };
                acc[j] = segments.iter().map(|&(a, b)| self.panels(a, b, &integrand)).sum();
            }
        }

        if let Some(bad) = acc.iter().position(|v| !v.is_finite()) {
            return Err(Error::numerical(format!(
                "non-finite quadrature sum for component {bad} at theta = {theta}"
            )));
        }
        Ok(acc)
    }

    /// `h̄_θ = ∫ h_θ dμ_θ`.
    pub fn hbar(&self, model: &ModelSpec, theta: f64) -> Result<f64> {
        let v = self.integrate_many(model, theta, 1, |x, out| out[0] = model.observation(theta, x))?;
        Ok(v[0])
    }

    /// `⟨h_θ, ψ_i⟩` for `i = 0..=k`.
    pub fn coefficients(&self, model: &ModelSpec, theta: f64, k: usize) -> Result<Vec<f64>> {
        self.integrate_many(model, theta, k + 1, |x, out| {
            let h = model.observation(theta, x);
            for (i, o) in out.iter_mut().enumerate() {
                *o = h * model.basis(i, theta, x);
            }
        })
    }
}

/// Default central-difference step for `dh̄/dθ`.
pub const HDOT_STEP: f64 = 1e-4;
pub const DEFAULT_TRUNCATION: usize = 20;
pub const DEFAULT_N_QUAD: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralTable {
    pub theta: f64,
    /// Index of the highest retained eigenfunction.
    pub truncation: usize,
    /// `c_0 ..= c_K`.
    pub coeffs: Vec<f64>,
    /// `λ_1 ..= λ_K`.
    pub eigenvalues: Vec<f64>,
    pub hbar: f64,
    pub hdot: f64,
    pub v2: f64,
    pub n_quad: usize,
}

impl SpectralTable {
    /// Builds a table from given coefficients `c_0..=c_K` and `λ_1..=λ_K`.
    pub fn from_parts(theta: f64, coeffs: Vec<f64>, eigenvalues: Vec<f64>, hdot: f64) -> Result<Self> {
        if coeffs.len() < 2 || eigenvalues.len() + 1 != coeffs.len() {
            return Err(Error::config(format!(
                "need K+1 coefficients and K eigenvalues with K >= 1 (got {} and {})",
                coeffs.len(),
                eigenvalues.len()
            )));
        }
        let mut table = SpectralTable {
            theta,
            truncation: eigenvalues.len(),
            hbar: coeffs[0],
            coeffs,
            eigenvalues,
            hdot,
            v2: 0.0,
            n_quad: 0,
        };
        table.v2 = v_squared(&table);
        Ok(table)
    }

    /// Table restricted to the first `k` modes.
    pub fn truncated(&self, k: usize) -> Self {
        let k = k.clamp(1, self.truncation);
        let mut t = self.clone();
        t.truncation = k;
        t.coeffs.truncate(k + 1);
        t.eigenvalues.truncate(k);
        t.v2 = v_squared(&t);
        t
    }
}

/// Eigen-coefficients, invariant mean and CLT variance at `theta`.
pub fn eigen_coefficients(model: &ModelSpec, theta: f64, k: usize, n_quad: usize) -> Result<SpectralTable> {
    if k < 1 {
        return Err(Error::config("truncation K must be at least 1"));
    }
    if n_quad < 2 * k {
        return Err(Error::config(format!("n_quad = {n_quad} must be at least 2K = {}", 2 * k)));
    }
    let integrator = InvariantIntegrator::shared(n_quad)?;
    eigen_coefficients_with(&integrator, model, theta, k)
}

pub fn eigen_coefficients_with(
    integrator: &InvariantIntegrator,
    model: &ModelSpec,
    theta: f64,
    k: usize,
) -> Result<SpectralTable> {
    let coeffs = integrator.coefficients(model, theta, k)?;
    let eigenvalues: Vec<f64> = (1..=k).map(|i| model.eigenvalue(i, theta)).collect();
    if let Some(bad) = eigenvalues.iter().position(|&l| !(l > 0.0)) {
        return Err(Error::config(format!("eigenvalue λ_{} must be positive", bad + 1)));
    }
    let up = integrator.hbar(model, theta + HDOT_STEP)?;
    let down = integrator.hbar(model, theta - HDOT_STEP)?;
    let hdot = (up - down) / (2.0 * HDOT_STEP);
    let mut table = SpectralTable::from_parts(theta, coeffs, eigenvalues, hdot)?;
    table.n_quad = integrator.n_quad();
    Ok(table)
}

/// Truncated `Σ_{i,j=1..K} (c_i c_j)² / (λ_i + λ_j)`.
pub fn v_squared(table: &SpectralTable) -> f64 {
    let c = &table.coeffs[1..];
    let l = &table.eigenvalues;
    let mut sum = 0.0;
    for i in 0..c.len() {
        for j in 0..c.len() {
            let p = c[i] * c[j];
            sum += p * p / (l[i] + l[j]);
        }
    }
    sum
}

/// Truncated `Σ_{i,j=1..K} c_i c_j π0[ψ_i] π0[ψ_j] / (λ_i + λ_j)`.
pub fn u_squared(table: &SpectralTable, pi0: &[f64]) -> Result<f64> {
    if pi0.len() != table.truncation {
        return Err(Error::config(format!(
            "pi0 has {} entries, expected K = {}",
            pi0.len(),
            table.truncation
        )));
    }
    let c = &table.coeffs[1..];
    let l = &table.eigenvalues;
    let mut sum = 0.0;
    for i in 0..c.len() {
        for j in 0..c.len() {
            sum += c[i] * c[j] * pi0[i] * pi0[j] / (l[i] + l[j]);
        }
    }
    Ok(sum)
}

/// `π0[ψ_i]` for `i = 1..=k` under the given initial condition.
pub fn initial_projections(model: &ModelSpec, theta: f64, k: usize, x0: X0Mode) -> Vec<f64> {
    match x0 {
        X0Mode::Invariant => vec![0.0; k],
        X0Mode::Fixed(x) => (1..=k).map(|i| model.basis(i, theta, x)).collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummabilityReport {
    pub half: usize,
    pub full: usize,
    /// `Σ_{i=1..K/2} |c_i|` and `Σ_{i=1..K} |c_i|`.
    pub abs_sum_half: f64,
    pub abs_sum_full: f64,
    pub abs_sum_rel_change: f64,
    /// `Σ_{i,j} |c_i c_j| (1/λ_i + 1/λ_j)` at both truncations.
    pub double_sum_half: f64,
    pub double_sum_full: f64,
    pub double_sum_rel_change: f64,
}

fn rel_change(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        if a == 0.0 { 0.0 } else { f64::INFINITY }
    } else {
        ((b - a) / b).abs()
    }
}

pub fn summability_report(table: &SpectralTable) -> Result<SummabilityReport> {
    let k = table.truncation;
    if k < 2 {
        return Err(Error::config("summability report needs K >= 2"));
    }
    let half = k / 2;
    let c = &table.coeffs[1..];
    let l = &table.eigenvalues;
    let abs_sum = |m: usize| c[..m].iter().map(|v| v.abs()).sum::<f64>();
    let double_sum = |m: usize| {
        let mut s = 0.0;
        for i in 0..m {
            for j in 0..m {
                s += (c[i] * c[j]).abs() * (1.0 / l[i] + 1.0 / l[j]);
            }
        }
        s
    };
    let (a_half, a_full) = (abs_sum(half), abs_sum(k));
    let (d_half, d_full) = (double_sum(half), double_sum(k));
    Ok(SummabilityReport {
        half,
        full: k,
        abs_sum_half: a_half,
        abs_sum_full: a_full,
        abs_sum_rel_change: rel_change(a_half, a_full),
        double_sum_half: d_half,
        double_sum_full: d_full,
        double_sum_rel_change: rel_change(d_half, d_full),
    })
}
