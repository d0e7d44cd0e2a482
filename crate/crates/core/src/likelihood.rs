//! Reduced and Monte-Carlo log-likelihoods, and the normalized filter.
//!
//! The full log-likelihood `ρ_T(θ) = log φ_T[1]` is estimated by evolving `N`
//! independent copies of the hidden process under θ (no resampling) and
//! averaging the exponential weights
//!
//! ```text
//! A_ℓ = Σ_k [ h_θ(X_k^ℓ) (Y_{k+1} − Y_k) − ½ h_θ(X_k^ℓ)² Δt ]
//! ρ̂   = log( (1/N) Σ_ℓ exp(A_ℓ) )
//! ```
//!
//! with left-endpoint (Itô) evaluation of `h`. The reduced log-likelihood
//! replaces `h_θ(X)` by its invariant mean and needs no simulation.

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::models::ModelSpec;
use crate::sde::{check_resolution, HiddenStepper, PathPair, X0Mode};
use crate::seed::{self, stream};

/// `log Σ exp(v_i)`, shifted by the maximum.
pub fn log_sum_exp(values: &[f64]) -> Result<f64> {
    let m = values
        .iter()
        .copied()
        .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))))
        .ok_or_else(|| Error::config("log_sum_exp of an empty sequence"))?;
    if values.len() == 1 {
        return Ok(values[0]);
    }
    if m == f64::NEG_INFINITY {
        return Ok(m);
    }
    let s: f64 = values.iter().map(|v| (v - m).exp()).sum();
    Ok(m + s.ln())
}

/// `h̄ y_T − ½ h̄² T`.
pub fn reduced_log_lik(hbar: f64, y_final: f64, horizon: f64) -> f64 {
    hbar * y_final - 0.5 * hbar * hbar * horizon
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogLikEstimate {
    pub value: f64,
    pub theta: f64,
    pub delta: f64,
    pub n_particles: usize,
    pub seed: u64,
    /// `(Σ e^{A})² / Σ e^{2A}`, in `[1, N]`.
    pub ess: f64,
}

/// Terminal state and log-weight of one particle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Particle {
    pub log_weight: f64,
    pub x_final: f64,
}

/// Seed of particle `index` of an estimator seeded with `seed`.
pub fn particle_seed(seed: u64, index: usize) -> u64 {
    seed::derive(seed, stream::PARTICLE, index as u64)
}

/// Evolves one particle along the observation increments of `path`.
///
/// The particle state is streamed; only the accumulator and the final state
/// are kept.
pub fn run_particle(model: &ModelSpec, theta: f64, path: &PathPair, particle_seed: u64) -> Particle {
    let mut rng = seed::rng(particle_seed);
    let stepper = HiddenStepper::new(path.delta, path.dt);
    let dt = path.dt;
    let mut x = match path.x0_mode {
        X0Mode::Invariant => model.sample_invariant(theta, &mut rng),
        X0Mode::Fixed(v) => v,
    };
    let mut acc = 0.0;
    for dy in path.y.windows(2).map(|w| w[1] - w[0]) {
        let h = model.observation(theta, x);
        acc += h * dy - 0.5 * h * h * dt;
        let xi: f64 = StandardNormal.sample(&mut rng);
        x = stepper.step(model, theta, x, xi);
    }
    Particle { log_weight: acc, x_final: x }
}

fn check_inputs(model: &ModelSpec, theta: f64, path: &PathPair, n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::config("particle count N must be at least 1"));
    }
    model.theta_bounds.check(theta)?;
    check_resolution(path.delta, path.dt)?;
    if path.y.len() < 2 {
        return Err(Error::config("path has no observation increments"));
    }
    Ok(())
}

/// Runs `n` particles; the output is ordered by particle index.
pub fn propagate(
    model: &ModelSpec,
    theta: f64,
    path: &PathPair,
    n: usize,
    seed: u64,
    exec: Execution,
) -> Result<Vec<Particle>> {
    check_inputs(model, theta, path, n)?;
    let particles = exec.map(n, |l| run_particle(model, theta, path, particle_seed(seed, l)));
    if let Some(bad) = particles
        .iter()
        .position(|p| !(p.log_weight.is_finite() && p.x_final.is_finite()))
    {
        return Err(Error::numerical(format!(
            "particle {bad} produced a non-finite accumulator at theta = {theta}"
        )));
    }
    Ok(particles)
}

fn effective_sample_size(log_weights: &[f64]) -> Result<f64> {
    let lse = log_sum_exp(log_weights)?;
    let doubled: Vec<f64> = log_weights.iter().map(|a| 2.0 * a).collect();
    let ess = (2.0 * lse - log_sum_exp(&doubled)?).exp();
    Ok(ess.clamp(1.0, log_weights.len() as f64))
}

/// Monte-Carlo estimate of `log φ_T[1]` along the observed path.
pub fn mc_log_lik(model: &ModelSpec, theta: f64, path: &PathPair, n: usize, seed: u64) -> Result<LogLikEstimate> {
    mc_log_lik_with(model, theta, path, n, seed, Execution::default())
}

pub fn mc_log_lik_with(
    model: &ModelSpec,
    theta: f64,
    path: &PathPair,
    n: usize,
    seed: u64,
    exec: Execution,
) -> Result<LogLikEstimate> {
    let particles = propagate(model, theta, path, n, seed, exec)?;
    let log_weights: Vec<f64> = particles.iter().map(|p| p.log_weight).collect();
    estimate_from_log_weights(&log_weights, theta, path.delta, seed)
}

/// Aggregates per-particle log-weights (in index order) into an estimate.
pub fn estimate_from_log_weights(log_weights: &[f64], theta: f64, delta: f64, seed: u64) -> Result<LogLikEstimate> {
    let n = log_weights.len();
    let value = log_sum_exp(log_weights)? - (n as f64).ln();
    if !value.is_finite() {
        return Err(Error::numerical(format!("non-finite log-likelihood at theta = {theta}")));
    }
    Ok(LogLikEstimate {
        value,
        theta,
        delta,
        n_particles: n,
        seed,
        ess: effective_sample_size(log_weights)?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterEstimate {
    /// `π_T[f] = Σ e^{A_ℓ} f(X_T^ℓ) / Σ e^{A_ℓ}`.
    pub value: f64,
    pub ess: f64,
    /// Set when `ess < 2`; the estimate rests on essentially one particle.
    pub degenerate: bool,
}

/// Self-normalized terminal filter estimate of `f(X_T)`.
pub fn filter_mean(
    model: &ModelSpec,
    theta: f64,
    path: &PathPair,
    f: impl Fn(f64) -> f64,
    n: usize,
    seed: u64,
) -> Result<FilterEstimate> {
    filter_mean_with(model, theta, path, f, n, seed, Execution::default())
}

pub fn filter_mean_with(
    model: &ModelSpec,
    theta: f64,
    path: &PathPair,
    f: impl Fn(f64) -> f64,
    n: usize,
    seed: u64,
    exec: Execution,
) -> Result<FilterEstimate> {
    let particles = propagate(model, theta, path, n, seed, exec)?;
    normalized_mean(&particles, f)
}

/// Weighted mean of `f(x_final)` with weights `exp(log_weight)`.
pub fn normalized_mean(particles: &[Particle], f: impl Fn(f64) -> f64) -> Result<FilterEstimate> {
    let log_weights: Vec<f64> = particles.iter().map(|p| p.log_weight).collect();
    let m = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut num = 0.0;
    let mut den = 0.0;
    for p in particles {
        let w = (p.log_weight - m).exp();
        num += w * f(p.x_final);
        den += w;
    }
    let value = num / den;
    if !value.is_finite() {
        return Err(Error::numerical("non-finite normalized filter value"));
    }
    let ess = effective_sample_size(&log_weights)?;
    Ok(FilterEstimate { value, ess, degenerate: ess < 2.0 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CltScaling {
    /// `(ρ − ρ̄)/√t`
    PerSqrtT,
    /// `(ρ − ρ̄)/√δ`
    PerSqrtDelta,
}

pub fn clt_statistic(rho: f64, rho_bar: f64, t: f64, mode: CltScaling, delta: f64) -> f64 {
    match mode {
        CltScaling::PerSqrtT => (rho - rho_bar) / t.sqrt(),
        CltScaling::PerSqrtDelta => (rho - rho_bar) / delta.sqrt(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{constant_h_model, ou_max_model};
    use crate::sde::simulate_xy;
    use crate::spectral::eigen_coefficients;
    use crate::stats::summarize;

    #[test]
    fn log_sum_exp_examples() {
        assert_eq!(log_sum_exp(&[0.0]).unwrap(), 0.0);
        let l2 = 2f64.ln();
        assert!((log_sum_exp(&[l2, l2]).unwrap() - 4f64.ln()).abs() < 1e-15);
        let big = log_sum_exp(&[1000.0, 1000.0]).unwrap();
        assert!((big - (1000.0 + l2)).abs() < 1e-12);
        assert!(log_sum_exp(&[]).is_err());
        assert_eq!(log_sum_exp(&[-1e308 * 10.0, 3.5]).unwrap(), 3.5);
    }

    #[test]
    fn reduced_log_lik_examples() {
        assert_eq!(reduced_log_lik(0.0, 3.3, 5.0), 0.0);
        let want = 1.3989 * 7.0 - 0.5 * 1.3989 * 1.3989 * 5.0;
        assert!((reduced_log_lik(1.3989, 7.0, 5.0) - want).abs() < 1e-14);
        assert!((want - 4.8999).abs() < 1e-3);
        assert_eq!(reduced_log_lik(2.0, 4.0, 4.0), 0.0);
        // bit-identical across calls
        assert_eq!(reduced_log_lik(1.1, 2.2, 3.3).to_bits(), reduced_log_lik(1.1, 2.2, 3.3).to_bits());
    }

    #[test]
    fn constant_observation_collapses_to_reduced() {
        let m = constant_h_model(1.3);
        let p = simulate_xy(&m, 1.0, 0.05, 1.0, 0.001, X0Mode::Invariant, 4).unwrap();
        for (n, s) in [(1, 1), (7, 2), (300, 3)] {
            let est = mc_log_lik(&m, 0.6, &p, n, s).unwrap();
            let want = reduced_log_lik(1.3, p.y_final(), p.horizon());
            assert!((est.value - want).abs() < 1e-9, "{} vs {want}", est.value);
            assert!((est.ess - n as f64).abs() < 1e-6 * n as f64);
        }
    }

    #[test]
    fn zero_observation_gives_zero() {
        let m = constant_h_model(0.0);
        let p = simulate_xy(&m, 1.0, 0.05, 1.0, 0.001, X0Mode::Invariant, 8).unwrap();
        for n in [1, 10, 100] {
            assert_eq!(mc_log_lik(&m, 1.0, &p, n, 5).unwrap().value, 0.0);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let m = ou_max_model();
        let p = simulate_xy(&m, 1.0, 0.05, 0.5, 0.001, X0Mode::Invariant, 8).unwrap();
        assert!(mc_log_lik(&m, 1.0, &p, 0, 1).is_err());
        assert!(mc_log_lik(&m, 2.5, &p, 10, 1).is_err());
        let mut coarse = p.clone();
        coarse.dt = 0.01;
        assert!(mc_log_lik(&m, 1.0, &coarse, 10, 1).is_err());
    }

    #[test]
    fn ess_within_bounds() {
        let m = ou_max_model();
        let p = simulate_xy(&m, 1.0, 0.05, 1.0, 0.001, X0Mode::Invariant, 21).unwrap();
        let est = mc_log_lik(&m, 1.0, &p, 200, 3).unwrap();
        assert!(est.ess >= 1.0 && est.ess <= 200.0);
        assert!(est.value.is_finite());
    }

    #[test]
    fn sequential_and_parallel_agree_bitwise() {
        let m = ou_max_model();
        let p = simulate_xy(&m, 1.0, 0.05, 1.0, 0.001, X0Mode::Invariant, 31).unwrap();
        let a = mc_log_lik_with(&m, 0.7, &p, 257, 9, Execution::Sequential).unwrap();
        let b = mc_log_lik_with(&m, 0.7, &p, 257, 9, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn particle_permutation_changes_only_rounding() {
        let m = ou_max_model();
        let p = simulate_xy(&m, 1.0, 0.05, 1.0, 0.001, X0Mode::Invariant, 41).unwrap();
        let mut lw: Vec<f64> = (0..100)
            .map(|l| run_particle(&m, 1.0, &p, particle_seed(77, l)).log_weight)
            .collect();
        let a = estimate_from_log_weights(&lw, 1.0, p.delta, 77).unwrap();
        lw.reverse();
        lw.rotate_left(37);
        let b = estimate_from_log_weights(&lw, 1.0, p.delta, 77).unwrap();
        assert!((a.value - b.value).abs() < 1e-12);
    }

    #[test]
    fn filter_of_one_is_exactly_one() {
        let m = ou_max_model();
        let p = simulate_xy(&m, 1.0, 0.05, 1.0, 0.001, X0Mode::Invariant, 51).unwrap();
        let est = filter_mean(&m, 1.0, &p, |_| 1.0, 500, 6).unwrap();
        assert_eq!(est.value, 1.0);
    }

    #[test]
    fn filter_with_flat_weights_is_ensemble_average() {
        let m = constant_h_model(0.4);
        let theta = 1.2;
        let p = simulate_xy(&m, 1.0, 0.05, 0.5, 0.001, X0Mode::Invariant, 61).unwrap();
        let n = 20_000;
        let est = filter_mean(&m, theta, &p, |x| x, n, 7).unwrap();
        assert!((est.value - theta).abs() < 3.0 / (n as f64).sqrt(), "{}", est.value);
        assert!(!est.degenerate);
    }

    #[test]
    fn monotone_information_direction() {
        // θ = α beats |θ − α| = 1 on most seeded data sets.
        let m = ou_max_model();
        let trials = 200;
        let wins = (0..trials)
            .filter(|&k| {
                let p = simulate_xy(&m, 1.0, 0.01, 5.0, 0.0002, X0Mode::Invariant, 1000 + k).unwrap();
                let at_truth = mc_log_lik(&m, 1.0, &p, 200, 5000 + k).unwrap().value;
                let far = mc_log_lik(&m, 0.0, &p, 200, 9000 + k).unwrap().value;
                at_truth > far
            })
            .count();
        assert!(wins as f64 >= 0.8 * trials as f64, "{wins}/{trials}");
    }

    #[test]
    fn clt_statistic_examples() {
        assert_eq!(clt_statistic(1.5, 1.5, 3.0, CltScaling::PerSqrtT, 0.01), 0.0);
        assert!((clt_statistic(0.05, 0.0, 4.0, CltScaling::PerSqrtT, 0.01) - 0.025).abs() < 1e-15);
        let t = 5.0;
        let a = clt_statistic(0.3, 0.1, t, CltScaling::PerSqrtT, 0.01);
        let b = clt_statistic(0.3, 0.1, t, CltScaling::PerSqrtDelta, 0.01);
        assert!((b / a - (t / 0.01f64).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn mc_minus_reduced_spread_at_benchmark_setting() {
        // Spread of ρ̂ − ρ̄ across 100 independent data paths.
        let m = ou_max_model();
        let hbar = eigen_coefficients(&m, 1.0, 20, 64).unwrap().hbar;
        let diffs: Vec<f64> = (0..100u64)
            .map(|k| {
                let p = simulate_xy(&m, 1.0, 0.01, 5.0, 0.0002, X0Mode::Invariant, 200 + k).unwrap();
                let est = mc_log_lik(&m, 1.0, &p, 2000, 300 + k).unwrap();
                est.value - reduced_log_lik(hbar, p.y_final(), 5.0)
            })
            .collect();
        let s = summarize(&diffs).unwrap();
        assert!(s.std >= 0.05 && s.std <= 0.10, "std = {}", s.std);
    }
}
