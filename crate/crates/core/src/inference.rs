//! Maximum-likelihood estimation of θ.
//!
//! The reduced log-likelihood `h̄_θ Y_T − ½ h̄_θ² T` is maximized where
//! `h̄_θ = Y_T / T`. When that root leaves Θ = [θ_ℓ, θ_u] the estimate is
//! projected onto the nearer endpoint.

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::likelihood::reduced_log_lik;
use crate::models::ModelSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClampState {
    Interior,
    ClampedLow,
    ClampedHigh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MleMethod {
    ReducedRoot,
    Grid,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MleResult {
    pub theta_hat: f64,
    pub clamped: ClampState,
    pub objective_value: f64,
    pub method: MleMethod,
}

/// Grid size used to verify that `h̄` is one-to-one on Θ.
pub const MONOTONE_CHECK_POINTS: usize = 32;
/// Default resolution of [`grid_mle`] grids over Θ.
pub const DEFAULT_GRID_POINTS: usize = 401;
const BISECTION_TOL: f64 = 1e-10;

/// Root of `h̄_θ = y_T/T` on Θ, clamped to the endpoints.
///
/// `hbar` evaluates the invariant mean of the observation function.
pub fn reduced_mle(
    model: &ModelSpec,
    hbar: impl Fn(f64) -> Result<f64>,
    y_final: f64,
    horizon: f64,
) -> Result<MleResult> {
    if !(horizon > 0.0) {
        return Err(Error::config(format!("T must be positive, got {horizon}")));
    }
    if !y_final.is_finite() {
        return Err(Error::numerical("non-finite terminal observation"));
    }
    let bounds = model.theta_bounds;
    let grid = bounds.grid(MONOTONE_CHECK_POINTS);
    let values = grid.iter().map(|&t| hbar(t)).collect::<Result<Vec<f64>>>()?;
    let increasing = values.windows(2).all(|w| w[1] > w[0]);
    let decreasing = values.windows(2).all(|w| w[1] < w[0]);
    if !(increasing || decreasing) {
        return Err(Error::NonIdentifiable(format!(
            "invariant mean of h is not strictly monotone on [{}, {}] for model '{}'",
            bounds.lo, bounds.hi, model.name
        )));
    }

    let target = y_final / horizon;
    let (h_lo, h_hi) = (values[0], values[values.len() - 1]);
    // signed distance in the direction of increasing θ
    let sign = if increasing { 1.0 } else { -1.0 };
    let finish = |theta: f64, clamped| -> Result<MleResult> {
        Ok(MleResult {
            theta_hat: theta,
            clamped,
            objective_value: reduced_log_lik(hbar(theta)?, y_final, horizon),
            method: MleMethod::ReducedRoot,
        })
    };
    if sign * (target - h_lo) <= 0.0 {
        return finish(bounds.lo, ClampState::ClampedLow);
    }
    if sign * (target - h_hi) >= 0.0 {
        return finish(bounds.hi, ClampState::ClampedHigh);
    }

    let (mut lo, mut hi) = (bounds.lo, bounds.hi);
    while hi - lo > BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        if sign * (hbar(mid)? - target) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let theta = 0.5 * (lo + hi);
    let clamped = if theta > bounds.lo && theta < bounds.hi {
        ClampState::Interior
    } else if theta <= bounds.lo {
        ClampState::ClampedLow
    } else {
        ClampState::ClampedHigh
    };
    finish(theta, clamped)
}

/// Grid argmax of `objective`; ties go to the smallest θ.
///
/// The clamp flag reports whether the maximizer is an end point of the grid.
pub fn grid_mle(objective: impl Fn(f64) -> f64 + Sync + Send, grid: &[f64]) -> Result<MleResult> {
    grid_mle_with(objective, grid, Execution::default())
}

pub fn grid_mle_with(
    objective: impl Fn(f64) -> f64 + Sync + Send,
    grid: &[f64],
    exec: Execution,
) -> Result<MleResult> {
    if grid.is_empty() {
        return Err(Error::config("grid_mle: empty grid"));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::config("grid_mle: grid must be strictly increasing"));
    }
    let values = exec.map(grid.len(), |i| objective(grid[i]));
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        if v.is_finite() && best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    let (i, v) = best.ok_or_else(|| Error::numerical("grid_mle: objective is non-finite on the whole grid"))?;
    let clamped = if grid.len() > 1 && i == 0 {
        ClampState::ClampedLow
    } else if grid.len() > 1 && i == grid.len() - 1 {
        ClampState::ClampedHigh
    } else {
        ClampState::Interior
    };
    Ok(MleResult {
        theta_hat: grid[i],
        clamped,
        objective_value: v,
        method: MleMethod::Grid,
    })
}

/// Asymptotic standard deviation `1/(√T |dh̄/dθ|)` of the reduced MLE.
pub fn predicted_mle_std(hdot: f64, horizon: f64) -> Result<f64> {
    if hdot == 0.0 || !hdot.is_finite() {
        return Err(Error::NonIdentifiable(format!("dh̄/dθ = {hdot}; direction not identifiable")));
    }
    if !(horizon > 0.0) {
        return Err(Error::config(format!("T must be positive, got {horizon}")));
    }
    Ok(1.0 / (horizon.sqrt() * hdot.abs()))
}
