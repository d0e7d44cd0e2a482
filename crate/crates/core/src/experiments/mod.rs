//! Seeded batch experiments.
//!
//! Trial `i` draws its path from `derive(master_seed, PATH, i)`; estimator
//! seeds are derived from the master seed, the trial index and the position
//! of θ (or δ) in its list. Trials run through [`Execution`] and are collected
//! by index, so reports do not depend on the worker count.

mod config;
mod report;

pub use config::{parse_list, ExperimentConfig, ExperimentKind, Preset, LONG_DELTA, SHORT_DELTA_FLOOR};
pub use report::{
    CltPoint, CltSummary, ExperimentReport, FilterPoint, FilterRow, FilterSummary, MleSummary, MleTrial,
    ReportSummary, SpectralRow, TrialRecord, TrialValues,
};

use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::inference::{predicted_mle_std, reduced_mle, ClampState};
use crate::likelihood::{clt_statistic, filter_mean_with, mc_log_lik_with, reduced_log_lik, CltScaling};
use crate::models::ModelSpec;
use crate::sde::{simulate_xy_with, PathPair, SimulationOptions};
use crate::seed::{self, stream};
use crate::spectral::{
    eigen_coefficients_with, initial_projections, summability_report, u_squared, InvariantIntegrator,
};
use crate::stats::{gaussian_cdf, histogram, ks_test, summarize, KsResult};

/// Seed of the observed path of trial `trial`.
pub fn trial_seed(master_seed: u64, trial: usize) -> u64 {
    seed::derive(master_seed, stream::PATH, trial as u64)
}

/// Seed of the particle estimator for entry `index` of the θ list in trial `trial`.
pub fn estimator_seed(master_seed: u64, index: usize, trial: usize) -> u64 {
    seed::derive(master_seed, stream::PARTICLES + index as u64, trial as u64)
}

fn in_trial<T>(trial: usize, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Trial { trial, source: Box::new(e) })
}

/// Validates `cfg` and runs it on `cfg.thread_count` workers.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    exec::with_threads(cfg.thread_count, || run_with(cfg, Execution::default()))?
}

/// Runs `cfg` on the current pool with the given execution mode.
pub fn run_with(cfg: &ExperimentConfig, exec: Execution) -> Result<ExperimentReport> {
    cfg.validate()?;
    let model = cfg.model_spec()?;
    let (records, summary) = match cfg.experiment {
        ExperimentKind::MleHist => run_mle(cfg, &model, exec)?,
        ExperimentKind::Clt => run_clt(cfg, &model, exec)?,
        ExperimentKind::FilterConvergence => run_filter(cfg, &model, exec)?,
        ExperimentKind::SpectralReport => (Vec::new(), run_spectral(cfg, &model)?),
    };
    Ok(ExperimentReport {
        config: cfg.clone(),
        records,
        summary,
    })
}

fn simulation_options(cfg: &ExperimentConfig) -> SimulationOptions {
    SimulationOptions {
        observation_noise: !cfg.noiseless,
    }
}

fn simulate(cfg: &ExperimentConfig, model: &ModelSpec, delta: f64, seed: u64) -> Result<PathPair> {
    simulate_xy_with(
        model,
        cfg.alpha,
        delta,
        cfg.horizon,
        cfg.dt_for(delta),
        cfg.x0,
        seed,
        simulation_options(cfg),
    )
}

fn run_mle(cfg: &ExperimentConfig, model: &ModelSpec, exec: Execution) -> Result<(Vec<TrialRecord>, ReportSummary)> {
    let integrator = InvariantIntegrator::shared(cfg.n_quad)?;
    let hbar = |t: f64| integrator.hbar(model, t);
    let table = eigen_coefficients_with(&integrator, model, cfg.alpha, cfg.truncation)?;
    let predicted_std = predicted_mle_std(table.hdot, cfg.horizon)?;

    let records = exec.try_map(cfg.n_trials, |i| {
        let seed = trial_seed(cfg.master_seed, i);
        in_trial(i, (|| {
            let path = simulate(cfg, model, cfg.delta, seed)?;
            let y_final = path.y_final();
            let mle = reduced_mle(model, hbar, y_final, cfg.horizon)?;
            Ok(TrialRecord {
                trial: i,
                seed,
                values: TrialValues::Mle(MleTrial {
                    y_final,
                    theta_hat: mle.theta_hat,
                    clamped: mle.clamped,
                }),
            })
        })())
    })?;

    let estimates: Vec<f64> = records
        .iter()
        .map(|r| match &r.values {
            TrialValues::Mle(m) => m.theta_hat,
            _ => unreachable!(),
        })
        .collect();
    let clamped = records
        .iter()
        .filter(|r| matches!(&r.values, TrialValues::Mle(m) if m.clamped != ClampState::Interior))
        .count();
    let summary = MleSummary {
        alpha: cfg.alpha,
        hbar_alpha: table.hbar,
        hdot_alpha: table.hdot,
        predicted_std,
        summary: summarize(&estimates).ok(),
        clamped_fraction: clamped as f64 / estimates.len() as f64,
        histogram: histogram(&estimates, cfg.bins)?,
    };
    Ok((records, ReportSummary::Mle(summary)))
}

fn ks_zero_mean(samples: &[f64], std: f64) -> Option<KsResult> {
    if samples.len() < 2 || !(std > 0.0) {
        return None;
    }
    ks_test(samples, |x| gaussian_cdf(x, 0.0, std).unwrap_or(f64::NAN)).ok()
}

fn run_clt(cfg: &ExperimentConfig, model: &ModelSpec, exec: Execution) -> Result<(Vec<TrialRecord>, ReportSummary)> {
    let integrator = InvariantIntegrator::shared(cfg.n_quad)?;
    let tables = cfg
        .theta_list
        .iter()
        .map(|&t| eigen_coefficients_with(&integrator, model, t, cfg.truncation))
        .collect::<Result<Vec<_>>>()?;

    let records = exec.try_map(cfg.n_trials, |i| {
        let seed = trial_seed(cfg.master_seed, i);
        in_trial(i, (|| {
            let path = simulate(cfg, model, cfg.delta, seed)?;
            let y_final = path.y_final();
            let mut points = Vec::with_capacity(tables.len());
            for (k, table) in tables.iter().enumerate() {
                let est = mc_log_lik_with(
                    model,
                    table.theta,
                    &path,
                    cfg.n_particles,
                    estimator_seed(cfg.master_seed, k, i),
                    exec,
                )?;
                let rho_reduced = reduced_log_lik(table.hbar, y_final, cfg.horizon);
                points.push(CltPoint {
                    theta: table.theta,
                    rho_mc: est.value,
                    rho_reduced,
                    statistic: clt_statistic(est.value, rho_reduced, cfg.horizon, CltScaling::PerSqrtT, cfg.delta),
                    ess: est.ess,
                });
            }
            Ok(TrialRecord {
                trial: i,
                seed,
                values: TrialValues::Clt(points),
            })
        })())
    })?;

    let mut rows = Vec::with_capacity(tables.len());
    for (k, table) in tables.iter().enumerate() {
        let stats: Vec<f64> = records
            .iter()
            .map(|r| match &r.values {
                TrialValues::Clt(p) => p[k].statistic,
                _ => unreachable!(),
            })
            .collect();
        let ess_sum: f64 = records
            .iter()
            .map(|r| match &r.values {
                TrialValues::Clt(p) => p[k].ess,
                _ => unreachable!(),
            })
            .sum();
        let predicted_std = (cfg.delta * table.v2).sqrt();
        let summary = summarize(&stats).ok();
        rows.push(CltSummary {
            theta: table.theta,
            predicted_std,
            summary,
            gap: summary.map(|s| (s.std - predicted_std).abs()),
            ks_theory: ks_zero_mean(&stats, predicted_std),
            ks_fitted: summary.and_then(|s| ks_zero_mean(&stats, s.std)),
            mean_ess: ess_sum / records.len() as f64,
            histogram: histogram(&stats, cfg.bins)?,
        });
    }
    Ok((records, ReportSummary::Clt(rows)))
}

fn run_filter(
    cfg: &ExperimentConfig,
    model: &ModelSpec,
    exec: Execution,
) -> Result<(Vec<TrialRecord>, ReportSummary)> {
    let index = cfg.filter_index;
    let theta = cfg.alpha;
    let target = if index == 0 { 1.0 } else { 0.0 };
    let f = |x: f64| model.basis(index, theta, x);

    let records = exec.try_map(cfg.n_trials, |i| {
        let seed = trial_seed(cfg.master_seed, i);
        in_trial(i, (|| {
            let mut points = Vec::with_capacity(cfg.delta_list.len());
            for (d, &delta) in cfg.delta_list.iter().enumerate() {
                let path = simulate(cfg, model, delta, seed::derive(seed, stream::PATH, d as u64))?;
                let est = filter_mean_with(
                    model,
                    theta,
                    &path,
                    f,
                    cfg.n_particles,
                    seed::derive(seed, stream::PARTICLES, d as u64),
                    exec,
                )?;
                points.push(FilterPoint {
                    delta,
                    error: est.value - target,
                    ess: est.ess,
                    degenerate: est.degenerate,
                });
            }
            Ok(TrialRecord {
                trial: i,
                seed,
                values: TrialValues::Filter(points),
            })
        })())
    })?;

    let mut rows: Vec<FilterRow> = cfg
        .delta_list
        .iter()
        .map(|&delta| FilterRow {
            delta,
            mean_square: 0.0,
            degenerate_count: 0,
        })
        .collect();
    for r in &records {
        if let TrialValues::Filter(points) = &r.values {
            for (row, p) in rows.iter_mut().zip(points) {
                row.mean_square += p.error * p.error;
                row.degenerate_count += usize::from(p.degenerate);
            }
        }
    }
    for row in &mut rows {
        row.mean_square /= records.len() as f64;
    }
    let mut by_delta: Vec<&FilterRow> = rows.iter().collect();
    by_delta.sort_by(|a, b| b.delta.total_cmp(&a.delta));
    let nonincreasing = by_delta.windows(2).all(|w| w[1].mean_square <= w[0].mean_square);
    Ok((
        records,
        ReportSummary::Filter(FilterSummary {
            filter_index: index,
            rows,
            nonincreasing,
        }),
    ))
}

fn run_spectral(cfg: &ExperimentConfig, model: &ModelSpec) -> Result<ReportSummary> {
    let integrator = InvariantIntegrator::shared(cfg.n_quad)?;
    let rows = cfg
        .theta_list
        .iter()
        .map(|&theta| {
            let table = eigen_coefficients_with(&integrator, model, theta, cfg.truncation)?;
            let pi0 = initial_projections(model, theta, cfg.truncation, cfg.x0);
            let u2 = u_squared(&table, &pi0)?;
            let summability = summability_report(&table).ok();
            Ok(SpectralRow { table, u2, summability })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ReportSummary::Spectral(rows))
}
