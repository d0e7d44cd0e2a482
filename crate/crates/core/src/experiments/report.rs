//! Typed experiment results and their CSV rendering.

use std::io::Write;

use super::config::{ExperimentConfig, ExperimentKind};
use crate::error::Result;
use crate::inference::ClampState;
use crate::spectral::{SpectralTable, SummabilityReport};
use crate::stats::{Histogram, KsResult, Summary};

#[derive(Debug, Clone, PartialEq)]
pub struct MleTrial {
    pub y_final: f64,
    pub theta_hat: f64,
    pub clamped: ClampState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CltPoint {
    pub theta: f64,
    pub rho_mc: f64,
    pub rho_reduced: f64,
    pub statistic: f64,
    pub ess: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterPoint {
    pub delta: f64,
    /// `π_T[ψ_i] − ψ̄_i`.
    pub error: f64,
    pub ess: f64,
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrialValues {
    Mle(MleTrial),
    Clt(Vec<CltPoint>),
    Filter(Vec<FilterPoint>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub values: TrialValues,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MleSummary {
    pub alpha: f64,
    pub hbar_alpha: f64,
    pub hdot_alpha: f64,
    pub predicted_std: f64,
    /// `None` with fewer than two trials.
    pub summary: Option<Summary>,
    pub clamped_fraction: f64,
    pub histogram: Histogram,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CltSummary {
    pub theta: f64,
    /// `√(δ v²)`.
    pub predicted_std: f64,
    pub summary: Option<Summary>,
    /// `|empirical std − predicted std|`.
    pub gap: Option<f64>,
    /// KS against `N(0, δ v²)`.
    pub ks_theory: Option<KsResult>,
    /// KS against a zero-mean Gaussian with the empirical spread.
    pub ks_fitted: Option<KsResult>,
    pub mean_ess: f64,
    pub histogram: Histogram,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterRow {
    pub delta: f64,
    pub mean_square: f64,
    pub degenerate_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterSummary {
    pub filter_index: usize,
    pub rows: Vec<FilterRow>,
    /// Mean square is non-increasing as δ decreases.
    pub nonincreasing: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralRow {
    pub table: SpectralTable,
    pub u2: f64,
    pub summability: Option<SummabilityReport>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ReportSummary {
    Mle(MleSummary),
    Clt(Vec<CltSummary>),
    Filter(FilterSummary),
    Spectral(Vec<SpectralRow>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub records: Vec<TrialRecord>,
    pub summary: ReportSummary,
}

fn clamp_label(c: ClampState) -> &'static str {
    match c {
        ClampState::Interior => "interior",
        ClampState::ClampedLow => "low",
        ClampState::ClampedHigh => "high",
    }
}

fn join<T: ToString>(v: &[T]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(";")
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

fn write_histogram<W: Write>(out: &mut W, label: &str, h: &Histogram) -> Result<()> {
    writeln!(out, "# histogram: {label} edges={} counts={}", join(&h.edges), join(&h.counts))?;
    Ok(())
}

fn write_ks<W: Write>(out: &mut W, name: &str, ks: Option<&KsResult>) -> Result<()> {
    match ks {
        Some(k) => write!(out, " {name}_D={} {name}_p={}", k.statistic, k.p_value)?,
        None => write!(out, " {name}_D=NA {name}_p=NA")?,
    }
    Ok(())
}

impl ExperimentReport {
    pub fn kind(&self) -> ExperimentKind {
        self.config.experiment
    }

    /// Every trial-level value of the statistic at one θ (clt only).
    pub fn clt_statistics(&self, theta_index: usize) -> Vec<f64> {
        self.records
            .iter()
            .filter_map(|r| match &r.values {
                TrialValues::Clt(points) => points.get(theta_index).map(|p| p.statistic),
                _ => None,
            })
            .collect()
    }

    /// Every θ̂ (mle_hist only).
    pub fn estimates(&self) -> Vec<f64> {
        self.records
            .iter()
            .filter_map(|r| match &r.values {
                TrialValues::Mle(m) => Some(m.theta_hat),
                _ => None,
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        for (k, v) in self.config.echo() {
            writeln!(out, "# config: {k} = {v}")?;
        }
        match &self.summary {
            ReportSummary::Mle(s) => self.write_mle(&mut out, s)?,
            ReportSummary::Clt(s) => self.write_clt(&mut out, s)?,
            ReportSummary::Filter(s) => self.write_filter(&mut out, s)?,
            ReportSummary::Spectral(rows) => write_spectral(&mut out, rows, &self.config)?,
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("report is ASCII"))
    }

    fn write_mle<W: Write>(&self, out: &mut W, s: &MleSummary) -> Result<()> {
        writeln!(out, "trial,seed,y_T,theta_hat,clamped")?;
        for r in &self.records {
            if let TrialValues::Mle(m) = &r.values {
                writeln!(
                    out,
                    "{},{},{},{},{}",
                    r.trial,
                    r.seed,
                    m.y_final,
                    m.theta_hat,
                    clamp_label(m.clamped)
                )?;
            }
        }
        writeln!(
            out,
            "# summary: alpha={} hbar={} hdot={} predicted_std={} mean={} std={} clamped_fraction={}",
            s.alpha,
            s.hbar_alpha,
            s.hdot_alpha,
            s.predicted_std,
            opt(s.summary.map(|x| x.mean)),
            opt(s.summary.map(|x| x.std)),
            s.clamped_fraction
        )?;
        write_histogram(out, &format!("alpha={}", s.alpha), &s.histogram)
    }

    fn write_clt<W: Write>(&self, out: &mut W, rows: &[CltSummary]) -> Result<()> {
        writeln!(out, "trial,seed,theta,rho_mc,rho_reduced,statistic,ess")?;
        for r in &self.records {
            if let TrialValues::Clt(points) = &r.values {
                for p in points {
                    writeln!(
                        out,
                        "{},{},{},{},{},{},{}",
                        r.trial, r.seed, p.theta, p.rho_mc, p.rho_reduced, p.statistic, p.ess
                    )?;
                }
            }
        }
        for s in rows {
            write!(
                out,
                "# summary: theta={} predicted_std={} mean={} empirical_std={} gap={} mean_ess={}",
                s.theta,
                s.predicted_std,
                opt(s.summary.map(|x| x.mean)),
                opt(s.summary.map(|x| x.std)),
                opt(s.gap),
                s.mean_ess
            )?;
            write_ks(out, "ks_theory", s.ks_theory.as_ref())?;
            write_ks(out, "ks_fitted", s.ks_fitted.as_ref())?;
            writeln!(out)?;
        }
        for s in rows {
            write_histogram(out, &format!("theta={}", s.theta), &s.histogram)?;
        }
        Ok(())
    }

    fn write_filter<W: Write>(&self, out: &mut W, s: &FilterSummary) -> Result<()> {
        writeln!(out, "trial,seed,delta,error,ess,degenerate")?;
        for r in &self.records {
            if let TrialValues::Filter(points) = &r.values {
                for p in points {
                    writeln!(out, "{},{},{},{},{},{}", r.trial, r.seed, p.delta, p.error, p.ess, p.degenerate)?;
                }
            }
        }
        for row in &s.rows {
            writeln!(
                out,
                "# summary: filter_index={} delta={} mean_square={} degenerate={}",
                s.filter_index, row.delta, row.mean_square, row.degenerate_count
            )?;
        }
        writeln!(out, "# summary: nonincreasing={}", s.nonincreasing)?;
        Ok(())
    }
}

fn write_spectral<W: Write>(out: &mut W, rows: &[SpectralRow], cfg: &ExperimentConfig) -> Result<()> {
    let k = cfg.truncation;
    let coeff_cols: Vec<String> = (0..=k).map(|i| format!("c{i}")).collect();
    writeln!(out, "theta,{},v2,u2,hdot", coeff_cols.join(","))?;
    for r in rows {
        let t = &r.table;
        writeln!(out, "{},{},{},{},{}", t.theta, t.coeffs.iter().map(f64::to_string).collect::<Vec<_>>().join(","), t.v2, r.u2, t.hdot)?;
    }
    for r in rows {
        let t = &r.table;
        write!(out, "# summary: theta={} hbar={}", t.theta, t.hbar)?;
        if cfg.model == "ou-max" {
            let a = t.theta + 1.0 / (2.0 * std::f64::consts::PI).sqrt();
            let b = t.theta + 1.0 / (2.0 * std::f64::consts::PI.sqrt());
            write!(
                out,
                " closed_form_inv_sqrt_2pi={a} diff={} closed_form_inv_2sqrt_pi={b} diff={}",
                t.hbar - a,
                t.hbar - b
            )?;
        }
        writeln!(out)?;
        if let Some(s) = &r.summability {
            writeln!(
                out,
                "# summability: theta={} K_half={} K={} abs_sum={};{} rel_change={} double_sum={};{} rel_change={}",
                t.theta,
                s.half,
                s.full,
                s.abs_sum_half,
                s.abs_sum_full,
                s.abs_sum_rel_change,
                s.double_sum_half,
                s.double_sum_full,
                s.double_sum_rel_change
            )?;
        }
    }
    Ok(())
}
