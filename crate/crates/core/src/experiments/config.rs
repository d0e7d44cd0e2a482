//! Flat `key = value` experiment configuration.
//!
//! ```text
//! # comment
//! experiment = clt
//! model = ou-max
//! theta_list = 0.5, 1, 1.5
//! delta = 0.01
//! T = 5
//! ```
//!
//! Keys match the [`ExperimentConfig`] fields (`T` for the horizon). Values
//! given on the command line are applied after the file.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::models::{self, ModelSpec};
use crate::sde::{self, X0Mode};
use crate::spectral::{DEFAULT_N_QUAD, DEFAULT_TRUNCATION};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    MleHist,
    Clt,
    FilterConvergence,
    SpectralReport,
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExperimentKind::MleHist => "mle_hist",
            ExperimentKind::Clt => "clt",
            ExperimentKind::FilterConvergence => "filter_convergence",
            ExperimentKind::SpectralReport => "spectral_report",
        })
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().replace('-', "_").as_str() {
            "mle_hist" => Ok(ExperimentKind::MleHist),
            "clt" => Ok(ExperimentKind::Clt),
            "filter_convergence" => Ok(ExperimentKind::FilterConvergence),
            "spectral_report" => Ok(ExperimentKind::SpectralReport),
            other => Err(Error::config(format!(
                "unknown experiment '{other}' (mle_hist, clt, filter_convergence, spectral_report)"
            ))),
        }
    }
}

/// Compute budget presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// Reduced trial and particle counts for a desktop run.
    Desk,
    /// The published trial and particle counts.
    Paper,
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "desk" => Ok(Preset::Desk),
            "paper" => Ok(Preset::Paper),
            other => Err(Error::config(format!("unknown preset '{other}' (desk or paper)"))),
        }
    }
}

/// δ used by the `--long` variant of the clt experiment.
pub const LONG_DELTA: f64 = 0.001;
/// Smallest δ the clt experiment accepts without `--long`.
pub const SHORT_DELTA_FLOOR: f64 = 0.005;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub model: String,
    /// Observation constant for the `constant-h` model.
    pub model_c: f64,
    pub theta_lo: f64,
    pub theta_hi: f64,
    pub alpha: f64,
    pub theta_list: Vec<f64>,
    pub delta: f64,
    /// δ values of the filter convergence experiment.
    pub delta_list: Vec<f64>,
    pub horizon: f64,
    /// `None` means `δ / 50`.
    pub dt: Option<f64>,
    pub n_trials: usize,
    pub n_particles: usize,
    pub truncation: usize,
    pub n_quad: usize,
    pub master_seed: u64,
    pub thread_count: Option<usize>,
    pub output: Option<String>,
    pub x0: X0Mode,
    pub bins: usize,
    /// Index `i` of the test function `ψ_i` in the filter experiment.
    pub filter_index: usize,
    /// Drop observation noise (deterministic oracle for the MLE pipeline).
    pub noiseless: bool,
    pub long: bool,
}

impl ExperimentConfig {
    pub fn defaults(kind: ExperimentKind) -> Self {
        let mut cfg = ExperimentConfig {
            experiment: kind,
            model: "ou-max".to_string(),
            model_c: 0.0,
            theta_lo: 0.0,
            theta_hi: 2.0,
            alpha: 1.0,
            theta_list: vec![0.5, 1.0, 1.5],
            delta: 0.01,
            delta_list: vec![0.2, 0.05, 0.0125],
            horizon: 5.0,
            dt: None,
            n_trials: 100,
            n_particles: 1000,
            truncation: DEFAULT_TRUNCATION,
            n_quad: DEFAULT_N_QUAD,
            master_seed: 1,
            thread_count: None,
            output: None,
            x0: X0Mode::Invariant,
            bins: 30,
            filter_index: 1,
            noiseless: false,
            long: false,
        };
        match kind {
            ExperimentKind::MleHist => {
                cfg.n_trials = 2000;
                cfg.n_particles = 0;
            }
            ExperimentKind::Clt => cfg.apply_preset(Preset::Desk),
            ExperimentKind::FilterConvergence => {
                cfg.n_trials = 50;
                cfg.n_particles = 5000;
            }
            ExperimentKind::SpectralReport => {
                cfg.n_trials = 0;
                cfg.n_particles = 0;
            }
        }
        cfg
    }

    pub fn apply_preset(&mut self, preset: Preset) {
        match (self.experiment, preset) {
            (ExperimentKind::Clt, Preset::Desk) => {
                self.n_trials = 100;
                self.n_particles = 1000;
            }
            (ExperimentKind::Clt, Preset::Paper) => {
                self.n_trials = 300;
                self.n_particles = 2000;
            }
            (ExperimentKind::MleHist, _) => self.n_trials = 2000,
            (ExperimentKind::FilterConvergence, _) => {
                self.n_trials = 50;
                self.n_particles = 5000;
            }
            (ExperimentKind::SpectralReport, _) => {}
        }
    }

    /// Switches the clt experiment to the small-δ variant.
    pub fn apply_long(&mut self) {
        self.long = true;
        if self.experiment == ExperimentKind::Clt {
            self.delta = LONG_DELTA;
        }
    }

    /// Parses a config file. `kind` is used when the file has no `experiment` key.
    pub fn from_text(text: &str, kind: Option<ExperimentKind>) -> Result<Self> {
        Self::parse(text, kind, false)
    }

    /// Parses a config file, ignoring its `experiment` key in favour of `kind`.
    pub fn from_text_as(text: &str, kind: ExperimentKind) -> Result<Self> {
        Self::parse(text, Some(kind), true)
    }

    fn parse(text: &str, kind: Option<ExperimentKind>, force: bool) -> Result<Self> {
        let pairs = parse_pairs(text)?;
        let from_file = pairs
            .iter()
            .find(|(k, _)| k == "experiment")
            .map(|(_, v)| v.parse::<ExperimentKind>())
            .transpose()?;
        let kind = if force { kind } else { from_file.or(kind) };
        let kind = kind
            .ok_or_else(|| Error::config("config does not name an experiment"))?;
        let mut cfg = Self::defaults(kind);
        for (k, v) in &pairs {
            if k != "experiment" {
                cfg.set(k, v)?;
            }
        }
        Ok(cfg)
    }

    /// Sets one field from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "experiment" => self.experiment = v.parse()?,
            "model" => self.model = v.to_string(),
            "model_c" => self.model_c = parse_f64(key, v)?,
            "theta_lo" => self.theta_lo = parse_f64(key, v)?,
            "theta_hi" => self.theta_hi = parse_f64(key, v)?,
            "alpha" => self.alpha = parse_f64(key, v)?,
            "theta_list" => self.theta_list = parse_list(key, v)?,
            "delta" => self.delta = parse_f64(key, v)?,
            "delta_list" => self.delta_list = parse_list(key, v)?,
            "T" => self.horizon = parse_f64(key, v)?,
            "dt" => {
                self.dt = if v == "auto" { None } else { Some(parse_f64(key, v)?) };
            }
            "n_trials" => self.n_trials = parse_usize(key, v)?,
            "n_particles" | "N" => self.n_particles = parse_usize(key, v)?,
            "truncation" | "K" => self.truncation = parse_usize(key, v)?,
            "n_quad" => self.n_quad = parse_usize(key, v)?,
            "master_seed" => {
                self.master_seed = v
                    .parse()
                    .map_err(|_| Error::config(format!("master_seed: expected u64, got '{v}'")))?
            }
            "thread_count" => self.thread_count = Some(parse_usize(key, v)?),
            "output" => self.output = Some(v.to_string()),
            "x0" => self.x0 = v.parse()?,
            "bins" => self.bins = parse_usize(key, v)?,
            "filter_index" => self.filter_index = parse_usize(key, v)?,
            "noiseless" => self.noiseless = parse_bool(key, v)?,
            "long" => self.long = parse_bool(key, v)?,
            other => return Err(Error::config(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }

    pub fn model_spec(&self) -> Result<ModelSpec> {
        let bounds = models::ThetaBounds::new(self.theta_lo, self.theta_hi)?;
        Ok(models::by_name(&self.model, self.model_c)?.with_bounds(bounds))
    }

    /// Step size for a given δ.
    pub fn dt_for(&self, delta: f64) -> f64 {
        self.dt.unwrap_or(delta / sde::DEFAULT_STEPS_PER_DELTA)
    }

    pub fn validate(&self) -> Result<()> {
        let model = self.model_spec()?;
        let bounds = model.theta_bounds;
        bounds.check(self.alpha)?;
        for &t in &self.theta_list {
            bounds.check(t)?;
        }
        if self.truncation < 1 {
            return Err(Error::config("truncation must be at least 1"));
        }
        if self.n_quad < 2 * self.truncation {
            return Err(Error::config("n_quad must be at least 2 * truncation"));
        }
        if self.bins == 0 {
            return Err(Error::config("bins must be at least 1"));
        }
        let deltas: &[f64] = match self.experiment {
            ExperimentKind::SpectralReport => &[],
            ExperimentKind::FilterConvergence => &self.delta_list,
            _ => std::slice::from_ref(&self.delta),
        };
        for &d in deltas {
            if !(d > 0.0 && d < 1.0) {
                return Err(Error::config(format!("delta = {d} must lie in (0, 1)")));
            }
            let dt = self.dt_for(d);
            sde::check_resolution(d, dt)?;
            sde::step_count(self.horizon, dt)?;
        }
        match self.experiment {
            ExperimentKind::SpectralReport => {
                if self.theta_list.is_empty() {
                    return Err(Error::config("theta_list is empty"));
                }
            }
            ExperimentKind::MleHist => {
                if self.n_trials == 0 {
                    return Err(Error::config("n_trials must be at least 1"));
                }
            }
            ExperimentKind::Clt | ExperimentKind::FilterConvergence => {
                if self.n_trials == 0 || self.n_particles == 0 {
                    return Err(Error::config("n_trials and n_particles must be at least 1"));
                }
                if self.experiment == ExperimentKind::Clt {
                    if self.theta_list.is_empty() {
                        return Err(Error::config("theta_list is empty"));
                    }
                    if self.x0 != X0Mode::Invariant {
                        return Err(Error::config("the clt experiment requires x0 = invariant"));
                    }
                    if self.delta < SHORT_DELTA_FLOOR && !self.long {
                        return Err(Error::config(format!(
                            "delta = {} below {SHORT_DELTA_FLOOR} needs the --long flag",
                            self.delta
                        )));
                    }
                }
                if self.experiment == ExperimentKind::FilterConvergence && self.delta_list.is_empty() {
                    return Err(Error::config("delta_list is empty"));
                }
            }
        }
        Ok(())
    }

    /// `key = value` lines echoed in report headers.
    ///
    /// Worker count and output location are excluded: they must not change
    /// the report bytes.
    pub fn echo(&self) -> Vec<(String, String)> {
        let list = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";");
        let mut out = vec![
            ("experiment", self.experiment.to_string()),
            ("model", self.model.clone()),
            ("model_c", self.model_c.to_string()),
            ("theta_lo", self.theta_lo.to_string()),
            ("theta_hi", self.theta_hi.to_string()),
            ("alpha", self.alpha.to_string()),
            ("theta_list", list(&self.theta_list)),
            ("delta", self.delta.to_string()),
            ("delta_list", list(&self.delta_list)),
            ("T", self.horizon.to_string()),
            ("dt", self.dt.map_or("auto".to_string(), |d| d.to_string())),
            ("n_trials", self.n_trials.to_string()),
            ("n_particles", self.n_particles.to_string()),
            ("truncation", self.truncation.to_string()),
            ("n_quad", self.n_quad.to_string()),
            ("master_seed", self.master_seed.to_string()),
            ("x0", self.x0.to_string()),
            ("bins", self.bins.to_string()),
            ("filter_index", self.filter_index.to_string()),
            ("noiseless", self.noiseless.to_string()),
            ("long", self.long.to_string()),
        ];
        if self.experiment == ExperimentKind::Clt {
            out.push(("t_eval", self.horizon.to_string()));
        }
        out.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }
}

fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::config(format!("config line {}: expected 'key = value'", i + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| Error::config(format!("{key}: expected a number, got '{v}'")))
}

fn parse_usize(key: &str, v: &str) -> Result<usize> {
    v.parse::<usize>()
        .map_err(|_| Error::config(format!("{key}: expected a non-negative integer, got '{v}'")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(Error::config(format!("{key}: expected a boolean, got '{v}'"))),
    }
}

/// Comma- or semicolon-separated list of numbers.
pub fn parse_list(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split([',', ';'])
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_f64(key, s))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_file() {
        let text = "\
# likelihood study
experiment = clt
theta_list = 0.5, 1, 1.5   # three parameters
delta = 0.01
T = 5
n_particles = 2000
master_seed = 99
";
        let cfg = ExperimentConfig::from_text(text, None).unwrap();
        assert_eq!(cfg.experiment, ExperimentKind::Clt);
        assert_eq!(cfg.theta_list, vec![0.5, 1.0, 1.5]);
        assert_eq!(cfg.n_particles, 2000);
        assert_eq!(cfg.master_seed, 99);
        assert_eq!(cfg.dt_for(0.01), 0.0002);
        cfg.validate().unwrap();
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        assert!(ExperimentConfig::from_text("experiment = clt\nfoo = 1", None).is_err());
        assert!(ExperimentConfig::from_text("experiment = clt\ndelta = abc", None).is_err());
        assert!(ExperimentConfig::from_text("delta = 0.1", None).is_err());
        assert!(ExperimentConfig::from_text("experiment = nope", None).is_err());
        assert!(ExperimentConfig::from_text("experiment clt", None).is_err());
    }

    #[test]
    fn validation() {
        let mut cfg = ExperimentConfig::defaults(ExperimentKind::Clt);
        cfg.validate().unwrap();
        cfg.dt = Some(0.002);
        assert!(cfg.validate().is_err());
        cfg.dt = None;
        cfg.alpha = 2.5;
        assert!(cfg.validate().is_err());
        cfg.alpha = 1.0;
        cfg.theta_list.push(-0.1);
        assert!(cfg.validate().is_err());
        cfg.theta_list.pop();
        cfg.delta = 0.001;
        assert!(cfg.validate().is_err());
        cfg.apply_long();
        cfg.validate().unwrap();
        cfg.x0 = X0Mode::Fixed(1.0);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn presets() {
        let mut cfg = ExperimentConfig::defaults(ExperimentKind::Clt);
        assert_eq!((cfg.n_trials, cfg.n_particles), (100, 1000));
        cfg.apply_preset(Preset::Paper);
        assert_eq!((cfg.n_trials, cfg.n_particles), (300, 2000));
        let cfg = ExperimentConfig::defaults(ExperimentKind::MleHist);
        assert_eq!(cfg.n_trials, 2000);
    }

    #[test]
    fn echo_omits_scheduling_fields() {
        let mut cfg = ExperimentConfig::defaults(ExperimentKind::Clt);
        let a = cfg.echo();
        cfg.thread_count = Some(8);
        cfg.output = Some("x.csv".into());
        assert_eq!(a, cfg.echo());
        assert!(a.iter().any(|(k, v)| k == "t_eval" && v == "5"));
    }
}
