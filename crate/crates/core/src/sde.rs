//! Euler–Maruyama simulation of the coupled fast/slow system.
//!
//! ```text
//! X_{k+1} = X_k + b_θ(X_k) Δt/δ + σ_θ(X_k) √(Δt/δ) ξ_k
//! Y_{k+1} = Y_k + h_θ(X_k) Δt   + √Δt ζ_k,            Y_0 = 0
//! ```
//!
//! `ξ` and `ζ` are independent standard-normal streams derived from the path
//! seed. The step must resolve the fast scale: `Δt ≤ δ/10`.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::models::ModelSpec;
use crate::seed::{self, stream};

/// Default resolution of the fast scale: `Δt = δ / 50`.
pub const DEFAULT_STEPS_PER_DELTA: f64 = 50.0;
/// Coarsest admissible resolution: `Δt ≤ δ / 10`.
pub const MAX_DT_OVER_DELTA: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum X0Mode {
    /// Draw `X_0` from the invariant law μ_θ.
    #[default]
    Invariant,
    Fixed(f64),
}

impl fmt::Display for X0Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            X0Mode::Invariant => write!(f, "invariant"),
            X0Mode::Fixed(x) => write!(f, "fixed:{x}"),
        }
    }
}

impl FromStr for X0Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "invariant" {
            return Ok(X0Mode::Invariant);
        }
        let v = s.strip_prefix("fixed:").unwrap_or(s);
        v.parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .map(X0Mode::Fixed)
            .ok_or_else(|| Error::config(format!("invalid x0 mode '{s}' (use 'invariant' or 'fixed:<x>')")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathPair {
    pub delta: f64,
    pub theta_sim: f64,
    pub dt: f64,
    pub t_grid: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub seed: u64,
    pub x0_mode: X0Mode,
}

impl PathPair {
    pub fn n_steps(&self) -> usize {
        self.t_grid.len().saturating_sub(1)
    }

    pub fn horizon(&self) -> f64 {
        self.t_grid.last().copied().unwrap_or(0.0)
    }

    pub fn y_final(&self) -> f64 {
        self.y.last().copied().unwrap_or(0.0)
    }

    /// Writes `t,x,y` rows preceded by a `#` line recording the run parameters.
    pub fn write_csv<W: Write>(&self, model_name: &str, mut out: W) -> Result<()> {
        writeln!(
            out,
            "# model={} delta={} theta={} dt={} seed={} x0={} T={}",
            model_name,
            self.delta,
            self.theta_sim,
            self.dt,
            self.seed,
            self.x0_mode,
            self.horizon()
        )?;
        writeln!(out, "t,x,y")?;
        for k in 0..self.t_grid.len() {
            writeln!(out, "{},{},{}", self.t_grid[k], self.x[k], self.y[k])?;
        }
        Ok(())
    }

    /// Reads a path written by [`PathPair::write_csv`]; returns the model name too.
    pub fn read_csv<R: BufRead>(input: R) -> Result<(String, PathPair)> {
        let mut model = None;
        let (mut delta, mut theta, mut dt, mut seed_v, mut x0) = (None, None, None, None, None);
        let mut header_seen = false;
        let (mut t_grid, mut x, mut y) = (Vec::new(), Vec::new(), Vec::new());

        for (lineno, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(meta) = line.strip_prefix('#') {
                for tok in meta.split_whitespace() {
                    let Some((k, v)) = tok.split_once('=') else { continue };
                    let num = || {
                        v.parse::<f64>()
                            .map_err(|_| Error::config(format!("path CSV: bad value for {k}: '{v}'")))
                    };
                    match k {
                        "model" => model = Some(v.to_string()),
                        "delta" => delta = Some(num()?),
                        "theta" => theta = Some(num()?),
                        "dt" => dt = Some(num()?),
                        "seed" => {
                            seed_v = Some(v.parse::<u64>().map_err(|_| {
                                Error::config(format!("path CSV: bad seed '{v}'"))
                            })?)
                        }
                        "x0" => x0 = Some(v.parse::<X0Mode>()?),
                        _ => {}
                    }
                }
                continue;
            }
            if !header_seen {
                if line.replace(' ', "") != "t,x,y" {
                    return Err(Error::config(format!("path CSV: expected header 't,x,y', got '{line}'")));
                }
                header_seen = true;
                continue;
            }
            let vals: Vec<f64> = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::config(format!("path CSV line {}: '{line}'", lineno + 1)))?;
            if vals.len() != 3 {
                return Err(Error::config(format!("path CSV line {}: expected 3 columns", lineno + 1)));
            }
            t_grid.push(vals[0]);
            x.push(vals[1]);
            y.push(vals[2]);
        }

        let missing = |what: &str| Error::config(format!("path CSV: missing '{what}' in comment header"));
        let path = PathPair {
            delta: delta.ok_or_else(|| missing("delta"))?,
            theta_sim: theta.ok_or_else(|| missing("theta"))?,
            dt: dt.ok_or_else(|| missing("dt"))?,
            t_grid,
            x,
            y,
            seed: seed_v.unwrap_or(0),
            x0_mode: x0.unwrap_or_default(),
        };
        if path.t_grid.len() < 2 {
            return Err(Error::config("path CSV: need at least two grid points"));
        }
        Ok((model.unwrap_or_else(|| "ou-max".to_string()), path))
    }
}

/// Checks `0 < dt ≤ δ/10` and `0 < δ`.
pub fn check_resolution(delta: f64, dt: f64) -> Result<()> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::config(format!("delta must be positive, got {delta}")));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::config(format!("dt must be positive, got {dt}")));
    }
    if dt > MAX_DT_OVER_DELTA * delta * (1.0 + 1e-12) {
        return Err(Error::config(format!(
            "dt = {dt} exceeds delta/10 = {}; the fast scale is unresolved",
            MAX_DT_OVER_DELTA * delta
        )));
    }
    Ok(())
}

/// Number of steps of size `dt` covering `[0, horizon]`; `horizon/dt` must be an integer.
pub fn step_count(horizon: f64, dt: f64) -> Result<usize> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::config(format!("T must be positive, got {horizon}")));
    }
    let n = (horizon / dt).round();
    if n < 1.0 || ((n * dt - horizon) / horizon).abs() > 1e-9 {
        return Err(Error::config(format!("T = {horizon} is not a multiple of dt = {dt}")));
    }
    Ok(n as usize)
}

/// Precomputed scalings of a hidden Euler–Maruyama step.
#[derive(Debug, Clone, Copy)]
pub struct HiddenStepper {
    drift_scale: f64,
    noise_scale: f64,
}

impl HiddenStepper {
    pub fn new(delta: f64, dt: f64) -> Self {
        Self {
            drift_scale: dt / delta,
            noise_scale: (dt / delta).sqrt(),
        }
    }

    #[inline(always)]
    pub fn step(&self, model: &ModelSpec, theta: f64, x: f64, xi: f64) -> f64 {
        x + model.drift(theta, x) * self.drift_scale + model.diffusion(theta, x) * self.noise_scale * xi
    }
}

/// One Euler–Maruyama update of the hidden coordinate.
pub fn step_hidden(model: &ModelSpec, theta: f64, delta: f64, dt: f64, x: f64, xi: f64) -> Result<f64> {
    check_resolution(delta, dt)?;
    let next = HiddenStepper::new(delta, dt).step(model, theta, x, xi);
    if next.is_finite() {
        Ok(next)
    } else {
        Err(Error::numerical(format!("hidden state blew up from x = {x}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationOptions {
    /// When false, `dY = h(X) dt` exactly (noiseless observation oracle).
    pub observation_noise: bool,
}

impl Default for SimulationOptions {
    fn default() -> Self {
        Self { observation_noise: true }
    }
}

pub fn simulate_xy(
    model: &ModelSpec,
    theta: f64,
    delta: f64,
    horizon: f64,
    dt: f64,
    x0_mode: X0Mode,
    seed: u64,
) -> Result<PathPair> {
    simulate_xy_with(model, theta, delta, horizon, dt, x0_mode, seed, SimulationOptions::default())
}

#[allow(clippy::too_many_arguments)]
pub fn simulate_xy_with(
    model: &ModelSpec,
    theta: f64,
    delta: f64,
    horizon: f64,
    dt: f64,
    x0_mode: X0Mode,
    seed: u64,
    options: SimulationOptions,
) -> Result<PathPair> {
    check_resolution(delta, dt)?;
    model.theta_bounds.check(theta)?;
    let n = step_count(horizon, dt)?;

    let mut hidden_rng = seed::rng(seed::derive(seed, stream::HIDDEN, 0));
    let mut obs_rng = seed::rng(seed::derive(seed, stream::OBSERVATION, 0));
    let stepper = HiddenStepper::new(delta, dt);
    let sqrt_dt = dt.sqrt();

    let mut x = Vec::with_capacity(n + 1);
    let mut y = Vec::with_capacity(n + 1);
    let mut xk = match x0_mode {
        X0Mode::Invariant => model.sample_invariant(theta, &mut hidden_rng),
        X0Mode::Fixed(v) => v,
    };
    let mut yk = 0.0;
    x.push(xk);
    y.push(yk);
    for k in 0..n {
        let xi: f64 = StandardNormal.sample(&mut hidden_rng);
        let zeta: f64 = StandardNormal.sample(&mut obs_rng);
        yk += model.observation(theta, xk) * dt;
        if options.observation_noise {
            yk += sqrt_dt * zeta;
        }
        xk = stepper.step(model, theta, xk, xi);
        if !(xk.is_finite() && yk.is_finite()) {
            return Err(Error::numerical(format!(
                "simulation blew up at step {} (t = {})",
                k + 1,
                (k + 1) as f64 * dt
            )));
        }
        x.push(xk);
        y.push(yk);
    }

    Ok(PathPair {
        delta,
        theta_sim: theta,
        dt,
        t_grid: (0..=n).map(|k| k as f64 * dt).collect(),
        x,
        y,
        seed,
        x0_mode,
    })
}
