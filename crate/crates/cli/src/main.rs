use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use msfilter::experiments::{self, ExperimentConfig, ExperimentKind, Preset};
use msfilter::inference::{grid_mle, predicted_mle_std, reduced_mle, ClampState, DEFAULT_GRID_POINTS};
use msfilter::likelihood::{mc_log_lik, reduced_log_lik};
use msfilter::models;
use msfilter::sde::{simulate_xy_with, SimulationOptions};
use msfilter::spectral::{eigen_coefficients, InvariantIntegrator};
use msfilter::{exec, Error, PathPair, Result};

#[derive(Parser)]
#[command(name = "msfilter", version, about = "Likelihood inference for partially observed multiscale diffusions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one (X, Y) path and write it as CSV.
    Simulate(Common),
    /// Eigen-coefficient table with v² and u² for theta_list.
    Spectral(Common),
    /// Monte-Carlo and reduced log-likelihood of a stored path at theta_list.
    Loglik {
        #[command(flatten)]
        common: Common,
        /// Path CSV written by `simulate`.
        #[arg(long)]
        path: PathBuf,
    },
    /// Reduced and grid maximum-likelihood estimates from a stored path.
    Mle {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        path: PathBuf,
        /// Also maximize the Monte-Carlo likelihood over the grid.
        #[arg(long)]
        mc: bool,
        #[arg(long, default_value_t = DEFAULT_GRID_POINTS)]
        grid_points: usize,
    },
    /// Run a batch experiment (mle_hist, clt, filter_convergence, spectral_report).
    Experiment {
        /// Experiment kind; overrides the `experiment` key of the config file.
        kind: Option<String>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args, Clone)]
struct Common {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Trial and particle budget: desk or paper.
    #[arg(long)]
    preset: Option<String>,
    /// Small-δ variant of the clt experiment.
    #[arg(long)]
    long: bool,
    /// Output file (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override any config key, e.g. `--set delta=0.05`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl Common {
    fn load(&self, kind: Option<ExperimentKind>) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Error::Config(format!("cannot read config {}: {e}", p.display())))?;
                match kind {
                    Some(k) => ExperimentConfig::from_text_as(&text, k)?,
                    None => ExperimentConfig::from_text(&text, None)?,
                }
            }
            None => ExperimentConfig::defaults(kind.unwrap_or(ExperimentKind::SpectralReport)),
        };
        if let Some(p) = &self.preset {
            cfg.apply_preset(p.parse::<Preset>()?);
        }
        if self.long {
            cfg.apply_long();
        }
        for kv in &self.overrides {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got '{kv}'")))?;
            cfg.set(k.trim(), v)?;
        }
        if let Some(s) = self.seed {
            cfg.master_seed = s;
        }
        if let Some(t) = self.threads {
            if t == 0 {
                return Err(Error::Config("--threads must be at least 1".into()));
            }
            cfg.thread_count = Some(t);
        }
        if let Some(o) = &self.out {
            cfg.output = Some(o.display().to_string());
        }
        Ok(cfg)
    }
}

fn open_output(target: Option<&str>) -> Result<Box<dyn Write>> {
    Ok(match target {
        Some(p) if p != "-" => Box::new(BufWriter::new(File::create(p).map_err(|e| {
            Error::Io(format!("cannot create {p}: {e}"))
        })?)),
        _ => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn read_path(p: &Path) -> Result<(String, PathPair)> {
    let f = File::open(p).map_err(|e| Error::Config(format!("cannot open path file {}: {e}", p.display())))?;
    PathPair::read_csv(BufReader::new(f))
}

fn clamp_label(c: ClampState) -> &'static str {
    match c {
        ClampState::Interior => "interior",
        ClampState::ClampedLow => "low",
        ClampState::ClampedHigh => "high",
    }
}

fn simulate(common: &Common) -> Result<()> {
    let cfg = common.load(Some(ExperimentKind::MleHist))?;
    let model = cfg.model_spec()?;
    model.theta_bounds.check(cfg.alpha)?;
    let options = SimulationOptions { observation_noise: !cfg.noiseless };
    let path = simulate_xy_with(
        &model,
        cfg.alpha,
        cfg.delta,
        cfg.horizon,
        cfg.dt_for(cfg.delta),
        cfg.x0,
        cfg.master_seed,
        options,
    )?;
    let mut out = open_output(cfg.output.as_deref())?;
    path.write_csv(&model.name, &mut out)?;
    out.flush()?;
    Ok(())
}

fn loglik(common: &Common, path_file: &Path) -> Result<()> {
    let cfg = common.load(Some(ExperimentKind::Clt))?;
    let (model_name, path) = read_path(path_file)?;
    let model = models::by_name(&model_name, cfg.model_c)?;
    if cfg.n_particles == 0 {
        return Err(Error::Config("n_particles must be at least 1".into()));
    }
    let integrator = InvariantIntegrator::shared(cfg.n_quad)?;
    let horizon = path.horizon();
    let rows = exec::with_threads(cfg.thread_count, || {
        cfg.theta_list
            .iter()
            .enumerate()
            .map(|(k, &theta)| {
                model.theta_bounds.check(theta)?;
                let est = mc_log_lik(&model, theta, &path, cfg.n_particles, experiments::estimator_seed(cfg.master_seed, k, 0))?;
                let rho_bar = reduced_log_lik(integrator.hbar(&model, theta)?, path.y_final(), horizon);
                Ok((theta, est.value, rho_bar, est.ess))
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let mut out = open_output(cfg.output.as_deref())?;
    writeln!(out, "# path={} model={} n_particles={} master_seed={}", path_file.display(), model_name, cfg.n_particles, cfg.master_seed)?;
    writeln!(out, "theta,rho_mc,rho_reduced,ess")?;
    for (t, mc, red, ess) in rows {
        writeln!(out, "{t},{mc},{red},{ess}")?;
    }
    out.flush()?;
    Ok(())
}

fn mle(common: &Common, path_file: &Path, mc: bool, grid_points: usize) -> Result<()> {
    let cfg = common.load(Some(ExperimentKind::MleHist))?;
    let (model_name, path) = read_path(path_file)?;
    let model = models::by_name(&model_name, cfg.model_c)?.with_bounds(cfg.model_spec()?.theta_bounds);
    let integrator = InvariantIntegrator::shared(cfg.n_quad)?;
    let hbar = |t: f64| integrator.hbar(&model, t);
    let horizon = path.horizon();
    let y = path.y_final();
    if grid_points < 2 {
        return Err(Error::Config("grid_points must be at least 2".into()));
    }

    let root = reduced_mle(&model, hbar, y, horizon)?;
    let hdot = eigen_coefficients(&model, root.theta_hat, cfg.truncation, cfg.n_quad)?.hdot;
    let grid = model.theta_bounds.grid(grid_points);
    let hbar_grid = grid.iter().map(|&t| hbar(t)).collect::<Result<Vec<_>>>()?;
    let reduced_grid = grid_mle(
        |t| {
            let i = grid.iter().position(|&g| g == t).expect("grid point");
            reduced_log_lik(hbar_grid[i], y, horizon)
        },
        &grid,
    )?;

    let mut out = open_output(cfg.output.as_deref())?;
    writeln!(out, "# path={} model={} T={} y_T={}", path_file.display(), model_name, horizon, y)?;
    writeln!(out, "method,theta_hat,clamped,objective,predicted_std")?;
    let std = predicted_mle_std(hdot, horizon).map_or("NA".to_string(), |s| s.to_string());
    writeln!(out, "reduced_root,{},{},{},{std}", root.theta_hat, clamp_label(root.clamped), root.objective_value)?;
    writeln!(
        out,
        "reduced_grid,{},{},{},NA",
        reduced_grid.theta_hat,
        clamp_label(reduced_grid.clamped),
        reduced_grid.objective_value
    )?;
    if mc {
        if cfg.n_particles == 0 {
            return Err(Error::Config("--mc needs n_particles >= 1".into()));
        }
        let values = exec::with_threads(cfg.thread_count, || {
            grid.iter()
                .map(|&t| mc_log_lik(&model, t, &path, cfg.n_particles, cfg.master_seed).map(|e| e.value))
                .collect::<Result<Vec<_>>>()
        })??;
        let r = grid_mle(
            |t| values[grid.iter().position(|&g| g == t).expect("grid point")],
            &grid,
        )?;
        writeln!(out, "monte_carlo_grid,{},{},{},NA", r.theta_hat, clamp_label(r.clamped), r.objective_value)?;
    }
    out.flush()?;
    Ok(())
}

fn experiment(kind: Option<&str>, common: &Common) -> Result<()> {
    let kind = kind.map(str::parse::<ExperimentKind>).transpose()?;
    if kind.is_none() && common.config.is_none() {
        return Err(Error::Config("name an experiment or pass --config".into()));
    }
    let cfg = common.load(kind)?;
    let report = experiments::run_experiment(&cfg)?;
    let mut out = open_output(cfg.output.as_deref())?;
    report.write_csv(&mut out)
}

fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate(c) => simulate(c),
        Command::Spectral(c) => experiment(Some("spectral_report"), c),
        Command::Loglik { common, path } => loglik(common, path),
        Command::Mle {
            common,
            path,
            mc,
            grid_points,
        } => mle(common, path, *mc, *grid_points),
        Command::Experiment { kind, common } => experiment(kind.as_deref(), common),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if let Some(i) = e.trial_index() {
                eprintln!("msfilter: failed in trial {i}");
            }
            eprintln!("msfilter: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
