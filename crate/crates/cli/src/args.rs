//! Flags shared between subcommands.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use decpep::{DgdConfig, DgdSpec, PerfMeasure, SolverSettings};

use crate::error::{CliError, Result};

pub const GAP_TOL_ENV: &str = "DECPEP_GAP_TOL";
pub const FEAS_TOL_ENV: &str = "DECPEP_FEAS_TOL";

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Measure {
    /// Function gap at the average of all iterates.
    Averaged,
    /// Function gap at the agent mean of the last iterates.
    LastMean,
    /// Mean squared distance of the last iterates to their mean.
    Consensus,
}

impl From<Measure> for PerfMeasure {
    fn from(m: Measure) -> Self {
        match m {
            Measure::Averaged => PerfMeasure::FGapAveragedIterate,
            Measure::LastMean => PerfMeasure::FGapLastIterateMean,
            Measure::Consensus => PerfMeasure::ConsensusError,
        }
    }
}

/// Step size, sizing and measure flags; any of them overrides `--config`.
#[derive(Debug, Clone, Default, Args)]
pub struct StepArgs {
    #[arg(long, short = 'K')]
    pub iters: Option<usize>,
    /// Step size α.
    #[arg(long = "step-size", conflicts_with = "h")]
    pub step_size: Option<f64>,
    /// Normalized step h, with α = R·h/(B·√K). Defaults to 1.
    #[arg(long)]
    pub h: Option<f64>,
    /// Initial distance bound R.
    #[arg(long)]
    pub radius: Option<f64>,
    /// Subgradient norm bound B.
    #[arg(long)]
    pub bound: Option<f64>,
    #[arg(long, value_enum)]
    pub measure: Option<Measure>,
    /// TOML file with the problem description.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SpectralArgs {
    #[arg(long, short = 'N')]
    pub agents: Option<usize>,
    /// Symmetric range [-λ, λ] for the non-leading eigenvalues.
    #[arg(long, conflicts_with_all = ["lambda_minus", "lambda_plus"])]
    pub lambda: Option<f64>,
    #[arg(
        long = "lambda-minus",
        requires = "lambda_plus",
        allow_negative_numbers = true
    )]
    pub lambda_minus: Option<f64>,
    #[arg(
        long = "lambda-plus",
        requires = "lambda_minus",
        allow_negative_numbers = true
    )]
    pub lambda_plus: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    /// Duality gap tolerance; defaults to $DECPEP_GAP_TOL or 1e-6.
    #[arg(long = "gap-tol")]
    pub gap_tol: Option<f64>,
    /// Feasibility tolerance; defaults to $DECPEP_FEAS_TOL or 1e-8.
    #[arg(long = "feas-tol")]
    pub feas_tol: Option<f64>,
    #[arg(long = "max-iters")]
    pub max_iters: Option<usize>,
    /// Worker threads for independent solves.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

fn env_tol(name: &str) -> Result<Option<f64>> {
    match std::env::var(name) {
        Ok(v) => v
            .trim()
            .parse::<f64>()
            .map(Some)
            .map_err(|e| CliError::Usage(format!("{name}='{v}': {e}"))),
        Err(_) => Ok(None),
    }
}

impl SolverArgs {
    pub fn settings(&self) -> Result<SolverSettings<f64>> {
        let mut s = SolverSettings::default();
        if let Some(v) = self.gap_tol.or(env_tol(GAP_TOL_ENV)?) {
            s.gap_tol = v;
        }
        if let Some(v) = self.feas_tol.or(env_tol(FEAS_TOL_ENV)?) {
            s.feas_tol = v;
        }
        if let Some(v) = self.max_iters {
            s.max_iters = v;
        }
        if !(s.gap_tol > 0.0 && s.feas_tol > 0.0) {
            return Err(CliError::Usage("solver tolerances must be positive".into()));
        }
        Ok(s)
    }
}

fn absolute(path: &Path) -> PathBuf {
    std::env::current_dir()
        .map(|d| d.join(path))
        .unwrap_or_else(|_| path.to_path_buf())
}

/// Loads `--config` if given and overlays the flags.
pub fn base_config(step: &StepArgs) -> Result<(DgdConfig, PathBuf)> {
    let (mut cfg, dir) = match &step.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
                path: path.display().to_string(),
                source,
            })?;
            let cfg: DgdConfig = toml::from_str(&text).map_err(|source| CliError::Config {
                path: path.display().to_string(),
                source,
            })?;
            let dir = absolute(path)
                .parent()
                .map(Path::to_path_buf)
                .unwrap_or_default();
            (cfg, dir)
        }
        None => (DgdConfig::default(), absolute(Path::new("."))),
    };
    if let Some(k) = step.iters {
        cfg.n_iters = k;
    }
    if let Some(a) = step.step_size {
        cfg.step_size = Some(a);
        cfg.h = None;
    }
    if let Some(h) = step.h {
        cfg.h = Some(h);
        cfg.step_size = None;
    }
    if step.radius.is_some() {
        cfg.radius = step.radius;
    }
    if step.bound.is_some() {
        cfg.bound = step.bound;
    }
    if let Some(m) = step.measure {
        cfg.measure = m.into();
    }
    Ok((cfg, dir))
}

pub fn overlay_spectral(cfg: &mut DgdConfig, args: &SpectralArgs) {
    if args.agents.is_some() {
        cfg.n_agents = args.agents;
    }
    if args.lambda.is_some() {
        cfg.lambda = args.lambda;
        cfg.lambda_minus = None;
        cfg.lambda_plus = None;
    }
    if args.lambda_minus.is_some() {
        cfg.lambda = None;
        cfg.lambda_minus = args.lambda_minus;
        cfg.lambda_plus = args.lambda_plus;
    }
}

pub fn overlay_matrix(cfg: &mut DgdConfig, matrix: Option<&Path>) {
    if let Some(m) = matrix {
        cfg.matrix_file = Some(absolute(m));
    }
}

pub fn resolve(cfg: DgdConfig, dir: &Path) -> Result<DgdSpec> {
    if cfg.n_iters == 0 {
        return Err(CliError::Usage(
            "the number of iterations is required (--iters or n_iters)".into(),
        ));
    }
    Ok(cfg.into_spec(dir)?)
}
