//! `decpep`: worst-case bounds for decentralized gradient descent from the
//! command line.

mod args;
mod error;
mod manifest;

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use decpep::explorer::{
    random_search, sweep, write_search_csv, write_sweep_csv, SweepAxis, SweepGrid,
};
use decpep::recovery::DEFAULT_RANK_TOL;
use decpep::{
    estimate_from_dgd, membership_check, reconstruct, scaled_theory_bound, solve_dgd, w1_matrix,
    DgdSpec, MatrixMode, SolveStatus, SpectralClass,
};

use args::{
    base_config, overlay_matrix, overlay_spectral, resolve, SolverArgs, SpectralArgs, StepArgs,
};
use error::{CliError, Result};
use manifest::{
    manifest_path, write_json, RecoverOutput, RunManifest, RunOutput, SearchSummary, SolveRecord,
    TheoryOutput,
};

#[derive(Debug, Parser)]
#[command(
    name = "decpep",
    version,
    about = "Worst-case performance of decentralized gradient descent"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Worst case over every matrix whose non-leading spectrum lies in a range.
    Spectral(SpectralCmd),
    /// Worst case for one given communication matrix.
    Exact(ExactCmd),
    /// Solve along one parameter axis and write a CSV table.
    Sweep(SweepCmd),
    /// Sample random symmetric doubly stochastic matrices and solve each.
    Search(SearchCmd),
    /// Solve, then estimate the communication matrix realizing the worst case.
    Recover(RecoverCmd),
    /// Evaluate the closed-form bound.
    Theory(TheoryCmd),
}

#[derive(Debug, Args)]
struct SpectralCmd {
    #[command(flatten)]
    spectral: SpectralArgs,
    #[command(flatten)]
    step: StepArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// JSON output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExactCmd {
    /// Matrix file: optional `N` line, then `N` rows of `N` numbers.
    #[arg(long)]
    matrix: Option<PathBuf>,
    #[command(flatten)]
    step: StepArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepCmd {
    /// One of lambda, n_agents, n_iters, step_size.
    #[arg(long)]
    axis: SweepAxis,
    /// Comma-separated axis values.
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<f64>,
    /// Sweep the exact problem for this matrix instead of the spectral one.
    #[arg(long)]
    matrix: Option<PathBuf>,
    #[command(flatten)]
    spectral: SpectralArgs,
    #[command(flatten)]
    step: StepArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// CSV output file; the manifest goes to `<out>.manifest.json`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SearchCmd {
    #[command(flatten)]
    spectral: SpectralArgs,
    #[command(flatten)]
    step: StepArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long, default_value_t = 100)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV output file; the manifest goes to `<out>.manifest.json`.
    #[arg(long)]
    out: PathBuf,
    /// Write the worst sampled matrix here.
    #[arg(long = "best-matrix")]
    best_matrix: Option<PathBuf>,
    /// JSON summary file; stdout when omitted.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RecoverCmd {
    /// JSON output of an earlier `spectral` or `exact` run to repeat.
    #[arg(long, conflicts_with_all = ["matrix", "agents", "lambda", "iters", "config"])]
    run: Option<PathBuf>,
    #[arg(long)]
    matrix: Option<PathBuf>,
    #[command(flatten)]
    spectral: SpectralArgs,
    #[command(flatten)]
    step: StepArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Relative eigenvalue cutoff for ranks and pseudoinverses.
    #[arg(long = "rank-tol", default_value_t = DEFAULT_RANK_TOL)]
    rank_tol: f64,
    /// Write the reconstructed worst-case instance as CSV.
    #[arg(long = "instance-csv")]
    instance_csv: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TheoryCmd {
    #[arg(long, short = 'K')]
    iters: usize,
    #[arg(long)]
    lambda: f64,
    #[arg(long, default_value_t = 1.0)]
    radius: f64,
    #[arg(long, default_value_t = 1.0)]
    bound: f64,
    #[arg(long, default_value_t = 1.0)]
    h: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        })
}

fn check_status(status: SolveStatus) -> Result<()> {
    match status {
        SolveStatus::Optimal => Ok(()),
        other => Err(CliError::Solver(format!("{other:?}"))),
    }
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

/// Solves one spec and writes the single-run JSON.
fn single_run(command: &str, spec: DgdSpec, solver: &SolverArgs, out: Option<&Path>) -> Result<()> {
    let settings = solver.settings()?;
    let mut manifest = RunManifest::new(command, settings, solver.jobs);
    let membership = match &spec.mode {
        MatrixMode::Exact { matrix } => Some(membership_check(
            matrix,
            &SpectralClass::new(-1.0, 1.0)?,
            1e-9,
        )),
        MatrixMode::Spectral { .. } => None,
    };
    let start = Instant::now();
    let (_, sol) = solve_dgd(&spec, &settings)?;
    manifest.solves.push(SolveRecord {
        label: command.to_string(),
        status: Some(sol.status),
        value: finite(sol.worst_case_value),
        seconds: start.elapsed().as_secs_f64(),
    });
    let output = RunOutput {
        worst_case: finite(sol.worst_case_value),
        theory_bound: spec.theory_bound(),
        status: sol.status,
        membership,
        manifest: RunManifest {
            spec: Some(spec),
            ..manifest
        },
    };
    write_json(&output, out)?;
    check_status(sol.status)
}

fn cmd_spectral(cmd: SpectralCmd) -> Result<()> {
    let (mut cfg, dir) = base_config(&cmd.step)?;
    cfg.mode = Some("spectral".into());
    overlay_spectral(&mut cfg, &cmd.spectral);
    single_run(
        "spectral",
        resolve(cfg, &dir)?,
        &cmd.solver,
        cmd.out.as_deref(),
    )
}

fn cmd_exact(cmd: ExactCmd) -> Result<()> {
    let (mut cfg, dir) = base_config(&cmd.step)?;
    cfg.mode = Some("exact".into());
    overlay_matrix(&mut cfg, cmd.matrix.as_deref());
    single_run(
        "exact",
        resolve(cfg, &dir)?,
        &cmd.solver,
        cmd.out.as_deref(),
    )
}

fn cmd_sweep(cmd: SweepCmd) -> Result<()> {
    let settings = cmd.solver.settings()?;
    let (mut cfg, dir) = base_config(&cmd.step)?;
    let first = cmd.values[0];
    match cmd.axis {
        SweepAxis::NIters if cmd.step.iters.is_none() && cfg.n_iters == 0 => {
            cfg.n_iters = first as usize
        }
        SweepAxis::StepSize if cmd.step.h.is_none() && cmd.step.step_size.is_none() => {
            cfg.step_size = Some(first);
            cfg.h = None;
        }
        _ => {}
    }
    if cmd.matrix.is_some() {
        cfg.mode = Some("exact".into());
        overlay_matrix(&mut cfg, cmd.matrix.as_deref());
    } else {
        if cfg.mode.is_none() {
            cfg.mode = Some("spectral".into());
        }
        overlay_spectral(&mut cfg, &cmd.spectral);
        if cfg.mode.as_deref() == Some("spectral") {
            if cmd.axis == SweepAxis::NAgents && cfg.n_agents.is_none() {
                cfg.n_agents = Some(first as usize);
            }
            if cmd.axis == SweepAxis::Lambda && cfg.lambda.is_none() && cfg.lambda_minus.is_none() {
                cfg.lambda = Some(first);
            }
        }
    }
    let grid = SweepGrid::new(cmd.axis, cmd.values, resolve(cfg, &dir)?)?;
    let rows = sweep(&grid, &settings)?;
    write_sweep_csv(&rows, create(&cmd.out)?)?;

    let mut manifest = RunManifest::new("sweep", settings, cmd.solver.jobs);
    manifest.solves = rows
        .iter()
        .map(|r| SolveRecord {
            label: format!("{:?}={}", grid.axis, r.axis_value),
            status: r.status,
            value: r.worst_case,
            seconds: r.seconds,
        })
        .collect();
    manifest.sweep = Some(grid);
    write_json(&manifest, Some(&manifest_path(&cmd.out)))?;
    let failed = rows.iter().filter(|r| !r.ok()).count();
    if failed > 0 {
        return Err(CliError::Partial {
            failed,
            total: rows.len(),
        });
    }
    Ok(())
}

fn cmd_search(cmd: SearchCmd) -> Result<()> {
    let settings = cmd.solver.settings()?;
    let (mut cfg, dir) = base_config(&cmd.step)?;
    cfg.mode = Some("spectral".into());
    overlay_spectral(&mut cfg, &cmd.spectral);
    let spec = resolve(cfg, &dir)?;
    let lam = match &spec.mode {
        MatrixMode::Spectral { class } if class.lam_minus == -class.lam_plus => class.lam_plus,
        _ => {
            return Err(CliError::Usage(
                "search needs a symmetric range (--lambda)".into(),
            ))
        }
    };
    let result = random_search(&spec, lam, cmd.samples, cmd.seed, &settings)?;
    write_search_csv(&result.table, create(&cmd.out)?)?;
    if let (Some(path), Some((w, _))) = (&cmd.best_matrix, &result.best) {
        std::fs::write(path, w.to_text()).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        })?;
    }

    let mut manifest = RunManifest::new("search", settings, cmd.solver.jobs);
    manifest.seed = Some(cmd.seed);
    manifest.solves = result
        .table
        .iter()
        .filter(|r| r.kept)
        .map(|r| SolveRecord {
            label: format!("sample {} seed {}", r.sample, r.seed),
            status: r.status,
            value: r.worst_case,
            seconds: 0.0,
        })
        .collect();
    manifest.spec = Some(spec);
    write_json(&manifest, Some(&manifest_path(&cmd.out)))?;
    let kept = result.table.iter().filter(|r| r.kept).count();
    let failed = result
        .table
        .iter()
        .filter(|r| r.kept && r.status != Some(SolveStatus::Optimal))
        .count();
    let summary = SearchSummary {
        samples: cmd.samples,
        kept,
        best_worst_case: result.best.as_ref().map(|(_, v)| *v),
        best_matrix: result.best.as_ref().map(|(w, _)| w.to_rows()),
        manifest,
    };
    write_json(&summary, cmd.summary.as_deref())?;
    if failed > 0 {
        return Err(CliError::Partial {
            failed,
            total: kept,
        });
    }
    Ok(())
}

fn spec_from_run(path: &Path) -> Result<DgdSpec> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let json_err = |source| CliError::Json {
        path: path.display().to_string(),
        source,
    };
    let value: serde_json::Value = serde_json::from_str(&text).map_err(json_err)?;
    let spec = value
        .pointer("/manifest/spec")
        .filter(|v| !v.is_null())
        .ok_or_else(|| CliError::Usage(format!("{}: no manifest.spec entry", path.display())))?;
    serde_json::from_value(spec.clone()).map_err(json_err)
}

fn cmd_recover(cmd: RecoverCmd) -> Result<()> {
    let settings = cmd.solver.settings()?;
    let spec = match &cmd.run {
        Some(path) => spec_from_run(path)?,
        None => {
            let (mut cfg, dir) = base_config(&cmd.step)?;
            if cmd.matrix.is_some() {
                cfg.mode = Some("exact".into());
                overlay_matrix(&mut cfg, cmd.matrix.as_deref());
            } else {
                overlay_spectral(&mut cfg, &cmd.spectral);
            }
            resolve(cfg, &dir)?
        }
    };
    let mut manifest = RunManifest::new("recover", settings, cmd.solver.jobs);
    let start = Instant::now();
    let (dgd, sol) = solve_dgd(&spec, &settings)?;
    manifest.solves.push(SolveRecord {
        label: "recover".into(),
        status: Some(sol.status),
        value: finite(sol.worst_case_value),
        seconds: start.elapsed().as_secs_f64(),
    });
    check_status(sol.status)?;
    let estimate = estimate_from_dgd(&dgd, &sol, cmd.rank_tol)?;
    if let Some(path) = &cmd.instance_csv {
        reconstruct(&sol, cmd.rank_tol)?.write_csv(&dgd.problem, create(path)?)?;
    }
    let reference = match &spec.mode {
        MatrixMode::Spectral { class } if class.lam_minus == -class.lam_plus => {
            Some(w1_matrix(spec.n_agents, class.lam_plus)?)
        }
        _ => None,
    };
    let reference_max_error = reference.as_ref().map(|w| {
        let n = w.n();
        (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| (estimate.normalized.get(i, j) - w.get(i, j)).abs())
            .fold(0.0, f64::max)
    });
    manifest.spec = Some(spec);
    let output = RecoverOutput {
        worst_case: finite(sol.worst_case_value),
        status: sol.status,
        estimate,
        reference: reference.map(|w| w.to_rows()),
        reference_max_error,
        manifest,
    };
    write_json(&output, cmd.out.as_deref())
}

fn cmd_theory(cmd: TheoryCmd) -> Result<()> {
    let value = scaled_theory_bound(cmd.iters, cmd.lambda, cmd.radius, cmd.bound, cmd.h)?;
    let manifest = RunManifest::new("theory", Default::default(), 1);
    let output = TheoryOutput {
        theory_bound: value,
        n_iters: cmd.iters,
        lambda: cmd.lambda,
        radius: cmd.radius,
        bound: cmd.bound,
        h: cmd.h,
        manifest,
    };
    write_json(&output, cmd.out.as_deref())
}

fn jobs(command: &Command) -> usize {
    match command {
        Command::Spectral(c) => c.solver.jobs,
        Command::Exact(c) => c.solver.jobs,
        Command::Sweep(c) => c.solver.jobs,
        Command::Search(c) => c.solver.jobs,
        Command::Recover(c) => c.solver.jobs,
        Command::Theory(_) => 1,
    }
}

fn run(cli: Cli) -> Result<()> {
    let jobs = jobs(&cli.command);
    if jobs == 0 {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build_global()
        .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
    match cli.command {
        Command::Spectral(c) => cmd_spectral(c),
        Command::Exact(c) => cmd_exact(c),
        Command::Sweep(c) => cmd_sweep(c),
        Command::Search(c) => cmd_search(c),
        Command::Recover(c) => cmd_recover(c),
        Command::Theory(c) => cmd_theory(c),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            std::process::exit(if e.use_stderr() { 1 } else { 0 });
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
