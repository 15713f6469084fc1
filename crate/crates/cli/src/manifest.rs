//! Run manifests and JSON outputs.

use std::io::Write;
use std::path::Path;

use decpep::explorer::SweepGrid;
use decpep::{DgdSpec, MembershipReport, SolveStatus, SolverSettings, WorstMatrixEstimate};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Everything needed to repeat a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub argv: Vec<String>,
    pub seed: Option<u64>,
    pub jobs: usize,
    pub solver: SolverSettings<f64>,
    /// Fully resolved problem description, when the command has one.
    pub spec: Option<DgdSpec>,
    pub sweep: Option<SweepGrid>,
    pub solves: Vec<SolveRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveRecord {
    pub label: String,
    pub status: Option<SolveStatus>,
    pub value: Option<f64>,
    pub seconds: f64,
}

impl RunManifest {
    pub fn new(command: &str, solver: SolverSettings<f64>, jobs: usize) -> Self {
        Self {
            tool: env!("CARGO_BIN_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            argv: std::env::args().collect(),
            seed: None,
            jobs,
            solver,
            spec: None,
            sweep: None,
            solves: Vec::new(),
        }
    }
}

/// Output of `spectral` and `exact`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunOutput {
    /// `null` when the solver did not return a finite value.
    pub worst_case: Option<f64>,
    pub theory_bound: Option<f64>,
    pub status: SolveStatus,
    /// Spectral report of the input matrix (`exact` only).
    pub membership: Option<MembershipReport>,
    pub manifest: RunManifest,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecoverOutput {
    pub worst_case: Option<f64>,
    pub status: SolveStatus,
    pub estimate: WorstMatrixEstimate,
    /// The two-eigenvalue reference matrix for symmetric spectral runs.
    pub reference: Option<Vec<Vec<f64>>>,
    /// Largest entrywise gap between the normalized estimate and the reference.
    pub reference_max_error: Option<f64>,
    pub manifest: RunManifest,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TheoryOutput {
    pub theory_bound: f64,
    pub n_iters: usize,
    pub lambda: f64,
    pub radius: f64,
    pub bound: f64,
    pub h: f64,
    pub manifest: RunManifest,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SearchSummary {
    pub samples: usize,
    pub kept: usize,
    pub best_worst_case: Option<f64>,
    pub best_matrix: Option<Vec<Vec<f64>>>,
    pub manifest: RunManifest,
}

pub fn write_json(value: &impl Serialize, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("outputs serialize");
    match out {
        Some(path) => std::fs::write(path, text + "\n").map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        }),
        None => match writeln!(std::io::stdout().lock(), "{text}") {
            Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::Io {
                path: "<stdout>".into(),
                source: e,
            }),
            _ => Ok(()),
        },
    }
}

/// `<table>.manifest.json` next to a table file.
pub fn manifest_path(table: &Path) -> std::path::PathBuf {
    let mut name = table
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_default();
    name.push(".manifest.json");
    table.with_file_name(name)
}
