//! Scenario-driven front end for `waveobs-core`.

pub mod commands;
pub mod report;
pub mod scenario;

use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use rayon::prelude::*;
use waveobs_core::ltv_control::Gramian;
use waveobs_core::observability::{Job, SweepExecutor};
use waveobs_core::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// Per-ray Gramians over the sample at horizon T.
    Gramian,
    /// kappa(T) and the observability constant.
    Kappa,
    /// Critical time by bisection on [T_min, T_max].
    Tcrit,
    /// Brunovsky normal form of constant (A, B).
    Brunovsky,
    /// Sub-diagonal block decomposition of sampled (A, B).
    Decompose,
    /// Cascade condition against the cascade Gramian.
    Cascade,
    /// Spectral checks: wavepacket energy ratios and the discrete UCP scan.
    Validate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Gramian => "gramian",
            Command::Kappa => "kappa",
            Command::Tcrit => "tcrit",
            Command::Brunovsky => "brunovsky",
            Command::Decompose => "decompose",
            Command::Cascade => "cascade",
            Command::Validate => "validate",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "waveobs", version, about = "Observability of coupled wave systems along geodesic rays")]
pub struct Cli {
    pub command: Command,
    /// Scenario file (TOML).
    #[arg(long)]
    pub scenario: PathBuf,
    /// Horizon; overrides run.T.
    #[arg(long = "T")]
    pub horizon: Option<f64>,
    /// Report path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-point CSV table.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Tolerance; overrides run.tol.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long, env = "WAVEOBS_THREADS", default_value_t = 1)]
    pub threads: usize,
}

#[derive(Debug)]
pub enum CliError {
    /// Bad input: exit code 1.
    Scenario(String),
    /// The computation failed: exit code 2.
    Numerical(String),
}

impl CliError {
    /// Core errors raised while building inputs are scenario errors.
    pub fn from_input(e: Error) -> Self {
        CliError::Scenario(e.to_string())
    }

    pub fn from_core(e: Error) -> Self {
        match e {
            Error::UnsupportedManifold(_)
            | Error::InvalidPhasePoint(_)
            | Error::InvalidSampling(_)
            | Error::DimensionMismatch(_)
            | Error::NotSupported(_)
            | Error::BadRadii { .. }
            | Error::BadGrid(_)
            | Error::BadBlocks(_) => CliError::Scenario(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }

    pub fn code(&self) -> u8 {
        match self {
            CliError::Scenario(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Scenario(s) => write!(f, "scenario error: {s}"),
            CliError::Numerical(s) => write!(f, "numerical failure: {s}"),
        }
    }
}

/// Sweep executor backed by a rayon pool. Results keep job order.
pub struct Pool(rayon::ThreadPool);

impl Pool {
    pub fn new(threads: usize) -> Result<Self, CliError> {
        if threads == 0 {
            return Err(CliError::Scenario("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map(Pool)
            .map_err(|e| CliError::Numerical(e.to_string()))
    }
}

impl SweepExecutor for Pool {
    fn run(&self, jobs: &[Job], f: &(dyn Fn(&Job) -> waveobs_core::Result<Gramian> + Sync)) -> Vec<waveobs_core::Result<Gramian>> {
        self.0.install(|| jobs.par_iter().map(f).collect())
    }
}
