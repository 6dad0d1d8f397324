//! Scenario validation, single runs and parameter sweeps for the society
//! spectrum market simulator.

use std::path::{Path, PathBuf};

use society_core::dynamics::{run_scenario, RunError};
use society_core::market::{build_market, validate, MarketError, ScenarioConfig};
use society_core::metrics::{write_csv, write_summary, MetricsError, RunSummary};

mod sweep;

pub use sweep::{cmd_sweep, run_sweep, PointResult, SeedResult, SweepSpec, SweepSummary};

/// Exit code for a clean run.
pub const EXIT_OK: i32 = 0;
/// Exit code when the scenario or arguments are invalid.
pub const EXIT_INVALID: i32 = 1;
/// Exit code when a valid scenario fails while running or writing output.
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Market(#[from] MarketError),
    /// Invariant violations found in an otherwise well-formed scenario.
    #[error("{} violation(s):\n{}", .0.len(), .0.join("\n"))]
    Violations(Vec<String>),
    #[error("invalid sweep: {0}")]
    Sweep(String),
    #[error("simulation failed: {0}")]
    Run(String),
    #[error("cannot write output: {0}")]
    Output(String),
    #[error("{failed} of {total} sweep runs failed")]
    PartialSweep { failed: usize, total: usize },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Market(_) | CliError::Violations(_) | CliError::Sweep(_) => EXIT_INVALID,
            CliError::Run(_) | CliError::Output(_) | CliError::PartialSweep { .. } => EXIT_RUNTIME,
        }
    }
}

impl From<RunError> for CliError {
    fn from(e: RunError) -> Self {
        match e {
            RunError::Market(m) => CliError::Market(m),
            RunError::Dynamics(d) => CliError::Run(d.to_string()),
        }
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        CliError::Output(e.to_string())
    }
}

/// Loads a scenario and checks both its schema and the invariants of the
/// market it builds.
pub fn cmd_validate(path: &Path) -> Result<ScenarioConfig, CliError> {
    let config = ScenarioConfig::from_path(path)?;
    let state = build_market(&config)?;
    let violations = validate(&state);
    if violations.is_empty() {
        Ok(config)
    } else {
        Err(CliError::Violations(
            violations.iter().map(ToString::to_string).collect(),
        ))
    }
}

/// Paths written by [`cmd_run`].
#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifacts {
    pub csv: PathBuf,
    pub summary: PathBuf,
}

/// Runs one scenario, optionally overriding its seed and length, and writes
/// `metrics.csv` and `summary.json` into `out_dir`.
pub fn cmd_run(
    path: &Path,
    seed: Option<u64>,
    epochs: Option<u64>,
    out_dir: &Path,
) -> Result<(RunSummary, RunArtifacts), CliError> {
    let mut config = ScenarioConfig::from_path(path)?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    let epochs = epochs.unwrap_or(config.epochs);
    let out = run_scenario(&config, epochs)?;
    let summary = RunSummary::build(
        &config.name,
        config.seed,
        &out.state,
        &out.metrics,
        &config.equilibrium,
    );
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::Output(e.to_string()))?;
    let artifacts = RunArtifacts {
        csv: out_dir.join("metrics.csv"),
        summary: out_dir.join("summary.json"),
    };
    write_csv(&artifacts.csv, &out.state, &out.metrics)?;
    write_summary(&artifacts.summary, &summary)?;
    Ok((summary, artifacts))
}

/// One-line description of a finished run.
pub fn summary_line(summary: &RunSummary) -> String {
    let eq = summary
        .equilibrium_epoch
        .map_or_else(|| "none".to_owned(), |e| e.to_string());
    let n = summary.final_state.consumers.max(1) as f64;
    let shares: Vec<String> = summary
        .final_state
        .operators
        .iter()
        .map(|(id, op)| format!("{id}={:.3}", op.subs as f64 / n))
        .collect();
    format!(
        "{} seed={} epochs={} equilibrium_epoch={} mean_price={:.4} society_share={:.3} exclusive_shares[{}]",
        summary.scenario,
        summary.seed,
        summary.epochs,
        eq,
        summary.mean_price,
        summary.society_share,
        shares.join(" ")
    )
}
