use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use society_core::dynamics::run_scenario;
use society_core::market::ScenarioConfig;
use society_core::metrics::{write_csv, RunSummary, SCHEMA_VERSION};

use crate::CliError;

/// A one-dimensional grid over a numeric scenario field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Dotted path into the scenario document, e.g. `spectrum.w` or
    /// `operators.0.retail_price`.
    pub param: String,
    pub from: f64,
    pub to: f64,
    pub steps: usize,
    /// Runs per grid point, seeded `seed, seed + 1, ...`.
    pub seeds: u32,
}

impl SweepSpec {
    /// Reads a grid from a JSON file with the same fields as this struct.
    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Sweep(format!("cannot read {}: {e}", path.display())))?;
        let spec: Self = serde_json::from_str(&text)
            .map_err(|e| CliError::Sweep(format!("{}: {e}", path.display())))?;
        spec.check()?;
        Ok(spec)
    }

    pub fn check(&self) -> Result<(), CliError> {
        if self.steps == 0 {
            return Err(CliError::Sweep("steps must be at least 1".into()));
        }
        if self.seeds == 0 {
            return Err(CliError::Sweep("seeds must be at least 1".into()));
        }
        if !(self.from.is_finite() && self.to.is_finite() && self.from <= self.to) {
            return Err(CliError::Sweep(format!(
                "need finite from <= to, got {} and {}",
                self.from, self.to
            )));
        }
        Ok(())
    }

    /// Evenly spaced grid including both ends; a single step is just `from`.
    pub fn values(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.from];
        }
        let span = self.to - self.from;
        (0..self.steps)
            .map(|i| {
                let v = self.from + span * i as f64 / (self.steps - 1) as f64;
                (v * 1e12).round() / 1e12
            })
            .collect()
    }
}

fn resolve<'a>(doc: &'a mut Value, path: &str) -> Option<&'a mut Value> {
    path.split('.').try_fold(doc, |node, key| match node {
        Value::Object(map) => map.get_mut(key),
        Value::Array(items) => key.parse::<usize>().ok().and_then(|i| items.get_mut(i)),
        _ => None,
    })
}

/// Returns `base` with the numeric field at `path` set to `value`.
pub(crate) fn with_param(
    base: &ScenarioConfig,
    path: &str,
    value: f64,
) -> Result<ScenarioConfig, CliError> {
    let mut doc = base.to_json_value();
    let slot = resolve(&mut doc, path)
        .ok_or_else(|| CliError::Sweep(format!("`{path}` does not name a scenario field")))?;
    *slot = match &*slot {
        Value::Number(n) if n.is_u64() || n.is_i64() => {
            if value.fract() != 0.0 || value < 0.0 {
                return Err(CliError::Sweep(format!(
                    "`{path}` takes non-negative integers, got {value}"
                )));
            }
            Value::from(value as u64)
        }
        Value::Number(_) => serde_json::Number::from_f64(value)
            .map(Value::Number)
            .ok_or_else(|| CliError::Sweep(format!("{value} is not a finite number")))?,
        _ => return Err(CliError::Sweep(format!("`{path}` is not a numeric field"))),
    };
    let config = ScenarioConfig::from_json_value(doc)?;
    config.check()?;
    Ok(config)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub csv: String,
    pub equilibrium_epoch: Option<u64>,
    pub mean_price: f64,
    pub society_share: f64,
}

impl SeedResult {
    fn from_summary(summary: &RunSummary, csv: String) -> Self {
        Self {
            seed: summary.seed,
            csv,
            equilibrium_epoch: summary.equilibrium_epoch,
            mean_price: summary.mean_price,
            society_share: summary.society_share,
        }
    }
}

/// Per-seed results at one grid value and their medians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    pub value: f64,
    pub runs: Vec<SeedResult>,
    /// Median over seeds, counting runs without an equilibrium as later than any that found one.
    pub equilibrium_epoch: Option<f64>,
    pub mean_price: Option<f64>,
    pub society_share: Option<f64>,
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub schema_version: u32,
    pub scenario: String,
    pub param: String,
    pub values: Vec<f64>,
    pub seeds: Vec<u64>,
    /// Keyed by the grid value as written in `values`.
    pub points: BTreeMap<String, PointResult>,
}

impl SweepSummary {
    /// Points in grid order.
    pub fn ordered(&self) -> impl Iterator<Item = &PointResult> {
        self.values.iter().filter_map(|v| self.points.get(&key(*v)))
    }

    pub fn failures(&self) -> usize {
        self.points.values().map(|p| p.errors.len()).sum()
    }
}

fn key(value: f64) -> String {
    value.to_string()
}

fn median(mut xs: Vec<f64>) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    Some(if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    })
}

fn median_epoch(runs: &[SeedResult]) -> Option<f64> {
    let epochs: Vec<f64> = runs
        .iter()
        .map(|r| r.equilibrium_epoch.map_or(f64::INFINITY, |e| e as f64))
        .collect();
    median(epochs).filter(|m| m.is_finite())
}

fn csv_name(index: usize, seed: u64) -> String {
    format!("point{index:02}_seed{seed}.csv")
}

/// Runs every grid point and seed, writing one CSV per run into `out_dir`.
/// `jobs` bounds the worker count; results do not depend on it.
pub fn run_sweep(
    base: &ScenarioConfig,
    spec: &SweepSpec,
    out_dir: &Path,
    jobs: Option<usize>,
) -> Result<SweepSummary, CliError> {
    spec.check()?;
    let values = spec.values();
    // Resolve every point up front so a bad path fails before any work starts.
    let configs = values
        .iter()
        .map(|&v| with_param(base, &spec.param, v))
        .collect::<Result<Vec<_>, _>>()?;
    let seeds: Vec<u64> = (0..u64::from(spec.seeds))
        .map(|i| base.seed.wrapping_add(i))
        .collect();
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::Output(e.to_string()))?;

    let tasks: Vec<(usize, u64)> = (0..values.len())
        .flat_map(|p| seeds.iter().map(move |&s| (p, s)))
        .collect();
    let run_one = |&(p, seed): &(usize, u64)| -> Result<SeedResult, String> {
        let mut config = configs[p].clone();
        config.seed = seed;
        let out = run_scenario(&config, config.epochs).map_err(|e| e.to_string())?;
        let name = csv_name(p, seed);
        let path: PathBuf = out_dir.join(&name);
        write_csv(&path, &out.state, &out.metrics).map_err(|e| e.to_string())?;
        let summary = RunSummary::build(
            &config.name,
            seed,
            &out.state,
            &out.metrics,
            &config.equilibrium,
        );
        Ok(SeedResult::from_summary(&summary, name))
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Run(e.to_string()))?;
    let results: Vec<Result<SeedResult, String>> =
        pool.install(|| tasks.par_iter().map(run_one).collect());

    let mut points = BTreeMap::new();
    for (p, &value) in values.iter().enumerate() {
        let mut runs = Vec::new();
        let mut errors = Vec::new();
        for ((tp, seed), r) in tasks.iter().zip(&results) {
            if *tp != p {
                continue;
            }
            match r {
                Ok(run) => runs.push(run.clone()),
                Err(e) => errors.push(format!("seed {seed}: {e}")),
            }
        }
        points.insert(
            key(value),
            PointResult {
                value,
                equilibrium_epoch: median_epoch(&runs),
                mean_price: median(runs.iter().map(|r| r.mean_price).collect()),
                society_share: median(runs.iter().map(|r| r.society_share).collect()),
                runs,
                errors,
            },
        );
    }
    Ok(SweepSummary {
        schema_version: SCHEMA_VERSION,
        scenario: base.name.clone(),
        param: spec.param.clone(),
        values,
        seeds,
        points,
    })
}

/// Sweeps the scenario at `path` and writes per-run CSVs plus `sweep.json`
/// into `out_dir`. Partial failures still write the summary but report an error.
pub fn cmd_sweep(
    path: &Path,
    spec: &SweepSpec,
    out_dir: &Path,
    jobs: Option<usize>,
) -> Result<SweepSummary, CliError> {
    let base = ScenarioConfig::from_path(path)?;
    base.check()?;
    let summary = run_sweep(&base, spec, out_dir, jobs)?;
    let mut text =
        serde_json::to_string_pretty(&summary).map_err(|e| CliError::Output(e.to_string()))?;
    text.push('\n');
    std::fs::write(out_dir.join("sweep.json"), text)
        .map_err(|e| CliError::Output(e.to_string()))?;
    let failed = summary.failures();
    if failed > 0 {
        for p in summary.points.values() {
            for e in &p.errors {
                log::error!("{} = {}: {e}", spec.param, p.value);
            }
        }
        return Err(CliError::PartialSweep {
            failed,
            total: summary.values.len() * summary.seeds.len(),
        });
    }
    Ok(summary)
}
