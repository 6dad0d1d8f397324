//! Per-epoch observables, fairness and stability statistics, and export.

mod equilibrium;
mod export;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::market::{MvnoId, OperatorId};

pub use equilibrium::{detect_equilibrium, price_series};
pub use export::{csv_header, write_csv, write_summary, CsvExporter, RunSummary, SCHEMA_VERSION};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("empty input")]
    EmptyInput,
    #[error("series has {len} points, need at least {needed}")]
    SeriesTooShort { len: usize, needed: usize },
    #[error("window must be at least 2 and tolerance positive")]
    InvalidWindow,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OperatorMetrics {
    /// Retail price billed this epoch.
    pub price: f64,
    /// Retail, hosting and slice income.
    pub revenue: f64,
    pub retail_revenue: f64,
    pub hosting_revenue: f64,
    pub slice_revenue: f64,
    pub profit: f64,
    pub subs: u64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MvnoMetrics {
    pub price: f64,
    pub revenue: f64,
    pub costs: f64,
    pub profit: f64,
    pub subs: u64,
    pub active: bool,
}

impl MvnoMetrics {
    /// Profit over revenue; zero without revenue.
    pub fn margin(&self) -> f64 {
        if self.revenue > 0.0 {
            self.profit / self.revenue
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct QualityStats {
    pub count: u64,
    pub mean: f64,
    pub p10: f64,
    pub p50: f64,
    pub p90: f64,
}

impl QualityStats {
    pub fn from_values(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self::default();
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Self {
            count: values.len() as u64,
            mean: sorted.iter().sum::<f64>() / sorted.len() as f64,
            p10: percentile(&sorted, 0.10),
            p50: percentile(&sorted, 0.50),
            p90: percentile(&sorted, 0.90),
        }
    }
}

/// Linear-interpolation percentile of ascending `sorted`, `q` in `[0, 1]`.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => 0.0,
        1 => sorted[0],
        n => {
            let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
        }
    }
}

/// Jain fairness index `(Σx)² / (n·Σx²)`; all-zero input counts as perfectly fair.
pub fn jain_index(allocations: &[f64]) -> Result<f64, MetricsError> {
    if allocations.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let sum: f64 = allocations.iter().sum();
    let sq: f64 = allocations.iter().map(|x| x * x).sum();
    if sq == 0.0 {
        return Ok(1.0);
    }
    Ok((sum * sum / (allocations.len() as f64 * sq)).min(1.0))
}

/// Observables of one simulated epoch.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: u64,
    pub operators: BTreeMap<OperatorId, OperatorMetrics>,
    pub mvnos: BTreeMap<MvnoId, MvnoMetrics>,
    /// Consumers on exclusive plans after this epoch's choices.
    pub exclusive_subs: u64,
    /// Consumers on society plans after this epoch's choices.
    pub society_subs: u64,
    pub society_quality: QualityStats,
    pub exclusive_quality: QualityStats,
    /// Over society-plan users' realized quality; 0 when there are none.
    pub jain_society: f64,
    pub donated: f64,
    pub unallocated: f64,
    /// Society demand over society capacity including donations and slices.
    pub society_load: f64,
    /// Exclusive demand over retail licensed capacity.
    pub exclusive_load: f64,
    pub shares: BTreeMap<OperatorId, f64>,
}

impl EpochMetrics {
    pub fn mean_operator_price(&self) -> f64 {
        if self.operators.is_empty() {
            return 0.0;
        }
        self.operators.values().map(|o| o.price).sum::<f64>() / self.operators.len() as f64
    }

    pub fn society_share(&self) -> f64 {
        let total = self.society_subs + self.exclusive_subs;
        if total == 0 {
            0.0
        } else {
            self.society_subs as f64 / total as f64
        }
    }
}
