use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{detect_equilibrium, price_series, EpochMetrics, MetricsError};
use crate::market::{EquilibriumSettings, MarketState, MvnoId, OperatorId, Plan};

pub const SCHEMA_VERSION: u32 = 1;

/// CSV header for a market with the given providers.
///
/// Fixed column order: `epoch`, then per operator `op_<id>_price`,
/// `op_<id>_revenue`, `op_<id>_subs`, then `mvno_<id>_subs` per MVNO, the
/// quality and fairness columns, and finally `op_<id>_share` per operator.
pub fn csv_header(operators: &[OperatorId], mvnos: &[MvnoId]) -> Vec<String> {
    let mut h = vec!["epoch".to_owned()];
    for op in operators {
        h.push(format!("op_{op}_price"));
        h.push(format!("op_{op}_revenue"));
        h.push(format!("op_{op}_subs"));
    }
    for m in mvnos {
        h.push(format!("mvno_{m}_subs"));
    }
    for c in [
        "soc_q_p10",
        "soc_q_p50",
        "soc_q_p90",
        "exc_q_p50",
        "jain_society",
        "donated",
        "unallocated",
    ] {
        h.push(c.to_owned());
    }
    for op in operators {
        h.push(format!("op_{op}_share"));
    }
    h
}

/// Streams epoch rows to CSV. The header is written on construction, so an
/// exporter that never sees a row still leaves a valid header-only file.
pub struct CsvExporter<W: Write> {
    writer: csv::Writer<W>,
    operators: Vec<OperatorId>,
    mvnos: Vec<MvnoId>,
}

impl<W: Write> CsvExporter<W> {
    pub fn new(sink: W, state: &MarketState) -> Result<Self, MetricsError> {
        let operators: Vec<OperatorId> = state.operators.iter().map(|o| o.id.clone()).collect();
        let mvnos: Vec<MvnoId> = state.mvnos.iter().map(|m| m.id.clone()).collect();
        let mut writer = csv::Writer::from_writer(sink);
        writer.write_record(csv_header(&operators, &mvnos))?;
        Ok(Self {
            writer,
            operators,
            mvnos,
        })
    }

    pub fn write_row(&mut self, m: &EpochMetrics) -> Result<(), MetricsError> {
        let mut row = vec![m.epoch.to_string()];
        for op in &self.operators {
            let o = m.operators.get(op).cloned().unwrap_or_default();
            row.push(o.price.to_string());
            row.push(o.revenue.to_string());
            row.push(o.subs.to_string());
        }
        for id in &self.mvnos {
            row.push(m.mvnos.get(id).map_or(0, |x| x.subs).to_string());
        }
        for v in [
            m.society_quality.p10,
            m.society_quality.p50,
            m.society_quality.p90,
            m.exclusive_quality.p50,
            m.jain_society,
            m.donated,
            m.unallocated,
        ] {
            row.push(v.to_string());
        }
        for op in &self.operators {
            row.push(m.shares.get(op).copied().unwrap_or(0.0).to_string());
        }
        self.writer.write_record(row)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W, MetricsError> {
        self.writer.flush()?;
        self.writer
            .into_inner()
            .map_err(|e| MetricsError::Io(e.into_error()))
    }
}

pub fn write_csv(
    path: impl AsRef<Path>,
    state: &MarketState,
    metrics: &[EpochMetrics],
) -> Result<(), MetricsError> {
    let file = std::fs::File::create(path)?;
    let mut exporter = CsvExporter::new(std::io::BufWriter::new(file), state)?;
    for m in metrics {
        exporter.write_row(m)?;
    }
    exporter.finish()?.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalOperator {
    pub price: f64,
    pub exclusive_capacity: f64,
    pub sold_slices: f64,
    pub subs: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalMvno {
    pub active: bool,
    pub price: f64,
    pub purchased_slice: f64,
    pub subs: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalState {
    pub epoch: u64,
    pub society_fraction: f64,
    pub society_capacity: f64,
    pub consumers: u64,
    pub operators: BTreeMap<OperatorId, FinalOperator>,
    pub mvnos: BTreeMap<MvnoId, FinalMvno>,
}

/// JSON run summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub schema_version: u32,
    pub scenario: String,
    pub seed: u64,
    pub epochs: u64,
    /// Epoch at which operator prices first held still, if they did.
    pub equilibrium_epoch: Option<u64>,
    /// Mean operator price over the equilibrium window.
    pub equilibrium_mean_price: Option<f64>,
    pub final_prices: BTreeMap<OperatorId, f64>,
    pub mean_price: f64,
    /// Fraction of consumers on society plans at the end of the run.
    pub society_share: f64,
    pub mean_society_quality: f64,
    pub mean_exclusive_quality: f64,
    pub mean_jain_society: f64,
    pub final_state: FinalState,
}

impl RunSummary {
    pub fn build(
        scenario: &str,
        seed: u64,
        state: &MarketState,
        metrics: &[EpochMetrics],
        eq: &EquilibriumSettings,
    ) -> Self {
        let start = metrics
            .iter()
            .position(|m| m.epoch >= eq.from_epoch)
            .unwrap_or(metrics.len());
        let tail = &metrics[start..];
        let found = detect_equilibrium(&price_series(tail), eq.window, eq.tolerance)
            .ok()
            .flatten();
        let equilibrium_epoch = found.map(|i| tail[i].epoch);
        let equilibrium_mean_price = found.map(|i| {
            let span = &tail[i - eq.window..=i];
            span.iter()
                .map(EpochMetrics::mean_operator_price)
                .sum::<f64>()
                / span.len() as f64
        });

        let mut operators = BTreeMap::new();
        for op in &state.operators {
            let subs = state
                .consumers
                .iter()
                .filter(|c| c.plan == Plan::Exclusive(op.id.clone()))
                .count() as u64;
            operators.insert(
                op.id.clone(),
                FinalOperator {
                    price: op.retail_price,
                    exclusive_capacity: op.exclusive_capacity,
                    sold_slices: op.sold_slices,
                    subs,
                },
            );
        }
        let mut mvnos = BTreeMap::new();
        for m in &state.mvnos {
            let subs = state
                .consumers
                .iter()
                .filter(|c| c.plan == Plan::Society(m.id.clone()))
                .count() as u64;
            mvnos.insert(
                m.id.clone(),
                FinalMvno {
                    active: m.active,
                    price: m.retail_price,
                    purchased_slice: m.purchased_slice,
                    subs,
                },
            );
        }
        let final_prices: BTreeMap<OperatorId, f64> = operators
            .iter()
            .map(|(k, v)| (k.clone(), v.price))
            .collect();
        let mean_price = if final_prices.is_empty() {
            0.0
        } else {
            final_prices.values().sum::<f64>() / final_prices.len() as f64
        };
        let n = state.consumers.len() as u64;
        let society = state
            .consumers
            .iter()
            .filter(|c| c.plan.is_society())
            .count() as u64;
        let mean_of = |f: fn(&EpochMetrics) -> f64| {
            if metrics.is_empty() {
                0.0
            } else {
                metrics.iter().map(f).sum::<f64>() / metrics.len() as f64
            }
        };

        Self {
            schema_version: SCHEMA_VERSION,
            scenario: scenario.to_owned(),
            seed,
            epochs: metrics.len() as u64,
            equilibrium_epoch,
            equilibrium_mean_price,
            final_prices,
            mean_price,
            society_share: if n == 0 {
                0.0
            } else {
                society as f64 / n as f64
            },
            mean_society_quality: mean_of(|m| m.society_quality.mean),
            mean_exclusive_quality: mean_of(|m| m.exclusive_quality.mean),
            mean_jain_society: mean_of(|m| m.jain_society),
            final_state: FinalState {
                epoch: state.epoch,
                society_fraction: state.pool.society_fraction,
                society_capacity: state.pool.society_capacity(),
                consumers: n,
                operators,
                mvnos,
            },
        }
    }
}

pub fn write_summary(path: impl AsRef<Path>, summary: &RunSummary) -> Result<(), MetricsError> {
    let mut text = serde_json::to_string_pretty(summary)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}
