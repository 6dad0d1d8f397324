use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::config::{AssignmentModel, AssignmentSettings, EntryExitSettings};
use super::ids::{AccessCode, ConsumerId, MvnoId, OperatorId, Plan};
use crate::assign::{AccessRegistry, ShareTable};
use crate::metrics::EpochMetrics;

/// How a provider sets its retail price from one epoch to the next.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PricingPolicy {
    #[default]
    Fixed,
    /// Revenue hill-climbing with relative step `step`, repricing every
    /// `period` epochs from period-averaged price and revenue.
    Adaptive {
        step: f64,
        min_price: f64,
        max_price: f64,
        #[serde(default = "one")]
        period: u64,
    },
    /// Colluded price inside `[start_epoch, end_epoch)`, `fallback` outside.
    Collusion {
        start_epoch: u64,
        end_epoch: u64,
        colluded_price: ColludedPrice,
        #[serde(default)]
        fallback: Box<PricingPolicy>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColludedPrice {
    Absolute(f64),
    /// Relative increase over the price in force when collusion starts.
    Markup(f64),
}

fn one() -> u64 {
    1
}

impl PricingPolicy {
    /// Completed epochs of price history the policy reads.
    pub fn memory(&self) -> usize {
        match self {
            PricingPolicy::Fixed => 0,
            PricingPolicy::Adaptive { period, .. } => 2 * (*period).max(1) as usize,
            PricingPolicy::Collusion { fallback, .. } => fallback.memory(),
        }
    }

    pub(crate) fn check(&self, initial_price: f64) -> Result<(), String> {
        match self {
            PricingPolicy::Fixed => Ok(()),
            PricingPolicy::Adaptive {
                step,
                min_price,
                max_price,
                period,
            } => {
                if *period == 0 {
                    return Err("adaptive period must be at least 1".into());
                }
                if !(step.is_finite() && *step > 0.0 && *step < 1.0) {
                    return Err(format!("adaptive step must lie in (0, 1), got {step}"));
                }
                if !(*min_price >= 0.0 && min_price <= max_price && max_price.is_finite()) {
                    return Err(format!(
                        "need 0 <= min_price <= max_price, got [{min_price}, {max_price}]"
                    ));
                }
                Ok(())
            }
            PricingPolicy::Collusion {
                start_epoch,
                end_epoch,
                colluded_price,
                fallback,
            } => {
                if start_epoch > end_epoch {
                    return Err("collusion start_epoch after end_epoch".into());
                }
                match *colluded_price {
                    ColludedPrice::Absolute(p) if !(p.is_finite() && p >= initial_price) => {
                        return Err(format!(
                            "colluded price {p} is below the pre-collusion price {initial_price}"
                        ))
                    }
                    ColludedPrice::Markup(m) if !(m.is_finite() && m >= 0.0) => {
                        return Err(format!("collusion markup must be non-negative, got {m}"))
                    }
                    _ => {}
                }
                if matches!(**fallback, PricingPolicy::Collusion { .. }) {
                    return Err("collusion fallback cannot itself be a collusion policy".into());
                }
                fallback.check(initial_price)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumPool {
    pub total_capacity: f64,
    /// The society share `w`.
    pub society_fraction: f64,
    pub exclusive_allocations: BTreeMap<OperatorId, f64>,
    pub w_min: f64,
    pub w_max: f64,
}

impl SpectrumPool {
    pub fn society_capacity(&self) -> f64 {
        self.society_fraction * self.total_capacity
    }

    /// `society + exclusive - total`; zero up to rounding.
    pub fn conservation_error(&self) -> f64 {
        self.society_capacity() + self.exclusive_allocations.values().sum::<f64>()
            - self.total_capacity
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicalOperator {
    pub id: OperatorId,
    pub exclusive_capacity: f64,
    pub retail_price: f64,
    pub hosting_fee: f64,
    pub pricing_policy: PricingPolicy,
    pub hosted_mvnos: BTreeSet<MvnoId>,
    /// Licensed capacity committed to MVNO slices.
    pub sold_slices: f64,
    pub infrastructure_cost: f64,
    /// Price in force when the current collusion window opened.
    pub collusion_anchor: Option<f64>,
}

impl PhysicalOperator {
    /// Licensed capacity still available for exclusive retail.
    pub fn uncommitted_capacity(&self) -> f64 {
        (self.exclusive_capacity - self.sold_slices).max(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mvno {
    pub id: MvnoId,
    pub host: OperatorId,
    pub retail_price: f64,
    pub purchased_slice: f64,
    pub slice_unit_price: f64,
    pub active: bool,
    pub subsidiary: bool,
    pub fixed_cost: f64,
    pub pricing_policy: PricingPolicy,
    /// Consecutive epochs with negative profit.
    pub loss_streak: u32,
    pub collusion_anchor: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Consumer {
    pub id: ConsumerId,
    pub demand: f64,
    pub alpha: f64,
    pub switching_cost: f64,
    pub plan: Plan,
    pub access_code: AccessCode,
    /// Additional society contracts held alongside `plan`.
    pub extra_contracts: Vec<MvnoId>,
}

impl Consumer {
    /// MVNOs this consumer draws society capacity through, one entry per contract.
    pub fn society_contracts(&self) -> impl Iterator<Item = &MvnoId> {
        let primary = match &self.plan {
            Plan::Society(m) => Some(m),
            Plan::Exclusive(_) => None,
        };
        primary.into_iter().chain(self.extra_contracts.iter())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketSettings {
    pub assignment: AssignmentSettings,
    pub entry_exit: EntryExitSettings,
    pub demand_jitter: f64,
    pub revision_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketState {
    pub epoch: u64,
    pub pool: SpectrumPool,
    pub operators: Vec<PhysicalOperator>,
    pub mvnos: Vec<Mvno>,
    pub consumers: Vec<Consumer>,
    pub registry: AccessRegistry,
    pub rng_seed: u64,
    pub assignment_model: AssignmentModel,
    pub settings: MarketSettings,
    pub share_table: ShareTable,
    /// Recent epoch metrics, oldest first, trimmed to what pricing and entry rules read.
    pub history: VecDeque<EpochMetrics>,
}

impl MarketState {
    pub fn operator(&self, id: &OperatorId) -> Option<&PhysicalOperator> {
        self.operators.iter().find(|o| &o.id == id)
    }

    pub fn operator_mut(&mut self, id: &OperatorId) -> Option<&mut PhysicalOperator> {
        self.operators.iter_mut().find(|o| &o.id == id)
    }

    pub fn mvno(&self, id: &MvnoId) -> Option<&Mvno> {
        self.mvnos.iter().find(|m| &m.id == id)
    }

    pub fn mvno_mut(&mut self, id: &MvnoId) -> Option<&mut Mvno> {
        self.mvnos.iter_mut().find(|m| &m.id == id)
    }

    pub fn active_mvnos(&self) -> impl Iterator<Item = &Mvno> {
        self.mvnos.iter().filter(|m| m.active)
    }

    pub(crate) fn history_limit(&self) -> usize {
        let pricing = self
            .operators
            .iter()
            .map(|o| o.pricing_policy.memory())
            .chain(self.mvnos.iter().map(|m| m.pricing_policy.memory()))
            .max()
            .unwrap_or(0);
        self.settings.entry_exit.margin_window.max(pricing).max(2) + 1
    }
}
