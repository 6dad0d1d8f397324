//! Scenario configuration file format.
//!
//! Scenarios are JSON documents; `docs/scenario.schema.json` describes the
//! same structure for editors. Optional sections fall back to the defaults
//! below, and unknown keys are rejected so that typos surface as errors.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::state::PricingPolicy;
use super::MarketError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    pub spectrum: SpectrumConfig,
    pub operators: Vec<OperatorConfig>,
    #[serde(default)]
    pub mvnos: Vec<MvnoConfig>,
    pub consumers: ConsumerConfig,
    pub assignment_model: AssignmentModel,
    pub epochs: u64,
    pub seed: u64,
    pub registry_enabled: bool,
    #[serde(default)]
    pub assignment: AssignmentSettings,
    #[serde(default)]
    pub entry_exit: EntryExitSettings,
    #[serde(default)]
    pub equilibrium: EquilibriumSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    /// Total capacity in abstract units per epoch.
    pub total: f64,
    /// Society share of the total.
    pub w: f64,
    #[serde(default = "default_w_min")]
    pub w_min: f64,
    #[serde(default = "default_w_max")]
    pub w_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorConfig {
    pub id: String,
    /// Relative weight of this operator in the exclusive split.
    #[serde(default = "one")]
    pub exclusive_share: f64,
    pub retail_price: f64,
    /// Per-subscriber hosting fee; defaults to 5% of the mean operator retail price.
    #[serde(default)]
    pub hosting_fee: Option<f64>,
    #[serde(default)]
    pub pricing: PricingPolicy,
    #[serde(default)]
    pub infrastructure_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MvnoConfig {
    pub id: String,
    pub host: String,
    pub retail_price: f64,
    #[serde(default)]
    pub purchased_slice: f64,
    #[serde(default)]
    pub slice_unit_price: f64,
    /// Inactive MVNOs are entry templates.
    #[serde(default = "yes")]
    pub active: bool,
    /// Owned by the host operator.
    #[serde(default)]
    pub subsidiary: bool,
    #[serde(default)]
    pub fixed_cost: f64,
    #[serde(default)]
    pub pricing: PricingPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConsumerConfig {
    pub count: u32,
    pub alpha: AlphaRange,
    pub demand: f64,
    pub switching_cost: f64,
    #[serde(default)]
    pub initial_plan: InitialPlan,
    /// Per-epoch multiplicative demand noise amplitude in `[0, 1)`.
    #[serde(default)]
    pub demand_jitter: f64,
    /// Fraction of consumers that reconsider their plan in a given epoch.
    #[serde(default = "one")]
    pub revision_rate: f64,
    /// Additional society contracts attempted by individual consumers.
    #[serde(default)]
    pub extra_contracts: Vec<ExtraContract>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlphaRange {
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtraContract {
    pub consumer: u32,
    pub mvno: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialPlan {
    Society,
    Exclusive,
    /// Round-robin over operators and active MVNOs.
    #[default]
    Mixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssignmentModel {
    Chaotic,
    VirtualOperator,
    PerOperator,
}

/// Contention efficiency used by the chaotic model.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChaoticEfficiency {
    /// `1 / (1 + max(0, L - 1))`.
    #[default]
    Inverse,
    /// `exp(-k * max(0, L - 1))`.
    Exponential { k: f64 },
    /// No contention loss.
    Ideal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssignmentSettings {
    #[serde(default = "default_adjustment_period")]
    pub adjustment_period: u64,
    #[serde(default)]
    pub count_exclusive_users: bool,
    #[serde(default = "one")]
    pub continuity_penalty: f64,
    #[serde(default)]
    pub chaotic_efficiency: ChaoticEfficiency,
}

impl Default for AssignmentSettings {
    fn default() -> Self {
        Self {
            adjustment_period: default_adjustment_period(),
            count_exclusive_users: false,
            continuity_penalty: 1.0,
            chaotic_efficiency: ChaoticEfficiency::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntryExitSettings {
    #[serde(default = "yes")]
    pub enabled: bool,
    /// Epochs averaged when judging incumbent margins.
    #[serde(default = "default_margin_window")]
    pub margin_window: usize,
    #[serde(default = "default_entry_threshold")]
    pub entry_threshold: f64,
    #[serde(default = "default_exit_loss_epochs")]
    pub exit_loss_epochs: u32,
}

impl Default for EntryExitSettings {
    fn default() -> Self {
        Self {
            enabled: true,
            margin_window: default_margin_window(),
            entry_threshold: default_entry_threshold(),
            exit_loss_epochs: default_exit_loss_epochs(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquilibriumSettings {
    #[serde(default = "default_eq_window")]
    pub window: usize,
    #[serde(default = "default_eq_tolerance")]
    pub tolerance: f64,
    /// First epoch considered by the price-stability search.
    #[serde(default)]
    pub from_epoch: u64,
}

impl Default for EquilibriumSettings {
    fn default() -> Self {
        Self {
            window: default_eq_window(),
            tolerance: default_eq_tolerance(),
            from_epoch: 0,
        }
    }
}

fn one() -> f64 {
    1.0
}
fn yes() -> bool {
    true
}
fn default_w_min() -> f64 {
    0.01
}
fn default_w_max() -> f64 {
    0.9
}
fn default_adjustment_period() -> u64 {
    30
}
fn default_margin_window() -> usize {
    10
}
fn default_entry_threshold() -> f64 {
    0.25
}
fn default_exit_loss_epochs() -> u32 {
    6
}
fn default_eq_window() -> usize {
    30
}
fn default_eq_tolerance() -> f64 {
    0.01
}

impl ScenarioConfig {
    pub fn from_json_str(text: &str) -> Result<Self, MarketError> {
        serde_json::from_str(text).map_err(|e| {
            if e.is_data() {
                MarketError::InvalidConfig {
                    path: String::from("<document>"),
                    reason: e.to_string(),
                }
            } else {
                MarketError::Parse(e.to_string())
            }
        })
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, MarketError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| MarketError::Io {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Self::from_json_str(&text)
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("scenario config always serialises")
    }

    pub fn from_json_value(value: serde_json::Value) -> Result<Self, MarketError> {
        serde_json::from_value(value).map_err(|e| MarketError::InvalidConfig {
            path: String::from("<document>"),
            reason: e.to_string(),
        })
    }

    /// Range and topology checks that serde cannot express.
    pub fn check(&self) -> Result<(), MarketError> {
        let invalid = |path: &str, reason: String| {
            Err(MarketError::InvalidConfig {
                path: path.to_owned(),
                reason,
            })
        };
        let s = &self.spectrum;
        if !(s.total.is_finite() && s.total > 0.0) {
            return invalid(
                "spectrum.total",
                format!("must be positive, got {}", s.total),
            );
        }
        if !(s.w_min > 0.0 && s.w_min <= s.w_max && s.w_max < 1.0) {
            return invalid(
                "spectrum.w_min",
                format!(
                    "need 0 < w_min <= w_max < 1, got [{}, {}]",
                    s.w_min, s.w_max
                ),
            );
        }
        if !(s.w >= s.w_min && s.w <= s.w_max) {
            return invalid(
                "spectrum.w",
                format!(
                    "{} is outside the allowed range [{}, {}]",
                    s.w, s.w_min, s.w_max
                ),
            );
        }
        if self.operators.is_empty() {
            return invalid("operators", "at least one operator is required".into());
        }
        let mut seen = std::collections::BTreeSet::new();
        for (i, op) in self.operators.iter().enumerate() {
            let p = |field: &str| format!("operators[{i}].{field}");
            if op.id.is_empty() || !seen.insert(op.id.clone()) {
                return invalid(&p("id"), format!("empty or duplicate id {:?}", op.id));
            }
            if !(op.exclusive_share.is_finite() && op.exclusive_share > 0.0) {
                return invalid(&p("exclusive_share"), "must be positive".into());
            }
            if !(op.retail_price.is_finite() && op.retail_price >= 0.0) {
                return invalid(&p("retail_price"), "must be non-negative".into());
            }
            if let Some(fee) = op.hosting_fee {
                if !(fee.is_finite() && fee >= 0.0) {
                    return invalid(&p("hosting_fee"), "must be non-negative".into());
                }
            }
            if op.infrastructure_cost < 0.0 {
                return invalid(&p("infrastructure_cost"), "must be non-negative".into());
            }
            op.pricing
                .check(op.retail_price)
                .or_else(|reason| invalid(&p("pricing"), reason))?;
        }
        let mut subsidiaries = std::collections::BTreeSet::new();
        for (i, m) in self.mvnos.iter().enumerate() {
            let p = |field: &str| format!("mvnos[{i}].{field}");
            if m.id.is_empty() || !seen.insert(m.id.clone()) {
                return invalid(&p("id"), format!("empty or duplicate id {:?}", m.id));
            }
            if !self.operators.iter().any(|op| op.id == m.host) {
                return Err(MarketError::InconsistentTopology(format!(
                    "MVNO {} references unknown host {}",
                    m.id, m.host
                )));
            }
            if m.subsidiary && !subsidiaries.insert(m.host.clone()) {
                return Err(MarketError::InconsistentTopology(format!(
                    "operator {} owns more than one MVNO subsidiary",
                    m.host
                )));
            }
            for (field, v) in [
                ("retail_price", m.retail_price),
                ("purchased_slice", m.purchased_slice),
                ("slice_unit_price", m.slice_unit_price),
                ("fixed_cost", m.fixed_cost),
            ] {
                if !(v.is_finite() && v >= 0.0) {
                    return invalid(&p(field), "must be non-negative".into());
                }
            }
            m.pricing
                .check(m.retail_price)
                .or_else(|reason| invalid(&p("pricing"), reason))?;
        }
        if !self.mvnos.iter().any(|m| m.active) {
            return Err(MarketError::InconsistentTopology(
                "at least one active MVNO is required for universal society access".into(),
            ));
        }
        let c = &self.consumers;
        if !(c.alpha.lo >= 0.0 && c.alpha.lo <= c.alpha.hi && c.alpha.hi.is_finite()) {
            return invalid("consumers.alpha", "need 0 <= lo <= hi".into());
        }
        if !(c.demand.is_finite() && c.demand > 0.0) {
            return invalid("consumers.demand", "must be positive".into());
        }
        if !(c.switching_cost.is_finite() && c.switching_cost >= 0.0) {
            return invalid("consumers.switching_cost", "must be non-negative".into());
        }
        if !(0.0..1.0).contains(&c.demand_jitter) {
            return invalid("consumers.demand_jitter", "must lie in [0, 1)".into());
        }
        if !(c.revision_rate > 0.0 && c.revision_rate <= 1.0) {
            return invalid("consumers.revision_rate", "must lie in (0, 1]".into());
        }
        for (i, x) in c.extra_contracts.iter().enumerate() {
            if x.consumer >= c.count {
                return invalid(
                    &format!("consumers.extra_contracts[{i}].consumer"),
                    format!("consumer {} does not exist", x.consumer),
                );
            }
            if !self.mvnos.iter().any(|m| m.id == x.mvno && m.active) {
                return Err(MarketError::InconsistentTopology(format!(
                    "extra contract references unknown or inactive MVNO {}",
                    x.mvno
                )));
            }
        }
        let a = &self.assignment;
        if a.adjustment_period == 0 {
            return invalid("assignment.adjustment_period", "must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&a.continuity_penalty) {
            return invalid("assignment.continuity_penalty", "must lie in [0, 1]".into());
        }
        if let ChaoticEfficiency::Exponential { k } = a.chaotic_efficiency {
            if !(k.is_finite() && k >= 0.0) {
                return invalid(
                    "assignment.chaotic_efficiency.k",
                    "must be non-negative".into(),
                );
            }
        }
        let e = &self.entry_exit;
        if e.margin_window == 0 || e.exit_loss_epochs == 0 {
            return invalid(
                "entry_exit",
                "margin_window and exit_loss_epochs must be positive".into(),
            );
        }
        let q = &self.equilibrium;
        if q.window < 2 || !(q.tolerance > 0.0) {
            return invalid("equilibrium", "need window >= 2 and tolerance > 0".into());
        }
        Ok(())
    }
}
