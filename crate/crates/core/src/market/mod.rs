//! Market domain model and construction from a scenario.

mod config;
mod ids;
mod state;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{
    AlphaRange, AssignmentModel, AssignmentSettings, ChaoticEfficiency, ConsumerConfig,
    EntryExitSettings, EquilibriumSettings, ExtraContract, InitialPlan, MvnoConfig, OperatorConfig,
    ScenarioConfig, SpectrumConfig,
};
pub use ids::{AccessCode, ConsumerId, MvnoId, OperatorId, Plan};
pub use state::{
    ColludedPrice, Consumer, MarketSettings, MarketState, Mvno, PhysicalOperator, PricingPolicy,
    SpectrumPool,
};

use crate::assign::{AccessRegistry, Registration, ShareTable};

/// Absolute tolerance for capacity conservation.
pub const CAPACITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MarketError {
    #[error("invalid config at `{path}`: {reason}")]
    InvalidConfig { path: String, reason: String },
    #[error("inconsistent topology: {0}")]
    InconsistentTopology(String),
    #[error("cannot parse scenario: {0}")]
    Parse(String),
    #[error("cannot read {path}: {reason}")]
    Io { path: String, reason: String },
}

/// Builds the initial market for `config`. Pure in `config` (which carries the seed).
pub fn build_market(config: &ScenarioConfig) -> Result<MarketState, MarketError> {
    config.check()?;
    let spectrum = &config.spectrum;
    let exclusive_total = (1.0 - spectrum.w) * spectrum.total;
    let share_sum: f64 = config.operators.iter().map(|o| o.exclusive_share).sum();
    let mean_price = config.operators.iter().map(|o| o.retail_price).sum::<f64>()
        / config.operators.len() as f64;

    let mut exclusive_allocations = BTreeMap::new();
    let mut operators = Vec::with_capacity(config.operators.len());
    for oc in &config.operators {
        let id = OperatorId::new(oc.id.clone());
        let capacity = exclusive_total * oc.exclusive_share / share_sum;
        exclusive_allocations.insert(id.clone(), capacity);
        operators.push(PhysicalOperator {
            id,
            exclusive_capacity: capacity,
            retail_price: oc.retail_price,
            hosting_fee: oc.hosting_fee.unwrap_or(0.05 * mean_price),
            pricing_policy: oc.pricing.clone(),
            hosted_mvnos: BTreeSet::new(),
            sold_slices: 0.0,
            infrastructure_cost: oc.infrastructure_cost,
            collusion_anchor: None,
        });
    }
    let pool = SpectrumPool {
        total_capacity: spectrum.total,
        society_fraction: spectrum.w,
        exclusive_allocations,
        w_min: spectrum.w_min,
        w_max: spectrum.w_max,
    };

    let mut mvnos = Vec::with_capacity(config.mvnos.len());
    for mc in &config.mvnos {
        let host = OperatorId::new(mc.host.clone());
        let mut mvno = Mvno {
            id: MvnoId::new(mc.id.clone()),
            host: host.clone(),
            retail_price: mc.retail_price,
            purchased_slice: 0.0,
            slice_unit_price: mc.slice_unit_price,
            active: mc.active,
            subsidiary: mc.subsidiary,
            fixed_cost: mc.fixed_cost,
            pricing_policy: mc.pricing.clone(),
            loss_streak: 0,
            collusion_anchor: None,
        };
        let op = operators
            .iter_mut()
            .find(|o| o.id == host)
            .expect("hosts checked by config validation");
        op.hosted_mvnos.insert(mvno.id.clone());
        if mc.active && mc.purchased_slice > 0.0 {
            crate::dynamics::purchase_slice(&mut mvno, op, mc.purchased_slice, mc.slice_unit_price)
                .map_err(|e| MarketError::InvalidConfig {
                    path: format!("mvnos.{}.purchased_slice", mc.id),
                    reason: e.to_string(),
                })?;
        }
        mvnos.push(mvno);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let cc = &config.consumers;
    let alphas: Vec<f64> = (0..cc.count)
        .map(|_| {
            if cc.alpha.hi > cc.alpha.lo {
                rng.gen_range(cc.alpha.lo..cc.alpha.hi)
            } else {
                cc.alpha.lo
            }
        })
        .collect();
    let mut used_codes = BTreeSet::new();
    let codes: Vec<AccessCode> = (0..cc.count)
        .map(|_| loop {
            let code = AccessCode::new(format!("{:016x}", rng.gen::<u64>()));
            if used_codes.insert(code.clone()) {
                break code;
            }
        })
        .collect();

    let exclusive_plans: Vec<Plan> = operators
        .iter()
        .map(|o| Plan::Exclusive(o.id.clone()))
        .collect();
    let society_plans: Vec<Plan> = mvnos
        .iter()
        .filter(|m| m.active)
        .map(|m| Plan::Society(m.id.clone()))
        .collect();
    let rotation: Vec<Plan> = match cc.initial_plan {
        InitialPlan::Exclusive => exclusive_plans,
        InitialPlan::Society => society_plans,
        InitialPlan::Mixed => exclusive_plans.into_iter().chain(society_plans).collect(),
    };

    let mut registry = AccessRegistry::new(config.registry_enabled);
    let mut consumers = Vec::with_capacity(cc.count as usize);
    for (i, (alpha, code)) in alphas.into_iter().zip(codes).enumerate() {
        let plan = rotation[i % rotation.len()].clone();
        registry.register_contract(&code, plan.clone());
        consumers.push(Consumer {
            id: ConsumerId(i as u32),
            demand: cc.demand,
            alpha,
            switching_cost: cc.switching_cost,
            plan,
            access_code: code,
            extra_contracts: Vec::new(),
        });
    }
    for extra in &cc.extra_contracts {
        let consumer = &mut consumers[extra.consumer as usize];
        let contract = Plan::Society(MvnoId::new(extra.mvno.clone()));
        match registry.register_contract(&consumer.access_code, contract) {
            Registration::Accepted => consumer
                .extra_contracts
                .push(MvnoId::new(extra.mvno.clone())),
            Registration::Rejected(_) => {
                log::info!(
                    "registry rejected extra contract of {} with {}",
                    consumer.id,
                    extra.mvno
                );
            }
        }
    }

    let share_table = ShareTable::empty(config.assignment.adjustment_period);
    Ok(MarketState {
        epoch: 0,
        pool,
        operators,
        mvnos,
        consumers,
        registry,
        rng_seed: config.seed,
        assignment_model: config.assignment_model,
        settings: MarketSettings {
            assignment: config.assignment.clone(),
            entry_exit: config.entry_exit.clone(),
            demand_jitter: cc.demand_jitter,
            revision_rate: cc.revision_rate,
        },
        share_table,
        history: VecDeque::new(),
    })
}

/// A broken invariant, naming the entity concerned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum Violation {
    CapacityMismatch {
        error: f64,
    },
    SocietyFractionOutOfRange {
        w: f64,
        w_min: f64,
        w_max: f64,
    },
    AllocationMismatch {
        operator: OperatorId,
    },
    NegativeValue {
        entity: String,
        field: String,
    },
    DuplicateIdentity {
        access_code: AccessCode,
        contracts: usize,
    },
    DuplicateId {
        id: String,
    },
    DanglingPlan {
        consumer: ConsumerId,
        plan: Plan,
    },
    UnknownHost {
        mvno: MvnoId,
    },
    SliceExceedsCapacity {
        operator: OperatorId,
    },
    InvalidConsumer {
        consumer: ConsumerId,
        field: String,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::CapacityMismatch { error } => {
                write!(
                    f,
                    "CapacityMismatch: society + exclusive differs from total by {error}"
                )
            }
            Violation::SocietyFractionOutOfRange { w, w_min, w_max } => write!(
                f,
                "SocietyFractionOutOfRange: spectrum.w = {w} outside [{w_min}, {w_max}]"
            ),
            Violation::AllocationMismatch { operator } => write!(
                f,
                "AllocationMismatch: operator {operator} capacity differs from the pool entry"
            ),
            Violation::NegativeValue { entity, field } => {
                write!(f, "NegativeValue: {entity}.{field} must be non-negative")
            }
            Violation::DuplicateIdentity {
                access_code,
                contracts,
            } => write!(
                f,
                "DuplicateIdentity: access code {access_code} holds {contracts} active contracts"
            ),
            Violation::DuplicateId { id } => write!(f, "DuplicateId: {id} is used twice"),
            Violation::DanglingPlan { consumer, plan } => write!(
                f,
                "DanglingPlan: consumer {consumer} holds {plan} which is missing or inactive"
            ),
            Violation::UnknownHost { mvno } => {
                write!(f, "UnknownHost: MVNO {mvno} references a missing host")
            }
            Violation::SliceExceedsCapacity { operator } => write!(
                f,
                "SliceExceedsCapacity: slices sold by {operator} exceed its exclusive capacity"
            ),
            Violation::InvalidConsumer { consumer, field } => {
                write!(f, "InvalidConsumer: {consumer}.{field} out of range")
            }
        }
    }
}

/// Lists every invariant violation in `state`; empty iff the state is sound.
pub fn validate(state: &MarketState) -> Vec<Violation> {
    let mut out = Vec::new();
    let pool = &state.pool;
    let err = pool.conservation_error();
    if !(err.abs() <= CAPACITY_TOLERANCE * pool.total_capacity.max(1.0)) {
        out.push(Violation::CapacityMismatch { error: err });
    }
    let w = pool.society_fraction;
    if !(w > 0.0 && w < 1.0 && w >= pool.w_min && w <= pool.w_max) {
        out.push(Violation::SocietyFractionOutOfRange {
            w,
            w_min: pool.w_min,
            w_max: pool.w_max,
        });
    }

    let mut ids = BTreeSet::new();
    for op in &state.operators {
        if !ids.insert(op.id.as_str()) {
            out.push(Violation::DuplicateId {
                id: op.id.to_string(),
            });
        }
        if pool.exclusive_allocations.get(&op.id) != Some(&op.exclusive_capacity) {
            out.push(Violation::AllocationMismatch {
                operator: op.id.clone(),
            });
        }
        for (field, v) in [
            ("retail_price", op.retail_price),
            ("hosting_fee", op.hosting_fee),
            ("sold_slices", op.sold_slices),
        ] {
            if !(v >= 0.0) {
                out.push(Violation::NegativeValue {
                    entity: op.id.to_string(),
                    field: field.into(),
                });
            }
        }
        if op.sold_slices > op.exclusive_capacity + CAPACITY_TOLERANCE {
            out.push(Violation::SliceExceedsCapacity {
                operator: op.id.clone(),
            });
        }
    }
    for m in &state.mvnos {
        if !ids.insert(m.id.as_str()) {
            out.push(Violation::DuplicateId {
                id: m.id.to_string(),
            });
        }
        if state.operator(&m.host).is_none() {
            out.push(Violation::UnknownHost { mvno: m.id.clone() });
        }
        for (field, v) in [
            ("retail_price", m.retail_price),
            ("purchased_slice", m.purchased_slice),
        ] {
            if !(v >= 0.0) {
                out.push(Violation::NegativeValue {
                    entity: m.id.to_string(),
                    field: field.into(),
                });
            }
        }
    }

    let provider_active = |plan: &Plan| match plan {
        Plan::Exclusive(op) => state.operator(op).is_some(),
        Plan::Society(m) => state.mvno(m).is_some_and(|m| m.active),
    };
    let mut per_code: BTreeMap<&AccessCode, usize> = BTreeMap::new();
    for c in &state.consumers {
        if !provider_active(&c.plan) {
            out.push(Violation::DanglingPlan {
                consumer: c.id,
                plan: c.plan.clone(),
            });
        }
        for m in &c.extra_contracts {
            let plan = Plan::Society(m.clone());
            if !provider_active(&plan) {
                out.push(Violation::DanglingPlan {
                    consumer: c.id,
                    plan,
                });
            }
        }
        for (field, ok) in [
            ("demand", c.demand > 0.0 && c.demand.is_finite()),
            ("alpha", c.alpha >= 0.0),
            ("switching_cost", c.switching_cost >= 0.0),
        ] {
            if !ok {
                out.push(Violation::InvalidConsumer {
                    consumer: c.id,
                    field: field.into(),
                });
            }
        }
        *per_code.entry(&c.access_code).or_default() += 1 + c.extra_contracts.len();
    }
    if state.registry.enabled() {
        for (code, contracts) in per_code {
            if contracts > 1 {
                out.push(Violation::DuplicateIdentity {
                    access_code: code.clone(),
                    contracts,
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn sample_config() -> ScenarioConfig {
        ScenarioConfig::from_json_str(
            r#"{
                "spectrum": {"total": 100, "w": 0.25},
                "operators": [
                    {"id": "A", "retail_price": 1.0},
                    {"id": "B", "retail_price": 1.0},
                    {"id": "C", "retail_price": 1.0}
                ],
                "mvnos": [
                    {"id": "m1", "host": "A", "retail_price": 0.3},
                    {"id": "m2", "host": "B", "retail_price": 0.3}
                ],
                "consumers": {"count": 50, "alpha": {"lo": 0.5, "hi": 3}, "demand": 1, "switching_cost": 0.1},
                "assignment_model": "per_operator",
                "epochs": 10,
                "seed": 7,
                "registry_enabled": true
            }"#,
        )
        .unwrap()
    }

    #[test]
    fn equal_split_with_quarter_society() {
        let s = build_market(&sample_config()).unwrap();
        assert!((s.pool.society_capacity() - 25.0).abs() < 1e-12);
        for op in &s.operators {
            assert!((op.exclusive_capacity - 25.0).abs() < 1e-12);
        }
        assert!(s.pool.conservation_error().abs() < 1e-9);
    }

    #[test]
    fn zero_w_is_invalid() {
        let mut c = sample_config();
        c.spectrum.w = 0.0;
        match build_market(&c) {
            Err(MarketError::InvalidConfig { path, .. }) => assert_eq!(path, "spectrum.w"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_host_is_topology_error() {
        let mut c = sample_config();
        c.mvnos[0].host = "Z".into();
        assert!(matches!(
            build_market(&c),
            Err(MarketError::InconsistentTopology(_))
        ));
    }

    #[test]
    fn build_is_deterministic() {
        let c = sample_config();
        assert_eq!(build_market(&c).unwrap(), build_market(&c).unwrap());
        let mut other = c.clone();
        other.seed = 8;
        assert_ne!(
            build_market(&c).unwrap().consumers,
            build_market(&other).unwrap().consumers
        );
    }

    #[test]
    fn fresh_state_validates() {
        let s = build_market(&sample_config()).unwrap();
        assert_eq!(validate(&s), vec![]);
        assert!(s.consumers.iter().all(|c| (0.5..3.0).contains(&c.alpha)));
    }

    #[test]
    fn capacity_mismatch_detected_once() {
        let mut s = build_market(&sample_config()).unwrap();
        s.pool.total_capacity = 101.0;
        let v = validate(&s);
        assert_eq!(v.len(), 1);
        assert!(matches!(v[0], Violation::CapacityMismatch { .. }));
    }

    #[test]
    fn duplicate_access_code_detected_once() {
        let mut s = build_market(&sample_config()).unwrap();
        s.consumers[1].access_code = s.consumers[0].access_code.clone();
        let v = validate(&s);
        assert_eq!(v.len(), 1, "{v:?}");
        assert!(matches!(
            v[0],
            Violation::DuplicateIdentity { contracts: 2, .. }
        ));
    }

    #[test]
    fn rejects_unknown_keys_and_bad_syntax() {
        let bad_key = r#"{"spectrum": {"total": 1, "w": 0.2, "bogus": 1}}"#;
        assert!(matches!(
            ScenarioConfig::from_json_str(bad_key),
            Err(MarketError::InvalidConfig { .. })
        ));
        assert!(matches!(
            ScenarioConfig::from_json_str("{"),
            Err(MarketError::Parse(_))
        ));
    }

    #[test]
    fn hosting_fee_defaults_to_five_percent_of_mean_price() {
        let mut c = sample_config();
        c.operators[0].retail_price = 2.0;
        let s = build_market(&c).unwrap();
        let expected = 0.05 * (4.0 / 3.0);
        assert!(s
            .operators
            .iter()
            .all(|o| (o.hosting_fee - expected).abs() < 1e-12));
    }

    #[test]
    fn extra_contract_rejected_when_registry_enabled() {
        let mut c = sample_config();
        c.consumers.extra_contracts = vec![ExtraContract {
            consumer: 0,
            mvno: "m2".into(),
        }];
        let on = build_market(&c).unwrap();
        assert!(on.consumers[0].extra_contracts.is_empty());
        c.registry_enabled = false;
        let off = build_market(&c).unwrap();
        assert_eq!(off.consumers[0].extra_contracts, vec![MvnoId::from("m2")]);
    }

    #[test]
    fn slice_purchase_reduces_host_retail_pool() {
        let mut c = sample_config();
        c.mvnos[0].purchased_slice = 10.0;
        c.mvnos[0].slice_unit_price = 0.2;
        let s = build_market(&c).unwrap();
        let a = s.operator(&OperatorId::from("A")).unwrap();
        assert!((a.uncommitted_capacity() - 15.0).abs() < 1e-12);
        c.mvnos[0].purchased_slice = 30.0;
        assert!(build_market(&c).is_err());
    }

    #[test]
    fn collusion_price_below_current_is_invalid() {
        let mut c = sample_config();
        c.operators[0].pricing = PricingPolicy::Collusion {
            start_epoch: 1,
            end_epoch: 2,
            colluded_price: ColludedPrice::Absolute(0.5),
            fallback: Box::new(PricingPolicy::Fixed),
        };
        assert!(build_market(&c).is_err());
    }
}
