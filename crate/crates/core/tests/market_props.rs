//! Invariants of the market model, share tables and metric primitives.

mod common;

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;
use society_core::assign::{chaotic_allocate, per_operator_shares};
use society_core::dynamics::Simulation;
use society_core::market::{
    build_market, validate, ChaoticEfficiency, MarketState, OperatorId, Plan, ScenarioConfig,
    CAPACITY_TOLERANCE,
};
use society_core::metrics::{detect_equilibrium, jain_index};
use society_testkit::contention_efficiency;

fn check_state(state: &MarketState) -> Result<(), TestCaseError> {
    let violations = validate(state);
    prop_assert!(violations.is_empty(), "{violations:?}");
    let pool = &state.pool;
    prop_assert!(pool.conservation_error().abs() <= CAPACITY_TOLERANCE * pool.total_capacity);

    let ids: BTreeSet<_> = state.consumers.iter().map(|c| c.id).collect();
    let codes: BTreeSet<_> = state.consumers.iter().map(|c| &c.access_code).collect();
    prop_assert_eq!(ids.len(), state.consumers.len());
    prop_assert_eq!(codes.len(), state.consumers.len());

    for c in &state.consumers {
        match &c.plan {
            Plan::Exclusive(op) => prop_assert!(state.operator(op).is_some()),
            Plan::Society(m) => prop_assert!(state.mvno(m).is_some_and(|m| m.active)),
        }
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn config_survives_json_roundtrip(shape in common::shapes()) {
        let config = shape.config();
        let text = serde_json::to_string(&config.to_json_value()).unwrap();
        prop_assert_eq!(ScenarioConfig::from_json_str(&text).unwrap(), config);
    }

    #[test]
    fn fresh_market_is_consistent(shape in common::shapes()) {
        let state = build_market(&shape.config()).unwrap();
        prop_assert_eq!(state.consumers.len(), shape.consumers as usize);
        check_state(&state)?;
    }

    #[test]
    fn invariants_hold_while_running(shape in common::shapes(), epochs in 1u64..25) {
        let mut sim = Simulation::new(build_market(&shape.config()).unwrap());
        for _ in 0..epochs {
            sim.step().unwrap();
            check_state(sim.state())?;
        }
        let last = sim.metrics().last().unwrap();
        prop_assert_eq!(last.exclusive_subs + last.society_subs, shape.consumers as u64);
    }

    #[test]
    fn building_twice_gives_the_same_market(shape in common::shapes()) {
        let config = shape.config();
        prop_assert_eq!(build_market(&config).unwrap(), build_market(&config).unwrap());
    }

    #[test]
    fn shares_are_proportional_and_scale_free(
        capacity in 0.0f64..1e4,
        users in prop::collection::vec(0u64..500, 1..6),
        scale in 1u64..50,
    ) {
        let counts: BTreeMap<OperatorId, u64> = users
            .iter()
            .enumerate()
            .map(|(i, &u)| (OperatorId::new(format!("o{i}")), u))
            .collect();
        let table = per_operator_shares(capacity, &counts);
        let total: u64 = users.iter().sum();
        let scaled: BTreeMap<OperatorId, u64> =
            counts.iter().map(|(k, &u)| (k.clone(), u * scale)).collect();
        let bigger = per_operator_shares(capacity, &scaled);
        for (id, &u) in &counts {
            let want = if total == 0 { 0.0 } else { capacity * u as f64 / total as f64 };
            prop_assert!((table.share(id) - want).abs() <= 1e-9 * capacity.max(1.0));
            prop_assert!((bigger.share(id) - table.share(id)).abs() <= 1e-9 * capacity.max(1.0));
        }
        let handed_out: f64 = counts.keys().map(|id| table.share(id)).sum();
        prop_assert!((handed_out + table.unallocated - capacity).abs() <= 1e-9 * capacity.max(1.0));
    }

    #[test]
    fn jain_index_stays_in_bounds(xs in prop::collection::vec(0.0f64..100.0, 1..40)) {
        let j = jain_index(&xs).unwrap();
        let n = xs.len() as f64;
        prop_assert!(j >= 1.0 / n - 1e-12 && j <= 1.0);
        let even = vec![xs[0]; xs.len()];
        prop_assert!((jain_index(&even).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn looser_tolerance_never_delays_equilibrium(
        series in prop::collection::vec(prop::collection::vec(0.5f64..0.52, 2), 12..40),
        window in 2usize..8,
        tol in 0.001f64..0.05,
        extra in 0.0f64..0.05,
    ) {
        let tight = detect_equilibrium(&series, window, tol).unwrap();
        let loose = detect_equilibrium(&series, window, tol + extra).unwrap();
        if let Some(t) = tight {
            prop_assert!(loose.is_some_and(|l| l <= t));
        }
    }

    #[test]
    fn chaotic_pool_never_exceeds_capacity(
        capacity in 0.0f64..500.0,
        demands in prop::collection::vec(0.0f64..20.0, 0..50),
    ) {
        let got = chaotic_allocate(capacity, &demands, ChaoticEfficiency::Inverse).unwrap();
        prop_assert!(got.iter().sum::<f64>() <= capacity + 1e-9);
        for (g, d) in got.iter().zip(&demands) {
            prop_assert!(*g >= 0.0 && *g <= d + 1e-12);
        }
    }
}

#[test]
fn contention_curve_matches_slot_simulation() {
    for load in [0.5, 1.0, 1.5, 2.0, 3.0, 4.0] {
        let eta = ChaoticEfficiency::Inverse.eta(load);
        let sim = contention_efficiency(load, 200_000);
        assert!((eta - sim).abs() < 1e-3, "load {load}: {eta} vs {sim}");
    }
    assert!((ChaoticEfficiency::Inverse.eta(2.0) - 0.5).abs() < 1e-12);
}

#[test]
fn chaotic_delivery_halves_at_double_load() {
    let demands = vec![1.0; 200];
    let got: f64 = chaotic_allocate(100.0, &demands, ChaoticEfficiency::Inverse)
        .unwrap()
        .iter()
        .sum();
    let slots = 100.0 * contention_efficiency(2.0, 100_000);
    assert!((got - slots).abs() < 0.05, "{got} vs {slots}");
}
