//! Random scenario documents shared by the integration suites.

#![allow(dead_code)]

use proptest::prelude::*;
use serde_json::{json, Value};
use society_core::market::ScenarioConfig;

#[derive(Debug, Clone)]
pub struct Shape {
    pub total: f64,
    pub w: f64,
    pub prices: Vec<f64>,
    pub mvno_prices: Vec<f64>,
    pub slices: Vec<f64>,
    pub consumers: u32,
    pub model: &'static str,
    pub registry: bool,
    pub revision_rate: f64,
    pub jitter: f64,
    pub adaptive: bool,
    pub seed: u64,
}

impl Shape {
    pub fn doc(&self) -> Value {
        let ops: Vec<Value> = self
            .prices
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                let mut op = json!({"id": format!("op{i}"), "retail_price": p});
                if self.adaptive {
                    op["pricing"] = json!({
                        "kind": "adaptive", "step": 0.02,
                        "min_price": 0.05, "max_price": 3.0
                    });
                }
                op
            })
            .collect();
        let mvnos: Vec<Value> = self
            .mvno_prices
            .iter()
            .zip(&self.slices)
            .enumerate()
            .map(|(i, (&p, &slice))| {
                json!({
                    "id": format!("mv{i}"),
                    "host": format!("op{}", i % self.prices.len()),
                    "retail_price": p,
                    "purchased_slice": slice,
                    "slice_unit_price": 0.01
                })
            })
            .collect();
        json!({
            "name": "prop",
            "spectrum": {"total": self.total, "w": self.w},
            "operators": ops,
            "mvnos": mvnos,
            "consumers": {
                "count": self.consumers,
                "alpha": {"lo": 0.3, "hi": 3.0},
                "demand": 1.0,
                "switching_cost": 0.05,
                "demand_jitter": self.jitter,
                "revision_rate": self.revision_rate
            },
            "assignment_model": self.model,
            "epochs": 20,
            "seed": self.seed,
            "registry_enabled": self.registry
        })
    }

    pub fn config(&self) -> ScenarioConfig {
        ScenarioConfig::from_json_value(self.doc()).expect("generated scenario parses")
    }
}

pub fn shapes() -> impl Strategy<Value = Shape> {
    (1usize..=4, 1usize..=4).prop_flat_map(|(n_ops, n_mvnos)| {
        (
            50.0f64..1000.0,
            0.05f64..0.6,
            prop::collection::vec(0.1f64..1.5, n_ops),
            prop::collection::vec(0.0f64..0.8, n_mvnos),
            prop::collection::vec(prop_oneof![Just(0.0), 0.0f64..5.0], n_mvnos),
            0u32..80,
            prop_oneof![
                Just("per_operator"),
                Just("virtual_operator"),
                Just("chaotic")
            ],
            any::<bool>(),
            prop_oneof![Just(1.0), 0.05f64..1.0],
            prop_oneof![Just(0.0), 0.0f64..0.5],
            any::<bool>(),
            any::<u64>(),
        )
            .prop_map(
                |(
                    total,
                    w,
                    prices,
                    mvno_prices,
                    slices,
                    consumers,
                    model,
                    registry,
                    revision_rate,
                    jitter,
                    adaptive,
                    seed,
                )| Shape {
                    total,
                    w,
                    prices,
                    mvno_prices,
                    slices,
                    consumers,
                    model,
                    registry,
                    revision_rate,
                    jitter,
                    adaptive,
                    seed,
                },
            )
    })
}
