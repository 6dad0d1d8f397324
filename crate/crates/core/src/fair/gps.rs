use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::{non_negative, SchedError};

/// A fluid flow competing for a shared capacity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowSpec {
    pub weight: f64,
    pub demand: f64,
}

impl FlowSpec {
    pub fn new(weight: f64, demand: f64) -> Self {
        Self { weight, demand }
    }

    fn ratio(&self) -> f64 {
        self.demand / self.weight
    }
}

/// Weighted max-min (water-filling) split of `capacity` across `flows`.
///
/// No flow receives more than its demand, the allocations sum to
/// `min(capacity, total demand)`, and flows not capped by their demand receive
/// the same allocation per unit of weight. The result depends only on the
/// multiset of flows, not on their order.
pub fn gps_allocate(capacity: f64, flows: &[FlowSpec]) -> Result<Vec<f64>, SchedError> {
    non_negative(capacity, "capacity")?;
    for (i, f) in flows.iter().enumerate() {
        if !(f.weight.is_finite() && f.weight > 0.0) {
            return Err(SchedError::NonPositiveWeight(i));
        }
        non_negative(f.demand, "demand")?;
    }

    // Canonical order so that floating-point sums do not depend on input order.
    let mut order: Vec<usize> = (0..flows.len()).collect();
    order.sort_by(|&a, &b| canonical(&flows[a], &flows[b]));

    let total_demand: f64 = order.iter().map(|&i| flows[i].demand).sum();
    if total_demand <= capacity {
        return Ok(flows.iter().map(|f| f.demand).collect());
    }

    let mut alloc = vec![0.0; flows.len()];
    let mut remaining = capacity;
    let mut remaining_weight: f64 = order.iter().map(|&i| flows[i].weight).sum();
    for (pos, &i) in order.iter().enumerate() {
        let f = &flows[i];
        let level = remaining / remaining_weight;
        if f.ratio() <= level {
            alloc[i] = f.demand;
            remaining -= f.demand;
            remaining_weight -= f.weight;
        } else {
            // Every flow from here on is bottlenecked at the same level.
            for &j in &order[pos..] {
                alloc[j] = flows[j].weight * level;
            }
            break;
        }
    }
    Ok(alloc)
}

fn canonical(a: &FlowSpec, b: &FlowSpec) -> Ordering {
    a.ratio()
        .total_cmp(&b.ratio())
        .then(a.weight.total_cmp(&b.weight))
        .then(a.demand.total_cmp(&b.demand))
}
