use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::fair::{gps_allocate, FlowSpec, SchedError};
use crate::market::{ChaoticEfficiency, MvnoId};

/// Aggregate society load of one MVNO.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MvnoLoad {
    pub users: u64,
    pub demand: f64,
}

/// Pooled split of `society_capacity` across MVNOs, weighted by user count.
///
/// MVNOs without users receive nothing.
pub fn virtual_operator_allocate(
    society_capacity: f64,
    loads: &BTreeMap<MvnoId, MvnoLoad>,
) -> Result<BTreeMap<MvnoId, f64>, SchedError> {
    let present: Vec<(&MvnoId, &MvnoLoad)> = loads.iter().filter(|(_, l)| l.users > 0).collect();
    let flows: Vec<FlowSpec> = present
        .iter()
        .map(|(_, l)| FlowSpec::new(l.users as f64, l.demand))
        .collect();
    let alloc = gps_allocate(society_capacity, &flows)?;
    let mut out: BTreeMap<MvnoId, f64> = loads.keys().map(|k| (k.clone(), 0.0)).collect();
    for ((id, _), a) in present.into_iter().zip(alloc) {
        out.insert(id.clone(), a);
    }
    Ok(out)
}

/// Two-level split: across groups weighted by member count, then equally
/// (up to demand) within each group.
pub fn nested_allocate(capacity: f64, groups: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, SchedError> {
    let live: Vec<usize> = (0..groups.len())
        .filter(|&g| !groups[g].is_empty())
        .collect();
    let flows: Vec<FlowSpec> = live
        .iter()
        .map(|&g| FlowSpec::new(groups[g].len() as f64, groups[g].iter().sum()))
        .collect();
    let group_alloc = gps_allocate(capacity, &flows)?;
    let mut out: Vec<Vec<f64>> = groups.iter().map(|g| vec![0.0; g.len()]).collect();
    for (&g, cap) in live.iter().zip(group_alloc) {
        let members: Vec<FlowSpec> = groups[g].iter().map(|&d| FlowSpec::new(1.0, d)).collect();
        out[g] = gps_allocate(cap, &members)?;
    }
    Ok(out)
}

impl ChaoticEfficiency {
    /// Fraction of nominal capacity usable at load `load`.
    pub fn eta(&self, load: f64) -> f64 {
        let excess = (load - 1.0).max(0.0);
        match *self {
            ChaoticEfficiency::Inverse => 1.0 / (1.0 + excess),
            ChaoticEfficiency::Exponential { k } => (-k * excess).exp(),
            ChaoticEfficiency::Ideal => 1.0,
        }
    }
}

/// Unmanaged sharing: contention shrinks the usable capacity, which is then
/// split equally among users up to their demand.
pub fn chaotic_allocate(
    society_capacity: f64,
    user_demands: &[f64],
    efficiency: ChaoticEfficiency,
) -> Result<Vec<f64>, SchedError> {
    let total: f64 = user_demands.iter().sum();
    let load = if society_capacity > 0.0 {
        total / society_capacity
    } else if total > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    let effective = if load.is_finite() {
        society_capacity * efficiency.eta(load)
    } else {
        0.0
    };
    let flows: Vec<FlowSpec> = user_demands
        .iter()
        .map(|&d| FlowSpec::new(1.0, d))
        .collect();
    gps_allocate(effective, &flows)
}
