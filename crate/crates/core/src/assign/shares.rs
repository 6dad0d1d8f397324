use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::market::OperatorId;

/// Society capacity assigned to each physical operator for one adjustment period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShareTable {
    pub shares: BTreeMap<OperatorId, f64>,
    /// Capacity held back because no users were counted.
    pub unallocated: f64,
    pub valid_from_epoch: u64,
    pub adjustment_period: u64,
}

impl ShareTable {
    pub fn empty(adjustment_period: u64) -> Self {
        Self {
            shares: BTreeMap::new(),
            unallocated: 0.0,
            valid_from_epoch: 0,
            adjustment_period: adjustment_period.max(1),
        }
    }

    pub fn share(&self, op: &OperatorId) -> f64 {
        self.shares.get(op).copied().unwrap_or(0.0)
    }

    pub fn is_boundary(&self, epoch: u64) -> bool {
        epoch.is_multiple_of(self.adjustment_period)
    }

    /// Recomputes the table if `epoch` is a period boundary. Returns whether it did.
    pub fn refresh(
        &mut self,
        epoch: u64,
        society_capacity: f64,
        users_per_operator: &BTreeMap<OperatorId, u64>,
    ) -> bool {
        if !self.is_boundary(epoch) {
            return false;
        }
        let fresh = per_operator_shares(society_capacity, users_per_operator);
        self.shares = fresh.shares;
        self.unallocated = fresh.unallocated;
        self.valid_from_epoch = epoch;
        true
    }
}

/// Splits `society_capacity` across operators in proportion to the users they carry.
///
/// With no users at all every share is zero and the whole capacity is reported
/// as unallocated.
pub fn per_operator_shares(
    society_capacity: f64,
    users_per_operator: &BTreeMap<OperatorId, u64>,
) -> ShareTable {
    let total: u64 = users_per_operator.values().sum();
    let mut table = ShareTable::empty(1);
    if total == 0 {
        table.shares = users_per_operator
            .keys()
            .map(|k| (k.clone(), 0.0))
            .collect();
        table.unallocated = society_capacity;
        return table;
    }
    table.shares = users_per_operator
        .iter()
        .map(|(k, &u)| (k.clone(), society_capacity * u as f64 / total as f64))
        .collect();
    table
}

#[cfg(test)]
mod tests {
    use super::*;

    fn users(v: &[(&str, u64)]) -> BTreeMap<OperatorId, u64> {
        v.iter().map(|&(k, u)| (OperatorId::from(k), u)).collect()
    }

    #[test]
    fn proportional_split() {
        let t = per_operator_shares(25.0, &users(&[("A", 600), ("B", 300), ("C", 100)]));
        assert_eq!(t.share(&"A".into()), 15.0);
        assert_eq!(t.share(&"B".into()), 7.5);
        assert_eq!(t.share(&"C".into()), 2.5);
        assert_eq!(t.unallocated, 0.0);
    }

    #[test]
    fn single_carrier_takes_all() {
        let t = per_operator_shares(25.0, &users(&[("A", 1000), ("B", 0), ("C", 0)]));
        assert_eq!(t.share(&"A".into()), 25.0);
        assert_eq!(t.share(&"B".into()), 0.0);
    }

    #[test]
    fn no_users_leaves_capacity_unallocated() {
        let t = per_operator_shares(25.0, &users(&[("A", 0), ("B", 0)]));
        assert!(t.shares.values().all(|&s| s == 0.0));
        assert_eq!(t.unallocated, 25.0);
    }

    #[test]
    fn refresh_only_on_boundaries() {
        let mut t = ShareTable::empty(30);
        assert!(t.refresh(0, 10.0, &users(&[("A", 1), ("B", 1)])));
        assert!(!t.refresh(29, 10.0, &users(&[("A", 1), ("B", 0)])));
        assert_eq!(t.share(&"B".into()), 5.0);
        assert!(t.refresh(60, 10.0, &users(&[("A", 1), ("B", 0)])));
        assert_eq!(t.share(&"B".into()), 0.0);
        assert_eq!(t.valid_from_epoch, 60);
    }
}
