use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::market::{AccessCode, Plan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rejection {
    DuplicateIdentity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Registration {
    Accepted,
    Rejected(Rejection),
}

/// Active contracts per personal access code.
///
/// When enabled, a code may hold one active contract at a time. When
/// disabled every registration is accepted.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AccessRegistry {
    enabled: bool,
    active: BTreeMap<AccessCode, Vec<Plan>>,
}

impl AccessRegistry {
    pub fn new(enabled: bool) -> Self {
        Self {
            enabled,
            active: BTreeMap::new(),
        }
    }

    pub fn enabled(&self) -> bool {
        self.enabled
    }

    pub fn register_contract(&mut self, code: &AccessCode, contract: Plan) -> Registration {
        let held = self.active.entry(code.clone()).or_default();
        if self.enabled && !held.is_empty() {
            return Registration::Rejected(Rejection::DuplicateIdentity);
        }
        held.push(contract);
        Registration::Accepted
    }

    /// Ends one active `contract` of `code`. Returns false if none was held.
    pub fn terminate(&mut self, code: &AccessCode, contract: &Plan) -> bool {
        let Some(held) = self.active.get_mut(code) else {
            return false;
        };
        let Some(pos) = held.iter().position(|c| c == contract) else {
            return false;
        };
        held.remove(pos);
        if held.is_empty() {
            self.active.remove(code);
        }
        true
    }

    /// Moves `code` from `from` to `to` as one step.
    pub fn switch(&mut self, code: &AccessCode, from: &Plan, to: Plan) -> Registration {
        if !self.terminate(code, from) {
            return self.register_contract(code, to);
        }
        match self.register_contract(code, to) {
            Registration::Accepted => Registration::Accepted,
            rejected => {
                self.register_contract(code, from.clone());
                rejected
            }
        }
    }

    pub fn contracts(&self, code: &AccessCode) -> &[Plan] {
        self.active.get(code).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn active_contracts(&self) -> usize {
        self.active.values().map(Vec::len).sum()
    }

    pub fn distinct_codes(&self) -> usize {
        self.active.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn code(s: &str) -> AccessCode {
        AccessCode::from(s)
    }

    fn society(m: &str) -> Plan {
        Plan::Society(m.into())
    }

    #[test]
    fn fresh_code_accepted() {
        let mut r = AccessRegistry::new(true);
        assert_eq!(
            r.register_contract(&code("a"), society("m1")),
            Registration::Accepted
        );
    }

    #[test]
    fn second_contract_rejected_when_enabled() {
        let mut r = AccessRegistry::new(true);
        r.register_contract(&code("a"), society("m1"));
        assert_eq!(
            r.register_contract(&code("a"), society("m2")),
            Registration::Rejected(Rejection::DuplicateIdentity)
        );
        assert_eq!(r.active_contracts(), r.distinct_codes());
    }

    #[test]
    fn accepted_again_after_termination() {
        let mut r = AccessRegistry::new(true);
        r.register_contract(&code("a"), society("m1"));
        assert!(r.terminate(&code("a"), &society("m1")));
        assert_eq!(
            r.register_contract(&code("a"), society("m2")),
            Registration::Accepted
        );
        assert!(!r.terminate(&code("a"), &society("m1")));
    }

    #[test]
    fn disabled_registry_accepts_duplicates() {
        let mut r = AccessRegistry::new(false);
        r.register_contract(&code("a"), society("m1"));
        assert_eq!(
            r.register_contract(&code("a"), society("m2")),
            Registration::Accepted
        );
        assert_eq!(r.active_contracts(), 2);
        assert_eq!(r.distinct_codes(), 1);
    }

    #[test]
    fn switch_keeps_one_contract() {
        let mut r = AccessRegistry::new(true);
        r.register_contract(&code("a"), society("m1"));
        let to = Plan::Exclusive("A".into());
        assert_eq!(
            r.switch(&code("a"), &society("m1"), to.clone()),
            Registration::Accepted
        );
        assert_eq!(r.contracts(&code("a")), &[to]);
    }
}
