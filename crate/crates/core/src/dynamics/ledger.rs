use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::market::{ConsumerId, MvnoId, OperatorId};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Party {
    Consumer(ConsumerId),
    Operator(OperatorId),
    Mvno(MvnoId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TransferKind {
    Retail,
    HostingFee,
    SlicePayment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transfer {
    pub from: Party,
    pub to: Party,
    pub kind: TransferKind,
    pub amount: f64,
}

/// Licensed capacity use of one operator in one epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LicensedAudit {
    pub operator: OperatorId,
    /// Retail licensed capacity (exclusive minus sold slices).
    pub capacity: f64,
    pub demand: f64,
    pub allocation: f64,
    pub donated: f64,
    /// Sum of what the operator's exclusive subscribers actually received.
    pub delivered: f64,
}

/// Capacity an MVNO delivered from its dedicated slice and from the society pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceAudit {
    pub mvno: MvnoId,
    pub slice: f64,
    pub from_slice: f64,
    pub from_society: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EpochLedger {
    pub epoch: u64,
    pub transfers: Vec<Transfer>,
    pub licensed: Vec<LicensedAudit>,
    pub slices: Vec<SliceAudit>,
    /// Realized quality per consumer, indexed like `MarketState::consumers`.
    pub quality: Vec<f64>,
}

impl EpochLedger {
    pub fn pay(&mut self, from: Party, to: Party, kind: TransferKind, amount: f64) {
        self.transfers.push(Transfer {
            from,
            to,
            kind,
            amount,
        });
    }

    pub fn consumer_payments(&self) -> f64 {
        self.transfers
            .iter()
            .filter(|t| matches!(t.from, Party::Consumer(_)))
            .map(|t| t.amount)
            .sum()
    }

    pub fn retail_revenue(&self) -> f64 {
        self.transfers
            .iter()
            .filter(|t| t.kind == TransferKind::Retail)
            .map(|t| t.amount)
            .sum()
    }

    /// Income minus spending per party.
    pub fn balances(&self) -> BTreeMap<Party, f64> {
        let mut out = BTreeMap::new();
        for t in &self.transfers {
            *out.entry(t.from.clone()).or_insert(0.0) -= t.amount;
            *out.entry(t.to.clone()).or_insert(0.0) += t.amount;
        }
        out
    }

    pub fn income(&self, party: &Party, kind: TransferKind) -> f64 {
        self.transfers
            .iter()
            .filter(|t| &t.to == party && t.kind == kind)
            .map(|t| t.amount)
            .sum()
    }

    pub fn spending(&self, party: &Party) -> f64 {
        self.transfers
            .iter()
            .filter(|t| &t.from == party)
            .map(|t| t.amount)
            .sum()
    }
}
