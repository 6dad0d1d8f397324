//! Consumer choice, pricing, MVNO entry and exit, and the epoch loop.

mod choice;
mod entry;
mod epoch;
mod ledger;
mod pricing;
mod sim;
mod slices;

pub use choice::{choose_plan, consumer_utility, Offer};
pub use entry::{mvno_entry_exit, EntryExit};
pub use epoch::{step_epoch, EpochOutcome};
pub use ledger::{EpochLedger, LicensedAudit, Party, SliceAudit, Transfer, TransferKind};
pub use pricing::{apply_pricing, PricePoint};
pub use sim::{run_scenario, RunError, RunOutput, Simulation};
pub use slices::purchase_slice;

use thiserror::Error;

use crate::fair::SchedError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("no society offer available")]
    NoSocietyOffer,
    #[error("requested {requested} capacity units but only {available} are uncommitted")]
    InsufficientCapacity { requested: f64, available: f64 },
    #[error("amounts and prices must be non-negative")]
    NegativeAmount,
    #[error("unknown or inactive provider: {0}")]
    UnknownProvider(String),
    #[error(transparent)]
    Sched(#[from] SchedError),
}
