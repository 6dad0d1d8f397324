//! Deterministic agent-based simulator of a cellular market in which a share
//! of the spectrum is reserved as a free society pool for virtual operators.

pub mod assign;
pub mod dynamics;
pub mod fair;
pub mod market;
pub mod metrics;
