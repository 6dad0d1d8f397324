//! Fair resource allocation primitives.
//!
//! The epoch-level market uses the fluid [`gps_allocate`] water-filler. The
//! packet-level [`wfq_schedule`] and [`drr_schedule`] schedulers exist to check
//! the same sharing rules at packet granularity, and [`priority_conserve`]
//! implements the licensed-first donation of idle exclusive capacity.

mod drr;
mod gps;
mod priority;
mod wfq;

pub use drr::{drr_schedule, DrrOutcome, DrrService, DrrState};
pub use gps::{gps_allocate, FlowSpec};
pub use priority::{priority_conserve, Conservation};
pub use wfq::{
    wfq_schedule, write_packet_trace, Departure, QueuedPacket, WfqFlow, WfqOutcome, WfqState,
    WfqVariant,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SchedError {
    #[error("negative or non-finite input: {0}")]
    NegativeInput(&'static str),
    #[error("flow {0} has a non-positive weight")]
    NonPositiveWeight(usize),
    #[error("link rate must be positive")]
    NonPositiveRate,
    #[error("queue {0} has a non-positive quantum")]
    NonPositiveQuantum(usize),
    #[error("packet {packet} of flow {flow} has a non-positive size")]
    NonPositiveSize { flow: usize, packet: usize },
    #[error("{queues} queues but {quanta} quanta")]
    LengthMismatch { queues: usize, quanta: usize },
}

pub(crate) fn non_negative(value: f64, what: &'static str) -> Result<(), SchedError> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(SchedError::NegativeInput(what))
    }
}
