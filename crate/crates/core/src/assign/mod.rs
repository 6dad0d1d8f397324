//! Society spectrum assignment models and the access-code registry.
//!
//! Three ways of handing the society pool to users: per-operator shares
//! proportional to carried users, a single pooled virtual operator, and
//! unmanaged chaotic sharing with contention losses.

mod pooled;
mod registry;
mod shares;

pub use pooled::{chaotic_allocate, nested_allocate, virtual_operator_allocate, MvnoLoad};
pub use registry::{AccessRegistry, Registration, Rejection};
pub use shares::{per_operator_shares, ShareTable};
