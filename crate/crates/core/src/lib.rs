//! Delay-aware slot allocation for TDMA resource allocation blocks.
//!
//! Senders describe how much each slot of the block is worth to them with a
//! monotone [`WeightProfile`](model::WeightProfile). Allocation runs in two
//! steps:
//!
//! 1. [`rate_alloc`] picks target weighted sum rates that optimize the
//!    network objective over an approximation of the achievable set.
//! 2. [`policies`] turns the targets into a slot-by-slot allocation with a
//!    non-stationary index policy.
//!
//! Round-robin baselines, an exhaustive oracle for small blocks, and an
//! experiment harness with seeded sweeps sit alongside.

pub mod error;
pub mod experiment;
pub mod metrics;
pub mod model;
pub mod policies;
pub mod rate_alloc;
pub mod weights;

pub use error::{Error, Result};
pub use model::{
    rates_of_allocation, validate_rab, Allocation, ProfileKind, RabConfig, RateVector, SensorId,
    SensorSpec, WeightProfile,
};
pub use policies::{DaraParams, Policy, PolicyTrace};
pub use rate_alloc::Objective;
