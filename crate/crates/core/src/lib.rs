//! Congestion-aware, remoteness-weighted airport slot allocation.
//!
//! Movements (landings and take-offs) report a valuation for every slot. The
//! mechanism allocates slots to maximize the remoteness-weighted sum of
//! valuations minus a per-movement congestion charge above each slot's
//! threshold, and charges marginal-contribution payments that make truthful
//! reporting a dominant strategy.
//!
//! * [`model`]: domain types and instance validation.
//! * [`rcof`]: remote city opportunity factor.
//! * [`allocator`]: exact allocation via b-matching, plus the enumeration oracle.
//! * [`payments`]: payments and utilities.
//! * [`baselines`]: fixed and displacement-minimizing allocations, comparisons.
//! * [`scenario`]: scenario files, synthetic data and result output.
//! * [`verify`]: randomized property checks of the mechanism's guarantees.

pub mod allocator;
pub mod baselines;
mod flow;
pub mod model;
pub mod payments;
pub mod rcof;
pub mod scenario;
pub mod verify;

pub use allocator::{solve_allocation, AllocError};
pub use model::{
    validate_instance, Allocation, Instance, MechanismParams, MechanismResult, RawInstance,
};
pub use payments::{all_payments, run_mechanism};
