//! Budget- and coverage-constrained treatment allocation.
//!
//! Units carry a value `v` and a strictly positive cost `w`. A policy treats a
//! subset whose total cost stays within a budget `W` and whose size reaches a
//! coverage floor `K`. The crate provides an exact branch-and-bound solver, the
//! LP relaxation with its dual prices, a Lagrangian greedy heuristic (GLC),
//! ratio-ranking rules, misallocation diagnostics and the Monte Carlo harnesses
//! built on them.

pub mod analysis;
pub mod error;
pub mod exact;
pub mod experiments;
pub mod glc;
pub mod lp;
pub mod model;
pub mod rc;
pub mod registry;

pub use error::{ExperimentError, InstanceError, SolveError};
pub use model::{
    Allocation, BinaryAllocation, DualPrices, FractionalAllocation, ProblemInstance, SolveReport,
};
pub use registry::{Registry, Solver};
