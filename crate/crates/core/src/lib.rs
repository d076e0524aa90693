//! Phase-aware energy disaggregation.
//!
//! Per-appliance states are recovered from per-line aggregate readings by
//! minimizing a difference of two submodular set functions under a partition
//! constraint (exactly one state per appliance per tick). The minimizer is a
//! discrete majorization-minimization loop built on closed-form modular
//! bounds; exact oracles exist for small instances.

pub mod bounds;
pub mod dataio;
pub mod error;
pub mod metrics;
pub mod oracle;
pub mod registry;
pub mod setfn;
pub mod solver;
pub mod training;
pub mod verify;

pub use error::{Error, Result};
pub use registry::{Minimizer, MinimizerRegistry};
pub use setfn::{AggregateSeries, ApplianceModel, HouseholdModel, ProblemInstance, StateAssignment};
pub use solver::{solve, SolverOptions, SolveTrace, StopReason};
