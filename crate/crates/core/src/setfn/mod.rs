//! Ground-set layout, feasibility and exact evaluation of the disaggregation
//! cost.
//!
//! The ground set contains one element per (appliance, state, tick). Elements
//! are laid out time-major: tick `t` owns the flat range `[t * N, (t + 1) * N)`
//! and appliance `i` owns `[offset(i), offset(i) + N_i)` inside each tick.
//!
//! The set cost splits as `f = g - h` where
//!
//! * `g(S) = -sum_t z_t^T diag(lambda) z_{t+1}` rewards repeated states, and
//! * `h(S) = sum_{t,r} (-(beta_r . z_t)^2 + 2 y_t^r (beta_r . z_t))`
//!
//! with `z_t` the indicator of `S` restricted to tick `t`. Both parts are
//! submodular whenever levels, connectivity weights and smoothness weights
//! are non-negative.

mod instance;
mod model;
mod submodular;

pub use instance::{ProblemInstance, SetCost};
pub use model::{
    AggregateSeries, ApplianceModel, GroundIndex, HouseholdModel, StateAssignment, DEFAULT_LAMBDA,
};
pub use submodular::{
    is_submodular_bruteforce, mask_to_indicator, QuadraticSetFunction, SubmodularityCheck,
    SubmodularityWitness, MAX_BRUTEFORCE_ELEMENTS,
};
