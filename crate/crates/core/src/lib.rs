//! Branching random walks below a cube-root barrier.
//!
//! The crate covers the analytic side (critical constants, the reduction of a
//! general reproduction law to the critical case, the profile ODE and tube
//! probabilities) and the Monte Carlo side (barrier-killed populations,
//! survival estimation, censuses and empirical classification).

// `!(x > 0.0)` rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod constants;
pub mod error;
pub mod estimate;
pub mod exec;
pub mod laws;
pub mod numeric;
pub mod profile_ode;
pub mod reduction;
pub mod rng;
pub mod sim;
pub mod tube;

pub use error::{Error, Result};
pub use exec::Execution;
