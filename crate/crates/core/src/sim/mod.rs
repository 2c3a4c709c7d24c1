//! Branching random walk killed above a barrier.
//!
//! Every particle carries a 64-bit label; its offspring are drawn from a
//! stream keyed by that label, and each child's label is derived from the
//! parent's label and the child's index. The whole (unkilled) tree is
//! therefore a fixed function of the run key, and barriers only prune it.
//! This gives pathwise coupling across barriers under a shared seed.

mod barrier;
mod census;
mod classify;
mod fit;
mod population;
mod survival;

pub use barrier::Barrier;
pub use census::{two_barrier_census, CensusConfig, CensusRecord};
pub use classify::{classify_general_barrier, Classification, Verdict, DEFAULT_N_MIN};
pub use fit::{extinction_slope_fit, SlopeFit};
pub use population::{simulate, simulate_with, Particle, PopulationState};
pub use survival::{
    geometric_milestones, survival_curve, survival_probability, SplittingConfig, SurvivalMethod, SurvivalPoint,
    DEFAULT_SURVIVAL_CAP, MIN_NAIVE_HITS, MIN_RUNS,
};
