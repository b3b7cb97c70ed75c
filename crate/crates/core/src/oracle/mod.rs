//! Ground truth for the solver: a closed-form rendezvous and a lattice
//! brute force.

mod brute;
mod example1;

pub use brute::{brute_force_value, BruteForceResult, LatticeSpec, BRUTE_FORCE_LIMIT};
pub use example1::{alpha_bar, example1_optimum, example1_scenario, Example1Solution};
