//! Simulation of reinforced interacting particle systems on finite graphs.
//!
//! * [`bins`]: balls-in-bins with a feedback function.
//! * [`nczr`]: creation, annihilation and jumps with power-law rates.
//! * [`ant`]: several walkers sharing signed edge-crossing memories.
//! * [`weights`]: reinforcement functions and their numerical probes.
//! * [`experiments`]: replica runners, exact path oracles and parameter sweeps.

pub mod graph;
pub mod sampling;
pub mod weights;
pub mod bins;
pub mod nczr;
pub mod ant;

/// Index of the first step counted after burn-in, `⌈burn_in · len⌉`;
/// `None` unless `burn_in ∈ [0, 1)`.
pub fn burn_in_index(len: usize, burn_in: f64) -> Option<usize> {
    (0.0..1.0)
        .contains(&burn_in)
        .then(|| ((burn_in * len as f64).ceil() as usize).min(len))
}
pub mod experiments;
