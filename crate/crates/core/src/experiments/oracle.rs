//! Exact trajectory distributions by enumeration, and their comparison with
//! Monte Carlo samples drawn through the ordinary step functions.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::runner::{map_indices, replica_rng, Execution};
use super::ExperimentError;
use crate::ant::{self, AntMove, AntParams, AntState, DTauGraph};
use crate::bins::{bin_probabilities, BinState};
use crate::nczr::{self, NczrMove, NczrParams};
use crate::weights::WeightSpec;

/// Largest number of trajectories the oracle will enumerate.
pub const PATH_LIMIT: usize = 1_000_000;

/// A Markov kernel that can list its transitions exactly.
/// `(label, probability, next state)` for every move with positive probability.
pub type Transitions<K> = Vec<(<K as ExactKernel>::Label, f64, <K as ExactKernel>::State)>;

pub trait ExactKernel {
    type State: Clone;
    type Label: Clone + Ord + fmt::Debug + fmt::Display;

    /// Every transition with positive probability, as `(label, probability,
    /// next state)`. Labels are distinct within one call.
    fn transitions(&self, state: &Self::State) -> Result<Transitions<Self>, ExperimentError>;
}

/// Trajectory (sequence of transition labels) to exact probability.
pub type PathTable<L> = BTreeMap<Vec<L>, f64>;

pub fn exact_path_oracle<K: ExactKernel>(
    kernel: &K,
    start: &K::State,
    horizon: usize,
) -> Result<PathTable<K::Label>, ExperimentError> {
    let branching = kernel.transitions(start)?.len().max(1) as f64;
    let estimated = branching.powi(horizon.min(i32::MAX as usize) as i32);
    if estimated > PATH_LIMIT as f64 {
        return Err(ExperimentError::TooManyPaths { estimated, limit: PATH_LIMIT });
    }
    let mut level: Vec<(Vec<K::Label>, f64, K::State)> = vec![(Vec::new(), 1.0, start.clone())];
    for depth in 0..horizon {
        let mut next = Vec::with_capacity(level.len());
        for (path, prob, state) in &level {
            for (label, p, s) in kernel.transitions(state)? {
                let mut extended = Vec::with_capacity(horizon);
                extended.extend_from_slice(path);
                extended.push(label);
                next.push((extended, prob * p, s));
            }
            if next.len() > PATH_LIMIT {
                let remaining = (horizon - depth - 1) as i32;
                let estimated = next.len() as f64 * branching.powi(remaining);
                return Err(ExperimentError::TooManyPaths { estimated, limit: PATH_LIMIT });
            }
        }
        level = next;
    }
    Ok(level.into_iter().map(|(path, prob, _)| (path, prob)).collect())
}

/// The zero-range process itself.
pub struct NczrKernel<'a>(pub &'a NczrParams);

impl ExactKernel for NczrKernel<'_> {
    type State = Vec<u64>;
    type Label = NczrMove;

    fn transitions(&self, eta: &Vec<u64>) -> Result<Vec<(NczrMove, f64, Vec<u64>)>, ExperimentError> {
        let weights = nczr::move_weights(self.0, eta)?;
        weights
            .weights
            .iter()
            .map(|&(mv, w)| {
                let mut next = eta.clone();
                nczr::apply_move(self.0.graph(), &mut next, mv)?;
                Ok((mv, w / weights.normalizer, next))
            })
            .collect()
    }
}

/// The auxiliary process that only creates particles.
pub struct NczrAuxKernel<'a>(pub &'a NczrParams);

impl ExactKernel for NczrAuxKernel<'_> {
    type State = Vec<u64>;
    type Label = NczrMove;

    fn transitions(&self, eta: &Vec<u64>) -> Result<Vec<(NczrMove, f64, Vec<u64>)>, ExperimentError> {
        let probs = nczr::k_aux_probabilities(self.0, eta)?;
        Ok(probs
            .into_iter()
            .enumerate()
            .filter(|(_, p)| *p > 0.0)
            .map(|(v, p)| {
                let mut next = eta.clone();
                next[v] += 1;
                (NczrMove::Create(v), p, next)
            })
            .collect())
    }
}

/// The ant walk, including the uniform `1/N` walker choice.
pub struct AntKernel<'a>(pub &'a AntParams);

impl ExactKernel for AntKernel<'_> {
    type State = AntState;
    type Label = AntMove;

    fn transitions(&self, state: &AntState) -> Result<Vec<(AntMove, f64, AntState)>, ExperimentError> {
        let n = self.0.walkers() as f64;
        let mut out = Vec::new();
        for (walker, &from) in state.positions().iter().enumerate() {
            for (to, p) in ant::neighbor_probabilities(self.0, state, from)? {
                let mv = AntMove { walker, from, to };
                let mut next = state.clone();
                ant::apply_ant_move(self.0, &mut next, mv)?;
                out.push((mv, p / n, next));
            }
        }
        Ok(out)
    }
}

/// The auxiliary walk restricted to the arcs of `D_τ`.
pub struct AntYKernel<'a> {
    pub params: &'a AntParams,
    pub dtau: &'a DTauGraph,
}

impl ExactKernel for AntYKernel<'_> {
    type State = AntState;
    type Label = AntMove;

    fn transitions(&self, state: &AntState) -> Result<Vec<(AntMove, f64, AntState)>, ExperimentError> {
        let n = self.params.walkers() as f64;
        let mut out = Vec::new();
        for (walker, &from) in state.positions().iter().enumerate() {
            for (to, p) in ant::y_arc_probabilities(self.params, self.dtau, state, from)? {
                let mv = AntMove { walker, from, to };
                let mut next = state.clone();
                ant::apply_ant_move(self.params, &mut next, mv)?;
                out.push((mv, p / n, next));
            }
        }
        Ok(out)
    }
}

/// Balls-in-bins; labels are bin indices.
pub struct BinsKernel<'a>(pub &'a WeightSpec);

impl ExactKernel for BinsKernel<'_> {
    type State = Vec<u64>;
    type Label = usize;

    fn transitions(&self, counts: &Vec<u64>) -> Result<Vec<(usize, f64, Vec<u64>)>, ExperimentError> {
        let probs = bin_probabilities(counts, self.0)?;
        Ok(probs
            .into_iter()
            .enumerate()
            .map(|(b, p)| {
                let mut next = counts.clone();
                next[b] += 1;
                (b, p, next)
            })
            .collect())
    }
}

fn collect_paths<L: Send>(
    samples: usize,
    seed: u64,
    execution: Execution,
    draw: impl Fn(&mut rand_chacha::ChaCha8Rng) -> Result<Vec<L>, ExperimentError> + Sync + Send,
) -> Result<Vec<Vec<L>>, ExperimentError> {
    map_indices(samples as u64, execution, |i| draw(&mut replica_rng(seed, i))).into_iter().collect()
}

pub fn mc_nczr_paths(
    params: &NczrParams,
    eta0: &[u64],
    horizon: usize,
    samples: usize,
    seed: u64,
    execution: Execution,
) -> Result<Vec<Vec<NczrMove>>, ExperimentError> {
    collect_paths(samples, seed, execution, |rng| {
        let mut eta = eta0.to_vec();
        (0..horizon).map(|_| Ok(nczr::nczr_step(params, &mut eta, rng)?)).collect()
    })
}

pub fn mc_nczr_aux_paths(
    params: &NczrParams,
    eta0: &[u64],
    horizon: usize,
    samples: usize,
    seed: u64,
    execution: Execution,
) -> Result<Vec<Vec<NczrMove>>, ExperimentError> {
    collect_paths(samples, seed, execution, |rng| {
        let mut eta = eta0.to_vec();
        (0..horizon).map(|_| Ok(nczr::k_aux_step(params, &mut eta, rng)?)).collect()
    })
}

pub fn mc_ant_paths(
    params: &AntParams,
    start: &AntState,
    horizon: usize,
    samples: usize,
    seed: u64,
    execution: Execution,
) -> Result<Vec<Vec<AntMove>>, ExperimentError> {
    collect_paths(samples, seed, execution, |rng| {
        let mut state = start.clone();
        (0..horizon).map(|_| Ok(ant::ant_step(params, &mut state, rng)?)).collect()
    })
}

pub fn mc_y_paths(
    params: &AntParams,
    dtau: &DTauGraph,
    start: &AntState,
    horizon: usize,
    samples: usize,
    seed: u64,
    execution: Execution,
) -> Result<Vec<Vec<AntMove>>, ExperimentError> {
    collect_paths(samples, seed, execution, |rng| {
        let mut state = start.clone();
        (0..horizon).map(|_| Ok(ant::y_step(params, dtau, &mut state, rng)?)).collect()
    })
}

pub fn mc_bins_paths(
    feedback: &WeightSpec,
    initial: &[u64],
    horizon: usize,
    samples: usize,
    seed: u64,
    execution: Execution,
) -> Result<Vec<Vec<usize>>, ExperimentError> {
    collect_paths(samples, seed, execution, |rng| {
        let mut state = BinState::new(initial.to_vec(), feedback.clone())?;
        (0..horizon).map(|_| Ok(state.step(rng)?)).collect()
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub samples: usize,
    pub trajectories: usize,
    /// Largest `|observed - n p| / sqrt(n p (1 - p))` over all trajectories;
    /// infinite if a sample falls outside the oracle's support.
    pub max_abs_z: f64,
    pub worst_trajectory: String,
    /// Sampled trajectories the oracle gives probability zero.
    pub unexpected: usize,
    /// Pearson statistic, with cells of expected count below 5 pooled.
    pub chi_square: f64,
    pub dof: usize,
    pub p_value: f64,
    pub probability_sum: f64,
    pub pass: bool,
}

impl OracleReport {
    pub const MAX_Z: f64 = 4.0;
    pub const MIN_P_VALUE: f64 = 1e-4;
}

fn describe<L: fmt::Display>(path: &[L]) -> String {
    path.iter().map(ToString::to_string).collect::<Vec<_>>().join(";")
}

/// Per-trajectory z-scores and a pooled chi-square test of `samples` against
/// the exact table. Passes when `max |z| < 4` and the p-value exceeds `1e-4`.
pub fn compare_oracle_mc<L: Ord + Clone + fmt::Display>(
    table: &PathTable<L>,
    samples: &[Vec<L>],
) -> Result<OracleReport, ExperimentError> {
    if samples.is_empty() {
        return Err(ExperimentError::NoSamples);
    }
    let n = samples.len() as f64;
    let mut counts: BTreeMap<&[L], usize> = BTreeMap::new();
    let mut unexpected = 0;
    let mut worst_trajectory = String::new();
    let mut max_abs_z = 0.0f64;
    for s in samples {
        if table.contains_key(s) {
            *counts.entry(s.as_slice()).or_default() += 1;
        } else {
            if unexpected == 0 {
                worst_trajectory = describe(s);
            }
            unexpected += 1;
            max_abs_z = f64::INFINITY;
        }
    }
    let mut chi_square = 0.0;
    let mut cells: usize = 0;
    let (mut pooled_obs, mut pooled_exp) = (0.0, 0.0);
    for (path, &p) in table {
        let observed = counts.get(path.as_slice()).copied().unwrap_or(0) as f64;
        let expected = n * p;
        let var = expected * (1.0 - p);
        let z = if var > 0.0 {
            (observed - expected) / var.sqrt()
        } else if observed == expected {
            0.0
        } else {
            f64::INFINITY
        };
        if z.abs() > max_abs_z {
            max_abs_z = z.abs();
            worst_trajectory = describe(path);
        }
        if expected >= 5.0 {
            chi_square += (observed - expected).powi(2) / expected;
            cells += 1;
        } else {
            pooled_obs += observed;
            pooled_exp += expected;
        }
    }
    if pooled_exp > 0.0 {
        chi_square += (pooled_obs - pooled_exp).powi(2) / pooled_exp;
        cells += 1;
    }
    let dof = cells.saturating_sub(1);
    let p_value = if unexpected > 0 {
        0.0
    } else if dof == 0 {
        1.0
    } else {
        ChiSquared::new(dof as f64).expect("positive degrees of freedom").sf(chi_square)
    };
    let pass = max_abs_z < OracleReport::MAX_Z && p_value > OracleReport::MIN_P_VALUE;
    Ok(OracleReport {
        samples: samples.len(),
        trajectories: table.len(),
        max_abs_z,
        worst_trajectory,
        unexpected,
        chi_square,
        dof,
        p_value,
        probability_sum: table.values().sum(),
        pass,
    })
}
