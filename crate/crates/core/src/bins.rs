//! Balls-in-bins with feedback and the terminal-window monopoly proxy.

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::sampling::{probabilities_from_log_weights, sample_log_weights};
use crate::weights::{WeightError, WeightSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BinsError {
    #[error("at least one bin is required")]
    NoBins,
    #[error(transparent)]
    Weight(#[from] WeightError),
}

fn log_weights(counts: &[u64], feedback: &WeightSpec) -> Result<Vec<f64>, WeightError> {
    counts.iter().map(|&k| feedback.ln_eval(k)).collect()
}

/// Probability of each bin receiving the next ball: `f(η_v)/Σ_w f(η_w)`.
pub fn bin_probabilities(counts: &[u64], feedback: &WeightSpec) -> Result<Vec<f64>, WeightError> {
    Ok(probabilities_from_log_weights(&log_weights(counts, feedback)?))
}

/// Draw the bin receiving the next ball. `counts` must be non-empty.
pub fn sample_bin<R: Rng + ?Sized>(counts: &[u64], feedback: &WeightSpec, rng: &mut R) -> Result<usize, WeightError> {
    let logs = log_weights(counts, feedback)?;
    Ok(sample_log_weights(&logs, rng).expect("feedback weights are strictly positive"))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinState {
    counts: Vec<u64>,
    #[serde(skip)]
    feedback: WeightSpec,
    step_count: u64,
}

impl BinState {
    pub fn new(counts: Vec<u64>, feedback: WeightSpec) -> Result<Self, BinsError> {
        if counts.is_empty() {
            return Err(BinsError::NoBins);
        }
        feedback.validate()?;
        Ok(BinState { counts, feedback, step_count: 0 })
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn feedback(&self) -> &WeightSpec {
        &self.feedback
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn probabilities(&self) -> Result<Vec<f64>, BinsError> {
        Ok(bin_probabilities(&self.counts, &self.feedback)?)
    }

    /// Add one ball; returns the chosen bin.
    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<usize, BinsError> {
        let bin = sample_bin(&self.counts, &self.feedback, rng)?;
        self.counts[bin] += 1;
        self.step_count += 1;
        Ok(bin)
    }
}

/// `Some(b)` iff the last `window` choices are all `b`. A window of 0 or
/// longer than the trace never fires.
pub fn detect_monopoly(trace: &[usize], window: usize) -> Option<usize> {
    if window == 0 || window > trace.len() {
        return None;
    }
    let tail = &trace[trace.len() - window..];
    let first = tail[0];
    tail.iter().all(|&b| b == first).then_some(first)
}

/// `max(1000, horizon / 10)`.
pub fn default_window(horizon: usize) -> usize {
    (horizon / 10).max(1000)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinsRun {
    pub final_counts: Vec<u64>,
    pub trace: Vec<usize>,
    pub monopoly: Option<usize>,
}

impl BinsRun {
    /// Fraction of all balls sitting in `bin` at the end.
    pub fn fraction(&self, bin: usize) -> f64 {
        let total: u64 = self.final_counts.iter().sum();
        self.final_counts[bin] as f64 / total as f64
    }
}

pub fn run_bins<R: Rng + ?Sized>(
    mut state: BinState,
    horizon: usize,
    window: usize,
    rng: &mut R,
) -> Result<BinsRun, BinsError> {
    let mut trace = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        trace.push(state.step(rng)?);
    }
    let monopoly = detect_monopoly(&trace, window);
    Ok(BinsRun { final_counts: state.counts, trace, monopoly })
}
