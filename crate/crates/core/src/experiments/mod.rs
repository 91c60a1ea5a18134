//! Replica runners, exact path oracles, sweeps and their I/O.

mod config;
mod oracle;
mod runner;
mod sweep;

pub use config::{ExperimentConfig, Model, OutputFormat};
pub use oracle::{
    compare_oracle_mc, exact_path_oracle, mc_ant_paths, mc_bins_paths, mc_nczr_aux_paths, mc_nczr_paths,
    mc_y_paths, AntKernel, AntYKernel, BinsKernel, ExactKernel, NczrAuxKernel, NczrKernel, OracleReport,
    PathTable, Transitions, PATH_LIMIT,
};
pub use runner::{
    replica_rng, run_replica, run_replicas, run_replicas_with, summarize, write_results, write_summary,
    EventSummary, Execution, ReplicaResult, ResolvedExperiment,
};
pub use sweep::{binomial_se, Coordinates, non_increasing_within, phase_sweep, write_sweep, SweepGrid, SweepRow};

use thiserror::Error;

use crate::ant::AntError;
use crate::bins::BinsError;
use crate::graph::GraphError;
use crate::nczr::NczrError;
use crate::weights::WeightError;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),
    #[error("invariant violation: {0}")]
    Invariant(String),
    #[error("path enumeration would need about {estimated} trajectories (limit {limit})")]
    TooManyPaths { estimated: f64, limit: usize },
    #[error("no Monte Carlo samples to compare against")]
    NoSamples,
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Weight(#[from] WeightError),
    #[error(transparent)]
    Bins(#[from] BinsError),
    #[error(transparent)]
    Nczr(#[from] NczrError),
    #[error(transparent)]
    Ant(AntError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl From<AntError> for ExperimentError {
    fn from(err: AntError) -> Self {
        match err {
            AntError::InvariantViolation(msg) => ExperimentError::Invariant(msg),
            other => ExperimentError::Ant(other),
        }
    }
}

impl ExperimentError {
    /// Process exit code: 3 for invariant violations found during a run,
    /// 2 for every other failure (bad input, i/o).
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Invariant(_) => 3,
            _ => 2,
        }
    }
}
