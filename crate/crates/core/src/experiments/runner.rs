use std::io::Write;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::Serialize;

use super::config::{ExperimentConfig, Model, OutputFormat};
use super::sweep::binomial_se;
use super::ExperimentError;
use crate::ant::{self, AntParams, AntRunOptions, AntTrace};
use crate::bins::{self, BinState};
use crate::nczr::{self, NczrParams};
use crate::weights::{SignedWeightPair, WeightSpec};

/// How replicas are scheduled. `Parallel` runs on the rayon pool when the
/// `parallel` feature is enabled and falls back to `Sequential` otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Execution {
    Sequential,
    Parallel,
}

impl FromStr for Execution {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sequential" => Ok(Execution::Sequential),
            "parallel" => Ok(Execution::Parallel),
            _ => Err(format!("unknown execution `{s}` (expected sequential or parallel)")),
        }
    }
}

/// Apply `f` to `0..n`, returning results in index order whatever the schedule.
pub(crate) fn map_indices<T, F>(n: u64, execution: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    match execution {
        #[cfg(feature = "parallel")]
        Execution::Parallel => (0..n).into_par_iter().map(f).collect(),
        _ => (0..n).map(f).collect(),
    }
}

/// Random stream of replica `replica`: ChaCha8 keyed by the master seed, with
/// the replica id as stream number. Any replica can be regenerated alone.
pub fn replica_rng(master_seed: u64, replica: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(replica);
    rng
}

/// Per-experiment data built once and shared read-only by all replicas.
#[derive(Debug, Clone)]
pub enum ResolvedExperiment {
    Nczr { params: NczrParams, initial: Vec<u64> },
    Ant { params: AntParams },
    Bins { feedback: WeightSpec, initial: Vec<u64>, window: usize },
}

impl ResolvedExperiment {
    pub fn from_config(config: &ExperimentConfig) -> Result<Self, ExperimentError> {
        config.validate()?;
        Ok(match config.model {
            Model::Nczr => {
                let graph = config.load_graph()?;
                let initial = config.initial.clone().unwrap_or_else(|| vec![1; graph.vertex_count()]);
                ResolvedExperiment::Nczr { params: NczrParams::new(graph, config.p, config.q, config.r)?, initial }
            }
            Model::Ant => {
                let pair = SignedWeightPair::new(config.w1.clone(), config.w2.clone());
                ResolvedExperiment::Ant { params: AntParams::new(config.load_graph()?, config.walkers, pair)? }
            }
            Model::Bins => ResolvedExperiment::Bins {
                feedback: config.feedback.clone(),
                initial: config.initial.clone().unwrap_or_else(|| vec![1; config.bins]),
                window: config.window.unwrap_or_else(|| bins::default_window(config.horizon)),
            },
        })
    }
}

/// One replica's summary. Columns that do not apply to the model are empty.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ReplicaResult {
    pub replica: u64,
    pub creat: Option<bool>,
    pub mon: Option<bool>,
    pub mon_vertex: Option<usize>,
    pub monot: Option<bool>,
    pub loctrapp: Option<bool>,
    /// Trapping circuits, e.g. `(0 1 2);(3 4 5)`.
    pub circuits: Option<String>,
    pub monopoly: Option<bool>,
    pub monopoly_bin: Option<usize>,
    pub tau: Option<u64>,
    /// Log Radon-Nikodym weight of the longest prefix (after the stopping time
    /// for the ant walk, from time 0 for the zero-range process) that stays in
    /// the set where the auxiliary process lives.
    pub rn_log_weight: Option<f64>,
    pub rn_prefix_len: Option<u64>,
    pub d_tau_arcs: Option<usize>,
    pub particles: Option<u64>,
    pub creates: Option<u64>,
    pub annihilations: Option<u64>,
    pub jumps: Option<u64>,
    pub max_crossing: Option<i64>,
    pub min_crossing: Option<i64>,
    pub bin0_fraction: Option<f64>,
}

pub fn run_replica(
    config: &ExperimentConfig,
    resolved: &ResolvedExperiment,
    replica: u64,
) -> Result<ReplicaResult, ExperimentError> {
    run_replica_traced(config, resolved, replica).map(|(r, _)| r)
}

/// Runs one replica and also returns its trace text.
pub(crate) fn run_replica_traced(
    config: &ExperimentConfig,
    resolved: &ResolvedExperiment,
    replica: u64,
) -> Result<(ReplicaResult, String), ExperimentError> {
    let mut rng = replica_rng(config.seed, replica);
    let mut result = ReplicaResult { replica, ..Default::default() };
    let trace = match resolved {
        ResolvedExperiment::Nczr { params, initial } => {
            let run = nczr::run_nczr(params, initial, config.horizon, config.burn_in, &mut rng)?;
            let prefix_len = run.tau.map_or(run.trace.moves.len(), |t| t - 1);
            let rn = nczr::rn_derivative_nczr(params, initial, &run.trace.moves[..prefix_len])?;
            result.creat = Some(run.creat);
            result.mon = Some(run.mon.is_some());
            result.mon_vertex = run.mon;
            result.tau = run.tau.map(|t| t as u64);
            result.rn_log_weight = Some(rn);
            result.rn_prefix_len = Some(prefix_len as u64);
            result.particles = Some(run.total_particles());
            result.creates = Some(run.creates);
            result.annihilations = Some(run.annihilations);
            result.jumps = Some(run.jumps);
            run.trace.to_text()
        }
        ResolvedExperiment::Ant { params } => {
            let start = match &config.start {
                Some(start) => start.clone(),
                None => ant::random_positions(params.graph(), params.walkers(), &mut rng),
            };
            let options = AntRunOptions {
                horizon: config.horizon,
                burn_in: config.burn_in,
                track_flows: config.check_flows,
                check_flows: config.check_flows,
                stop_at_tau: false,
            };
            let run = ant::run_ant(params, start, &options, &mut rng)?;
            if let (Some(tau), Some(dtau), Some(at_tau)) = (run.tau, &run.d_tau, &run.state_at_tau) {
                let after = &run.steps[tau as usize..];
                let len = after.iter().take_while(|m| dtau.digraph().has_arc(m.from, m.to)).count();
                result.rn_log_weight = Some(ant::rn_derivative_ant(params, dtau, at_tau, &after[..len])?);
                result.rn_prefix_len = Some(len as u64);
                result.d_tau_arcs = Some(dtau.digraph().arc_count());
            }
            result.tau = run.tau;
            result.monot = Some(run.monot);
            result.loctrapp = Some(run.loctrapp.is_some());
            result.circuits = run
                .loctrapp
                .as_ref()
                .map(|cs| cs.iter().map(ToString::to_string).collect::<Vec<_>>().join(";"));
            let crossings = run.final_state.canonical_crossings();
            result.max_crossing = crossings.iter().copied().max();
            result.min_crossing = crossings.iter().copied().min();
            AntTrace { initial_positions: run.initial_positions, steps: run.steps }.to_text(params, None)?
        }
        ResolvedExperiment::Bins { feedback, initial, window } => {
            let state = BinState::new(initial.clone(), feedback.clone())?;
            let run = bins::run_bins(state, config.horizon, *window, &mut rng)?;
            result.monopoly = Some(run.monopoly.is_some());
            result.monopoly_bin = run.monopoly;
            result.bin0_fraction = Some(run.fraction(0));
            let lines: Vec<String> = run.trace.iter().map(ToString::to_string).collect();
            lines.join("\n") + "\n"
        }
    };
    Ok((result, trace))
}

/// `R` replicas under `execution`, sorted by replica id.
pub fn run_replicas_with(
    config: &ExperimentConfig,
    execution: Execution,
) -> Result<Vec<ReplicaResult>, ExperimentError> {
    let resolved = ResolvedExperiment::from_config(config)?;
    let results = map_indices(config.replicas as u64, execution, |i| run_replica(config, &resolved, i));
    let results: Vec<ReplicaResult> = results.into_iter().collect::<Result<_, _>>()?;
    if let Some(path) = &config.trace {
        std::fs::write(path, run_replica_traced(config, &resolved, 0)?.1)?;
    }
    Ok(results)
}

pub fn run_replicas(config: &ExperimentConfig) -> Result<Vec<ReplicaResult>, ExperimentError> {
    run_replicas_with(config, config.execution)
}

pub fn write_results<W: Write>(results: &[ReplicaResult], format: OutputFormat, out: W) -> Result<(), ExperimentError> {
    match format {
        OutputFormat::Csv => {
            let mut writer = csv::Writer::from_writer(out);
            for r in results {
                writer.serialize(r)?;
            }
            writer.flush()?;
        }
        OutputFormat::Json => {
            let mut out = out;
            serde_json::to_writer_pretty(&mut out, results)?;
            writeln!(out)?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventSummary {
    pub event: String,
    pub count: usize,
    pub replicas: usize,
    pub freq: f64,
    pub se: f64,
}

/// Frequency and binomial standard error of every event flag present.
pub fn summarize(results: &[ReplicaResult]) -> Vec<EventSummary> {
    type Flag = fn(&ReplicaResult) -> Option<bool>;
    let flags: [(&str, Flag); 6] = [
        ("creat", |r| r.creat),
        ("mon", |r| r.mon),
        ("tau", |r| r.monot.map(|_| r.tau.is_some())),
        ("monot", |r| r.monot),
        ("loctrapp", |r| r.loctrapp),
        ("monopoly", |r| r.monopoly),
    ];
    flags
        .iter()
        .filter_map(|(name, flag)| {
            let values: Vec<bool> = results.iter().filter_map(flag).collect();
            if values.is_empty() {
                return None;
            }
            let count = values.iter().filter(|&&b| b).count();
            let freq = count as f64 / values.len() as f64;
            Some(EventSummary {
                event: name.to_string(),
                count,
                replicas: values.len(),
                freq,
                se: binomial_se(freq, values.len()),
            })
        })
        .collect()
}

pub fn write_summary<W: Write>(summary: &[EventSummary], format: OutputFormat, out: W) -> Result<(), ExperimentError> {
    match format {
        OutputFormat::Csv => {
            let mut writer = csv::Writer::from_writer(out);
            for row in summary {
                writer.serialize(row)?;
            }
            writer.flush()?;
        }
        OutputFormat::Json => {
            let mut out = out;
            serde_json::to_writer_pretty(&mut out, summary)?;
            writeln!(out)?;
        }
    }
    Ok(())
}
