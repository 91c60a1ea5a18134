use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use reinforced::ant::AntState;
use reinforced::experiments::{
    compare_oracle_mc, exact_path_oracle, mc_ant_paths, mc_bins_paths, mc_nczr_aux_paths, mc_nczr_paths,
    run_replicas, summarize, write_results, write_summary, write_sweep, phase_sweep, AntKernel, BinsKernel,
    ExactKernel, ExperimentConfig, ExperimentError, NczrAuxKernel, NczrKernel, OutputFormat, PathTable,
    ResolvedExperiment, SweepGrid,
};
use reinforced::graph::{builtin, BUILTIN_GRAPHS};
use reinforced::weights::{
    adversarial_phi_search, known_regime, probe_class_membership, probe_shift_condition, series_diagnostic,
    ClassSide, SeriesTerm, SignedWeightPair, WeightSpec,
};

/// Simulate reinforced interacting-particle systems.
#[derive(Debug, Parser)]
#[command(name = "reinforced", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run Monte Carlo replicas and write one row per replica.
    Run {
        #[command(flatten)]
        experiment: ExperimentArgs,
        /// Write event frequencies instead of per-replica rows.
        #[arg(long)]
        summary: bool,
    },
    /// Event frequencies over a parameter grid.
    Sweep {
        /// Grid file: experiment keys plus p_values, q_values, r_values, family, family1, family2.
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        format: Option<String>,
    },
    /// Exact path probabilities by enumeration, optionally checked against Monte Carlo.
    Oracle {
        #[command(flatten)]
        experiment: ExperimentArgs,
        /// Use the auxiliary creation-only process (zero-range model only).
        #[arg(long)]
        aux: bool,
        /// Compare against this many Monte Carlo paths and print the report.
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Numerical probes of reinforcement functions.
    Probe {
        #[command(subcommand)]
        probe: Probe,
    },
    /// List the built-in graphs.
    Graphs,
}

#[derive(Debug, Subcommand)]
enum Probe {
    /// Search for a constant C with Σ f(a_j) ≤ C f(Σ a_j) (or ≥).
    Class {
        #[arg(long)]
        weight: WeightSpec,
        #[arg(long, value_enum, default_value = "at-most")]
        side: Side,
        #[arg(long, default_value_t = 2)]
        arity: usize,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Largest ratio f(n + j)/f(n) for |j| ≤ N.
    Shift {
        #[arg(long)]
        weight: WeightSpec,
        #[arg(long, default_value_t = 1)]
        walkers: usize,
        #[arg(long, default_value_t = 100_000)]
        kmax: u64,
    },
    /// Partial sums and tail slope of Σ 1/W or Σ W2/W1.
    Series {
        /// Denominator (or the only weight for Σ 1/W).
        #[arg(long)]
        w1: WeightSpec,
        /// Numerator; omitted means Σ 1/W1.
        #[arg(long)]
        w2: Option<WeightSpec>,
        #[arg(long, default_value_t = 1_000_000)]
        n: u64,
    },
    /// Adversarial search for Φ-sequences maximizing the Υ⁻/Υ⁺ sum.
    Phi {
        #[arg(long)]
        w1: WeightSpec,
        #[arg(long)]
        w2: WeightSpec,
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = 1)]
        walkers: usize,
        #[arg(long, default_value_t = 1000)]
        horizon: usize,
        #[arg(long, default_value_t = 50)]
        restarts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Largest vertex degree, used for the known-regime flag.
        #[arg(long)]
        max_degree: Option<usize>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Side {
    AtMost,
    AtLeast,
}

/// Config file plus per-key overrides. Values use the config file syntax.
#[derive(Debug, Args)]
struct ExperimentArgs {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<String>,
    /// Built-in graph name or edge-list file.
    #[arg(long)]
    graph: Option<String>,
    #[arg(long)]
    p: Option<String>,
    #[arg(long)]
    q: Option<String>,
    #[arg(long)]
    r: Option<String>,
    #[arg(long)]
    w1: Option<String>,
    #[arg(long)]
    w2: Option<String>,
    #[arg(long)]
    feedback: Option<String>,
    #[arg(long)]
    bins: Option<String>,
    #[arg(long)]
    walkers: Option<String>,
    /// Comma-separated walker positions.
    #[arg(long)]
    start: Option<String>,
    /// Comma-separated initial counts.
    #[arg(long)]
    initial: Option<String>,
    #[arg(long)]
    horizon: Option<String>,
    #[arg(long)]
    replicas: Option<String>,
    #[arg(long)]
    burn_in: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    window: Option<String>,
    #[arg(long)]
    check_flows: bool,
    /// sequential or parallel
    #[arg(long)]
    execution: Option<String>,
    #[arg(long)]
    out: Option<String>,
    /// csv or json
    #[arg(long)]
    format: Option<String>,
    /// Write the trace of replica 0 here.
    #[arg(long)]
    trace: Option<String>,
}

impl ExperimentArgs {
    fn resolve(&self) -> Result<ExperimentConfig, ExperimentError> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        let overrides = [
            ("model", &self.model),
            ("graph", &self.graph),
            ("p", &self.p),
            ("q", &self.q),
            ("r", &self.r),
            ("w1", &self.w1),
            ("w2", &self.w2),
            ("feedback", &self.feedback),
            ("bins", &self.bins),
            ("walkers", &self.walkers),
            ("start", &self.start),
            ("initial", &self.initial),
            ("horizon", &self.horizon),
            ("replicas", &self.replicas),
            ("burn_in", &self.burn_in),
            ("seed", &self.seed),
            ("window", &self.window),
            ("execution", &self.execution),
            ("out", &self.out),
            ("format", &self.format),
            ("trace", &self.trace),
        ];
        let mut problems = Vec::new();
        for (key, value) in overrides {
            if let Some(value) = value {
                if let Err(e) = config.set(key, value) {
                    problems.push(format!("--{}: {e}", key.replace('_', "-")));
                }
            }
        }
        if self.check_flows {
            config.check_flows = true;
        }
        if !problems.is_empty() {
            return Err(ExperimentError::Validation(problems));
        }
        config.validate()?;
        Ok(config)
    }
}

fn output(out: Option<&Path>) -> Result<Box<dyn Write>, ExperimentError> {
    Ok(match out {
        Some(path) => Box::new(File::create(path)?),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_json<T: Serialize + ?Sized>(value: &T, out: Option<&Path>) -> Result<(), ExperimentError> {
    let mut out = output(out)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

#[derive(Serialize)]
struct TableRow {
    trajectory: String,
    probability: f64,
}

fn write_table<L: std::fmt::Display>(
    table: &PathTable<L>,
    format: OutputFormat,
    out: Option<&Path>,
) -> Result<(), ExperimentError> {
    let rows: Vec<TableRow> = table
        .iter()
        .map(|(path, &probability)| TableRow {
            trajectory: path.iter().map(ToString::to_string).collect::<Vec<_>>().join(";"),
            probability,
        })
        .collect();
    match format {
        OutputFormat::Csv => {
            let mut writer = csv::Writer::from_writer(output(out)?);
            for row in &rows {
                writer.serialize(row)?;
            }
            writer.flush()?;
            Ok(())
        }
        OutputFormat::Json => write_json(&rows, out),
    }
}

fn oracle_or_compare<K: ExactKernel>(
    kernel: &K,
    start: &K::State,
    config: &ExperimentConfig,
    mc: Option<Vec<Vec<K::Label>>>,
) -> Result<(), ExperimentError> {
    let table = exact_path_oracle(kernel, start, config.horizon)?;
    match mc {
        None => write_table(&table, config.format, config.out.as_deref()),
        Some(samples) => write_json(&compare_oracle_mc(&table, &samples)?, config.out.as_deref()),
    }
}

fn oracle(config: &ExperimentConfig, aux: bool, samples: Option<usize>) -> Result<(), ExperimentError> {
    let (h, seed, exec) = (config.horizon, config.seed, config.execution);
    match ResolvedExperiment::from_config(config)? {
        ResolvedExperiment::Nczr { params, initial } if aux => {
            let mc = samples.map(|n| mc_nczr_aux_paths(&params, &initial, h, n, seed, exec)).transpose()?;
            oracle_or_compare(&NczrAuxKernel(&params), &initial, config, mc)
        }
        ResolvedExperiment::Nczr { params, initial } => {
            let mc = samples.map(|n| mc_nczr_paths(&params, &initial, h, n, seed, exec)).transpose()?;
            oracle_or_compare(&NczrKernel(&params), &initial, config, mc)
        }
        _ if aux => Err(ExperimentError::Validation(vec!["--aux: only for the nczr model".into()])),
        ResolvedExperiment::Ant { params } => {
            let positions = config.start.clone().unwrap_or_else(|| vec![0; params.walkers()]);
            let start = AntState::new(&params, positions, false)?;
            let mc = samples.map(|n| mc_ant_paths(&params, &start, h, n, seed, exec)).transpose()?;
            oracle_or_compare(&AntKernel(&params), &start, config, mc)
        }
        ResolvedExperiment::Bins { feedback, initial, .. } => {
            let mc = samples.map(|n| mc_bins_paths(&feedback, &initial, h, n, seed, exec)).transpose()?;
            oracle_or_compare(&BinsKernel(&feedback), &initial, config, mc)
        }
    }
}

fn probe(probe: Probe) -> Result<(), ExperimentError> {
    match probe {
        Probe::Class { weight, side, arity, trials, seed } => {
            let side = match side {
                Side::AtMost => ClassSide::AtMost,
                Side::AtLeast => ClassSide::AtLeast,
            };
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let result = probe_class_membership(&weight, side, arity, trials, &mut rng)?;
            #[derive(Serialize)]
            struct Out<T> {
                #[serde(flatten)]
                probe: T,
                suggests_counterexample: bool,
            }
            let suggests_counterexample = result.suggests_counterexample();
            write_json(&Out { probe: result, suggests_counterexample }, None)
        }
        Probe::Shift { weight, walkers, kmax } => write_json(&probe_shift_condition(&weight, walkers, kmax)?, None),
        Probe::Series { w1, w2, n } => {
            let term = match w2 {
                Some(w2) => SeriesTerm::Ratio { numerator: w2, denominator: w1 },
                None => SeriesTerm::Inverse(w1),
            };
            write_json(&series_diagnostic(&term, n)?, None)
        }
        Probe::Phi { w1, w2, dim, walkers, horizon, restarts, seed, max_degree } => {
            let pair = SignedWeightPair::new(w1, w2);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let search = adversarial_phi_search(&pair, dim, walkers, horizon, restarts, &mut rng)?;
            #[derive(Serialize)]
            struct Out<T, R> {
                #[serde(flatten)]
                search: T,
                known_regime: Option<R>,
            }
            let known_regime = max_degree.map(|d| known_regime(&pair, d));
            write_json(&Out { search, known_regime }, None)
        }
    }
}

fn graphs() -> Result<(), ExperimentError> {
    let mut out = io::stdout().lock();
    for (name, description) in BUILTIN_GRAPHS {
        let g = builtin(name)?;
        writeln!(out, "{name:<22} {:>2} vertices {:>2} edges  {description}", g.vertex_count(), g.edge_count())?;
    }
    Ok(())
}

fn execute(command: Command) -> Result<(), ExperimentError> {
    match command {
        Command::Run { experiment, summary } => {
            let config = experiment.resolve()?;
            let results = run_replicas(&config)?;
            let out = output(config.out.as_deref())?;
            if summary {
                write_summary(&summarize(&results), config.format, out)
            } else {
                write_results(&results, config.format, out)
            }
        }
        Command::Sweep { grid, seed, out, format } => {
            let mut grid = SweepGrid::from_file(&grid)?;
            if let Some(seed) = seed {
                grid.base.seed = seed;
            }
            let format = match format {
                Some(f) => f.parse().map_err(|e: String| ExperimentError::Validation(vec![format!("--format: {e}")]))?,
                None => grid.base.format,
            };
            let out = out.or_else(|| grid.base.out.clone());
            write_sweep(&phase_sweep(&grid)?, format, output(out.as_deref())?)
        }
        Command::Oracle { experiment, aux, samples } => oracle(&experiment.resolve()?, aux, samples),
        Command::Probe { probe: p } => probe(p),
        Command::Graphs => graphs(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
