use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use super::runner::Execution;
use super::ExperimentError;
use crate::graph::{self, Graph, Vertex};
use crate::weights::WeightSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Model {
    Nczr,
    Ant,
    Bins,
}

impl FromStr for Model {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "nczr" => Ok(Model::Nczr),
            "ant" => Ok(Model::Ant),
            "bins" => Ok(Model::Bins),
            _ => Err(format!("unknown model `{s}` (expected nczr, ant or bins)")),
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Model::Nczr => "nczr",
            Model::Ant => "ant",
            Model::Bins => "bins",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            _ => Err(format!("unknown format `{s}` (expected csv or json)")),
        }
    }
}

/// Everything that determines an experiment. Read from flat `key = value`
/// text; see [`ExperimentConfig::KEYS`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub model: Model,
    /// Built-in graph name or path to an edge-list file.
    pub graph: String,
    pub p: f64,
    pub q: f64,
    pub r: f64,
    pub w1: WeightSpec,
    pub w2: WeightSpec,
    pub feedback: WeightSpec,
    pub bins: usize,
    pub walkers: usize,
    /// Explicit walker positions; uniform random when absent.
    pub start: Option<Vec<Vertex>>,
    /// Initial particle or ball counts; one per vertex or bin when absent.
    pub initial: Option<Vec<u64>>,
    pub horizon: usize,
    pub replicas: usize,
    pub burn_in: f64,
    pub seed: u64,
    /// Monopoly window for balls-in-bins; `max(1000, horizon/10)` when absent.
    pub window: Option<usize>,
    pub check_flows: bool,
    pub execution: Execution,
    pub out: Option<PathBuf>,
    pub format: OutputFormat,
    /// Where to write the trace of replica 0.
    pub trace: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            model: Model::Nczr,
            graph: "triangle".into(),
            p: 1.0,
            q: 1.0,
            r: 1.0,
            w1: WeightSpec::PowerPlusOne { p: 3.0 },
            w2: WeightSpec::Power { s: 0.0 },
            feedback: WeightSpec::PowerPlusOne { p: 1.0 },
            bins: 2,
            walkers: 1,
            start: None,
            initial: None,
            horizon: 10_000,
            replicas: 100,
            burn_in: 0.5,
            seed: 0,
            window: None,
            check_flows: false,
            execution: Execution::Parallel,
            out: None,
            format: OutputFormat::Csv,
            trace: None,
        }
    }
}

fn parse_list<T: FromStr>(value: &str) -> Result<Vec<T>, String> {
    value
        .split(',')
        .map(|s| s.trim().parse::<T>().map_err(|_| format!("bad list entry `{}`", s.trim())))
        .collect()
}

fn parse_bool(value: &str) -> Result<bool, String> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(format!("expected true or false, got `{value}`")),
    }
}

fn parse_num<T: FromStr>(value: &str) -> Result<T, String> {
    value.parse().map_err(|_| format!("bad number `{value}`"))
}

impl ExperimentConfig {
    pub const KEYS: &'static [&'static str] = &[
        "model", "graph", "p", "q", "r", "w1", "w2", "feedback", "bins", "walkers", "start", "initial", "horizon",
        "replicas", "burn_in", "seed", "window", "check_flows", "execution", "out", "format", "trace",
    ];

    /// Set one key from its text value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let value = value.trim();
        let weight = |v: &str| v.parse::<WeightSpec>().map_err(|e| e.to_string());
        match key.trim() {
            "model" => self.model = value.parse()?,
            "graph" => self.graph = value.to_string(),
            "p" => self.p = parse_num(value)?,
            "q" => self.q = parse_num(value)?,
            "r" => self.r = parse_num(value)?,
            "w1" => self.w1 = weight(value)?,
            "w2" => self.w2 = weight(value)?,
            "feedback" => self.feedback = weight(value)?,
            "bins" => self.bins = parse_num(value)?,
            "walkers" => self.walkers = parse_num(value)?,
            "start" => self.start = Some(parse_list(value)?),
            "initial" => self.initial = Some(parse_list(value)?),
            "horizon" => self.horizon = parse_num(value)?,
            "replicas" => self.replicas = parse_num(value)?,
            "burn_in" => self.burn_in = parse_num(value)?,
            "seed" => self.seed = parse_num(value)?,
            "window" => self.window = Some(parse_num(value)?),
            "check_flows" => self.check_flows = parse_bool(value)?,
            "execution" => self.execution = value.parse()?,
            "out" => self.out = Some(PathBuf::from(value)),
            "format" => self.format = value.parse()?,
            "trace" => self.trace = Some(PathBuf::from(value)),
            other => return Err(format!("unknown key `{other}`")),
        }
        Ok(())
    }

    /// Parse `key = value` lines (blank lines and `#` comments ignored) on
    /// top of the defaults. Keys outside [`Self::KEYS`] are passed to
    /// `extra`, which returns whether it consumed them.
    pub fn parse_with(
        text: &str,
        mut extra: impl FnMut(&str, &str) -> Result<bool, String>,
    ) -> Result<Self, ExperimentError> {
        let mut config = ExperimentConfig::default();
        let mut errors = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                errors.push(format!("line {}: expected `key = value`", i + 1));
                continue;
            };
            let (key, value) = (key.trim(), value.trim());
            let result = if Self::KEYS.contains(&key) {
                config.set(key, value)
            } else {
                match extra(key, value) {
                    Ok(true) => Ok(()),
                    Ok(false) => Err(format!("unknown key `{key}`")),
                    Err(e) => Err(e),
                }
            };
            if let Err(e) = result {
                errors.push(format!("line {}: {key}: {e}", i + 1));
            }
        }
        if errors.is_empty() {
            Ok(config)
        } else {
            Err(ExperimentError::Validation(errors))
        }
    }

    pub fn parse(text: &str) -> Result<Self, ExperimentError> {
        Self::parse_with(text, |_, _| Ok(false))
    }

    pub fn from_file(path: &Path) -> Result<Self, ExperimentError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn load_graph(&self) -> Result<Graph, ExperimentError> {
        if graph::BUILTIN_GRAPHS.iter().any(|(name, _)| *name == self.graph) {
            Ok(graph::builtin(&self.graph)?)
        } else {
            Ok(Graph::from_edge_list_file(Path::new(&self.graph))?)
        }
    }

    /// Every problem with the configuration, one message per field.
    pub fn problems(&self) -> Vec<String> {
        let mut errors = Vec::new();
        if self.horizon < 1 {
            errors.push("horizon: must be at least 1".to_string());
        }
        if self.replicas < 1 {
            errors.push("replicas: must be at least 1".to_string());
        }
        if !(0.0..1.0).contains(&self.burn_in) {
            errors.push(format!("burn_in: {} is outside [0, 1)", self.burn_in));
        }
        for (name, spec) in [("w1", &self.w1), ("w2", &self.w2), ("feedback", &self.feedback)] {
            if let Err(e) = spec.validate() {
                errors.push(format!("{name}: {e}"));
            }
        }
        let graph = match self.model {
            Model::Bins => None,
            _ => match self.load_graph() {
                Ok(g) => Some(g),
                Err(e) => {
                    errors.push(format!("graph: {e}"));
                    None
                }
            },
        };
        match self.model {
            Model::Nczr => {
                for (name, x) in [("p", self.p), ("q", self.q), ("r", self.r)] {
                    if !x.is_finite() {
                        errors.push(format!("{name}: must be finite"));
                    }
                }
                if let (Some(g), Some(initial)) = (&graph, &self.initial) {
                    if initial.len() != g.vertex_count() {
                        errors.push(format!("initial: {} entries for {} vertices", initial.len(), g.vertex_count()));
                    }
                    if initial.iter().all(|&k| k == 0) {
                        errors.push("initial: must not be identically zero".to_string());
                    }
                }
            }
            Model::Ant => {
                if self.walkers < 1 {
                    errors.push("walkers: must be at least 1".to_string());
                }
                if let Some(g) = &graph {
                    if !g.has_circuit() {
                        errors.push("graph: must contain a circuit".to_string());
                    }
                    if let Some(start) = &self.start {
                        if start.len() != self.walkers {
                            errors.push(format!("start: {} positions for {} walkers", start.len(), self.walkers));
                        }
                        if let Some(v) = start.iter().find(|&&v| v >= g.vertex_count()) {
                            errors.push(format!("start: vertex {v} out of range"));
                        }
                    }
                }
            }
            Model::Bins => {
                if self.bins < 1 {
                    errors.push("bins: must be at least 1".to_string());
                }
                if let Some(initial) = &self.initial {
                    if initial.len() != self.bins {
                        errors.push(format!("initial: {} entries for {} bins", initial.len(), self.bins));
                    }
                }
            }
        }
        errors
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let problems = self.problems();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(ExperimentError::Validation(problems))
        }
    }
}
