//! Multi-walker ant random walk with signed edge-crossing memory.
//!
//! At each step one of `N` walkers is chosen uniformly; from `v` it moves to
//! the neighbor `u` with probability proportional to `W(c(v,u))`, where
//! `c(v,u)` is the net number of collective crossings from `v` to `u`.
//! Crossings are stored once per edge in the orientation `u < v`.

use std::collections::BTreeSet;
use std::fmt;

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::burn_in_index;
use crate::graph::{Circuit, DiGraph, Graph, GraphError, Vertex};
use crate::sampling::{log_sum_exp, sample_log_weights};
use crate::weights::{SignedWeightPair, WeightError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AntError {
    #[error("at least one walker is required")]
    NoWalkers,
    #[error("the graph is a tree; the walk needs at least one circuit")]
    Tree,
    #[error("expected {expected} walker positions, got {got}")]
    WalkerCount { expected: usize, got: usize },
    #[error("expected {expected} crossing entries, got {got}")]
    CrossingCount { expected: usize, got: usize },
    #[error("vertex {0} is out of range")]
    VertexOutOfRange(Vertex),
    #[error("walker {0} does not exist")]
    UnknownWalker(usize),
    #[error("walker {walker} is at {at}, not {from}")]
    WrongPosition { walker: usize, at: Vertex, from: Vertex },
    #[error("vertices {0} and {1} are not adjacent")]
    NotAdjacent(Vertex, Vertex),
    #[error("step {index} of the segment leaves the arcs of D_tau")]
    NotMonotoneSegment { index: usize },
    #[error("burn-in fraction {0} is outside [0, 1)")]
    BurnIn(f64),
    #[error("invariant violation: {0}")]
    InvariantViolation(String),
    #[error("trace line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Weight(#[from] WeightError),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AntParams {
    graph: Graph,
    walkers: usize,
    weights: SignedWeightPair,
}

impl AntParams {
    pub fn new(graph: Graph, walkers: usize, weights: SignedWeightPair) -> Result<Self, AntError> {
        if walkers == 0 {
            return Err(AntError::NoWalkers);
        }
        if !graph.has_circuit() {
            return Err(AntError::Tree);
        }
        weights.w1.validate()?;
        weights.w2.validate()?;
        Ok(AntParams { graph, walkers, weights })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn walkers(&self) -> usize {
        self.walkers
    }

    pub fn weights(&self) -> &SignedWeightPair {
        &self.weights
    }

    pub fn with_weights(&self, weights: SignedWeightPair) -> Self {
        AntParams { weights, ..self.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct AntMove {
    pub walker: usize,
    pub from: Vertex,
    pub to: Vertex,
}

impl fmt::Display for AntMove {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.walker, self.from, self.to)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AntState {
    positions: Vec<Vertex>,
    crossings: Vec<i64>,
    /// Per-walker crossings, `[walker][edge]`, when flows are tracked.
    ledgers: Option<Vec<Vec<i64>>>,
    time: u64,
}

impl AntState {
    /// Fresh state: all crossings zero.
    pub fn new(params: &AntParams, positions: Vec<Vertex>, track_flows: bool) -> Result<Self, AntError> {
        let zeros = vec![0; params.graph.edge_count()];
        let mut state = Self::with_crossings(params, positions, zeros)?;
        if track_flows {
            state.ledgers = Some(vec![vec![0; params.graph.edge_count()]; params.walkers]);
        }
        Ok(state)
    }

    /// State with given canonical-orientation crossings (indexed by edge id);
    /// flows are not tracked.
    pub fn with_crossings(params: &AntParams, positions: Vec<Vertex>, crossings: Vec<i64>) -> Result<Self, AntError> {
        if positions.len() != params.walkers {
            return Err(AntError::WalkerCount { expected: params.walkers, got: positions.len() });
        }
        if let Some(&v) = positions.iter().find(|&&v| v >= params.graph.vertex_count()) {
            return Err(AntError::VertexOutOfRange(v));
        }
        if crossings.len() != params.graph.edge_count() {
            return Err(AntError::CrossingCount { expected: params.graph.edge_count(), got: crossings.len() });
        }
        Ok(AntState { positions, crossings, ledgers: None, time: 0 })
    }

    pub fn positions(&self) -> &[Vertex] {
        &self.positions
    }

    pub fn time(&self) -> u64 {
        self.time
    }

    /// Crossings indexed by edge id, in the orientation `u < v`.
    pub fn canonical_crossings(&self) -> &[i64] {
        &self.crossings
    }

    pub fn tracks_flows(&self) -> bool {
        self.ledgers.is_some()
    }

    /// `c(u, v)`; `None` if `u` and `v` are not adjacent.
    pub fn crossing(&self, graph: &Graph, u: Vertex, v: Vertex) -> Option<i64> {
        graph.edge_id(u, v).map(|e| oriented(self.crossings[e], u, v))
    }

    /// `(w, c(v, w))` for every neighbor `w` of `v`.
    pub fn crossings_from(&self, graph: &Graph, v: Vertex) -> Vec<(Vertex, i64)> {
        graph.neighbors(v).iter().map(|&(w, e)| (w, oriented(self.crossings[e], v, w))).collect()
    }

    fn record(&mut self, edge: usize, mv: AntMove) {
        let delta = if mv.from < mv.to { 1 } else { -1 };
        self.crossings[edge] += delta;
        if let Some(ledgers) = &mut self.ledgers {
            ledgers[mv.walker][edge] += delta;
        }
        self.positions[mv.walker] = mv.to;
        self.time += 1;
    }
}

fn oriented(canonical: i64, from: Vertex, to: Vertex) -> i64 {
    if from < to {
        canonical
    } else {
        -canonical
    }
}

/// Uniform independent starting vertices.
pub fn random_positions<R: Rng + ?Sized>(graph: &Graph, walkers: usize, rng: &mut R) -> Vec<Vertex> {
    (0..walkers).map(|_| rng.random_range(0..graph.vertex_count())).collect()
}

fn fill_log_weights(params: &AntParams, state: &AntState, v: Vertex, buf: &mut Vec<f64>) -> Result<(), AntError> {
    buf.clear();
    for &(w, e) in params.graph.neighbors(v) {
        buf.push(params.weights.ln_eval(oriented(state.crossings[e], v, w))?);
    }
    Ok(())
}

/// `(u, P(v → u))` for every neighbor `u` of `v`.
pub fn neighbor_probabilities(params: &AntParams, state: &AntState, v: Vertex) -> Result<Vec<(Vertex, f64)>, AntError> {
    let mut logs = Vec::new();
    fill_log_weights(params, state, v, &mut logs)?;
    let total = log_sum_exp(&logs);
    Ok(params.graph.neighbors(v).iter().zip(&logs).map(|(&(u, _), &l)| (u, (l - total).exp())).collect())
}

/// Apply a given move, checking that it is a legal transition.
pub fn apply_ant_move(params: &AntParams, state: &mut AntState, mv: AntMove) -> Result<(), AntError> {
    let at = *state.positions.get(mv.walker).ok_or(AntError::UnknownWalker(mv.walker))?;
    if at != mv.from {
        return Err(AntError::WrongPosition { walker: mv.walker, at, from: mv.from });
    }
    let edge = params.graph.edge_id(mv.from, mv.to).ok_or(AntError::NotAdjacent(mv.from, mv.to))?;
    state.record(edge, mv);
    Ok(())
}

fn step_with<R: Rng + ?Sized>(
    params: &AntParams,
    state: &mut AntState,
    rng: &mut R,
    buf: &mut Vec<f64>,
) -> Result<AntMove, AntError> {
    let walker = rng.random_range(0..params.walkers);
    let from = state.positions[walker];
    fill_log_weights(params, state, from, buf)?;
    let idx = sample_log_weights(buf, rng).expect("weights are strictly positive");
    let (to, edge) = params.graph.neighbors(from)[idx];
    let mv = AntMove { walker, from, to };
    state.record(edge, mv);
    Ok(mv)
}

pub fn ant_step<R: Rng + ?Sized>(params: &AntParams, state: &mut AntState, rng: &mut R) -> Result<AntMove, AntError> {
    step_with(params, state, rng, &mut Vec::new())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FlowReport {
    /// `F^{(j)}(v)` from the per-walker ledgers, when tracked.
    pub per_walker: Option<Vec<Vec<i64>>>,
    /// `F(v) = Σ_{w~v} c(v, w)` from the collective crossings.
    pub total: Vec<i64>,
}

fn flow_of(graph: &Graph, crossings: &[i64]) -> Vec<i64> {
    graph
        .vertices()
        .map(|v| graph.neighbors(v).iter().map(|&(w, e)| oriented(crossings[e], v, w)).sum())
        .collect()
}

pub fn flows(params: &AntParams, state: &AntState) -> FlowReport {
    let per_walker = state.ledgers.as_ref().map(|ls| ls.iter().map(|l| flow_of(&params.graph, l)).collect());
    FlowReport { per_walker, total: flow_of(&params.graph, &state.crossings) }
}

/// Checks per-walker flows in `{-1, 0, 1}`, that they add up to the total,
/// total flows in `[-N, N]`, and non-negative totals away from the walkers.
pub fn check_flows(params: &AntParams, state: &AntState) -> Result<(), AntError> {
    let report = flows(params, state);
    let n = params.walkers as i64;
    let violation = |msg: String| Err(AntError::InvariantViolation(format!("time {}: {msg}", state.time)));
    if let Some(per_walker) = &report.per_walker {
        for (j, f) in per_walker.iter().enumerate() {
            if let Some((v, x)) = f.iter().enumerate().find(|(_, x)| x.abs() > 1) {
                return violation(format!("walker {j} has flow {x} at vertex {v}"));
            }
        }
        for v in params.graph.vertices() {
            let sum: i64 = per_walker.iter().map(|f| f[v]).sum();
            if sum != report.total[v] {
                return violation(format!("per-walker flows at {v} sum to {sum}, total is {}", report.total[v]));
            }
        }
    }
    let ends = end_set(state);
    for (v, &f) in report.total.iter().enumerate() {
        if f.abs() > n {
            return violation(format!("total flow {f} at vertex {v} exceeds {n}"));
        }
        if f < 0 && !ends.contains(&v) {
            return violation(format!("negative flow {f} at non-endpoint {v}"));
        }
    }
    Ok(())
}

/// Current walker positions.
pub fn end_set(state: &AntState) -> BTreeSet<Vertex> {
    state.positions.iter().copied().collect()
}

/// Vertices with an incident edge crossed net `N + 1` times or more.
pub fn s_set(params: &AntParams, state: &AntState) -> BTreeSet<Vertex> {
    let threshold = params.walkers as i64 + 1;
    let mut s = BTreeSet::new();
    for (e, &(u, v)) in params.graph.edges().iter().enumerate() {
        if state.crossings[e].abs() >= threshold {
            s.insert(u);
            s.insert(v);
        }
    }
    s
}

/// `End ⊆ S`.
pub fn tau_condition(params: &AntParams, state: &AntState) -> bool {
    let threshold = params.walkers as i64 + 1;
    state.positions.iter().all(|&v| params.graph.neighbors(v).iter().any(|&(_, e)| state.crossings[e].abs() >= threshold))
}

/// Directed graph of positive crossings at the stopping time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DTauGraph {
    digraph: DiGraph,
    tau: u64,
}

impl DTauGraph {
    /// Wraps `digraph`, asserting out-degree at least one everywhere and a
    /// circuit in every weak component.
    pub fn new(digraph: DiGraph, tau: u64) -> Result<Self, AntError> {
        if let Some(v) = digraph.vertices().iter().find(|&&v| digraph.out_degree(v) == 0) {
            return Err(AntError::InvariantViolation(format!("D_tau vertex {v} has no outgoing arc")));
        }
        for component in digraph.weak_components() {
            if !digraph.has_cycle_within(&component) {
                return Err(AntError::InvariantViolation(format!("D_tau component {component:?} has no circuit")));
            }
        }
        Ok(DTauGraph { digraph, tau })
    }

    pub fn digraph(&self) -> &DiGraph {
        &self.digraph
    }

    pub fn tau(&self) -> u64 {
        self.tau
    }
}

/// `V = End ∪ {v : c(v, w) ≠ 0 for some w}`, arcs `(v, w)` with `c(v, w) > 0`.
pub fn build_d_tau(params: &AntParams, state: &AntState) -> Result<DTauGraph, AntError> {
    let mut vertices = end_set(state);
    let mut arcs = Vec::new();
    for (e, &(u, v)) in params.graph.edges().iter().enumerate() {
        let c = state.crossings[e];
        if c != 0 {
            vertices.insert(u);
            vertices.insert(v);
            arcs.push(if c > 0 { (u, v) } else { (v, u) });
        }
    }
    DTauGraph::new(DiGraph::new(vertices, arcs)?, state.time)
}

/// Checks that every walker sits in `D_τ` and every arc carries a positive
/// crossing, as the auxiliary process requires.
pub fn check_y_start(params: &AntParams, dtau: &DTauGraph, state: &AntState) -> Result<(), AntError> {
    if let Some(&v) = state.positions.iter().find(|v| !dtau.digraph.contains_vertex(**v)) {
        return Err(AntError::InvariantViolation(format!("walker at {v} outside D_tau")));
    }
    for (u, v) in dtau.digraph.arcs() {
        match state.crossing(&params.graph, u, v) {
            Some(c) if c >= 1 => {}
            Some(c) => return Err(AntError::InvariantViolation(format!("arc ({u},{v}) has crossing {c}"))),
            None => return Err(AntError::NotAdjacent(u, v)),
        }
    }
    Ok(())
}

/// `(u, P_Y(v → u))` over the arcs of `D_τ` leaving `v`, weighted by `W1`.
pub fn y_arc_probabilities(
    params: &AntParams,
    dtau: &DTauGraph,
    state: &AntState,
    v: Vertex,
) -> Result<Vec<(Vertex, f64)>, AntError> {
    let targets: Vec<Vertex> = dtau.digraph.successors(v).collect();
    let logs = targets
        .iter()
        .map(|&u| {
            let c = state.crossing(&params.graph, v, u).ok_or(AntError::NotAdjacent(v, u))?;
            Ok(params.weights.w1.ln_eval(c.max(0) as u64)?)
        })
        .collect::<Result<Vec<f64>, AntError>>()?;
    let total = log_sum_exp(&logs);
    Ok(targets.into_iter().zip(logs).map(|(u, l)| (u, (l - total).exp())).collect())
}

/// One step of the auxiliary process: a uniform walker moves along an arc of
/// `D_τ` with `W1` weights.
pub fn y_step<R: Rng + ?Sized>(
    params: &AntParams,
    dtau: &DTauGraph,
    state: &mut AntState,
    rng: &mut R,
) -> Result<AntMove, AntError> {
    let walker = rng.random_range(0..params.walkers);
    let from = state.positions[walker];
    let probs = y_arc_probabilities(params, dtau, state, from)?;
    if probs.is_empty() {
        return Err(AntError::InvariantViolation(format!("no D_tau arc leaves {from}")));
    }
    let logs: Vec<f64> = probs.iter().map(|(_, p)| p.ln()).collect();
    let idx = sample_log_weights(&logs, rng).expect("probabilities are positive");
    let mv = AntMove { walker, from, to: probs[idx].0 };
    apply_ant_move(params, state, mv)?;
    Ok(mv)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct YRun {
    pub steps: Vec<AntMove>,
    pub final_state: AntState,
}

pub fn run_y<R: Rng + ?Sized>(
    params: &AntParams,
    dtau: &DTauGraph,
    mut state: AntState,
    horizon: usize,
    rng: &mut R,
) -> Result<YRun, AntError> {
    check_y_start(params, dtau, &state)?;
    let mut steps = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        steps.push(y_step(params, dtau, &mut state, rng)?);
    }
    Ok(YRun { steps, final_state: state })
}

/// Every step moves along an arc of `D_τ`.
pub fn is_in_a_up(dtau: &DTauGraph, segment: &[AntMove]) -> bool {
    segment.iter().all(|m| dtau.digraph.has_arc(m.from, m.to))
}

/// `ln Π_k Υ⁺/(Υ⁺ + Υ⁻)` at the moving walker's vertex along a segment that
/// follows arcs of `D_τ`, starting from `state`. Equals
/// `ln P_X(path) - ln P_Y(path)`.
pub fn rn_derivative_ant(
    params: &AntParams,
    dtau: &DTauGraph,
    state: &AntState,
    segment: &[AntMove],
) -> Result<f64, AntError> {
    if let Some(index) = segment.iter().position(|m| !dtau.digraph.has_arc(m.from, m.to)) {
        return Err(AntError::NotMonotoneSegment { index });
    }
    let mut state = state.clone();
    state.ledgers = None;
    let mut total = 0.0;
    for &mv in segment {
        let phi: Vec<i64> = state.crossings_from(&params.graph, mv.from).into_iter().map(|(_, c)| c).collect();
        let plus = params.weights.ln_upsilon_plus(&phi)?;
        let minus = params.weights.ln_upsilon_minus(&phi)?;
        total += plus - log_sum_exp(&[plus, minus]);
        apply_ant_move(params, &mut state, mv)?;
    }
    Ok(total)
}

fn start_index(len: usize, burn_in: f64) -> Result<usize, AntError> {
    burn_in_index(len, burn_in).ok_or(AntError::BurnIn(burn_in))
}

/// Increment sign of every edge touched after burn-in; `None` if some edge
/// moved in both directions.
fn post_burn_in_orientation(steps: &[AntMove]) -> Option<BTreeSet<(Vertex, Vertex)>> {
    let mut arcs = BTreeSet::new();
    for m in steps {
        if arcs.contains(&(m.to, m.from)) {
            return None;
        }
        arcs.insert((m.from, m.to));
    }
    Some(arcs)
}

/// Every edge's crossing number is monotone after burn-in.
pub fn detect_monot_proxy(steps: &[AntMove], burn_in: f64) -> Result<bool, AntError> {
    let start = start_index(steps.len(), burn_in)?;
    Ok(post_burn_in_orientation(&steps[start..]).is_some())
}

/// Monotone after burn-in, and the edges traversed after burn-in form at most
/// `N` vertex-disjoint directed circuits. Returns those circuits.
pub fn detect_loctrapp_proxy(
    params: &AntParams,
    steps: &[AntMove],
    burn_in: f64,
) -> Result<Option<Vec<Circuit>>, AntError> {
    let start = start_index(steps.len(), burn_in)?;
    let Some(arcs) = post_burn_in_orientation(&steps[start..]) else {
        return Ok(None);
    };
    let vertices: BTreeSet<Vertex> = arcs.iter().flat_map(|&(u, v)| [u, v]).collect();
    let traversed = DiGraph::new(vertices, arcs)?;
    Ok(traversed.as_disjoint_circuits().filter(|cs| cs.len() <= params.walkers))
}

/// Vertices and arcs used after burn-in.
pub fn d_infinity_proxy(steps: &[AntMove], burn_in: f64) -> Result<DiGraph, AntError> {
    let start = start_index(steps.len(), burn_in)?;
    let arcs: BTreeSet<(Vertex, Vertex)> = steps[start..].iter().map(|m| (m.from, m.to)).collect();
    let vertices: BTreeSet<Vertex> = arcs.iter().flat_map(|&(u, v)| [u, v]).collect();
    Ok(DiGraph::new(vertices, arcs)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AntRunOptions {
    pub horizon: usize,
    pub burn_in: f64,
    /// Keep per-walker ledgers so flows can be checked.
    pub track_flows: bool,
    /// Check the flow constraints after every step (needs `track_flows`).
    pub check_flows: bool,
    /// End the run as soon as the stopping time fires.
    pub stop_at_tau: bool,
}

impl AntRunOptions {
    pub fn new(horizon: usize) -> Self {
        AntRunOptions { horizon, burn_in: 0.5, track_flows: false, check_flows: false, stop_at_tau: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AntRun {
    pub initial_positions: Vec<Vertex>,
    pub steps: Vec<AntMove>,
    pub final_state: AntState,
    pub tau: Option<u64>,
    pub state_at_tau: Option<AntState>,
    #[serde(skip)]
    pub d_tau: Option<DTauGraph>,
    pub monot: bool,
    pub loctrapp: Option<Vec<Circuit>>,
}

pub fn run_ant<R: Rng + ?Sized>(
    params: &AntParams,
    initial_positions: Vec<Vertex>,
    options: &AntRunOptions,
    rng: &mut R,
) -> Result<AntRun, AntError> {
    start_index(options.horizon, options.burn_in)?;
    let track = options.track_flows || options.check_flows;
    let mut state = AntState::new(params, initial_positions.clone(), track)?;
    let mut steps = Vec::with_capacity(options.horizon);
    let mut tau = None;
    let mut state_at_tau = None;
    let mut d_tau = None;
    let mut buf = Vec::new();
    for _ in 0..options.horizon {
        steps.push(step_with(params, &mut state, rng, &mut buf)?);
        if options.check_flows {
            check_flows(params, &state)?;
        }
        if tau.is_none() && tau_condition(params, &state) {
            tau = Some(state.time);
            d_tau = Some(build_d_tau(params, &state)?);
            state_at_tau = Some(state.clone());
            if options.stop_at_tau {
                break;
            }
        }
    }
    let monot = detect_monot_proxy(&steps, options.burn_in)?;
    let loctrapp = detect_loctrapp_proxy(params, &steps, options.burn_in)?;
    Ok(AntRun { initial_positions, steps, final_state: state, tau, state_at_tau, d_tau, monot, loctrapp })
}

/// Starting positions plus the steps taken.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AntTrace {
    pub initial_positions: Vec<Vertex>,
    pub steps: Vec<AntMove>,
}

impl AntTrace {
    /// `# start …` header, then one `step_index walker from to` line per step.
    /// With `snapshot_every = Some(k)`, a `# crossings n c_0 c_1 …` line (by
    /// edge id) follows every `k`-th step.
    pub fn to_text(&self, params: &AntParams, snapshot_every: Option<usize>) -> Result<String, AntError> {
        let join = |xs: &mut dyn Iterator<Item = String>| xs.collect::<Vec<_>>().join(" ");
        let mut out = format!("# start {}\n", join(&mut self.initial_positions.iter().map(ToString::to_string)));
        let mut state = AntState::new(params, self.initial_positions.clone(), false)?;
        for (n, &mv) in self.steps.iter().enumerate() {
            out.push_str(&format!("{n} {mv}\n"));
            if let Some(k) = snapshot_every.filter(|&k| k > 0) {
                apply_ant_move(params, &mut state, mv)?;
                if (n + 1) % k == 0 {
                    let cs = join(&mut state.crossings.iter().map(ToString::to_string));
                    out.push_str(&format!("# crossings {} {cs}\n", n + 1));
                }
            }
        }
        Ok(out)
    }

    pub fn from_text(text: &str) -> Result<Self, AntError> {
        let mut initial = None;
        let mut steps = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            let err = |message: String| AntError::Parse { line: i + 1, message };
            let numbers = |s: &str| {
                s.split_whitespace()
                    .map(|t| t.parse::<usize>().map_err(|_| err(format!("bad number `{t}`"))))
                    .collect::<Result<Vec<_>, _>>()
            };
            if let Some(rest) = line.strip_prefix("# start") {
                initial = Some(numbers(rest)?);
            } else if line.is_empty() || line.starts_with('#') {
                continue;
            } else {
                match *numbers(line)?.as_slice() {
                    [n, walker, from, to] if n == steps.len() => steps.push(AntMove { walker, from, to }),
                    [n, ..] if n != steps.len() => return Err(err(format!("expected step {}, got {n}", steps.len()))),
                    _ => return Err(err("expected `step_index walker from to`".into())),
                }
            }
        }
        let initial_positions = initial.ok_or(AntError::Parse { line: 0, message: "missing `# start` header".into() })?;
        Ok(AntTrace { initial_positions, steps })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::builtin;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pair(w1: &str, w2: &str) -> SignedWeightPair {
        SignedWeightPair::new(w1.parse().unwrap(), w2.parse().unwrap())
    }

    fn params(graph: &str, walkers: usize, w1: &str, w2: &str) -> AntParams {
        AntParams::new(builtin(graph).unwrap(), walkers, pair(w1, w2)).unwrap()
    }

    fn mv(walker: usize, from: Vertex, to: Vertex) -> AntMove {
        AntMove { walker, from, to }
    }

    fn walk(prm: &AntParams, state: &mut AntState, walker: usize, path: &[Vertex]) -> Vec<AntMove> {
        path.windows(2)
            .map(|w| {
                let m = mv(walker, w[0], w[1]);
                apply_ant_move(prm, state, m).unwrap();
                m
            })
            .collect()
    }

    #[test]
    fn rejects_trees_and_zero_walkers() {
        assert_eq!(AntParams::new(builtin("path3").unwrap(), 1, pair("pow+1:p=1", "pow+1:p=1")), Err(AntError::Tree));
        assert_eq!(AntParams::new(builtin("triangle").unwrap(), 0, pair("pow+1:p=1", "pow+1:p=1")), Err(AntError::NoWalkers));
    }

    #[test]
    fn fresh_state_is_uniform() {
        let prm = params("figure3", 2, "pow+1:p=3", "pow:s=0");
        let state = AntState::new(&prm, vec![0, 3], false).unwrap();
        for v in prm.graph().vertices() {
            for (_, p) in neighbor_probabilities(&prm, &state, v).unwrap() {
                assert!((p - 1.0 / prm.graph().degree(v) as f64).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn kernel_example_on_triangle() {
        let prm = params("triangle", 1, "pow+1:p=2", "pow+1:p=1");
        let mut state = AntState::new(&prm, vec![0], false).unwrap();
        walk(&prm, &mut state, 0, &[0, 1, 2, 0]);
        // now c(0,1) = 1, c(0,2) = -1; reset c(0,2) to 0 by hand
        let mut crossings = state.canonical_crossings().to_vec();
        let e02 = prm.graph().edge_id(0, 2).unwrap();
        crossings[e02] = 0;
        let state = AntState::with_crossings(&prm, vec![0], crossings).unwrap();
        let probs = neighbor_probabilities(&prm, &state, 0).unwrap();
        assert_eq!(probs.iter().map(|p| p.0).collect::<Vec<_>>(), vec![1, 2]);
        assert!((probs[0].1 - 2.0 / 3.0).abs() < 1e-15);
        assert!((probs[1].1 - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn antisymmetric_storage() {
        let prm = params("triangle", 1, "pow+1:p=1", "pow+1:p=1");
        let mut state = AntState::new(&prm, vec![2], false).unwrap();
        walk(&prm, &mut state, 0, &[2, 1, 0, 1]);
        let g = prm.graph();
        assert_eq!(state.crossing(g, 2, 1), Some(1));
        assert_eq!(state.crossing(g, 1, 2), Some(-1));
        assert_eq!(state.crossing(g, 1, 0), Some(0));
        assert_eq!(state.crossing(g, 0, 1), Some(0));
        assert_eq!(state.time(), 3);
        assert_eq!(
            apply_ant_move(&prm, &mut state, mv(0, 0, 1)),
            Err(AntError::WrongPosition { walker: 0, at: 1, from: 0 })
        );
    }

    #[test]
    fn flow_examples() {
        let prm = params("cycle5", 1, "pow+1:p=1", "pow+1:p=1");
        let mut state = AntState::new(&prm, vec![0], true).unwrap();
        walk(&prm, &mut state, 0, &[0, 1, 2]);
        let report = flows(&prm, &state);
        assert_eq!(&report.total[..3], &[1, 0, -1]);
        assert_eq!(report.per_walker.unwrap()[0], report.total);
        check_flows(&prm, &state).unwrap();

        walk(&prm, &mut state, 0, &[2, 3, 4, 0]);
        assert!(flows(&prm, &state).total.iter().all(|&f| f == 0));
    }

    #[test]
    fn end_and_s_sets() {
        let prm = params("triangle", 1, "pow+1:p=1", "pow+1:p=1");
        let mut state = AntState::new(&prm, vec![0], false).unwrap();
        assert!(s_set(&prm, &state).is_empty());
        assert!(!tau_condition(&prm, &state));
        walk(&prm, &mut state, 0, &[0, 1, 0, 1, 2, 0, 1]);
        // c(0,1) = 2 = N + 1
        assert_eq!(s_set(&prm, &state), BTreeSet::from([0, 1]));
        assert_eq!(end_set(&state), BTreeSet::from([1]));
        assert!(tau_condition(&prm, &state));
    }

    #[test]
    fn circling_a_triangle_fires_tau_and_gives_the_directed_cycle() {
        let n = 2;
        let prm = params("triangle", n, "pow+1:p=3", "pow:s=0");
        let mut state = AntState::new(&prm, vec![0, 0], false).unwrap();
        let mut fired = None;
        for _ in 0..n + 3 {
            for w in [[0, 1], [1, 2], [2, 0]] {
                for walker in 0..n {
                    apply_ant_move(&prm, &mut state, mv(walker, w[0], w[1])).unwrap();
                    if fired.is_none() && tau_condition(&prm, &state) {
                        fired = Some(state.clone());
                    }
                }
            }
        }
        let at_tau = fired.expect("tau fires");
        let dtau = build_d_tau(&prm, &at_tau).unwrap();
        let expected = DiGraph::new([0, 1, 2], [(0, 1), (1, 2), (2, 0)]).unwrap();
        assert_eq!(dtau.digraph(), &expected);
    }

    #[test]
    fn d_tau_excludes_untouched_vertices() {
        let prm = params("two-triangles-bridge", 1, "pow+1:p=3", "pow:s=0");
        let mut state = AntState::new(&prm, vec![0], false).unwrap();
        walk(&prm, &mut state, 0, &[0, 1, 2, 0, 1, 2, 0]);
        let dtau = build_d_tau(&prm, &state).unwrap();
        assert_eq!(dtau.digraph().vertices(), &BTreeSet::from([0, 1, 2]));
    }

    #[test]
    fn d_tau_assertions_fire() {
        let sink = DiGraph::new([0, 1], [(0, 1)]).unwrap();
        assert!(matches!(DTauGraph::new(sink, 0), Err(AntError::InvariantViolation(_))));
    }

    #[test]
    fn y_examples() {
        let prm = params("triangle", 1, "pow+1:p=2", "pow:s=0");
        let single = DTauGraph::new(DiGraph::new([0, 1, 2], [(0, 1), (1, 2), (2, 0)]).unwrap(), 0).unwrap();
        let state = AntState::with_crossings(&prm, vec![0], vec![1, 1, 1]).unwrap();
        assert_eq!(y_arc_probabilities(&prm, &single, &state, 0).unwrap(), vec![(1, 1.0)]);

        // arcs 0→1 (c = 1) and 0→2 (c = 2) weigh 2 and 5
        let g = prm.graph();
        let mut crossings = vec![0; 3];
        crossings[g.edge_id(0, 1).unwrap()] = 1;
        crossings[g.edge_id(0, 2).unwrap()] = 2;
        let fan = DTauGraph::new(DiGraph::new([0, 1, 2], [(0, 1), (0, 2), (1, 0), (2, 0)]).unwrap(), 0).unwrap();
        let state = AntState::with_crossings(&prm, vec![0], crossings).unwrap();
        let probs = y_arc_probabilities(&prm, &fan, &state, 0).unwrap();
        assert!((probs[0].1 - 2.0 / 7.0).abs() < 1e-15 && (probs[1].1 - 5.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn y_crossings_never_decrease() {
        let prm = params("triangle", 2, "pow+1:p=2", "pow:s=0");
        let dtau = DTauGraph::new(DiGraph::new([0, 1, 2], [(0, 1), (1, 2), (2, 0)]).unwrap(), 0).unwrap();
        let g = prm.graph();
        let mut crossings = vec![0; 3];
        crossings[g.edge_id(0, 1).unwrap()] = 3;
        crossings[g.edge_id(1, 2).unwrap()] = 3;
        crossings[g.edge_id(0, 2).unwrap()] = -3;
        let state = AntState::with_crossings(&prm, vec![0, 2], crossings).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let run = run_y(&prm, &dtau, state.clone(), 300, &mut rng).unwrap();
        assert!(is_in_a_up(&dtau, &run.steps));
        let mut replay = state;
        for m in &run.steps {
            let before = replay.crossing(g, m.from, m.to).unwrap();
            apply_ant_move(&prm, &mut replay, *m).unwrap();
            assert_eq!(replay.crossing(g, m.from, m.to).unwrap(), before + 1);
        }
        assert_eq!(d_infinity_proxy(&run.steps, 0.5).unwrap(), *dtau.digraph());
    }

    #[test]
    fn rn_examples() {
        let prm = params("triangle", 1, "pow+1:p=2", "pow+1:p=1");
        let g = prm.graph();
        let dtau = DTauGraph::new(DiGraph::new([0, 1, 2], [(0, 1), (1, 2), (2, 0)]).unwrap(), 0).unwrap();
        let mut crossings = vec![0; 3];
        crossings[g.edge_id(0, 1).unwrap()] = 2;
        crossings[g.edge_id(1, 2).unwrap()] = 1;
        crossings[g.edge_id(0, 2).unwrap()] = -1;
        let state = AntState::with_crossings(&prm, vec![0], crossings.clone()).unwrap();
        assert_eq!(rn_derivative_ant(&prm, &dtau, &state, &[]).unwrap(), 0.0);

        // pendant source 0 attached to the triangle 1-2-3
        let lollipop = Graph::new(4, &[(0, 1), (1, 2), (2, 3), (1, 3)]).unwrap();
        let lp = AntParams::new(lollipop, 1, pair("pow+1:p=2", "pow+1:p=1")).unwrap();
        let arcs = [(0, 1), (1, 2), (2, 3), (3, 1)];
        let source = DTauGraph::new(DiGraph::new(0..4, arcs).unwrap(), 0).unwrap();
        let mut cs = vec![0; 4];
        for (u, v) in arcs {
            let e = lp.graph().edge_id(u, v).unwrap();
            cs[e] = if u < v { 1 } else { -1 };
        }
        let at_source = AntState::with_crossings(&lp, vec![0], cs).unwrap();
        assert_eq!(rn_derivative_ant(&lp, &source, &at_source, &[mv(0, 0, 1)]).unwrap(), 0.0);

        crossings[g.edge_id(0, 1).unwrap()] = 1;
        crossings[g.edge_id(0, 2).unwrap()] = 0;
        let dtau = DTauGraph::new(DiGraph::new([0, 1, 2], [(0, 1), (1, 2), (2, 0)]).unwrap(), 0).unwrap();
        let state = AntState::with_crossings(&prm, vec![0], crossings).unwrap();
        let rn = rn_derivative_ant(&prm, &dtau, &state, &[mv(0, 0, 1)]).unwrap();
        assert!((rn.exp() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(
            rn_derivative_ant(&prm, &dtau, &state, &[mv(0, 0, 2)]),
            Err(AntError::NotMonotoneSegment { index: 0 })
        );
        assert!(!is_in_a_up(&dtau, &[mv(0, 0, 2)]));
        assert!(is_in_a_up(&dtau, &[]));
    }

    #[test]
    fn monot_examples() {
        let up: Vec<AntMove> = (0..4).flat_map(|_| [mv(0, 0, 1), mv(0, 1, 2), mv(0, 2, 0)]).collect();
        assert!(detect_monot_proxy(&up, 0.5).unwrap());
        let mut back = up.clone();
        back.extend([mv(0, 0, 2), mv(0, 2, 0)]);
        assert!(!detect_monot_proxy(&back, 0.5).unwrap());
        assert_eq!(detect_monot_proxy(&up, -0.1), Err(AntError::BurnIn(-0.1)));
    }

    #[test]
    fn loctrapp_examples() {
        let prm = params("triangle", 1, "pow+1:p=3", "pow:s=0");
        let circling: Vec<AntMove> = (0..10).flat_map(|_| [mv(0, 0, 1), mv(0, 1, 2), mv(0, 2, 0)]).collect();
        let circuits = detect_loctrapp_proxy(&prm, &circling, 0.5).unwrap().unwrap();
        assert_eq!(circuits, vec![Circuit::from_sequence(vec![0, 1, 2]).unwrap()]);

        // two walkers on the disjoint squares c-d-f-e and g-h-j-i
        let prm = params("figure3", 2, "pow+1:p=3", "pow:s=0");
        let mut state = AntState::new(&prm, vec![2, 6], false).unwrap();
        let mut steps = Vec::new();
        for _ in 0..10 {
            steps.extend(walk(&prm, &mut state, 0, &[2, 3, 5, 4, 2]));
            steps.extend(walk(&prm, &mut state, 1, &[6, 7, 9, 8, 6]));
        }
        let circuits = detect_loctrapp_proxy(&prm, &steps, 0.5).unwrap().unwrap();
        assert_eq!(circuits.len(), 2);
        assert!(circuits[0].is_disjoint_from(&circuits[1]));

        // alternating between the overlapping squares a-b-d-c and c-d-f-e
        let prm = params("figure3", 1, "pow+1:p=3", "pow:s=0");
        let mut state = AntState::new(&prm, vec![2], false).unwrap();
        let mut steps = Vec::new();
        for _ in 0..10 {
            steps.extend(walk(&prm, &mut state, 0, &[2, 0, 1, 3, 2]));
            steps.extend(walk(&prm, &mut state, 0, &[2, 3, 5, 4, 2]));
        }
        assert_eq!(detect_loctrapp_proxy(&prm, &steps, 0.5).unwrap(), None);
    }

    #[test]
    fn random_runs_keep_flow_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for (walkers, w1, w2) in [(1, "pow+1:p=1", "pow+1:p=1"), (3, "pow+1:p=3", "pow:s=0")] {
            let prm = params("figure3", walkers, w1, w2);
            let start = random_positions(prm.graph(), walkers, &mut rng);
            let options = AntRunOptions { check_flows: true, ..AntRunOptions::new(2000) };
            let run = run_ant(&prm, start, &options, &mut rng).unwrap();
            assert_eq!(run.steps.len(), 2000);
            let total: i64 = run.final_state.canonical_crossings().iter().map(|c| c.abs()).sum();
            assert!(total <= 2000);
        }
    }

    #[test]
    fn trace_text_round_trip() {
        let prm = params("triangle", 2, "pow+1:p=1", "pow+1:p=1");
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let run = run_ant(&prm, vec![0, 1], &AntRunOptions::new(20), &mut rng).unwrap();
        let trace = AntTrace { initial_positions: run.initial_positions.clone(), steps: run.steps.clone() };
        let text = trace.to_text(&prm, Some(5)).unwrap();
        assert!(text.starts_with("# start 0 1\n0 "));
        assert_eq!(text.lines().filter(|l| l.starts_with("# crossings")).count(), 4);
        assert_eq!(AntTrace::from_text(&text).unwrap(), trace);
        assert!(AntTrace::from_text("# start 0\n1 0 0 1\n").is_err());
    }
}
