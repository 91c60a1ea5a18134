//! Non-conservative zero-range process.
//!
//! From configuration `η`, a particle is created at `v` with weight `η_v^p`,
//! annihilated at `v` with weight `η_v^q`, or jumps from `v` to each neighbor
//! with weight `η_v^r`, using `0^p = 1` and `0^q = 0^r = 0`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bins::{bin_probabilities, sample_bin};
use crate::graph::{Graph, Vertex};
use crate::sampling::{log_sum_exp, sample_log_weights};
use crate::weights::{WeightError, WeightSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NczrError {
    #[error("exponent {name} = {value} is not finite")]
    InvalidExponent { name: &'static str, value: f64 },
    #[error("configuration has {got} entries but the graph has {expected} vertices")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("the initial configuration must not be identically zero")]
    EmptyInitial,
    #[error("vertex {0} is out of range")]
    VertexOutOfRange(Vertex),
    #[error("cannot remove a particle from empty vertex {0}")]
    EmptySite(Vertex),
    #[error("vertices {0} and {1} are not adjacent")]
    NotAdjacent(Vertex, Vertex),
    #[error("move {index} of the segment is not a creation")]
    NotOnlyCreations { index: usize },
    #[error("burn-in fraction {0} is outside [0, 1)")]
    BurnIn(f64),
    #[error("trace line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Weight(#[from] WeightError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NczrParams {
    graph: Graph,
    p: f64,
    q: f64,
    r: f64,
}

impl NczrParams {
    pub fn new(graph: Graph, p: f64, q: f64, r: f64) -> Result<Self, NczrError> {
        for (name, value) in [("p", p), ("q", q), ("r", r)] {
            if !value.is_finite() {
                return Err(NczrError::InvalidExponent { name, value });
            }
        }
        Ok(NczrParams { graph, p, q, r })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn exponents(&self) -> (f64, f64, f64) {
        (self.p, self.q, self.r)
    }

    /// Feedback of the auxiliary all-creation process: `k ↦ k^p`, `0^p = 1`.
    pub fn creation_feedback(&self) -> WeightSpec {
        WeightSpec::Power { s: self.p }
    }

    fn check_config(&self, eta: &[u64]) -> Result<(), NczrError> {
        if eta.len() != self.graph.vertex_count() {
            return Err(NczrError::DimensionMismatch { expected: self.graph.vertex_count(), got: eta.len() });
        }
        Ok(())
    }
}

/// `ln k^s`, with `0^s` read as 1 when `zero_is_one` and as 0 otherwise.
fn ln_pow(k: u64, s: f64, zero_is_one: bool) -> f64 {
    if k == 0 {
        if zero_is_one {
            0.0
        } else {
            f64::NEG_INFINITY
        }
    } else {
        s * (k as f64).ln()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum NczrMove {
    Create(Vertex),
    Annihilate(Vertex),
    Jump(Vertex, Vertex),
}

impl NczrMove {
    pub fn is_create(&self) -> bool {
        matches!(self, NczrMove::Create(_))
    }
}

impl fmt::Display for NczrMove {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NczrMove::Create(v) => write!(f, "C {v}"),
            NczrMove::Annihilate(v) => write!(f, "A {v}"),
            NczrMove::Jump(v, u) => write!(f, "J {v} {u}"),
        }
    }
}

impl FromStr for NczrMove {
    type Err = String;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = text.split_whitespace().collect();
        let vertex = |s: &str| s.parse::<Vertex>().map_err(|_| format!("bad vertex `{s}`"));
        match parts.as_slice() {
            ["C", v] => Ok(NczrMove::Create(vertex(v)?)),
            ["A", v] => Ok(NczrMove::Annihilate(vertex(v)?)),
            ["J", v, u] => Ok(NczrMove::Jump(vertex(v)?, vertex(u)?)),
            _ => Err(format!("expected `C v`, `A v` or `J v u`, got `{text}`")),
        }
    }
}

/// Log-weights of every move with positive weight, in a fixed order
/// (creations, annihilations, jumps by vertex then neighbor).
fn ln_move_weights(params: &NczrParams, eta: &[u64]) -> Vec<(NczrMove, f64)> {
    let graph = &params.graph;
    let mut out = Vec::with_capacity(2 * eta.len() + 2 * graph.edge_count());
    for v in graph.vertices() {
        out.push((NczrMove::Create(v), ln_pow(eta[v], params.p, true)));
    }
    for v in graph.vertices() {
        if eta[v] > 0 {
            out.push((NczrMove::Annihilate(v), ln_pow(eta[v], params.q, false)));
        }
    }
    for v in graph.vertices() {
        if eta[v] > 0 {
            let w = ln_pow(eta[v], params.r, false);
            for &(u, _) in graph.neighbors(v) {
                out.push((NczrMove::Jump(v, u), w));
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct MoveWeights {
    /// Moves with positive weight.
    pub weights: Vec<(NczrMove, f64)>,
    /// `Z(η) = Σ_w [η_w^p + η_w^q + deg(w) η_w^r]`.
    pub normalizer: f64,
}

impl MoveWeights {
    pub fn probability(&self, mv: &NczrMove) -> f64 {
        self.weights.iter().find(|(m, _)| m == mv).map_or(0.0, |(_, w)| w / self.normalizer)
    }
}

pub fn move_weights(params: &NczrParams, eta: &[u64]) -> Result<MoveWeights, NczrError> {
    params.check_config(eta)?;
    let weights: Vec<(NczrMove, f64)> = ln_move_weights(params, eta).into_iter().map(|(m, w)| (m, w.exp())).collect();
    let normalizer = weights.iter().map(|(_, w)| w).sum();
    Ok(MoveWeights { weights, normalizer })
}

/// `ln P(η → η')` for the move `mv`; `-inf` when the move is impossible.
pub fn ln_move_probability(params: &NczrParams, eta: &[u64], mv: &NczrMove) -> Result<f64, NczrError> {
    params.check_config(eta)?;
    let logs = ln_move_weights(params, eta);
    let total = log_sum_exp(&logs.iter().map(|(_, w)| *w).collect::<Vec<_>>());
    Ok(logs.iter().find(|(m, _)| m == mv).map_or(f64::NEG_INFINITY, |(_, w)| w - total))
}

pub fn apply_move(graph: &Graph, eta: &mut [u64], mv: NczrMove) -> Result<(), NczrError> {
    let check = |v: Vertex| if v < eta.len() { Ok(()) } else { Err(NczrError::VertexOutOfRange(v)) };
    match mv {
        NczrMove::Create(v) => {
            check(v)?;
            eta[v] += 1;
        }
        NczrMove::Annihilate(v) => {
            check(v)?;
            if eta[v] == 0 {
                return Err(NczrError::EmptySite(v));
            }
            eta[v] -= 1;
        }
        NczrMove::Jump(v, u) => {
            check(v)?;
            check(u)?;
            if !graph.are_adjacent(v, u) {
                return Err(NczrError::NotAdjacent(v, u));
            }
            if eta[v] == 0 {
                return Err(NczrError::EmptySite(v));
            }
            eta[v] -= 1;
            eta[u] += 1;
        }
    }
    Ok(())
}

/// One step of the process; `eta` is updated in place.
pub fn nczr_step<R: Rng + ?Sized>(params: &NczrParams, eta: &mut [u64], rng: &mut R) -> Result<NczrMove, NczrError> {
    params.check_config(eta)?;
    let moves = ln_move_weights(params, eta);
    let logs: Vec<f64> = moves.iter().map(|(_, w)| *w).collect();
    let idx = sample_log_weights(&logs, rng).expect("creation weights are always positive");
    let mv = moves[idx].0;
    apply_move(&params.graph, eta, mv)?;
    Ok(mv)
}

/// One step of the auxiliary process that only creates, at `v` with
/// probability `η_v^p / Σ_w η_w^p`. Shares the balls-in-bins sampler.
pub fn k_aux_step<R: Rng + ?Sized>(params: &NczrParams, eta: &mut [u64], rng: &mut R) -> Result<NczrMove, NczrError> {
    params.check_config(eta)?;
    let v = sample_bin(eta, &params.creation_feedback(), rng)?;
    eta[v] += 1;
    Ok(NczrMove::Create(v))
}

/// Creation probabilities of the auxiliary process.
pub fn k_aux_probabilities(params: &NczrParams, eta: &[u64]) -> Result<Vec<f64>, NczrError> {
    params.check_config(eta)?;
    Ok(bin_probabilities(eta, &params.creation_feedback())?)
}

pub fn is_in_a_plus(segment: &[NczrMove]) -> bool {
    segment.iter().all(NczrMove::is_create)
}

/// Exit time from the all-creation set: `1 +` the index of the first move
/// that is not a creation, so that `τ` counts configurations.
pub fn tau_exit_a_plus(moves: &[NczrMove]) -> Option<usize> {
    moves.iter().position(|m| !m.is_create()).map(|i| i + 1)
}

/// `ln Π_k Σ_w η_w(k)^p / Z(η(k))` along an all-creation segment started at
/// `eta0`. Equals `ln P_H(path) - ln P_K(path)`.
pub fn rn_derivative_nczr(params: &NczrParams, eta0: &[u64], segment: &[NczrMove]) -> Result<f64, NczrError> {
    params.check_config(eta0)?;
    if let Some(index) = segment.iter().position(|m| !m.is_create()) {
        return Err(NczrError::NotOnlyCreations { index });
    }
    let mut eta = eta0.to_vec();
    let mut total = 0.0;
    for &mv in segment {
        let all = ln_move_weights(params, &eta);
        let creates: Vec<f64> = all.iter().filter(|(m, _)| m.is_create()).map(|(_, w)| *w).collect();
        let everything: Vec<f64> = all.iter().map(|(_, w)| *w).collect();
        total += log_sum_exp(&creates) - log_sum_exp(&everything);
        apply_move(&params.graph, &mut eta, mv)?;
    }
    Ok(total)
}

/// Index of the first move counted after burn-in: `⌈burn_in · T⌉`.
pub fn burn_in_start(len: usize, burn_in: f64) -> Result<usize, NczrError> {
    if !(0.0..1.0).contains(&burn_in) {
        return Err(NczrError::BurnIn(burn_in));
    }
    Ok(((burn_in * len as f64).ceil() as usize).min(len))
}

/// Every move after burn-in is a creation.
pub fn detect_creat_proxy(moves: &[NczrMove], burn_in: f64) -> Result<bool, NczrError> {
    let start = burn_in_start(moves.len(), burn_in)?;
    Ok(is_in_a_plus(&moves[start..]))
}

/// Every move after burn-in is a creation at one and the same vertex.
pub fn detect_mon_proxy(moves: &[NczrMove], burn_in: f64) -> Result<Option<Vertex>, NczrError> {
    let start = burn_in_start(moves.len(), burn_in)?;
    let tail = &moves[start..];
    let Some(&NczrMove::Create(v)) = tail.first() else {
        return Ok(None);
    };
    Ok(tail.iter().all(|m| *m == NczrMove::Create(v)).then_some(v))
}

/// Initial configuration and the moves applied to it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NczrTrace {
    pub initial: Vec<u64>,
    pub moves: Vec<NczrMove>,
}

impl NczrTrace {
    /// Configuration after all moves; fails if a count would go negative.
    pub fn replay(&self, graph: &Graph) -> Result<Vec<u64>, NczrError> {
        let mut eta = self.initial.clone();
        for &mv in &self.moves {
            apply_move(graph, &mut eta, mv)?;
        }
        Ok(eta)
    }

    /// `# initial η_0 η_1 …` followed by one move per line.
    pub fn to_text(&self) -> String {
        let initial: Vec<String> = self.initial.iter().map(ToString::to_string).collect();
        let mut out = format!("# initial {}\n", initial.join(" "));
        for mv in &self.moves {
            out.push_str(&mv.to_string());
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, NczrError> {
        let mut initial = None;
        let mut moves = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            let err = |message: String| NczrError::Parse { line: i + 1, message };
            if let Some(rest) = line.strip_prefix("# initial") {
                let counts = rest
                    .split_whitespace()
                    .map(|s| s.parse::<u64>().map_err(|_| err(format!("bad count `{s}`"))))
                    .collect::<Result<Vec<_>, _>>()?;
                initial = Some(counts);
            } else if line.is_empty() || line.starts_with('#') {
                continue;
            } else {
                moves.push(line.parse().map_err(err)?);
            }
        }
        let initial = initial.ok_or(NczrError::Parse { line: 0, message: "missing `# initial` header".into() })?;
        Ok(NczrTrace { initial, moves })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NczrRun {
    pub trace: NczrTrace,
    pub final_config: Vec<u64>,
    pub tau: Option<usize>,
    pub creat: bool,
    pub mon: Option<Vertex>,
    pub creates: u64,
    pub annihilations: u64,
    pub jumps: u64,
}

impl NczrRun {
    pub fn total_particles(&self) -> u64 {
        self.final_config.iter().sum()
    }
}

pub fn run_nczr<R: Rng + ?Sized>(
    params: &NczrParams,
    initial: &[u64],
    horizon: usize,
    burn_in: f64,
    rng: &mut R,
) -> Result<NczrRun, NczrError> {
    params.check_config(initial)?;
    if initial.iter().all(|&k| k == 0) {
        return Err(NczrError::EmptyInitial);
    }
    burn_in_start(horizon, burn_in)?;
    let mut eta = initial.to_vec();
    let mut moves = Vec::with_capacity(horizon);
    let (mut creates, mut annihilations, mut jumps) = (0, 0, 0);
    for _ in 0..horizon {
        let mv = nczr_step(params, &mut eta, rng)?;
        match mv {
            NczrMove::Create(_) => creates += 1,
            NczrMove::Annihilate(_) => annihilations += 1,
            NczrMove::Jump(..) => jumps += 1,
        }
        moves.push(mv);
    }
    let tau = tau_exit_a_plus(&moves);
    let creat = detect_creat_proxy(&moves, burn_in)?;
    let mon = detect_mon_proxy(&moves, burn_in)?;
    Ok(NczrRun {
        trace: NczrTrace { initial: initial.to_vec(), moves },
        final_config: eta,
        tau,
        creat,
        mon,
        creates,
        annihilations,
        jumps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::builtin;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use NczrMove::*;

    fn params(name: &str, p: f64, q: f64, r: f64) -> NczrParams {
        NczrParams::new(builtin(name).unwrap(), p, q, r).unwrap()
    }

    #[test]
    fn two_vertex_weights() {
        let w = move_weights(&params("edge", 1.0, 1.0, 1.0), &[1, 0]).unwrap();
        assert_eq!(w.normalizer, 4.0);
        assert_eq!(w.weights, vec![(Create(0), 1.0), (Create(1), 1.0), (Annihilate(0), 1.0), (Jump(0, 1), 1.0)]);
        for (mv, _) in &w.weights {
            assert_eq!(w.probability(mv), 0.25);
        }
    }

    #[test]
    fn empty_configuration_only_creates() {
        let prm = params("triangle", 2.0, -1.0, 0.5);
        let w = move_weights(&prm, &[0, 0, 0]).unwrap();
        assert_eq!(w.weights.len(), 3);
        assert!(w.weights.iter().all(|(m, p)| m.is_create() && *p == 1.0));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut eta = vec![0, 0];
        assert!(nczr_step(&params("edge", 1.0, 1.0, 1.0), &mut eta, &mut rng).unwrap().is_create());
    }

    #[test]
    fn normalization_on_random_configurations() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let prm = params("figure3", 1.7, 0.3, -0.5);
        for _ in 0..1000 {
            let eta: Vec<u64> = (0..10).map(|_| rng.random_range(0..6)).collect();
            let w = move_weights(&prm, &eta).unwrap();
            let direct: f64 = prm
                .graph()
                .vertices()
                .map(|v| {
                    let k = eta[v] as f64;
                    let (p, q, r) = if eta[v] == 0 { (1.0, 0.0, 0.0) } else { (k.powf(1.7), k.powf(0.3), k.powf(-0.5)) };
                    p + q + prm.graph().degree(v) as f64 * r
                })
                .sum();
            assert!((w.normalizer - direct).abs() < 1e-12 * direct);
            let total: f64 = w.weights.iter().map(|(m, _)| w.probability(m)).sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn apply_move_examples() {
        let g = builtin("path3").unwrap();
        let mut eta = vec![2, 0, 1];
        apply_move(&g, &mut eta, Create(1)).unwrap();
        assert_eq!(eta, vec![2, 1, 1]);
        apply_move(&g, &mut eta, Jump(0, 1)).unwrap();
        assert_eq!(eta, vec![1, 2, 1]);
        apply_move(&g, &mut eta, Annihilate(2)).unwrap();
        assert_eq!(eta, vec![1, 2, 0]);
        assert_eq!(apply_move(&g, &mut eta, Annihilate(2)), Err(NczrError::EmptySite(2)));
        assert_eq!(apply_move(&g, &mut eta, Jump(0, 2)), Err(NczrError::NotAdjacent(0, 2)));
    }

    #[test]
    fn tau_and_a_plus_examples() {
        assert!(is_in_a_plus(&[Create(0), Create(1)]));
        assert!(!is_in_a_plus(&[Create(0), Jump(0, 1)]));
        assert!(is_in_a_plus(&[]));
        assert_eq!(tau_exit_a_plus(&[Annihilate(0)]), Some(1));
        assert_eq!(tau_exit_a_plus(&[Create(0), Create(0), Jump(0, 1)]), Some(3));
        assert_eq!(tau_exit_a_plus(&[Create(0)]), None);
    }

    #[test]
    fn auxiliary_process_examples() {
        let prm = params("edge", 2.0, 0.0, 0.0);
        assert_eq!(k_aux_probabilities(&prm, &[1, 1]).unwrap(), vec![0.5, 0.5]);
        let p = k_aux_probabilities(&prm, &[1, 2]).unwrap();
        assert!((p[0] - 0.2).abs() < 1e-15 && (p[1] - 0.8).abs() < 1e-15);
        let p = k_aux_probabilities(&prm, &[0, 2]).unwrap();
        assert!((p[0] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn rn_examples() {
        let prm = params("edge", 2.0, 0.0, 0.0);
        let rn = rn_derivative_nczr(&prm, &[1, 1], &[Create(0)]).unwrap();
        assert!((rn.exp() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(rn_derivative_nczr(&prm, &[1, 1], &[]).unwrap(), 0.0);
        assert_eq!(
            rn_derivative_nczr(&prm, &[1, 1], &[Create(0), Jump(0, 1)]),
            Err(NczrError::NotOnlyCreations { index: 1 })
        );
    }

    #[test]
    fn proxy_examples() {
        let all_create = vec![Create(0); 10];
        assert!(detect_creat_proxy(&all_create, 0.5).unwrap());
        assert_eq!(detect_mon_proxy(&all_create, 0.5).unwrap(), Some(0));
        let mut ends_in_jumps = vec![Create(1); 8];
        ends_in_jumps.extend([Jump(1, 0), Jump(0, 1)]);
        assert!(!detect_creat_proxy(&ends_in_jumps, 0.5).unwrap());
        let mut mixed = vec![Jump(0, 1); 5];
        mixed.extend([Create(0), Create(1), Create(0), Create(0), Create(0)]);
        assert!(detect_creat_proxy(&mixed, 0.5).unwrap());
        assert_eq!(detect_mon_proxy(&mixed, 0.5).unwrap(), None);
        assert_eq!(detect_mon_proxy(&mixed, 0.7).unwrap(), Some(0));
        assert_eq!(detect_creat_proxy(&mixed, 1.0), Err(NczrError::BurnIn(1.0)));
    }

    #[test]
    fn run_ledger_is_conserved() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let prm = params("triangle", 1.0, 1.0, 1.0);
        let run = run_nczr(&prm, &[1, 1, 1], 2000, 0.5, &mut rng).unwrap();
        assert_eq!(run.total_particles(), 3 + run.creates - run.annihilations);
        assert_eq!(run.creates + run.annihilations + run.jumps, 2000);
        assert_eq!(run.trace.replay(prm.graph()).unwrap(), run.final_config);
        assert_eq!(run_nczr(&prm, &[0, 0, 0], 10, 0.5, &mut rng).unwrap_err(), NczrError::EmptyInitial);
    }

    #[test]
    fn trace_text_round_trip() {
        let trace = NczrTrace { initial: vec![1, 0, 2], moves: vec![Create(1), Annihilate(2), Jump(0, 1)] };
        let text = trace.to_text();
        assert_eq!(text, "# initial 1 0 2\nC 1\nA 2\nJ 0 1\n");
        assert_eq!(NczrTrace::from_text(&text).unwrap(), trace);
        assert!(NczrTrace::from_text("C 1\n").is_err());
        assert!(matches!(NczrTrace::from_text("# initial 1\nX 1\n"), Err(NczrError::Parse { line: 2, .. })));
    }
}
