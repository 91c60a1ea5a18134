//! Finite simple graphs, directed graphs and circuits.
//!
//! Vertices are dense `usize` ids. Every ordering used for tie-breaking is the
//! natural order on those ids, so results are reproducible given a seed.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

pub type Vertex = usize;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("self-loop at vertex {0}")]
    SelfLoop(Vertex),
    #[error("parallel edge {{{0}, {1}}}")]
    ParallelEdge(Vertex, Vertex),
    #[error("vertex {vertex} out of range (graph has {count} vertices)")]
    VertexOutOfRange { vertex: Vertex, count: usize },
    #[error("graph is not connected")]
    Disconnected,
    #[error("graph has no vertices")]
    Empty,
    #[error("duplicate arc ({0}, {1})")]
    DuplicateArc(Vertex, Vertex),
    #[error("arc ({0}, {1}) uses a vertex outside the vertex set")]
    ArcOutsideVertexSet(Vertex, Vertex),
    #[error("no path from {0} to the target set")]
    Unreachable(Vertex),
    #[error("target set is empty")]
    EmptyTargets,
    #[error("invalid circuit: {0}")]
    InvalidCircuit(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("unknown built-in graph `{0}`")]
    UnknownBuiltin(String),
    #[error("io error: {0}")]
    Io(String),
}

/// Connected, loop-free undirected graph without parallel edges.
///
/// Edges are stored once as `(u, v)` with `u < v`; the position of an edge in
/// [`Graph::edges`] is its edge id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    edges: Vec<(Vertex, Vertex)>,
    /// Sorted `(neighbor, edge id)` lists.
    adjacency: Vec<Vec<(Vertex, usize)>>,
}

impl Graph {
    pub fn new(vertex_count: usize, edges: &[(Vertex, Vertex)]) -> Result<Self, GraphError> {
        if vertex_count == 0 {
            return Err(GraphError::Empty);
        }
        let mut canonical = BTreeSet::new();
        for &(u, v) in edges {
            for w in [u, v] {
                if w >= vertex_count {
                    return Err(GraphError::VertexOutOfRange { vertex: w, count: vertex_count });
                }
            }
            if u == v {
                return Err(GraphError::SelfLoop(u));
            }
            let key = (u.min(v), u.max(v));
            if !canonical.insert(key) {
                return Err(GraphError::ParallelEdge(key.0, key.1));
            }
        }
        let edges: Vec<_> = canonical.into_iter().collect();
        let mut adjacency = vec![Vec::new(); vertex_count];
        for (id, &(u, v)) in edges.iter().enumerate() {
            adjacency[u].push((v, id));
            adjacency[v].push((u, id));
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        let graph = Graph { edges, adjacency };
        if !graph.is_connected() {
            return Err(GraphError::Disconnected);
        }
        Ok(graph)
    }

    /// Parses an edge list: one `u v` pair per line, `#` starts a comment.
    /// The vertex set is `0..=max id`.
    pub fn from_edge_list(text: &str) -> Result<Self, GraphError> {
        let mut edges = Vec::new();
        let mut max_id = None;
        for (index, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |message: String| GraphError::Parse { line: index + 1, message };
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 2 {
                return Err(parse_err(format!("expected `u v`, got `{line}`")));
            }
            let mut ids = [0usize; 2];
            for (slot, field) in ids.iter_mut().zip(&fields) {
                *slot = field
                    .parse()
                    .map_err(|_| parse_err(format!("`{field}` is not a non-negative integer")))?;
            }
            max_id = Some(max_id.map_or(ids[0].max(ids[1]), |m: usize| m.max(ids[0]).max(ids[1])));
            edges.push((ids[0], ids[1]));
        }
        let count = max_id.map_or(0, |m| m + 1);
        Graph::new(count, &edges)
    }

    pub fn from_edge_list_file(path: &Path) -> Result<Self, GraphError> {
        let text = std::fs::read_to_string(path).map_err(|e| GraphError::Io(e.to_string()))?;
        Graph::from_edge_list(&text)
    }

    pub fn to_edge_list(&self) -> String {
        self.edges.iter().map(|(u, v)| format!("{u} {v}\n")).collect()
    }

    pub fn vertex_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn vertices(&self) -> std::ops::Range<Vertex> {
        0..self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(Vertex, Vertex)] {
        &self.edges
    }

    /// Neighbors of `v` in increasing order, each paired with the edge id.
    pub fn neighbors(&self, v: Vertex) -> &[(Vertex, usize)] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: Vertex) -> usize {
        self.adjacency[v].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn edge_id(&self, u: Vertex, v: Vertex) -> Option<usize> {
        self.adjacency
            .get(u)?
            .binary_search_by_key(&v, |&(w, _)| w)
            .ok()
            .map(|i| self.adjacency[u][i].1)
    }

    pub fn are_adjacent(&self, u: Vertex, v: Vertex) -> bool {
        self.edge_id(u, v).is_some()
    }

    /// A connected graph is a tree iff `|E| = |V| - 1`.
    pub fn has_circuit(&self) -> bool {
        self.edge_count() >= self.vertex_count()
    }

    fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.vertex_count()];
        let mut stack = vec![0];
        seen[0] = true;
        let mut reached = 1;
        while let Some(v) = stack.pop() {
            for &(w, _) in &self.adjacency[v] {
                if !seen[w] {
                    seen[w] = true;
                    reached += 1;
                    stack.push(w);
                }
            }
        }
        reached == self.vertex_count()
    }

    /// Both orientations of every edge.
    pub fn to_directed(&self) -> DiGraph {
        let arcs = self.edges.iter().flat_map(|&(u, v)| [(u, v), (v, u)]);
        DiGraph::new(self.vertices(), arcs).expect("orientations of a simple graph form a simple digraph")
    }

    /// Minimum-length path from `from` to any vertex of `targets`. Among
    /// shortest paths the lexicographically smallest vertex sequence wins.
    pub fn shortest_path(&self, from: Vertex, targets: &BTreeSet<Vertex>) -> Result<Vec<Vertex>, GraphError> {
        if targets.is_empty() {
            return Err(GraphError::EmptyTargets);
        }
        if from >= self.vertex_count() {
            return Err(GraphError::VertexOutOfRange { vertex: from, count: self.vertex_count() });
        }
        if targets.contains(&from) {
            return Ok(vec![from]);
        }
        // BFS with sorted neighbor lists and first-discovery parents yields the
        // lexicographically smallest shortest path to every vertex.
        let mut parent: Vec<Option<Vertex>> = vec![None; self.vertex_count()];
        let mut dist = vec![usize::MAX; self.vertex_count()];
        dist[from] = 0;
        let mut queue = VecDeque::from([from]);
        let mut best_dist = usize::MAX;
        let mut hits = Vec::new();
        while let Some(v) = queue.pop_front() {
            if dist[v] >= best_dist {
                break;
            }
            for &(w, _) in &self.adjacency[v] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    parent[w] = Some(v);
                    if targets.contains(&w) {
                        best_dist = dist[w];
                        hits.push(w);
                    }
                    queue.push_back(w);
                }
            }
        }
        let path_to = |mut w: Vertex| {
            let mut path = vec![w];
            while let Some(p) = parent[w] {
                path.push(p);
                w = p;
            }
            path.reverse();
            path
        };
        hits.into_iter().map(path_to).min().ok_or(GraphError::Unreachable(from))
    }
}

/// Directed graph without self-loops; each ordered pair appears at most once.
/// The vertex set is an explicit subset of ids, so subgraphs keep the ids of
/// their parent graph.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DiGraph {
    vertices: BTreeSet<Vertex>,
    out: BTreeMap<Vertex, BTreeSet<Vertex>>,
    arc_count: usize,
}

impl DiGraph {
    pub fn new(
        vertices: impl IntoIterator<Item = Vertex>,
        arcs: impl IntoIterator<Item = (Vertex, Vertex)>,
    ) -> Result<Self, GraphError> {
        let vertices: BTreeSet<Vertex> = vertices.into_iter().collect();
        let mut out: BTreeMap<Vertex, BTreeSet<Vertex>> = vertices.iter().map(|&v| (v, BTreeSet::new())).collect();
        let mut arc_count = 0;
        for (u, v) in arcs {
            if u == v {
                return Err(GraphError::SelfLoop(u));
            }
            if !vertices.contains(&v) {
                return Err(GraphError::ArcOutsideVertexSet(u, v));
            }
            let targets = out.get_mut(&u).ok_or(GraphError::ArcOutsideVertexSet(u, v))?;
            if !targets.insert(v) {
                return Err(GraphError::DuplicateArc(u, v));
            }
            arc_count += 1;
        }
        Ok(DiGraph { vertices, out, arc_count })
    }

    pub fn vertices(&self) -> &BTreeSet<Vertex> {
        &self.vertices
    }

    pub fn arcs(&self) -> impl Iterator<Item = (Vertex, Vertex)> + '_ {
        self.out.iter().flat_map(|(&u, ws)| ws.iter().map(move |&w| (u, w)))
    }

    pub fn arc_count(&self) -> usize {
        self.arc_count
    }

    pub fn contains_vertex(&self, v: Vertex) -> bool {
        self.vertices.contains(&v)
    }

    pub fn has_arc(&self, u: Vertex, v: Vertex) -> bool {
        self.out.get(&u).is_some_and(|ws| ws.contains(&v))
    }

    /// Out-neighbors of `v` in increasing order (empty for unknown vertices).
    pub fn successors(&self, v: Vertex) -> impl Iterator<Item = Vertex> + '_ {
        self.out.get(&v).into_iter().flatten().copied()
    }

    pub fn out_degree(&self, v: Vertex) -> usize {
        self.out.get(&v).map_or(0, BTreeSet::len)
    }

    pub fn out_degrees(&self) -> BTreeMap<Vertex, usize> {
        self.out.iter().map(|(&v, ws)| (v, ws.len())).collect()
    }

    pub fn in_degrees(&self) -> BTreeMap<Vertex, usize> {
        let mut degrees: BTreeMap<Vertex, usize> = self.vertices.iter().map(|&v| (v, 0)).collect();
        for (_, w) in self.arcs() {
            *degrees.get_mut(&w).expect("arc target is a vertex") += 1;
        }
        degrees
    }

    /// Weak components (arc direction ignored), each sorted, ordered by their
    /// smallest vertex.
    pub fn weak_components(&self) -> Vec<Vec<Vertex>> {
        let mut undirected: BTreeMap<Vertex, Vec<Vertex>> = self.vertices.iter().map(|&v| (v, Vec::new())).collect();
        for (u, w) in self.arcs() {
            undirected.get_mut(&u).unwrap().push(w);
            undirected.get_mut(&w).unwrap().push(u);
        }
        let mut seen = BTreeSet::new();
        let mut components = Vec::new();
        for &start in &self.vertices {
            if !seen.insert(start) {
                continue;
            }
            let mut component = vec![start];
            let mut stack = vec![start];
            while let Some(v) = stack.pop() {
                for &w in &undirected[&v] {
                    if seen.insert(w) {
                        component.push(w);
                        stack.push(w);
                    }
                }
            }
            component.sort_unstable();
            components.push(component);
        }
        components
    }

    /// Induced subgraph on `keep`.
    pub fn induced(&self, keep: &BTreeSet<Vertex>) -> DiGraph {
        let vertices: BTreeSet<Vertex> = self.vertices.intersection(keep).copied().collect();
        let arcs: Vec<_> = self
            .arcs()
            .filter(|(u, w)| vertices.contains(u) && vertices.contains(w))
            .collect();
        DiGraph::new(vertices, arcs).expect("subgraph of a valid digraph")
    }

    /// Whether the subgraph induced by `component` contains a directed cycle.
    pub fn has_cycle_within(&self, component: &[Vertex]) -> bool {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            Fresh,
            Active,
            Done,
        }
        let inside: BTreeSet<Vertex> = component.iter().copied().collect();
        let mut mark: BTreeMap<Vertex, Mark> = inside.iter().map(|&v| (v, Mark::Fresh)).collect();
        for &root in &inside {
            if mark[&root] != Mark::Fresh {
                continue;
            }
            // Iterative DFS: (vertex, successors not yet explored).
            let mut stack: Vec<(Vertex, Vec<Vertex>)> = vec![(root, self.successors(root).collect())];
            mark.insert(root, Mark::Active);
            while let Some((v, pending)) = stack.last_mut() {
                let v = *v;
                match pending.pop() {
                    Some(w) if inside.contains(&w) => match mark[&w] {
                        Mark::Active => return true,
                        Mark::Fresh => {
                            mark.insert(w, Mark::Active);
                            stack.push((w, self.successors(w).collect()));
                        }
                        Mark::Done => {}
                    },
                    Some(_) => {}
                    None => {
                        mark.insert(v, Mark::Done);
                        stack.pop();
                    }
                }
            }
        }
        false
    }

    /// All elementary directed circuits, canonicalized.
    ///
    /// Each circuit is found exactly once, from its smallest vertex, by a
    /// backtracking search restricted to larger vertices. The cost is
    /// exponential in general; intended for the small graphs used here.
    pub fn enumerate_circuits(&self) -> BTreeSet<Circuit> {
        let mut found = BTreeSet::new();
        for &start in &self.vertices {
            let mut path = vec![start];
            let mut on_path = BTreeSet::from([start]);
            self.extend_circuits(start, &mut path, &mut on_path, &mut found);
        }
        found
    }

    fn extend_circuits(
        &self,
        start: Vertex,
        path: &mut Vec<Vertex>,
        on_path: &mut BTreeSet<Vertex>,
        found: &mut BTreeSet<Circuit>,
    ) {
        let tip = *path.last().expect("path starts non-empty");
        for w in self.successors(tip) {
            if w == start && path.len() >= 2 {
                found.insert(Circuit { vertices: path.clone() });
            } else if w > start && !on_path.contains(&w) {
                path.push(w);
                on_path.insert(w);
                self.extend_circuits(start, path, on_path, found);
                on_path.remove(&w);
                path.pop();
            }
        }
    }

    /// If every vertex has exactly one outgoing and one incoming arc, the graph
    /// is a disjoint union of circuits; returns them. `None` otherwise.
    pub fn as_disjoint_circuits(&self) -> Option<Vec<Circuit>> {
        if self.vertices.is_empty() {
            return None;
        }
        if self.out.values().any(|ws| ws.len() != 1) || self.in_degrees().values().any(|&d| d != 1) {
            return None;
        }
        let mut seen = BTreeSet::new();
        let mut circuits = Vec::new();
        for &start in &self.vertices {
            if seen.contains(&start) {
                continue;
            }
            let mut cycle = Vec::new();
            let mut v = start;
            while seen.insert(v) {
                cycle.push(v);
                v = self.successors(v).next().expect("out-degree is one");
            }
            circuits.push(Circuit::from_sequence(cycle).ok()?);
        }
        Some(circuits)
    }
}

/// A directed circuit up to rotation, stored starting at its smallest vertex.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct Circuit {
    vertices: Vec<Vertex>,
}

impl Circuit {
    /// Canonicalizes any rotation of a cycle of distinct vertices.
    ///
    /// Length-2 cycles are accepted so that general directed inputs can be
    /// reported faithfully; they never arise from positively crossed edges.
    pub fn from_sequence(sequence: Vec<Vertex>) -> Result<Self, GraphError> {
        if sequence.len() < 2 {
            return Err(GraphError::InvalidCircuit(format!("length {} < 2", sequence.len())));
        }
        let distinct: BTreeSet<_> = sequence.iter().collect();
        if distinct.len() != sequence.len() {
            return Err(GraphError::InvalidCircuit("repeated vertex".into()));
        }
        let pivot = sequence
            .iter()
            .enumerate()
            .min_by_key(|&(_, v)| v)
            .map(|(i, _)| i)
            .expect("non-empty");
        let mut vertices = sequence;
        vertices.rotate_left(pivot);
        Ok(Circuit { vertices })
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn arcs(&self) -> impl Iterator<Item = (Vertex, Vertex)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn is_circuit_of(&self, digraph: &DiGraph) -> bool {
        self.arcs().all(|(u, v)| digraph.has_arc(u, v))
    }

    pub fn is_disjoint_from(&self, other: &Circuit) -> bool {
        self.vertices.iter().all(|v| !other.vertices.contains(v))
    }
}

impl fmt::Display for Circuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.vertices.iter().map(ToString::to_string).collect();
        write!(f, "({})", parts.join(" "))
    }
}

/// Names of the built-in graphs, in display order.
pub const BUILTIN_GRAPHS: &[(&str, &str)] = &[
    ("edge", "two vertices joined by one edge"),
    ("path3", "path 0-1-2"),
    ("triangle", "3-cycle"),
    ("star4", "star K_{1,4} with hub 0"),
    ("cycle5", "5-cycle"),
    ("theta", "two hubs 0 and 1 joined by three paths of length 2"),
    ("two-triangles-bridge", "triangles 0-1-2 and 3-4-5 joined by the bridge 2-3"),
    ("figure3", "10-vertex ladder a..j = 0..9 with two outer squares"),
];

/// Letters `a..j` of the ladder graph map to `0..9`.
const FIGURE3_EDGES: &[(char, char)] = &[
    ('a', 'b'),
    ('a', 'c'),
    ('b', 'd'),
    ('c', 'd'),
    ('c', 'e'),
    ('d', 'f'),
    ('e', 'f'),
    ('a', 'g'),
    ('b', 'h'),
    ('g', 'h'),
    ('g', 'i'),
    ('h', 'j'),
    ('i', 'j'),
];

pub fn builtin(name: &str) -> Result<Graph, GraphError> {
    let letter = |c: char| c as usize - 'a' as usize;
    let (n, edges): (usize, Vec<(Vertex, Vertex)>) = match name {
        "edge" => (2, vec![(0, 1)]),
        "path3" => (3, vec![(0, 1), (1, 2)]),
        "triangle" => (3, vec![(0, 1), (1, 2), (0, 2)]),
        "star4" => (5, vec![(0, 1), (0, 2), (0, 3), (0, 4)]),
        "cycle5" => (5, vec![(0, 1), (1, 2), (2, 3), (3, 4), (0, 4)]),
        "theta" => (5, vec![(0, 2), (2, 1), (0, 3), (3, 1), (0, 4), (4, 1)]),
        "two-triangles-bridge" => (6, vec![(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (2, 3)]),
        "figure3" => (10, FIGURE3_EDGES.iter().map(|&(a, b)| (letter(a), letter(b))).collect()),
        other => return Err(GraphError::UnknownBuiltin(other.to_string())),
    };
    Graph::new(n, &edges)
}
