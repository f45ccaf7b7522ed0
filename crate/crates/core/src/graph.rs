//! Dependence graphs and the graph machinery the discovery algorithms need.
//!
//! Directed graphs may carry loops `k -> k`; acyclicity always refers to
//! cycles of length greater than one. The lifted graph doubles every node
//! into a past copy `k_0` and a future copy `k_1`.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

/// Read access needed by d-separation and ancestor queries.
pub trait DirectedGraph {
    fn node_count(&self) -> usize;
    /// Parents of `v`, excluding `v` itself.
    fn parents_of(&self, v: usize) -> Vec<usize>;
    /// Children of `v`, excluding `v` itself.
    fn children_of(&self, v: usize) -> Vec<usize>;
}

/// Directed graph over `d` nodes, loops allowed, cycles not checked.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct DiGraph {
    d: usize,
    adj: Vec<bool>,
}

impl DiGraph {
    pub fn empty(d: usize) -> Self {
        Self { d, adj: vec![false; d * d] }
    }

    pub fn from_edges(d: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Self::empty(d);
        for &(i, j) in edges {
            g.check(i)?;
            g.check(j)?;
            g.add_edge(i, j);
        }
        Ok(g)
    }

    fn check(&self, v: usize) -> Result<()> {
        if v < self.d {
            Ok(())
        } else {
            Err(Error::NodeOutOfRange { index: v, d: self.d })
        }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adj[i * self.d + j]
    }

    pub fn add_edge(&mut self, i: usize, j: usize) {
        self.adj[i * self.d + j] = true;
    }

    pub fn remove_edge(&mut self, i: usize, j: usize) {
        self.adj[i * self.d + j] = false;
    }

    pub fn has_loop(&self, k: usize) -> bool {
        self.has_edge(k, k)
    }

    /// Edges in row-major order, loops included.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        (0..self.d).flat_map(|i| (0..self.d).map(move |j| (i, j))).filter(|&(i, j)| self.has_edge(i, j)).collect()
    }

    pub fn loops(&self) -> Vec<usize> {
        (0..self.d).filter(|&k| self.has_loop(k)).collect()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().filter(|e| **e).count()
    }

    /// Edges between distinct nodes.
    pub fn proper_edge_count(&self) -> usize {
        self.edge_count() - self.loops().len()
    }

    /// Adjacency matrix with `m[i][j] = 1` iff `i -> j`.
    pub fn adjacency(&self) -> Vec<Vec<u8>> {
        (0..self.d).map(|i| (0..self.d).map(|j| u8::from(self.has_edge(i, j))).collect()).collect()
    }

    /// True when the only directed cycles are loops.
    pub fn is_acyclic(&self) -> bool {
        self.topological_order().is_some()
    }

    /// A topological order ignoring loops, or `None` on a longer cycle.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let mut indeg: Vec<usize> = (0..self.d).map(|v| self.parents_of(v).len()).collect();
        let mut queue: VecDeque<usize> = (0..self.d).filter(|&v| indeg[v] == 0).collect();
        let mut order = Vec::with_capacity(self.d);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for c in self.children_of(v) {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    queue.push_back(c);
                }
            }
        }
        (order.len() == self.d).then_some(order)
    }
}

impl DirectedGraph for DiGraph {
    fn node_count(&self) -> usize {
        self.d
    }

    fn parents_of(&self, v: usize) -> Vec<usize> {
        (0..self.d).filter(|&u| u != v && self.has_edge(u, v)).collect()
    }

    fn children_of(&self, v: usize) -> Vec<usize> {
        (0..self.d).filter(|&u| u != v && self.has_edge(v, u)).collect()
    }
}

impl fmt::Debug for DiGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DiGraph(d={}, edges={:?})", self.d, self.edges())
    }
}

/// Directed graph that is acyclic except for loops.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Dag(DiGraph);

impl Dag {
    pub fn new(d: usize, edges: &[(usize, usize)]) -> Result<Self> {
        Self::try_from(DiGraph::from_edges(d, edges)?)
    }

    pub fn empty(d: usize) -> Self {
        Self(DiGraph::empty(d))
    }

    pub fn as_digraph(&self) -> &DiGraph {
        &self.0
    }

    pub fn into_digraph(self) -> DiGraph {
        self.0
    }

    pub fn d(&self) -> usize {
        self.0.d
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.0.has_edge(i, j)
    }

    pub fn has_loop(&self, k: usize) -> bool {
        self.0.has_loop(k)
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.0.edges()
    }

    pub fn loops(&self) -> Vec<usize> {
        self.0.loops()
    }

    pub fn topological_order(&self) -> Vec<usize> {
        self.0.topological_order().expect("Dag invariant")
    }

    /// Same graph with all loops removed.
    pub fn without_loops(&self) -> Dag {
        let mut g = self.0.clone();
        for k in 0..g.d {
            g.remove_edge(k, k);
        }
        Dag(g)
    }
}

impl TryFrom<DiGraph> for Dag {
    type Error = Error;

    fn try_from(g: DiGraph) -> Result<Self> {
        if g.is_acyclic() {
            Ok(Self(g))
        } else {
            Err(Error::Cyclic)
        }
    }
}

impl DirectedGraph for Dag {
    fn node_count(&self) -> usize {
        self.0.d
    }

    fn parents_of(&self, v: usize) -> Vec<usize> {
        self.0.parents_of(v)
    }

    fn children_of(&self, v: usize) -> Vec<usize> {
        self.0.children_of(v)
    }
}

impl fmt::Debug for Dag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Dag(d={}, edges={:?})", self.0.d, self.0.edges())
    }
}

/// Node of the lifted graph: variable `var` at time copy `time` (0 = past, 1 = future).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LiftedNode {
    pub var: usize,
    pub time: u8,
}

impl LiftedNode {
    pub fn past(var: usize) -> Self {
        Self { var, time: 0 }
    }

    pub fn future(var: usize) -> Self {
        Self { var, time: 1 }
    }

    /// Dense index: `k_0 -> k`, `k_1 -> d + k`.
    pub fn index(self, d: usize) -> usize {
        self.var + self.time as usize * d
    }

    pub fn from_index(idx: usize, d: usize) -> Self {
        Self { var: idx % d, time: (idx / d) as u8 }
    }
}

/// Two-copy past/future graph of a dependence graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LiftedGraph {
    d: usize,
    edges: BTreeSet<(LiftedNode, LiftedNode)>,
}

impl LiftedGraph {
    /// Validates the edge pattern produced by [`lift`].
    pub fn new(d: usize, edges: BTreeSet<(LiftedNode, LiftedNode)>) -> Result<Self> {
        let g = Self { d, edges };
        g.validate()?;
        Ok(g)
    }

    fn validate(&self) -> Result<()> {
        for &(u, v) in &self.edges {
            if u.var >= self.d || v.var >= self.d || u.time > 1 || v.time > 1 {
                return Err(Error::InconsistentLift(format!("node out of range in {u:?}->{v:?}")));
            }
            if u.time == 1 && v.time == 0 {
                return Err(Error::InconsistentLift(format!("edge from future to past {u:?}->{v:?}")));
            }
            if u.var == v.var && u.time == v.time {
                return Err(Error::InconsistentLift(format!("self edge {u:?}")));
            }
        }
        for i in 0..self.d {
            for j in (0..self.d).filter(|&j| j != i) {
                let a = self.has(LiftedNode::past(i), LiftedNode::past(j));
                let b = self.has(LiftedNode::future(i), LiftedNode::future(j));
                let c = self.has(LiftedNode::past(i), LiftedNode::future(j));
                if !(a == b && b == c) {
                    return Err(Error::InconsistentLift(format!("partial edge triple for {i}->{j}")));
                }
            }
        }
        let as_graph = self.to_digraph();
        if !as_graph.is_acyclic() {
            return Err(Error::InconsistentLift("lifted graph has a cycle".into()));
        }
        Ok(())
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn has(&self, u: LiftedNode, v: LiftedNode) -> bool {
        self.edges.contains(&(u, v))
    }

    pub fn edges(&self) -> &BTreeSet<(LiftedNode, LiftedNode)> {
        &self.edges
    }

    /// Plain directed graph on `2d` nodes (past copies first).
    pub fn to_digraph(&self) -> DiGraph {
        let mut g = DiGraph::empty(2 * self.d);
        for &(u, v) in &self.edges {
            g.add_edge(u.index(self.d), v.index(self.d));
        }
        g
    }
}

impl DirectedGraph for LiftedGraph {
    fn node_count(&self) -> usize {
        2 * self.d
    }

    fn parents_of(&self, v: usize) -> Vec<usize> {
        let node = LiftedNode::from_index(v, self.d);
        self.edges.iter().filter(|(_, b)| *b == node).map(|(a, _)| a.index(self.d)).collect()
    }

    fn children_of(&self, v: usize) -> Vec<usize> {
        let node = LiftedNode::from_index(v, self.d);
        self.edges
            .range((node, LiftedNode { var: 0, time: 0 })..)
            .take_while(|(a, _)| *a == node)
            .map(|(_, b)| b.index(self.d))
            .collect()
    }
}

/// Lifted dependence graph: `i_0 -> i_1` for loops and the triple
/// `i_0 -> j_0`, `i_1 -> j_1`, `i_0 -> j_1` for every edge `i -> j`, `i != j`.
pub fn lift(g: &Dag) -> LiftedGraph {
    let mut edges = BTreeSet::new();
    for (i, j) in g.edges() {
        if i == j {
            edges.insert((LiftedNode::past(i), LiftedNode::future(i)));
        } else {
            edges.insert((LiftedNode::past(i), LiftedNode::past(j)));
            edges.insert((LiftedNode::future(i), LiftedNode::future(j)));
            edges.insert((LiftedNode::past(i), LiftedNode::future(j)));
        }
    }
    LiftedGraph { d: g.d(), edges }
}

/// Inverse of [`lift`].
pub fn collapse(lg: &LiftedGraph) -> Result<Dag> {
    lg.validate()?;
    let mut g = DiGraph::empty(lg.d);
    for &(u, v) in &lg.edges {
        if u.var == v.var {
            g.add_edge(u.var, u.var);
        } else if u.time == 0 && v.time == 1 {
            g.add_edge(u.var, v.var);
        }
    }
    Dag::try_from(g)
}

fn check_set(d: usize, s: &[usize]) -> Result<()> {
    match s.iter().find(|&&v| v >= d) {
        Some(&v) => Err(Error::NodeOutOfRange { index: v, d }),
        None => Ok(()),
    }
}

/// `A` and `B` d-separated by `C`, via reachability over active trails.
///
/// Loops never open a trail. Fails if the sets overlap.
pub fn d_separated<G: DirectedGraph + ?Sized>(g: &G, a: &[usize], b: &[usize], c: &[usize]) -> Result<bool> {
    let n = g.node_count();
    for s in [a, b, c] {
        check_set(n, s)?;
    }
    let mut member = vec![0u8; n];
    for (bit, s) in [(1u8, a), (2, b), (4, c)] {
        for &v in s {
            if member[v] & !bit != 0 {
                return Err(Error::OverlappingSets);
            }
            member[v] |= bit;
        }
    }
    let in_c = |v: usize| member[v] & 4 != 0;
    // ancestors of C (C included): colliders there are open
    let mut anc_c = vec![false; n];
    let mut stack: Vec<usize> = c.to_vec();
    while let Some(v) = stack.pop() {
        if !anc_c[v] {
            anc_c[v] = true;
            stack.extend(g.parents_of(v));
        }
    }
    // state: (node, arrived_from_child)
    let mut seen = vec![[false; 2]; n];
    let mut queue: VecDeque<(usize, bool)> = a.iter().map(|&v| (v, true)).collect();
    while let Some((v, up)) = queue.pop_front() {
        if seen[v][usize::from(up)] {
            continue;
        }
        seen[v][usize::from(up)] = true;
        if member[v] & 2 != 0 {
            return Ok(false);
        }
        if up {
            if !in_c(v) {
                queue.extend(g.parents_of(v).into_iter().map(|p| (p, true)));
                queue.extend(g.children_of(v).into_iter().map(|ch| (ch, false)));
            }
        } else {
            if !in_c(v) {
                queue.extend(g.children_of(v).into_iter().map(|ch| (ch, false)));
            }
            if anc_c[v] {
                queue.extend(g.parents_of(v).into_iter().map(|p| (p, true)));
            }
        }
    }
    Ok(true)
}

/// Reflexive-transitive closure of the parent relation at `v`.
pub fn ancestors<G: DirectedGraph + ?Sized>(g: &G, v: usize) -> BTreeSet<usize> {
    let mut out = BTreeSet::new();
    let mut stack = vec![v];
    while let Some(u) = stack.pop() {
        if out.insert(u) {
            stack.extend(g.parents_of(u));
        }
    }
    out
}

/// Descendants of `v`, `v` included.
pub fn descendants<G: DirectedGraph + ?Sized>(g: &G, v: usize) -> BTreeSet<usize> {
    let mut out = BTreeSet::new();
    let mut stack = vec![v];
    while let Some(u) = stack.pop() {
        if out.insert(u) {
            stack.extend(g.children_of(u));
        }
    }
    out
}

/// Erdős–Rényi DAG: random node order, each forward pair kept with
/// probability `edge_prob`, each loop with probability `loop_prob`.
pub fn sample_er_dag(d: usize, edge_prob: f64, loop_prob: f64, rng: &mut Rng) -> Dag {
    let mut order: Vec<usize> = (0..d).collect();
    order.shuffle(rng);
    let mut g = DiGraph::empty(d);
    for a in 0..d {
        for b in a + 1..d {
            if rng.random::<f64>() < edge_prob {
                g.add_edge(order[a], order[b]);
            }
        }
    }
    for k in 0..d {
        if rng.random::<f64>() < loop_prob {
            g.add_edge(k, k);
        }
    }
    Dag(g)
}

/// Edge-end mark of a mixed graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mark {
    Tail,
    Arrow,
    Circle,
}

/// Graph with edge-end marks (CPDAG, MAG, PAG encodings). Loops are kept as
/// per-node flags outside the mark table.
#[derive(Clone, PartialEq, Eq, Default)]
pub struct MixedGraph {
    d: usize,
    marks: BTreeMap<(usize, usize), (Mark, Mark)>,
    loops: Vec<bool>,
}

impl MixedGraph {
    pub fn new(d: usize) -> Self {
        Self { d, marks: BTreeMap::new(), loops: vec![false; d] }
    }

    /// Directed graph as tail/arrow marks, loops copied.
    pub fn from_digraph(g: &DiGraph) -> Self {
        let mut m = Self::new(g.d());
        for (i, j) in g.edges() {
            if i == j {
                m.loops[i] = true;
            } else if g.has_edge(j, i) {
                m.set(i, j, Mark::Tail, Mark::Tail);
            } else {
                m.set(i, j, Mark::Tail, Mark::Arrow);
            }
        }
        m
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Sets the edge `i *-* j` with `at_i` at `i` and `at_j` at `j`.
    pub fn set(&mut self, i: usize, j: usize, at_i: Mark, at_j: Mark) {
        assert!(i != j, "mixed graphs store loops separately");
        if i < j {
            self.marks.insert((i, j), (at_i, at_j));
        } else {
            self.marks.insert((j, i), (at_j, at_i));
        }
    }

    pub fn remove(&mut self, i: usize, j: usize) {
        self.marks.remove(&(i.min(j), i.max(j)));
    }

    /// Marks `(at_i, at_j)` of the edge between `i` and `j`.
    pub fn get(&self, i: usize, j: usize) -> Option<(Mark, Mark)> {
        if i < j {
            self.marks.get(&(i, j)).copied()
        } else {
            self.marks.get(&(j, i)).map(|&(a, b)| (b, a))
        }
    }

    pub fn adjacent(&self, i: usize, j: usize) -> bool {
        i != j && self.get(i, j).is_some()
    }

    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        (0..self.d).filter(|&j| self.adjacent(i, j)).collect()
    }

    /// `i -> j`.
    pub fn is_directed(&self, i: usize, j: usize) -> bool {
        self.get(i, j) == Some((Mark::Tail, Mark::Arrow))
    }

    /// `i - j`.
    pub fn is_undirected(&self, i: usize, j: usize) -> bool {
        self.get(i, j) == Some((Mark::Tail, Mark::Tail))
    }

    pub fn set_loop(&mut self, k: usize, present: bool) {
        self.loops[k] = present;
    }

    pub fn has_loop(&self, k: usize) -> bool {
        self.loops[k]
    }

    /// Edges as `(i, j, mark at i, mark at j)` with `i < j`.
    pub fn edges(&self) -> Vec<(usize, usize, Mark, Mark)> {
        self.marks.iter().map(|(&(i, j), &(a, b))| (i, j, a, b)).collect()
    }

    pub fn undirected_edges(&self) -> Vec<(usize, usize)> {
        self.edges().into_iter().filter(|e| e.2 == Mark::Tail && e.3 == Mark::Tail).map(|e| (e.0, e.1)).collect()
    }

    /// Adjacency view: `i -> j` as one arc, undirected edges as both arcs.
    /// Arrow/arrow and circle marks contribute no arcs.
    pub fn to_digraph(&self) -> DiGraph {
        let mut g = DiGraph::empty(self.d);
        for (i, j, a, b) in self.edges() {
            match (a, b) {
                (Mark::Tail, Mark::Arrow) => g.add_edge(i, j),
                (Mark::Arrow, Mark::Tail) => g.add_edge(j, i),
                (Mark::Tail, Mark::Tail) => {
                    g.add_edge(i, j);
                    g.add_edge(j, i);
                }
                _ => {}
            }
        }
        for k in 0..self.d {
            if self.loops[k] {
                g.add_edge(k, k);
            }
        }
        g
    }
}

impl fmt::Debug for MixedGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sym = |m: Mark, left: bool| match (m, left) {
            (Mark::Tail, _) => "-",
            (Mark::Arrow, true) => "<",
            (Mark::Arrow, false) => ">",
            (Mark::Circle, _) => "o",
        };
        let parts: Vec<String> =
            self.edges().iter().map(|&(i, j, a, b)| format!("{i}{}-{}{j}", sym(a, true), sym(b, false))).collect();
        write!(f, "MixedGraph(d={}, [{}], loops={:?})", self.d, parts.join(", "), self.loops)
    }
}

/// Separating sets found for non-adjacent pairs.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SepSetTable {
    sets: BTreeMap<(usize, usize), Vec<usize>>,
}

impl SepSetTable {
    pub fn insert(&mut self, i: usize, j: usize, set: Vec<usize>) {
        self.sets.insert((i.min(j), i.max(j)), set);
    }

    pub fn get(&self, i: usize, j: usize) -> Option<&[usize]> {
        self.sets.get(&(i.min(j), i.max(j))).map(|v| v.as_slice())
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }
}

/// Applies Meek rules R1–R4 to a tail/arrow pattern until nothing changes.
pub fn apply_meek_rules(pg: &MixedGraph) -> MixedGraph {
    let mut g = pg.clone();
    let d = g.d;
    loop {
        let mut changed = false;
        for (x, y) in g.undirected_edges() {
            for (a, b) in [(x, y), (y, x)] {
                if g.is_undirected(a, b) && meek_orients(&g, a, b) {
                    g.set(a, b, Mark::Tail, Mark::Arrow);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    debug_assert_eq!(g.d, d);
    g
}

/// Whether one of R1–R4 orients the undirected edge `a - b` as `a -> b`.
fn meek_orients(g: &MixedGraph, a: usize, b: usize) -> bool {
    let d = g.d;
    // R1: c -> a - b, c and b non-adjacent
    if (0..d).any(|c| c != b && g.is_directed(c, a) && !g.adjacent(c, b)) {
        return true;
    }
    // R2: a -> c -> b
    if (0..d).any(|c| g.is_directed(a, c) && g.is_directed(c, b)) {
        return true;
    }
    // R3: a - c -> b, a - e -> b, c and e non-adjacent
    let into_b: Vec<usize> = (0..d).filter(|&c| c != a && g.is_undirected(a, c) && g.is_directed(c, b)).collect();
    for (p, &c) in into_b.iter().enumerate() {
        if into_b[p + 1..].iter().any(|&e| !g.adjacent(c, e)) {
            return true;
        }
    }
    // R4: a - c -> e -> b, a adjacent to e, c and b non-adjacent
    for c in (0..d).filter(|&c| c != b && g.is_undirected(a, c) && !g.adjacent(c, b)) {
        if (0..d).any(|e| e != a && g.is_directed(c, e) && g.is_directed(e, b) && g.adjacent(a, e)) {
            return true;
        }
    }
    false
}

/// Skeleton of `g` with its unshielded colliders oriented, loops dropped.
pub fn pattern_of(g: &Dag) -> MixedGraph {
    let d = g.d();
    let mut m = MixedGraph::new(d);
    for (i, j) in g.edges() {
        if i != j {
            m.set(i, j, Mark::Tail, Mark::Tail);
        }
    }
    for c in 0..d {
        let pa = g.parents_of(c);
        for (p, &a) in pa.iter().enumerate() {
            for &b in &pa[p + 1..] {
                if !m.adjacent(a, b) {
                    m.set(a, c, Mark::Tail, Mark::Arrow);
                    m.set(b, c, Mark::Tail, Mark::Arrow);
                }
            }
        }
    }
    m
}

/// Completed partially directed graph of the Markov equivalence class of `g`.
pub fn cpdag(g: &Dag) -> MixedGraph {
    apply_meek_rules(&pattern_of(g))
}

/// Projects `g` onto the `observed` nodes as a maximal ancestral graph.
///
/// Node `k` of the result is `observed[k]`. Two observed nodes are adjacent
/// iff an inducing path relative to the latent nodes connects them, which
/// is decided by d-connection given their observed ancestors. Marks follow
/// ancestry: tail at `u` iff `u` is an ancestor of its neighbour. The MAG
/// carries no loops.
pub fn project_to_mag(g: &Dag, observed: &[usize]) -> Result<MixedGraph> {
    check_set(g.d(), observed)?;
    let anc: Vec<BTreeSet<usize>> = (0..g.d()).map(|v| ancestors(g, v)).collect();
    let is_obs: BTreeSet<usize> = observed.iter().copied().collect();
    if is_obs.len() != observed.len() {
        return Err(Error::OverlappingSets);
    }
    let mut m = MixedGraph::new(observed.len());
    for (p, &u) in observed.iter().enumerate() {
        for (q, &v) in observed.iter().enumerate().skip(p + 1) {
            let cond: Vec<usize> =
                anc[u].union(&anc[v]).copied().filter(|w| *w != u && *w != v && is_obs.contains(w)).collect();
            if d_separated(g, &[u], &[v], &cond)? {
                continue;
            }
            let u_anc_v = anc[v].contains(&u);
            let v_anc_u = anc[u].contains(&v);
            let (mu, mv) = match (u_anc_v, v_anc_u) {
                (true, false) => (Mark::Tail, Mark::Arrow),
                (false, true) => (Mark::Arrow, Mark::Tail),
                (false, false) => (Mark::Arrow, Mark::Arrow),
                (true, true) => unreachable!("acyclic graph"),
            };
            m.set(p, q, mu, mv);
        }
    }
    Ok(m)
}

/// Structural Hamming distance: entrywise L1 distance of the adjacency
/// matrices, diagonal (loops) included. A reversed edge costs 2.
pub fn shd(g1: &DiGraph, g2: &DiGraph) -> Result<usize> {
    if g1.d() != g2.d() {
        return Err(Error::NodeCountMismatch(g1.d(), g2.d()));
    }
    Ok(g1.adj.iter().zip(&g2.adj).filter(|(a, b)| a != b).count())
}

/// SHD restricted to off-diagonal entries.
pub fn shd_without_loops(g1: &DiGraph, g2: &DiGraph) -> Result<usize> {
    let total = shd(g1, g2)?;
    let diag = (0..g1.d()).filter(|&k| g1.has_loop(k) != g2.has_loop(k)).count();
    Ok(total - diag)
}

/// SHD normalised by `d (d - 1)`.
pub fn nshd(g1: &DiGraph, g2: &DiGraph) -> Result<f64> {
    let d = g1.d();
    let s = shd(g1, g2)?;
    if d < 2 {
        return Ok(s as f64);
    }
    Ok(s as f64 / (d * (d - 1)) as f64)
}

/// JSON form of a directed graph: `{"d": .., "edges": [[i, j], ..], "loops": [k, ..]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphJson {
    pub d: usize,
    pub edges: Vec<[usize; 2]>,
    #[serde(default)]
    pub loops: Vec<usize>,
}

impl From<&DiGraph> for GraphJson {
    fn from(g: &DiGraph) -> Self {
        Self {
            d: g.d(),
            edges: g.edges().into_iter().filter(|(i, j)| i != j).map(|(i, j)| [i, j]).collect(),
            loops: g.loops(),
        }
    }
}

impl GraphJson {
    pub fn to_digraph(&self) -> Result<DiGraph> {
        let mut edges: Vec<(usize, usize)> = self.edges.iter().map(|e| (e[0], e[1])).collect();
        edges.extend(self.loops.iter().map(|&k| (k, k)));
        DiGraph::from_edges(self.d, &edges)
    }

    pub fn to_dag(&self) -> Result<Dag> {
        Dag::try_from(self.to_digraph()?)
    }
}

/// JSON form of a mixed graph: `{"d": .., "marks": [[i, j, "tail", "arrow"], ..], "loops": [..]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MixedGraphJson {
    pub d: usize,
    pub marks: Vec<(usize, usize, Mark, Mark)>,
    #[serde(default)]
    pub loops: Vec<usize>,
}

impl From<&MixedGraph> for MixedGraphJson {
    fn from(g: &MixedGraph) -> Self {
        Self { d: g.d(), marks: g.edges(), loops: (0..g.d()).filter(|&k| g.has_loop(k)).collect() }
    }
}

impl MixedGraphJson {
    pub fn to_graph(&self) -> Result<MixedGraph> {
        let mut m = MixedGraph::new(self.d);
        for &(i, j, a, b) in &self.marks {
            check_set(self.d, &[i, j])?;
            if i == j {
                return Err(Error::Parse(format!("mark entry for loop at {i}")));
            }
            m.set(i, j, a, b);
        }
        for &k in &self.loops {
            check_set(self.d, &[k])?;
            m.set_loop(k, true);
        }
        Ok(m)
    }
}
