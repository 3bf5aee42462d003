//! Directed line graph of an undirected topology.
//!
//! Every undirected edge `{v, w}` becomes two line-graph nodes `(v, w)` and
//! `(w, v)`. An arc `(a, b)` exists when `a` enters some vertex that `b`
//! leaves. In [`LineGraphMode::Literal`] the pair `((u, v), (v, u))` is an
//! arc too; [`LineGraphMode::NonBacktracking`] drops those.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::{self, Write};

use serde::{Deserialize, Serialize};

use crate::netsim::NodeId;

/// A directed copy of a physical edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DirectedEdgeId {
    pub tail: NodeId,
    pub head: NodeId,
}

impl DirectedEdgeId {
    pub fn new(tail: NodeId, head: NodeId) -> Self {
        Self { tail, head }
    }

    pub fn reverse(self) -> Self {
        Self { tail: self.head, head: self.tail }
    }
}

impl fmt::Display for DirectedEdgeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{}", self.tail.0, self.head.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineGraphMode {
    #[default]
    Literal,
    NonBacktracking,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Edit {
    Add(NodeId, NodeId),
    Remove(NodeId, NodeId),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LineGraphError {
    SelfLoop(NodeId),
    MissingEdge(NodeId, NodeId),
    DuplicateEdge(NodeId, NodeId),
}

impl fmt::Display for LineGraphError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LineGraphError::SelfLoop(v) => write!(f, "self-loop at node {}", v.0),
            LineGraphError::MissingEdge(a, b) => write!(f, "edge {{{}, {}}} does not exist", a.0, b.0),
            LineGraphError::DuplicateEdge(a, b) => write!(f, "edge {{{}, {}}} already exists", a.0, b.0),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for LineGraphError {}

/// Immutable snapshot; edits return a new snapshot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectedLineGraph {
    mode: LineGraphMode,
    adjacency: BTreeMap<NodeId, BTreeSet<NodeId>>,
    nodes: Vec<DirectedEdgeId>,
    index: BTreeMap<DirectedEdgeId, usize>,
    succ_offsets: Vec<usize>,
    succ: Vec<usize>,
    pred_offsets: Vec<usize>,
    pred: Vec<usize>,
}

impl DirectedLineGraph {
    /// Line graph of the undirected edges `edges`; duplicates are merged.
    pub fn build<I>(edges: I, mode: LineGraphMode) -> Result<Self, LineGraphError>
    where
        I: IntoIterator<Item = (NodeId, NodeId)>,
    {
        let mut adjacency: BTreeMap<NodeId, BTreeSet<NodeId>> = BTreeMap::new();
        for (u, v) in edges {
            if u == v {
                return Err(LineGraphError::SelfLoop(u));
            }
            adjacency.entry(u).or_default().insert(v);
            adjacency.entry(v).or_default().insert(u);
        }
        Ok(Self::from_adjacency(adjacency, mode))
    }

    pub fn empty(mode: LineGraphMode) -> Self {
        Self::from_adjacency(BTreeMap::new(), mode)
    }

    fn from_adjacency(adjacency: BTreeMap<NodeId, BTreeSet<NodeId>>, mode: LineGraphMode) -> Self {
        let nodes: Vec<DirectedEdgeId> = adjacency
            .iter()
            .flat_map(|(&u, nbrs)| nbrs.iter().map(move |&v| DirectedEdgeId::new(u, v)))
            .collect();
        let index: BTreeMap<DirectedEdgeId, usize> = nodes.iter().enumerate().map(|(i, &e)| (e, i)).collect();
        let keep = |a: DirectedEdgeId, b: DirectedEdgeId| mode == LineGraphMode::Literal || b != a.reverse();

        let mut succ_offsets = Vec::with_capacity(nodes.len() + 1);
        let mut succ = Vec::new();
        succ_offsets.push(0);
        for &a in &nodes {
            for &w in &adjacency[&a.head] {
                let b = DirectedEdgeId::new(a.head, w);
                if keep(a, b) {
                    succ.push(index[&b]);
                }
            }
            succ_offsets.push(succ.len());
        }
        let mut pred_offsets = Vec::with_capacity(nodes.len() + 1);
        let mut pred = Vec::new();
        pred_offsets.push(0);
        for &b in &nodes {
            for &u in &adjacency[&b.tail] {
                let a = DirectedEdgeId::new(u, b.tail);
                if keep(a, b) {
                    pred.push(index[&a]);
                }
            }
            pred_offsets.push(pred.len());
        }
        Self { mode, adjacency, nodes, index, succ_offsets, succ, pred_offsets, pred }
    }

    /// Applies one edge edit. Only the two endpoint incidence sets change;
    /// the arc arrays are re-derived from them.
    pub fn incremental_update(&self, edit: Edit) -> Result<Self, LineGraphError> {
        let mut adjacency = self.adjacency.clone();
        match edit {
            Edit::Add(u, v) => {
                if u == v {
                    return Err(LineGraphError::SelfLoop(u));
                }
                if self.has_edge(u, v) {
                    return Err(LineGraphError::DuplicateEdge(u, v));
                }
                adjacency.entry(u).or_default().insert(v);
                adjacency.entry(v).or_default().insert(u);
            }
            Edit::Remove(u, v) => {
                if !self.has_edge(u, v) {
                    return Err(LineGraphError::MissingEdge(u, v));
                }
                for (x, y) in [(u, v), (v, u)] {
                    let set = adjacency.get_mut(&x).expect("endpoint present");
                    set.remove(&y);
                    if set.is_empty() {
                        adjacency.remove(&x);
                    }
                }
            }
        }
        Ok(Self::from_adjacency(adjacency, self.mode))
    }

    pub fn mode(&self) -> LineGraphMode {
        self.mode
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.adjacency.get(&u).is_some_and(|s| s.contains(&v))
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn arc_count(&self) -> usize {
        self.succ.len()
    }

    pub fn nodes(&self) -> &[DirectedEdgeId] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> DirectedEdgeId {
        self.nodes[i]
    }

    pub fn index_of(&self, e: DirectedEdgeId) -> Option<usize> {
        self.index.get(&e).copied()
    }

    /// Line-graph nodes `b` with an arc `(i, b)`.
    pub fn successors(&self, i: usize) -> &[usize] {
        &self.succ[self.succ_offsets[i]..self.succ_offsets[i + 1]]
    }

    /// Line-graph nodes `a` with an arc `(a, i)`.
    pub fn predecessors(&self, i: usize) -> &[usize] {
        &self.pred[self.pred_offsets[i]..self.pred_offsets[i + 1]]
    }

    pub fn arcs(&self) -> impl Iterator<Item = (DirectedEdgeId, DirectedEdgeId)> + '_ {
        (0..self.nodes.len()).flat_map(move |i| self.successors(i).iter().map(move |&j| (self.nodes[i], self.nodes[j])))
    }

    /// Neighbors of physical vertex `v`, ascending.
    pub fn neighbors(&self, v: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.adjacency.get(&v).into_iter().flat_map(|s| s.iter().copied())
    }

    pub fn undirected_edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.nodes.iter().filter(|e| e.tail < e.head).map(|e| (e.tail, e.head))
    }

    /// Plain edge-list text: one `tail->head tail->head` arc per line.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for (a, b) in self.arcs() {
            let _ = writeln!(out, "{a} {b}");
        }
        out
    }
}
