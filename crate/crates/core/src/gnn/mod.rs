//! Recurrent message passing on the directed line graph.
//!
//! Every directed physical edge `(u, v)` carries an embedding. One round
//! encodes each embedding with its edge features, sums an MLP message over
//! the arcs to its line-graph neighbors (the arc feature is the shared
//! physical node), and folds the sum in with a gated recurrent cell. An
//! agent at `v` scores each outgoing edge `(v, w)` from its embedding, its
//! features, the features of `w` and how far the agent has already walked.
//!
//! Backpropagation through time is written out by hand in [`model`].

mod linalg;
pub mod model;
mod params;

use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

pub use model::{
    message_pass, score_edge, score_neighbors, sequence_gradient, sequence_loss, Decision, SequenceLoss, SequenceStep,
};
pub use params::{Adam, GnnConfig, MessageDirection, ParameterSet, T as Tensor, TENSORS};

use crate::linegraph::{DirectedEdgeId, DirectedLineGraph};
use crate::netsim::NodeId;

/// Per line-node features: available link count / capacity, best
/// available fidelity, per-step generation probability.
pub const EDGE_FEATURES: usize = 3;
/// Per physical-node features: swap probability, is-destination,
/// same-cluster-as-destination.
pub const NODE_FEATURES: usize = 3;
/// Agent observation: path length so far over TTL.
pub const OBS_FEATURES: usize = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum GnnError {
    EdgeFeatureLength { expected: usize, got: usize },
    NodeFeaturesMissing(NodeId),
    Isolated(NodeId),
    UnknownEdge(DirectedEdgeId),
    TensorCount { expected: usize, got: usize },
    TensorName { expected: &'static str, got: String },
    TensorShape { name: &'static str, expected: (usize, usize), got: (usize, usize) },
    NonFinite,
}

impl fmt::Display for GnnError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GnnError::EdgeFeatureLength { expected, got } => {
                write!(f, "edge feature buffer has {got} values, expected {expected}")
            }
            GnnError::NodeFeaturesMissing(v) => write!(f, "no node features for node {v}"),
            GnnError::Isolated(v) => write!(f, "node {v} has no neighbors to score"),
            GnnError::UnknownEdge(e) => write!(f, "edge {e} is not in the line graph"),
            GnnError::TensorCount { expected, got } => write!(f, "expected {expected} tensors, found {got}"),
            GnnError::TensorName { expected, got } => write!(f, "expected tensor `{expected}`, found `{got}`"),
            GnnError::TensorShape { name, expected, got } => write!(
                f,
                "tensor `{name}` has shape {}x{}, expected {}x{}",
                got.0, got.1, expected.0, expected.1
            ),
            GnnError::NonFinite => write!(f, "parameters contain non-finite values"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for GnnError {}

/// One embedding per line-graph node, row-major in line-graph order.
#[derive(Debug, Clone, PartialEq)]
pub struct Embeddings {
    graph: Arc<DirectedLineGraph>,
    dim: usize,
    data: Vec<f64>,
}

impl Embeddings {
    pub fn zeros(graph: Arc<DirectedLineGraph>, dim: usize) -> Self {
        let n = graph.node_count();
        Self { graph, dim, data: alloc::vec![0.0; n * dim] }
    }

    pub fn from_raw(graph: Arc<DirectedLineGraph>, dim: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), graph.node_count() * dim, "embedding buffer size");
        Self { graph, dim, data }
    }

    pub fn graph(&self) -> &Arc<DirectedLineGraph> {
        &self.graph
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn get(&self, e: DirectedEdgeId) -> Option<&[f64]> {
        self.graph.index_of(e).map(|i| self.row(i))
    }

    /// Carry embeddings over to `graph`; edges new to it start at zero.
    pub fn realign(&self, graph: &Arc<DirectedLineGraph>) -> Embeddings {
        if Arc::ptr_eq(&self.graph, graph) || *self.graph == **graph {
            return Embeddings { graph: Arc::clone(graph), dim: self.dim, data: self.data.clone() };
        }
        let mut out = Embeddings::zeros(Arc::clone(graph), self.dim);
        for (j, e) in graph.nodes().iter().enumerate() {
            if let Some(i) = self.graph.index_of(*e) {
                out.data[j * self.dim..(j + 1) * self.dim].copy_from_slice(self.row(i));
            }
        }
        out
    }
}

/// Node features for every physical node up to the largest id in use.
pub fn node_feature_rows(features: &[f64], v: NodeId) -> Result<&[f64], GnnError> {
    let i = v.0 as usize * NODE_FEATURES;
    features.get(i..i + NODE_FEATURES).ok_or(GnnError::NodeFeaturesMissing(v))
}
