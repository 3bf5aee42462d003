//! Simulation and routing engine for satellite-assisted quantum networks.
//!
//! The crate is `no_std` (with `alloc`) so the physics, the line-graph GNN
//! and the learning loop can be embedded anywhere; file formats, the CLI
//! and experiment orchestration live in the `qroute` crate.
//!
//! Module map:
//! - [`geometry`]: orbits, ground sites, slant range, elevation, visibility
//! - [`linkmodel`]: per-photon success probabilities for GS, SS and fiber links
//! - [`quantum`]: Werner-pair fidelity algebra plus a density-matrix oracle
//! - [`netsim`]: discrete-time world with link generation, decay and requests
//! - [`linegraph`]: directed line graph of the physical topology
//! - [`gnn`]: recurrent message passing on the line graph, with hand-written backprop
//! - [`rl`]: evaluation-function targets, replay and the training loop
//! - [`baselines`] and [`stats`]: heuristic routers and paired significance tests
#![cfg_attr(not(feature = "std"), no_std)]
// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod baselines;
pub mod geometry;
pub mod gnn;
pub mod linegraph;
pub mod linkmodel;
pub mod math;
pub mod netsim;
pub mod quantum;
pub mod rl;
pub mod rng;
pub mod stats;

pub use geometry::{CircularOrbit, EarthModel, EcefPosition, GroundSite};
pub use linegraph::{DirectedEdgeId, DirectedLineGraph, LineGraphMode};
pub use linkmodel::{LinkParams, LinkProbability};
pub use netsim::{NodeId, ScenarioSpec, World};
pub use quantum::{DecayParams, WernerFidelity};
