//! Discrete-time simulation of the physical and quantum topologies.
//!
//! A [`Topology`] fixes which elementary links can exist; a [`World`] runs
//! one episode on it, generating, decaying, reserving and consuming links
//! while satellites move and requests come and go.

mod scenario;
mod topology;
mod world;

pub use scenario::{ConstellationSpec, PerMedium, PerNodeKind, ScenarioError, ScenarioSpec, TtlRule};
pub use topology::{
    generate_topology, EdgeId, Medium, NodeId, NodeKind, PhysicalEdge, PhysicalNode, Placement, Topology,
};
pub use world::{
    compute_edr, ConsumeRecord, EdgeSnapshot, ElementaryLink, EntanglementRequest, EpisodeLog, Event, EventKind,
    FailureReason, LinkCounters, LinkId, MoveError, MoveOutcome, PurgeReason, RequestId, RequestStatus,
    ReservationUnavailable, SimClock, World,
};
