//! Discrete-time world: satellite motion, link generation, decay, requests,
//! reservations and end-to-end consumption.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::scenario::{ScenarioError, ScenarioSpec};
use super::topology::{EdgeId, Medium, NodeId, NodeKind, Placement, Topology};
use crate::geometry::{self, EcefPosition};
use crate::linegraph::{DirectedLineGraph, Edit};
use crate::linkmodel::{self, LinkProbability};
use crate::quantum::{self, DecayParams, WernerFidelity};
use crate::rng::{self, SimRng, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LinkId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RequestId(pub u64);

impl fmt::Display for RequestId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimClock {
    pub step_index: u64,
    pub step_duration_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementaryLink {
    pub id: LinkId,
    pub edge: EdgeId,
    pub fidelity_at_creation: WernerFidelity,
    pub created_at: u64,
    pub reserved_by: Option<RequestId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestStatus {
    Planning,
    Completed,
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureReason {
    Expired,
    MissingLink,
    SwapFailed,
    LowFidelity,
    /// The router gave up (e.g. destination unreachable in its view).
    Abandoned,
    EpisodeEnd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PurgeReason {
    Decayed,
    /// The edge lost line of sight and its memories were flushed.
    EdgeLost,
}

/// What happened when a path was consumed. `hop_fidelities[i]` is the
/// decayed fidelity of the link used on hop `i` (`None` if no link was
/// available); `qualities[j]` and `swaps[j]` belong to intermediate node
/// `j + 1` of the path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsumeRecord {
    pub hop_fidelities: Vec<Option<f64>>,
    pub qualities: Vec<f64>,
    pub swaps: Vec<bool>,
    pub fidelity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntanglementRequest {
    pub id: RequestId,
    pub pair: usize,
    pub source: NodeId,
    pub destination: NodeId,
    pub ttl_steps: u32,
    pub created_at: u64,
    pub status: RequestStatus,
    pub position: NodeId,
    pub path: Vec<NodeId>,
    pub hops: Vec<Option<EdgeId>>,
    pub finished_at: Option<u64>,
    pub failure: Option<FailureReason>,
    pub outcome: Option<ConsumeRecord>,
}

impl EntanglementRequest {
    pub fn steps_taken(&self) -> usize {
        self.path.len() - 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event_type", content = "payload", rename_all = "snake_case")]
pub enum EventKind {
    LinkCreated { link: LinkId, edge: EdgeId, fidelity: f64 },
    LinkPurged { link: LinkId, edge: EdgeId, reason: PurgeReason },
    LinkConsumed { link: LinkId, edge: EdgeId, request: RequestId },
    EdgeActivated { edge: EdgeId },
    EdgeDeactivated { edge: EdgeId },
    RequestSpawned { request: RequestId, source: NodeId, destination: NodeId, ttl: u32 },
    AgentMoved { request: RequestId, from: NodeId, to: NodeId, reserved: Option<LinkId> },
    RequestCompleted { request: RequestId, fidelity: f64 },
    RequestFailed { request: RequestId, reason: FailureReason },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub step: u64,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinkCounters {
    pub created: u64,
    pub consumed: u64,
    pub purged: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MoveError {
    NotPlanning(RequestId),
    NotAdjacent { from: NodeId, to: NodeId },
    UnknownRequest(RequestId),
}

impl fmt::Display for MoveError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MoveError::NotPlanning(r) => write!(f, "request {r} is no longer planning"),
            MoveError::NotAdjacent { from, to } => write!(f, "nodes {from} and {to} are not adjacent"),
            MoveError::UnknownRequest(r) => write!(f, "unknown request {r}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for MoveError {}

/// No unreserved link on the edge; the agent may still move.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReservationUnavailable;

/// Outcome of an agent move.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MoveOutcome {
    Moved { reserved: Option<LinkId> },
    Waited,
    Completed { fidelity: f64 },
    Failed(FailureReason),
}

/// Everything an episode leaves behind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub seed: u64,
    pub requests: Vec<EntanglementRequest>,
    pub events: Vec<Event>,
    pub counters: LinkCounters,
    pub alive_links: u64,
}

impl EpisodeLog {
    pub fn fidelities(&self) -> Vec<f64> {
        let mut f: Vec<f64> = self
            .requests
            .iter()
            .filter(|r| r.status == RequestStatus::Completed)
            .filter_map(|r| r.outcome.as_ref().and_then(|o| o.fidelity))
            .collect();
        f.sort_by(|a, b| b.total_cmp(a));
        f
    }
}

/// Number of completed requests.
pub fn compute_edr(log: &EpisodeLog) -> usize {
    log.requests.iter().filter(|r| r.status == RequestStatus::Completed).count()
}

/// Snapshot of one simulation step used by planners with delayed views.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeSnapshot {
    pub step: u64,
    /// Best unreserved fidelity per edge, 0 when none or inactive.
    pub best_fidelity: Vec<f64>,
}

pub struct World {
    spec: Arc<ScenarioSpec>,
    topology: Arc<Topology>,
    seed: u64,
    clock: SimClock,
    episode_start: u64,
    epoch_s: f64,
    positions: Vec<EcefPosition>,
    edge_active: Vec<bool>,
    edge_probability: Vec<LinkProbability>,
    probability_override: Vec<Option<f64>>,
    edge_lookup: BTreeMap<(NodeId, NodeId), EdgeId>,
    links: Vec<Vec<ElementaryLink>>,
    next_link: u64,
    line_graph: Arc<DirectedLineGraph>,
    requests: Vec<EntanglementRequest>,
    active: Vec<RequestId>,
    pairs: Vec<(NodeId, NodeId)>,
    link_rng: SimRng,
    swap_rng: SimRng,
    record_events: bool,
    events: Vec<Event>,
    counters: LinkCounters,
    history: VecDeque<EdgeSnapshot>,
    history_len: usize,
}

/// Smallest `k` with `P(Binomial(n, p) <= k) >= u`, capped at `cap`.
/// Using one uniform per edge keeps runs with different `p` coupled.
fn binomial_quantile(u: f64, n: u32, p: f64, cap: usize) -> usize {
    if cap == 0 || n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return (n as usize).min(cap);
    }
    let q = 1.0 - p;
    let mut pmf = crate::math::powf(q, n as f64);
    let mut cdf = pmf;
    let mut k = 0usize;
    let ratio = p / q;
    if pmf == 0.0 {
        // Underflow: fall back to a normal approximation.
        let mean = n as f64 * p;
        let sd = crate::math::sqrt(mean * q);
        let z = normal_quantile(u);
        let k = crate::math::floor(mean + sd * z + 0.5).max(0.0) as usize;
        return k.min(n as usize).min(cap);
    }
    while cdf < u && k < cap && k < n as usize {
        pmf *= (n as f64 - k as f64) / (k as f64 + 1.0) * ratio;
        k += 1;
        cdf += pmf;
    }
    k.min(cap)
}

/// Acklam's rational approximation of the standard normal quantile.
fn normal_quantile(p: f64) -> f64 {
    let p = p.clamp(1e-300, 1.0 - 1e-16);
    const A: [f64; 6] = [-3.969683028665376e1, 2.209460984245205e2, -2.759285104469687e2, 1.383_577_518_672_69e2, -3.066479806614716e1, 2.506628277459239];
    const B: [f64; 5] = [-5.447609879822406e1, 1.615858368580409e2, -1.556989798598866e2, 6.680131188771972e1, -1.328068155288572e1];
    const C: [f64; 6] = [-7.784894002430293e-3, -3.223964580411365e-1, -2.400758277161838, -2.549732539343734, 4.374664141464968, 2.938163982698783];
    const D: [f64; 4] = [7.784695709041462e-3, 3.224671290700398e-1, 2.445134137142996, 3.754408661907416];
    let lo = 0.02425;
    if p < lo {
        let q = crate::math::sqrt(-2.0 * crate::math::ln(p));
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5]) / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - lo {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -normal_quantile(1.0 - p)
    }
}

impl World {
    /// Fresh world for one episode, already warmed up by
    /// `spec.warmup_steps` steps so links are present at step 0.
    pub fn new(spec: Arc<ScenarioSpec>, topology: Arc<Topology>, seed: u64) -> Result<Self, ScenarioError> {
        let mut world = Self::cold(spec, topology, seed)?;
        for _ in 0..world.spec.warmup_steps {
            world.step();
        }
        world.episode_start = world.clock.step_index;
        Ok(world)
    }

    /// Like [`World::new`] but without warm-up; step 0 has no links.
    pub fn cold(spec: Arc<ScenarioSpec>, topology: Arc<Topology>, seed: u64) -> Result<Self, ScenarioError> {
        spec.validate()?;
        let n_edges = topology.edges.len();
        let mut edge_lookup = BTreeMap::new();
        for e in &topology.edges {
            edge_lookup.insert((e.a, e.b), e.id);
        }
        let mut request_rng = rng::stream(seed, Stream::Requests);
        let epoch_s = if spec.epoch_jitter_s > 0.0 { request_rng.random::<f64>() * spec.epoch_jitter_s } else { 0.0 };
        let pairs = sample_pairs(&spec, &topology, &mut request_rng);
        let mut world = Self {
            clock: SimClock { step_index: 0, step_duration_s: spec.step_duration_s },
            episode_start: 0,
            epoch_s,
            positions: alloc::vec![EcefPosition::default(); topology.nodes.len()],
            edge_active: alloc::vec![false; n_edges],
            edge_probability: alloc::vec![LinkProbability::ZERO; n_edges],
            probability_override: alloc::vec![None; n_edges],
            edge_lookup,
            links: alloc::vec![Vec::new(); n_edges],
            next_link: 0,
            line_graph: Arc::new(DirectedLineGraph::empty(spec.line_graph_mode)),
            requests: Vec::new(),
            active: Vec::new(),
            pairs,
            link_rng: rng::stream(seed, Stream::LinkGeneration),
            swap_rng: rng::stream(seed, Stream::Swaps),
            record_events: false,
            events: Vec::new(),
            counters: LinkCounters::default(),
            history: VecDeque::new(),
            history_len: 64,
            seed,
            spec,
            topology,
        };
        world.refresh_geometry();
        world.push_history();
        Ok(world)
    }

    pub fn set_record_events(&mut self, on: bool) {
        self.record_events = on;
    }

    pub fn set_history_len(&mut self, len: usize) {
        self.history_len = len.max(1);
        while self.history.len() > self.history_len {
            self.history.pop_front();
        }
    }

    /// Pin an edge's per-attempt probability (tests, ablations).
    pub fn set_probability_override(&mut self, edge: EdgeId, p: Option<f64>) {
        self.probability_override[edge.0 as usize] = p;
        self.refresh_geometry();
    }

    pub fn spec(&self) -> &ScenarioSpec {
        &self.spec
    }

    pub fn topology(&self) -> &Arc<Topology> {
        &self.topology
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn clock(&self) -> SimClock {
        self.clock
    }

    pub fn now(&self) -> u64 {
        self.clock.step_index
    }

    /// Steps since the end of warm-up.
    pub fn episode_step(&self) -> u64 {
        self.clock.step_index - self.episode_start
    }

    pub fn time_s(&self) -> f64 {
        self.epoch_s + self.clock.step_index as f64 * self.clock.step_duration_s
    }

    pub fn pairs(&self) -> &[(NodeId, NodeId)] {
        &self.pairs
    }

    pub fn line_graph(&self) -> &Arc<DirectedLineGraph> {
        &self.line_graph
    }

    pub fn position(&self, v: NodeId) -> EcefPosition {
        self.positions[v.0 as usize]
    }

    pub fn edge_between(&self, u: NodeId, v: NodeId) -> Option<EdgeId> {
        let key = if u < v { (u, v) } else { (v, u) };
        self.edge_lookup.get(&key).copied()
    }

    pub fn is_active(&self, e: EdgeId) -> bool {
        self.edge_active[e.0 as usize]
    }

    pub fn edge_probability(&self, e: EdgeId) -> LinkProbability {
        self.edge_probability[e.0 as usize]
    }

    /// Probability that at least one link is generated on `e` in one step.
    pub fn step_probability(&self, e: EdgeId) -> f64 {
        let medium = self.topology.edge(e).medium;
        self.edge_probability[e.0 as usize].per_step(self.spec.attempts_per_step.get(medium))
    }

    pub fn links(&self, e: EdgeId) -> &[ElementaryLink] {
        &self.links[e.0 as usize]
    }

    pub fn counters(&self) -> LinkCounters {
        self.counters
    }

    pub fn alive_links(&self) -> u64 {
        self.links.iter().map(|l| l.len() as u64).sum()
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn history(&self) -> &VecDeque<EdgeSnapshot> {
        &self.history
    }

    /// Active neighbors of `v`, ascending.
    pub fn neighbors(&self, v: NodeId) -> Vec<NodeId> {
        self.line_graph.neighbors(v).collect()
    }

    pub fn request(&self, id: RequestId) -> &EntanglementRequest {
        &self.requests[id.0 as usize]
    }

    pub fn requests(&self) -> &[EntanglementRequest] {
        &self.requests
    }

    /// Requests still planning, in id order.
    pub fn active_requests(&self) -> &[RequestId] {
        &self.active
    }

    fn decay_for(&self, f0: WernerFidelity) -> DecayParams {
        DecayParams { f_initial: f0.value(), ..self.spec.decay }
    }

    pub fn link_fidelity(&self, link: &ElementaryLink) -> WernerFidelity {
        let age = (self.clock.step_index - link.created_at) as f64 * self.clock.step_duration_s;
        quantum::decay_fidelity(&self.decay_for(link.fidelity_at_creation), age)
    }

    /// Place a link of creation fidelity `fidelity` on `edge` now, outside
    /// the generation process and regardless of capacity.
    pub fn inject_link(&mut self, edge: EdgeId, fidelity: WernerFidelity) -> LinkId {
        let id = LinkId(self.next_link);
        self.next_link += 1;
        self.links[edge.0 as usize].push(ElementaryLink {
            id,
            edge,
            fidelity_at_creation: fidelity,
            created_at: self.clock.step_index,
            reserved_by: None,
        });
        self.counters.created += 1;
        self.emit(EventKind::LinkCreated { link: id, edge, fidelity: fidelity.value() });
        id
    }

    /// Number of unreserved links and the best unreserved fidelity on `e`.
    pub fn available(&self, e: EdgeId) -> (usize, f64) {
        let mut count = 0;
        let mut best = 0.0f64;
        for l in self.links(e).iter().filter(|l| l.reserved_by.is_none()) {
            count += 1;
            best = best.max(self.link_fidelity(l).value());
        }
        (count, best)
    }

    fn emit(&mut self, kind: EventKind) {
        if self.record_events {
            self.events.push(Event { step: self.clock.step_index, kind });
        }
    }

    /// (1) advance the clock, (2) move satellites and refresh edge
    /// probabilities, (3) sample new links, (4) purge decayed links,
    /// (5) expire requests.
    pub fn step(&mut self) {
        self.clock.step_index += 1;
        self.refresh_geometry();
        self.sample_links();
        self.purge();
        self.expire_requests();
        self.push_history();
    }

    fn refresh_geometry(&mut self) {
        let spec = Arc::clone(&self.spec);
        let topo = Arc::clone(&self.topology);
        let t = self.time_s();
        let earth = &spec.earth;
        for n in &topo.nodes {
            self.positions[n.id.0 as usize] = match n.placement {
                Placement::Site(s) => s.position_at(earth, t),
                Placement::Orbit(o) => geometry::propagate(earth, &o, t),
            };
        }
        let mut edits = Vec::new();
        for e in &topo.edges {
            let i = e.id.0 as usize;
            let (active, p) = match e.medium {
                Medium::Fiber => (true, linkmodel::p_fiber(&spec.fiber_link, e.static_length_km.unwrap_or(0.0))),
                Medium::GsAir => {
                    let (site, sat) = match topo.node(e.a).placement {
                        Placement::Site(s) => (s, self.positions[e.b.0 as usize]),
                        Placement::Orbit(_) => match topo.node(e.b).placement {
                            Placement::Site(s) => (s, self.positions[e.a.0 as usize]),
                            Placement::Orbit(_) => unreachable!("gs_air edge without a ground end"),
                        },
                    };
                    let look = geometry::look_angles(earth, &site, &sat, t);
                    let up = look.elevation >= spec.gs_link.min_elevation_rad;
                    (up, linkmodel::p_gs(&spec.gs_link, look.elevation, look.slant_km, spec.diffraction_mode))
                }
                Medium::SsAir => {
                    let (a, b) = (self.positions[e.a.0 as usize], self.positions[e.b.0 as usize]);
                    let d = geometry::inter_satellite_distance(&a, &b);
                    let up = geometry::visibility(earth, &a, &b) && d <= spec.ss_max_range_km;
                    (up, linkmodel::p_ss(&spec.ss_link, up, d, spec.diffraction_mode))
                }
            };
            let p = match self.probability_override[i] {
                Some(v) => LinkProbability::new(v),
                None => p,
            };
            self.edge_probability[i] = p;
            if active != self.edge_active[i] {
                self.edge_active[i] = active;
                edits.push((e.id, active));
            }
        }
        for (edge, active) in edits {
            let (a, b) = (topo.edge(edge).a, topo.edge(edge).b);
            let edit = if active { Edit::Add(a, b) } else { Edit::Remove(a, b) };
            let updated = self.line_graph.incremental_update(edit).expect("edge activity tracks the line graph");
            self.line_graph = Arc::new(updated);
            if active {
                self.emit(EventKind::EdgeActivated { edge });
            } else {
                self.emit(EventKind::EdgeDeactivated { edge });
                self.flush_edge(edge);
            }
        }
    }

    fn flush_edge(&mut self, edge: EdgeId) {
        let gone = core::mem::take(&mut self.links[edge.0 as usize]);
        for l in gone {
            self.counters.purged += 1;
            self.emit(EventKind::LinkPurged { link: l.id, edge, reason: PurgeReason::EdgeLost });
        }
    }

    fn sample_links(&mut self) {
        let topo = Arc::clone(&self.topology);
        for e in &topo.edges {
            let i = e.id.0 as usize;
            // One draw per edge per step, active or not, keeps streams aligned.
            let u: f64 = self.link_rng.random();
            if !self.edge_active[i] {
                continue;
            }
            let free = self.spec.link_capacity.saturating_sub(self.links[i].len());
            let attempts = self.spec.attempts_per_step.get(e.medium);
            let k = binomial_quantile(u, attempts, self.edge_probability[i].value(), free);
            let f0 = WernerFidelity::new(self.spec.initial_fidelity.get(e.medium));
            for _ in 0..k {
                let id = LinkId(self.next_link);
                self.next_link += 1;
                self.links[i].push(ElementaryLink {
                    id,
                    edge: e.id,
                    fidelity_at_creation: f0,
                    created_at: self.clock.step_index,
                    reserved_by: None,
                });
                self.counters.created += 1;
                self.emit(EventKind::LinkCreated { link: id, edge: e.id, fidelity: f0.value() });
            }
        }
    }

    fn purge(&mut self) {
        let floor = self.spec.purge_fidelity;
        for i in 0..self.links.len() {
            let mut keep = Vec::with_capacity(self.links[i].len());
            let mut dropped = Vec::new();
            for l in core::mem::take(&mut self.links[i]) {
                if self.link_fidelity(&l).value() < floor {
                    dropped.push(l);
                } else {
                    keep.push(l);
                }
            }
            self.links[i] = keep;
            for l in dropped {
                self.counters.purged += 1;
                self.emit(EventKind::LinkPurged { link: l.id, edge: l.edge, reason: PurgeReason::Decayed });
            }
        }
    }

    fn expire_requests(&mut self) {
        let now = self.clock.step_index;
        let due: Vec<RequestId> = self
            .active
            .iter()
            .copied()
            .filter(|id| {
                let r = &self.requests[id.0 as usize];
                now - r.created_at >= r.ttl_steps as u64
            })
            .collect();
        for id in due {
            self.fail(id, FailureReason::Expired);
        }
    }

    fn push_history(&mut self) {
        let best: Vec<f64> = (0..self.links.len())
            .map(|i| if self.edge_active[i] { self.available(EdgeId(i as u32)).1 } else { 0.0 })
            .collect();
        self.history.push_back(EdgeSnapshot { step: self.clock.step_index, best_fidelity: best });
        while self.history.len() > self.history_len {
            self.history.pop_front();
        }
    }

    /// Snapshot from `delay` steps ago (the oldest one kept if further back).
    pub fn snapshot(&self, delay: u64) -> &EdgeSnapshot {
        let back = (delay as usize).min(self.history.len() - 1);
        &self.history[self.history.len() - 1 - back]
    }

    /// Hop distances from `source` over active edges.
    pub fn hop_distances(&self, source: NodeId) -> Vec<Option<u32>> {
        let mut dist = alloc::vec![None; self.topology.nodes.len()];
        dist[source.0 as usize] = Some(0);
        let mut queue = VecDeque::from([source]);
        while let Some(v) = queue.pop_front() {
            let d = dist[v.0 as usize].unwrap_or(0);
            for w in self.line_graph.neighbors(v) {
                if dist[w.0 as usize].is_none() {
                    dist[w.0 as usize] = Some(d + 1);
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    /// Spawn one request for every pair if the episode clock is on the
    /// request schedule. Returns the new ids.
    pub fn spawn_due(&mut self) -> Vec<RequestId> {
        if !self.episode_step().is_multiple_of(self.spec.request_interval_steps as u64) {
            return Vec::new();
        }
        (0..self.pairs.len()).map(|p| self.spawn_request(p)).collect()
    }

    pub fn spawn_request(&mut self, pair: usize) -> RequestId {
        let (source, destination) = self.pairs[pair];
        let ttl = match self.spec.ttl.fixed {
            Some(t) => t,
            None => {
                let hops = self.hop_distances(source)[destination.0 as usize].unwrap_or(0);
                (self.spec.ttl.factor * hops).max(self.spec.ttl.min_steps).max(1)
            }
        };
        self.spawn_custom(pair, source, destination, ttl)
    }

    /// Spawn a request with explicit endpoints and TTL.
    pub fn spawn_custom(&mut self, pair: usize, source: NodeId, destination: NodeId, ttl: u32) -> RequestId {
        assert!(source != destination, "request endpoints must differ");
        assert!(ttl > 0, "ttl must be positive");
        let id = RequestId(self.requests.len() as u64);
        self.requests.push(EntanglementRequest {
            id,
            pair,
            source,
            destination,
            ttl_steps: ttl,
            created_at: self.clock.step_index,
            status: RequestStatus::Planning,
            position: source,
            path: alloc::vec![source],
            hops: Vec::new(),
            finished_at: None,
            failure: None,
            outcome: None,
        });
        self.active.push(id);
        self.emit(EventKind::RequestSpawned { request: id, source, destination, ttl });
        id
    }

    /// Reserve the unreserved link with the highest current fidelity on
    /// `edge` (ties: lowest link id).
    pub fn reserve_best_link(&mut self, edge: EdgeId, request: RequestId) -> Result<LinkId, ReservationUnavailable> {
        let best = self.best_link(edge, |l| l.reserved_by.is_none(), &[]).ok_or(ReservationUnavailable)?;
        let link = self.links[edge.0 as usize].iter_mut().find(|l| l.id == best).expect("link exists");
        link.reserved_by = Some(request);
        Ok(best)
    }

    fn best_link(&self, edge: EdgeId, eligible: impl Fn(&ElementaryLink) -> bool, exclude: &[LinkId]) -> Option<LinkId> {
        let mut best: Option<(f64, LinkId)> = None;
        for l in self.links(edge) {
            if !eligible(l) || exclude.contains(&l.id) {
                continue;
            }
            let f = self.link_fidelity(l).value();
            let better = match best {
                None => true,
                Some((bf, bid)) => f > bf || (f == bf && l.id < bid),
            };
            if better {
                best = Some((f, l.id));
            }
        }
        best.map(|(_, id)| id)
    }

    fn release(&mut self, request: RequestId) {
        for links in &mut self.links {
            for l in links.iter_mut().filter(|l| l.reserved_by == Some(request)) {
                l.reserved_by = None;
            }
        }
    }

    fn finish(&mut self, id: RequestId, status: RequestStatus, failure: Option<FailureReason>) {
        self.release(id);
        self.active.retain(|r| *r != id);
        let now = self.clock.step_index;
        let r = &mut self.requests[id.0 as usize];
        r.status = status;
        r.failure = failure;
        r.finished_at = Some(now);
    }

    fn fail(&mut self, id: RequestId, reason: FailureReason) {
        self.finish(id, RequestStatus::Failed, Some(reason));
        self.emit(EventKind::RequestFailed { request: id, reason });
    }

    /// Give up on a request (e.g. the planner found no route).
    pub fn abandon(&mut self, id: RequestId) {
        if self.requests[id.0 as usize].status == RequestStatus::Planning {
            self.fail(id, FailureReason::Abandoned);
        }
    }

    /// Move the agent of `id` to `to` (or stay, when waiting is allowed and
    /// `to` is the current node). Reaching the destination consumes the path.
    pub fn move_agent(&mut self, id: RequestId, to: NodeId) -> Result<MoveOutcome, MoveError> {
        let r = self.requests.get(id.0 as usize).ok_or(MoveError::UnknownRequest(id))?;
        if r.status != RequestStatus::Planning {
            return Err(MoveError::NotPlanning(id));
        }
        let from = r.position;
        if to == from && self.spec.allow_wait {
            let r = &mut self.requests[id.0 as usize];
            r.path.push(from);
            r.hops.push(None);
            return Ok(MoveOutcome::Waited);
        }
        let edge = self.edge_between(from, to).filter(|e| self.is_active(*e));
        let edge = edge.ok_or(MoveError::NotAdjacent { from, to })?;
        let reserved = self.reserve_best_link(edge, id).ok();
        let r = &mut self.requests[id.0 as usize];
        r.position = to;
        r.path.push(to);
        r.hops.push(Some(edge));
        let destination = r.destination;
        self.emit(EventKind::AgentMoved { request: id, from, to, reserved });
        if to != destination {
            return Ok(MoveOutcome::Moved { reserved });
        }
        let record = self.consume_path(id);
        Ok(match record.fidelity {
            Some(fidelity) => MoveOutcome::Completed { fidelity },
            None => MoveOutcome::Failed(self.requests[id.0 as usize].failure.unwrap_or(FailureReason::MissingLink)),
        })
    }

    /// Consume one link per hop of the request's path, roll every
    /// intermediate swap and fold the fidelities. Marks the request
    /// completed or failed.
    pub fn consume_path(&mut self, id: RequestId) -> ConsumeRecord {
        let (path, hops) = {
            let r = &self.requests[id.0 as usize];
            (r.path.clone(), r.hops.clone())
        };
        // Waiting steps carry no link; collapse them.
        let mut nodes = alloc::vec![path[0]];
        let mut edges = Vec::new();
        for (i, h) in hops.iter().enumerate() {
            if let Some(e) = h {
                edges.push(*e);
                nodes.push(path[i + 1]);
            }
        }
        let mut chosen: Vec<Option<LinkId>> = Vec::with_capacity(edges.len());
        let mut taken: Vec<LinkId> = Vec::new();
        for &e in &edges {
            let pick = self.best_link(e, |l| l.reserved_by.is_none() || l.reserved_by == Some(id), &taken);
            if let Some(l) = pick {
                taken.push(l);
            }
            chosen.push(pick);
        }
        let hop_fidelities: Vec<Option<f64>> = chosen
            .iter()
            .zip(&edges)
            .map(|(c, e)| c.map(|lid| self.link_fidelity(self.links(*e).iter().find(|l| l.id == lid).expect("chosen link")).value()))
            .collect();
        let qualities: Vec<f64> =
            nodes[1..nodes.len() - 1].iter().map(|v| self.topology.node(*v).repeater_quality).collect();

        if chosen.iter().any(Option::is_none) || edges.is_empty() {
            let record = ConsumeRecord { hop_fidelities, qualities, swaps: Vec::new(), fidelity: None };
            self.requests[id.0 as usize].outcome = Some(record.clone());
            self.fail(id, FailureReason::MissingLink);
            return record;
        }

        for (c, e) in chosen.iter().zip(&edges) {
            let lid = c.expect("checked above");
            let list = &mut self.links[e.0 as usize];
            let pos = list.iter().position(|l| l.id == lid).expect("chosen link");
            list.remove(pos);
            self.counters.consumed += 1;
            self.emit(EventKind::LinkConsumed { link: lid, edge: *e, request: id });
        }
        let swaps: Vec<bool> = nodes[1..nodes.len() - 1]
            .iter()
            .map(|v| {
                let p = self.topology.node(*v).swap_probability;
                self.swap_rng.random::<f64>() < p
            })
            .collect();
        let fids: Vec<WernerFidelity> = hop_fidelities.iter().map(|f| WernerFidelity::new(f.expect("present"))).collect();
        let folded = quantum::end_to_end_fidelity(&fids, &qualities).expect("non-empty path").value();

        let (fidelity, failure) = if swaps.iter().any(|s| !s) {
            (None, Some(FailureReason::SwapFailed))
        } else if folded < self.spec.fidelity_threshold {
            (None, Some(FailureReason::LowFidelity))
        } else {
            (Some(folded), None)
        };
        let record = ConsumeRecord { hop_fidelities, qualities, swaps, fidelity };
        self.requests[id.0 as usize].outcome = Some(record.clone());
        match failure {
            None => {
                self.finish(id, RequestStatus::Completed, None);
                self.emit(EventKind::RequestCompleted { request: id, fidelity: folded });
            }
            Some(reason) => self.fail(id, reason),
        }
        record
    }

    /// Close the episode: remaining requests fail, logs are handed over.
    pub fn into_log(mut self) -> EpisodeLog {
        for id in self.active.clone() {
            self.fail(id, FailureReason::EpisodeEnd);
        }
        let alive_links = self.alive_links();
        EpisodeLog {
            seed: self.seed,
            requests: self.requests,
            events: self.events,
            counters: self.counters,
            alive_links,
        }
    }
}

/// Fixed source-destination pairs for an episode.
fn sample_pairs<R: Rng>(spec: &ScenarioSpec, topo: &Topology, rng: &mut R) -> Vec<(NodeId, NodeId)> {
    let clusters = topo.cluster_count as usize;
    let members: Vec<Vec<NodeId>> = (0..clusters)
        .map(|c| {
            topo.nodes
                .iter()
                .filter(|n| n.kind != NodeKind::Satellite && n.cluster_id == Some(c as u32))
                .map(|n| n.id)
                .collect()
        })
        .collect();
    let mut pairs = Vec::with_capacity(spec.pairs);
    for _ in 0..spec.pairs {
        if clusters > 1 && spec.cross_cluster_pairs {
            let a = rng.random_range(0..clusters);
            let mut b = rng.random_range(0..clusters - 1);
            if b >= a {
                b += 1;
            }
            let s = members[a][rng.random_range(0..members[a].len())];
            let d = members[b][rng.random_range(0..members[b].len())];
            pairs.push((s, d));
        } else {
            let all: Vec<NodeId> = members.iter().flatten().copied().collect();
            let i = rng.random_range(0..all.len());
            let mut j = rng.random_range(0..all.len() - 1);
            if j >= i {
                j += 1;
            }
            pairs.push((all[i], all[j]));
        }
    }
    pairs
}
