//! Learned routing: episode driver, evaluation-function targets, replay and
//! the training loop.
//!
//! Every request gets its own embedding state (weights are shared). Each
//! environment step runs one message-passing round per active request,
//! scores the outgoing edges of the agent's node and moves ε-greedily.
//! Finished trajectories are cut into fixed-length windows whose decisions
//! are regressed onto discounted end-to-end fidelities.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::sync::Arc;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::gnn::{
    self, message_pass, score_neighbors, sequence_gradient, Adam, Decision, Embeddings, GnnConfig, GnnError,
    ParameterSet, SequenceLoss, SequenceStep, EDGE_FEATURES, NODE_FEATURES,
};
use crate::linegraph::{DirectedEdgeId, DirectedLineGraph};
use crate::netsim::{
    compute_edr, ConsumeRecord, EdgeId, EntanglementRequest, EpisodeLog, NodeId, NodeKind, RequestId, RequestStatus,
    ScenarioError, ScenarioSpec, Topology, World,
};
use crate::quantum::{end_to_end_fidelity, WernerFidelity};
use crate::rng::{self, SimRng, Stream};

/// What an agent does in one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    Move(NodeId),
    Wait,
    Abandon,
}

/// Per-step decision interface shared by the learned router and the baselines.
pub trait Policy {
    fn name(&self) -> &str;

    fn on_spawn(&mut self, _world: &World, _request: RequestId) {}

    /// Called once per step before any decision.
    fn begin_step(&mut self, _world: &World) {}

    fn decide(&mut self, world: &World, request: RequestId, rng: &mut SimRng) -> Action;

    /// The request left the planning state (completed, failed or expired).
    fn on_finish(&mut self, _world: &World, _request: RequestId) {}
}

/// How requests enter an episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpisodeMode {
    /// A single agent at a time: scheduled spawns are skipped while a
    /// request is still planning.
    Train,
    /// Every scheduled request spawns.
    Eval,
}

/// Drive `world` through a full episode under `policy`.
pub fn run_episode<P: Policy + ?Sized>(world: World, policy: &mut P, mode: EpisodeMode, rng: &mut SimRng) -> EpisodeLog {
    run_episode_with(world, policy, mode, rng, |_, _| {})
}

/// Like [`run_episode`], calling `after_step` once the world has advanced.
pub fn run_episode_with<P, F>(
    mut world: World,
    policy: &mut P,
    mode: EpisodeMode,
    rng: &mut SimRng,
    mut after_step: F,
) -> EpisodeLog
where
    P: Policy + ?Sized,
    F: FnMut(&mut P, &World),
{
    let steps = world.spec().episode_steps;
    for _ in 0..steps {
        let due = world.episode_step().is_multiple_of(world.spec().request_interval_steps as u64);
        let spawned = match mode {
            EpisodeMode::Eval => world.spawn_due(),
            EpisodeMode::Train if due && world.active_requests().is_empty() => {
                let pair = (world.episode_step() / world.spec().request_interval_steps as u64) as usize % world.pairs().len();
                alloc::vec![world.spawn_request(pair)]
            }
            EpisodeMode::Train => Vec::new(),
        };
        for id in spawned {
            policy.on_spawn(&world, id);
        }
        policy.begin_step(&world);
        let planning: Vec<RequestId> = world.active_requests().to_vec();
        for id in planning {
            if world.request(id).status != RequestStatus::Planning {
                continue;
            }
            let here = world.request(id).position;
            if world.neighbors(here).is_empty() && !world.spec().allow_wait {
                continue;
            }
            match policy.decide(&world, id, rng) {
                Action::Move(next) => {
                    if world.move_agent(id, next).is_err() {
                        world.abandon(id);
                    }
                }
                Action::Wait => {
                    if world.spec().allow_wait {
                        let _ = world.move_agent(id, here);
                    }
                }
                Action::Abandon => world.abandon(id),
            }
            if world.request(id).status != RequestStatus::Planning {
                policy.on_finish(&world, id);
            }
        }
        let before: Vec<RequestId> = world.active_requests().to_vec();
        world.step();
        for id in before {
            if world.request(id).status != RequestStatus::Planning {
                policy.on_finish(&world, id);
            }
        }
        after_step(policy, &world);
    }
    world.into_log()
}

/// ε-greedy over `scores`; argmax ties go to the lowest neighbor id.
pub fn select_action<R: Rng>(scores: &[(NodeId, f64)], epsilon: f64, rng: &mut R) -> usize {
    assert!(!scores.is_empty(), "no actions to choose from");
    if rng.random::<f64>() < epsilon {
        return rng.random_range(0..scores.len());
    }
    let mut best = 0;
    for (i, (v, s)) in scores.iter().enumerate().skip(1) {
        let (bv, bs) = scores[best];
        if *s > bs || (*s == bs && *v < bv) {
            best = i;
        }
    }
    best
}

/// A finished request's walk and outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub request: RequestId,
    pub nodes: Vec<NodeId>,
    pub hops: Vec<Option<EdgeId>>,
    pub destination: NodeId,
    pub completed: bool,
    pub outcome: Option<ConsumeRecord>,
}

impl Trajectory {
    pub fn from_request(r: &EntanglementRequest) -> Self {
        Self {
            request: r.id,
            nodes: r.path.clone(),
            hops: r.hops.clone(),
            destination: r.destination,
            completed: r.status == RequestStatus::Completed,
            outcome: r.outcome.clone(),
        }
    }

    /// Number of steps `T`.
    pub fn len(&self) -> usize {
        self.hops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hops.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalTarget {
    pub step: usize,
    pub value: f64,
}

/// `E_t = γ^(T-1-t) F(τ_{t:T})` for a completed walk, zero otherwise.
/// `F(τ_{t:T})` folds the links consumed from step `t` onward.
pub fn evaluation_targets(traj: &Trajectory, gamma: f64) -> Vec<EvalTarget> {
    let t_len = traj.len();
    let record = match (&traj.outcome, traj.completed) {
        (Some(r), true) if traj.nodes.last() == Some(&traj.destination) => r,
        _ => return (0..t_len).map(|step| EvalTarget { step, value: 0.0 }).collect(),
    };
    let fids: Vec<WernerFidelity> =
        record.hop_fidelities.iter().map(|f| WernerFidelity::new(f.expect("completed paths have every link"))).collect();
    // Link hops strictly before step t.
    let mut links_before = Vec::with_capacity(t_len);
    let mut count = 0usize;
    for h in &traj.hops {
        links_before.push(count);
        if h.is_some() {
            count += 1;
        }
    }
    (0..t_len)
        .map(|t| {
            let j = links_before[t];
            let f = end_to_end_fidelity(&fids[j..], &record.qualities[j..]).expect("non-empty sub-path").value();
            EvalTarget { step: t, value: crate::math::powi(gamma, (t_len - 1 - t) as i32) * f }
        })
        .collect()
}

/// Fixed-capacity FIFO ring buffer.
#[derive(Debug, Clone)]
pub struct ReplayBuffer<T> {
    items: VecDeque<T>,
    capacity: usize,
    pushed: u64,
}

impl<T> ReplayBuffer<T> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self { items: VecDeque::new(), capacity, pushed: 0 }
    }

    pub fn push(&mut self, item: T) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(item);
        self.pushed += 1;
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Total pushes ever made.
    pub fn pushed(&self) -> u64 {
        self.pushed
    }

    pub fn get(&self, i: usize) -> &T {
        &self.items[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> + '_ {
        self.items.iter()
    }

    /// `n` uniform draws with replacement.
    pub fn sample<R: Rng>(&self, n: usize, rng: &mut R) -> Vec<&T> {
        (0..n).map(|_| &self.items[rng.random_range(0..self.items.len())]).collect()
    }
}

/// Edge features for every line-graph node: available links over capacity,
/// best available fidelity, per-step generation probability.
pub fn edge_features(world: &World, graph: &DirectedLineGraph) -> Vec<f64> {
    let cap = world.spec().link_capacity as f64;
    let mut per_edge: BTreeMap<EdgeId, [f64; EDGE_FEATURES]> = BTreeMap::new();
    let mut out = Vec::with_capacity(graph.node_count() * EDGE_FEATURES);
    for e in graph.nodes() {
        let id = world.edge_between(e.tail, e.head).expect("line-graph edge is physical");
        let f = per_edge.entry(id).or_insert_with(|| {
            let (count, best) = world.available(id);
            [count as f64 / cap, best, world.step_probability(id)]
        });
        out.extend_from_slice(f);
    }
    out
}

/// Node features for a request heading to `destination`: swap probability,
/// is-destination, same ground cluster as the destination.
pub fn node_features(topology: &Topology, destination: NodeId) -> Vec<f64> {
    let dest_cluster = topology.node(destination).cluster_id;
    let mut out = Vec::with_capacity(topology.nodes.len() * NODE_FEATURES);
    for n in &topology.nodes {
        let same = n.kind != NodeKind::Satellite && n.cluster_id.is_some() && n.cluster_id == dest_cluster;
        out.extend_from_slice(&[n.swap_probability, (n.id == destination) as u8 as f64, same as u8 as f64]);
    }
    out
}

/// One recorded round of a training window.
#[derive(Debug, Clone)]
pub struct WindowStep {
    pub graph: Arc<DirectedLineGraph>,
    pub edge_features: Arc<[f32]>,
    pub decision: Option<Decision>,
}

/// Up to `sequence_length` consecutive rounds plus the embeddings they
/// started from (`None`: zeros, the start of a trajectory).
#[derive(Debug, Clone)]
pub struct Window {
    pub h0: Option<(Arc<DirectedLineGraph>, Vec<f32>)>,
    pub node_features: Arc<[f64]>,
    pub steps: Vec<WindowStep>,
}

impl Window {
    pub fn decisions(&self) -> usize {
        self.steps.iter().filter(|s| s.decision.is_some()).count()
    }

    /// Squared error and (optionally) its gradient for this window.
    pub fn evaluate(&self, params: &ParameterSet, grad: Option<&mut ParameterSet>) -> Result<SequenceLoss, GnnError> {
        let dim = params.config().embedding_dim;
        let h0 = match &self.h0 {
            Some((g, data)) => Embeddings::from_raw(Arc::clone(g), dim, data.iter().map(|x| *x as f64).collect()),
            None => Embeddings::zeros(Arc::clone(&self.steps[0].graph), dim),
        };
        let feats: Vec<Vec<f64>> =
            self.steps.iter().map(|s| s.edge_features.iter().map(|x| *x as f64).collect()).collect();
        let steps: Vec<SequenceStep<'_>> = self
            .steps
            .iter()
            .zip(&feats)
            .map(|(s, f)| SequenceStep {
                graph: &s.graph,
                edge_features: f,
                node_features: &self.node_features,
                decision: s.decision,
            })
            .collect();
        match grad {
            Some(g) => sequence_gradient(params, &h0, &steps, g),
            None => gnn::sequence_loss(params, &h0, &steps),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainerConfig {
    pub gamma: f64,
    pub epsilon_start: f64,
    pub epsilon_decay: f64,
    pub epsilon_min: f64,
    pub learning_rate: f64,
    pub clip_norm: f64,
    pub sequence_length: usize,
    pub batch_size: usize,
    pub replay_capacity: usize,
    /// Environment steps to train for.
    pub total_steps: u64,
    /// Environment steps between gradient updates.
    pub train_every: u64,
    /// Message-passing rounds run when a request spawns, before its first move.
    pub init_rounds: usize,
    pub gnn: GnnConfig,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            gamma: 0.95,
            epsilon_start: 1.0,
            epsilon_decay: 0.9999,
            epsilon_min: 0.05,
            learning_rate: 5e-4,
            clip_norm: 1.0,
            sequence_length: 20,
            batch_size: 32,
            replay_capacity: 100_000,
            total_steps: 200_000,
            train_every: 1,
            init_rounds: 10,
            gnn: GnnConfig::default(),
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<(), &'static str> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err("gamma must lie in (0, 1]");
        }
        if !(self.epsilon_decay > 0.0 && self.epsilon_decay < 1.0) {
            return Err("epsilon_decay must lie in (0, 1)");
        }
        if !(0.0..=1.0).contains(&self.epsilon_start) || !(0.0..=1.0).contains(&self.epsilon_min) {
            return Err("epsilon values must lie in [0, 1]");
        }
        if self.sequence_length == 0 || self.batch_size == 0 || self.replay_capacity == 0 || self.train_every == 0 {
            return Err("sequence_length, batch_size, replay_capacity and train_every must be positive");
        }
        if self.gnn.embedding_dim == 0 || self.gnn.hidden_dim == 0 {
            return Err("gnn dimensions must be positive");
        }
        if !(self.learning_rate > 0.0) {
            return Err("learning_rate must be positive");
        }
        Ok(())
    }

    /// ε after `n` updates.
    pub fn epsilon_after(&self, n: u64) -> f64 {
        let e = self.epsilon_start * crate::math::powf(self.epsilon_decay, n as f64);
        e.max(self.epsilon_min)
    }
}

struct AgentState {
    store: Embeddings,
    node_features: Arc<[f64]>,
    recording: Option<Recording>,
}

struct Recording {
    steps: Vec<WindowStep>,
    /// Embeddings before step `k * sequence_length`, for every `k >= 1`.
    boundaries: Vec<(Arc<DirectedLineGraph>, Vec<f32>)>,
}

/// Learned router. In training mode it acts ε-greedily and records
/// windows for replay; in evaluation mode it acts greedily.
pub struct GnnPolicy {
    params: Arc<ParameterSet>,
    epsilon: f64,
    record: bool,
    sequence_length: usize,
    init_rounds: usize,
    gamma: f64,
    states: BTreeMap<RequestId, AgentState>,
    cache_step: Option<(u64, *const DirectedLineGraph)>,
    cache: (Vec<f64>, Arc<[f32]>),
    finished: Vec<Window>,
    error: Option<GnnError>,
}

impl GnnPolicy {
    pub fn evaluation(params: Arc<ParameterSet>, init_rounds: usize) -> Self {
        Self::new(params, 0.0, false, 20, init_rounds, 1.0)
    }

    pub fn training(params: Arc<ParameterSet>, cfg: &TrainerConfig, epsilon: f64) -> Self {
        Self::new(params, epsilon, true, cfg.sequence_length, cfg.init_rounds, cfg.gamma)
    }

    fn new(params: Arc<ParameterSet>, epsilon: f64, record: bool, sequence_length: usize, init_rounds: usize, gamma: f64) -> Self {
        Self {
            params,
            epsilon,
            record,
            sequence_length,
            init_rounds,
            gamma,
            states: BTreeMap::new(),
            cache_step: None,
            cache: (Vec::new(), Arc::from(Vec::new())),
            finished: Vec::new(),
            error: None,
        }
    }

    pub fn params(&self) -> &Arc<ParameterSet> {
        &self.params
    }

    pub fn set_params(&mut self, params: Arc<ParameterSet>) {
        self.params = params;
    }

    pub fn set_epsilon(&mut self, epsilon: f64) {
        self.epsilon = epsilon;
    }

    /// Windows completed since the last call.
    pub fn drain_windows(&mut self) -> Vec<Window> {
        core::mem::take(&mut self.finished)
    }

    /// First model error hit during the episode, if any.
    pub fn error(&self) -> Option<&GnnError> {
        self.error.as_ref()
    }

    fn features(&mut self, world: &World) -> (Vec<f64>, Arc<[f32]>) {
        let graph = world.line_graph();
        let key = (world.now(), Arc::as_ptr(graph));
        if self.cache_step != Some(key) {
            let f = edge_features(world, graph);
            let f32s: Arc<[f32]> = f.iter().map(|x| *x as f32).collect::<Vec<_>>().into();
            self.cache = (f, f32s);
            self.cache_step = Some(key);
        }
        self.cache.clone()
    }

    fn advance(&mut self, world: &World, id: RequestId) -> Result<(), GnnError> {
        let (ef, ef32) = self.features(world);
        let graph = Arc::clone(world.line_graph());
        let params = Arc::clone(&self.params);
        let seq = self.sequence_length;
        let st = self.states.get_mut(&id).expect("state for active request");
        if let Some(rec) = st.recording.as_mut() {
            if !rec.steps.is_empty() && rec.steps.len() % seq == 0 {
                let h = st.store.realign(&graph);
                rec.boundaries.push((graph.clone(), h.data().iter().map(|x| *x as f32).collect()));
            }
        }
        st.store = message_pass(&params, &st.store, &graph, &ef, &st.node_features)?;
        if let Some(rec) = st.recording.as_mut() {
            rec.steps.push(WindowStep { graph, edge_features: ef32, decision: None });
        }
        Ok(())
    }

    fn cut_windows(&mut self, world: &World, id: RequestId, state: AgentState) {
        let Some(rec) = state.recording else { return };
        let traj = Trajectory::from_request(world.request(id));
        let targets = evaluation_targets(&traj, self.gamma);
        let mut steps = rec.steps;
        let mut k = 0;
        for s in steps.iter_mut() {
            if let Some(d) = s.decision.as_mut() {
                d.target = targets.get(k).map_or(0.0, |t| t.value);
                k += 1;
            }
        }
        let mut boundaries = rec.boundaries.into_iter();
        let mut start = 0;
        while start < steps.len() {
            let end = (start + self.sequence_length).min(steps.len());
            let h0 = if start == 0 { None } else { boundaries.next() };
            let window = Window { h0, node_features: Arc::clone(&state.node_features), steps: steps[start..end].to_vec() };
            if window.decisions() > 0 {
                self.finished.push(window);
            }
            start = end;
        }
    }
}

impl Policy for GnnPolicy {
    fn name(&self) -> &str {
        "learned"
    }

    fn on_spawn(&mut self, world: &World, request: RequestId) {
        let dest = world.request(request).destination;
        let nf: Arc<[f64]> = node_features(world.topology(), dest).into();
        let store = Embeddings::zeros(Arc::clone(world.line_graph()), self.params.config().embedding_dim);
        let recording = self.record.then(|| Recording { steps: Vec::new(), boundaries: Vec::new() });
        self.states.insert(request, AgentState { store, node_features: nf, recording });
        for _ in 0..self.init_rounds {
            if let Err(e) = self.advance(world, request) {
                self.error.get_or_insert(e);
            }
        }
    }

    fn decide(&mut self, world: &World, request: RequestId, rng: &mut SimRng) -> Action {
        if let Err(e) = self.advance(world, request) {
            self.error.get_or_insert(e);
            return Action::Abandon;
        }
        let r = world.request(request);
        let obs = r.steps_taken() as f64 / r.ttl_steps as f64;
        let here = r.position;
        let (ef, _) = self.features(world);
        let st = &self.states[&request];
        let scores = match score_neighbors(&self.params, obs, here, &st.store, &ef, &st.node_features) {
            Ok(s) => s,
            Err(e) => {
                self.error.get_or_insert(e);
                return Action::Abandon;
            }
        };
        let pick = select_action(&scores, self.epsilon, rng);
        let next = scores[pick].0;
        if let Some(rec) = self.states.get_mut(&request).and_then(|s| s.recording.as_mut()) {
            if let Some(last) = rec.steps.last_mut() {
                last.decision = Some(Decision { edge: DirectedEdgeId::new(here, next), observation: obs, target: 0.0 });
            }
        }
        Action::Move(next)
    }

    fn on_finish(&mut self, world: &World, request: RequestId) {
        if let Some(state) = self.states.remove(&request) {
            self.cut_windows(world, request, state);
        }
    }
}

/// Parameters, optimizer, replay and exploration schedule.
pub struct Trainer {
    pub config: TrainerConfig,
    params: Arc<ParameterSet>,
    adam: Adam,
    buffer: ReplayBuffer<Window>,
    epsilon: f64,
    updates: u64,
    rng: SimRng,
}

/// One row of the training progress log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainLogRow {
    pub step: u64,
    pub episode: u64,
    pub epsilon: f64,
    pub loss: f64,
    pub train_edr: usize,
}

impl Trainer {
    pub fn new(config: TrainerConfig, seed: u64) -> Self {
        let params = ParameterSet::init(config.gnn, &mut rng::stream(seed, Stream::Init));
        Self::with_params(config, params, seed)
    }

    pub fn with_params(config: TrainerConfig, params: ParameterSet, seed: u64) -> Self {
        let adam = Adam::new(&params, config.learning_rate, config.clip_norm);
        Self {
            buffer: ReplayBuffer::new(config.replay_capacity),
            epsilon: config.epsilon_start,
            updates: 0,
            rng: rng::stream(seed, Stream::Training),
            params: Arc::new(params),
            adam,
            config,
        }
    }

    pub fn params(&self) -> &Arc<ParameterSet> {
        &self.params
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn buffer(&self) -> &ReplayBuffer<Window> {
        &self.buffer
    }

    pub fn push(&mut self, window: Window) {
        self.buffer.push(window);
    }

    /// One gradient update on a uniformly sampled batch. Returns `None`
    /// (and changes nothing) while the buffer holds fewer than
    /// `batch_size` windows.
    pub fn train_step(&mut self) -> Result<Option<f64>, GnnError> {
        if self.buffer.len() < self.config.batch_size {
            return Ok(None);
        }
        let mut grad = self.params.zeros_like();
        let mut total = SequenceLoss::default();
        let picks: Vec<usize> =
            (0..self.config.batch_size).map(|_| self.rng.random_range(0..self.buffer.len())).collect();
        for i in picks {
            let l = self.buffer.get(i).evaluate(&self.params, Some(&mut grad))?;
            total.sse += l.sse;
            total.count += l.count;
        }
        if total.count > 0 {
            grad.scale(1.0 / total.count as f64);
            let params = Arc::make_mut(&mut self.params);
            self.adam.step(params, &mut grad);
        }
        self.updates += 1;
        self.epsilon = self.config.epsilon_after(self.updates);
        Ok(Some(total.mean()))
    }
}

/// Seed of training episode `index`; disjoint from evaluation seeds.
pub fn training_episode_seed(seed: u64, index: u64) -> u64 {
    rng::episode_seed(rng::mix64(seed ^ 0x7472_6169_6e00_0000), index)
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrainError {
    Scenario(ScenarioError),
    Model(GnnError),
    Config(&'static str),
}

impl core::fmt::Display for TrainError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            TrainError::Scenario(e) => write!(f, "{e}"),
            TrainError::Model(e) => write!(f, "{e}"),
            TrainError::Config(e) => write!(f, "invalid trainer config: {e}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for TrainError {}

/// Train on `topology` until `config.total_steps` environment steps have
/// run. `on_episode` sees every finished episode's log row.
pub fn train<F>(
    spec: &Arc<ScenarioSpec>,
    topology: &Arc<Topology>,
    trainer: &mut Trainer,
    seed: u64,
    mut on_episode: F,
) -> Result<Vec<TrainLogRow>, TrainError>
where
    F: FnMut(&TrainLogRow, &Trainer),
{
    trainer.config.validate().map_err(TrainError::Config)?;
    let mut rows = Vec::new();
    let mut env_steps = 0u64;
    let mut episode = 0u64;
    let per_episode = spec.episode_steps.max(1) as u64;
    while env_steps < trainer.config.total_steps {
        let ep_seed = training_episode_seed(seed, episode);
        let world = World::new(Arc::clone(spec), Arc::clone(topology), ep_seed).map_err(TrainError::Scenario)?;
        let mut policy = GnnPolicy::training(Arc::clone(trainer.params()), &trainer.config, trainer.epsilon());
        let mut rng = rng::stream(ep_seed, Stream::Policy);
        let mut losses = Vec::new();
        let mut failure: Option<GnnError> = None;
        let budget = trainer.config.total_steps - env_steps;
        let mut local = 0u64;
        let log = run_episode_with(world, &mut policy, EpisodeMode::Train, &mut rng, |p, _| {
            local += 1;
            if local > budget {
                return;
            }
            for w in p.drain_windows() {
                trainer.push(w);
            }
            if (env_steps + local).is_multiple_of(trainer.config.train_every) {
                match trainer.train_step() {
                    Ok(Some(l)) => losses.push(l),
                    Ok(None) => {}
                    Err(e) => {
                        failure.get_or_insert(e);
                    }
                }
                p.set_params(Arc::clone(trainer.params()));
                p.set_epsilon(trainer.epsilon());
            }
        });
        if let Some(e) = failure.or_else(|| policy.error().cloned()) {
            return Err(TrainError::Model(e));
        }
        for w in policy.drain_windows() {
            trainer.push(w);
        }
        env_steps += per_episode.min(budget);
        let loss = if losses.is_empty() { f64::NAN } else { losses.iter().sum::<f64>() / losses.len() as f64 };
        let row = TrainLogRow { step: env_steps, episode, epsilon: trainer.epsilon(), loss, train_edr: compute_edr(&log) };
        on_episode(&row, trainer);
        rows.push(row);
        episode += 1;
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_and_ties() {
        let mut rng = rng::stream(1, Stream::Policy);
        let s = [(NodeId(3), 0.1), (NodeId(5), 0.9), (NodeId(7), 0.3)];
        assert_eq!(select_action(&s, 0.0, &mut rng), 1);
        let t = [(NodeId(4), 0.5), (NodeId(2), 0.5)];
        assert_eq!(select_action(&t, 0.0, &mut rng), 1);
    }

    #[test]
    fn replay_is_fifo() {
        let mut b = ReplayBuffer::new(3);
        for i in 0..5 {
            b.push(i);
        }
        assert_eq!(b.iter().copied().collect::<Vec<_>>(), [2, 3, 4]);
        assert_eq!(b.pushed(), 5);
    }

    #[test]
    fn epsilon_closed_form() {
        let c = TrainerConfig::default();
        assert_eq!(c.epsilon_after(0), 1.0);
        assert!((c.epsilon_after(10) - 0.9999f64.powi(10)).abs() < 1e-15);
        assert_eq!(c.epsilon_after(1_000_000), 0.05);
    }
}
