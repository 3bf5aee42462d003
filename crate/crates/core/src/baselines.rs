//! Heuristic routers sharing the learned router's per-step interface.
//!
//! Three use only local information (random walk, greedy on link fidelity,
//! hop-shortest path); `global_stale` plans centrally on link state that is
//! older the farther away it was reported.

use alloc::collections::{BTreeMap, BinaryHeap, VecDeque};
use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::netsim::{NodeId, RequestId, World};
use crate::quantum::WernerFidelity;
use crate::rl::{Action, Policy};
use crate::rng::SimRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    RandomWalk,
    GreedyMaxFidelity,
    HopShortestPath,
    GlobalStale,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 4] =
        [BaselineKind::RandomWalk, BaselineKind::GreedyMaxFidelity, BaselineKind::HopShortestPath, BaselineKind::GlobalStale];

    pub fn name(self) -> &'static str {
        match self {
            BaselineKind::RandomWalk => "random_walk",
            BaselineKind::GreedyMaxFidelity => "greedy_max_fidelity",
            BaselineKind::HopShortestPath => "hop_shortest_path",
            BaselineKind::GlobalStale => "global_stale",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }
}

/// Kilometres per step of reporting delay for `global_stale`.
pub const KM_PER_DELAY_STEP: f64 = 1000.0;

#[derive(Debug, Clone)]
pub struct BaselinePolicy {
    kind: BaselineKind,
    /// Fixed delay for `global_stale`; `None` uses the distance-based delay.
    staleness_delay_steps: Option<u64>,
    plans: BTreeMap<RequestId, VecDeque<NodeId>>,
}

impl BaselinePolicy {
    pub fn new(kind: BaselineKind) -> Self {
        Self { kind, staleness_delay_steps: None, plans: BTreeMap::new() }
    }

    pub fn global_stale(staleness_delay_steps: Option<u64>) -> Self {
        Self { kind: BaselineKind::GlobalStale, staleness_delay_steps, plans: BTreeMap::new() }
    }

    pub fn kind(&self) -> BaselineKind {
        self.kind
    }

    /// Planned remaining node sequence of a `global_stale` request.
    pub fn plan(&self, request: RequestId) -> Option<&VecDeque<NodeId>> {
        self.plans.get(&request)
    }
}

impl Policy for BaselinePolicy {
    fn name(&self) -> &str {
        self.kind.name()
    }

    fn on_spawn(&mut self, world: &World, request: RequestId) {
        if self.kind == BaselineKind::GlobalStale {
            let r = world.request(request);
            if let Some(path) = global_stale_plan(world, r.source, r.destination, self.staleness_delay_steps) {
                self.plans.insert(request, path.into_iter().skip(1).collect());
            }
        }
    }

    fn decide(&mut self, world: &World, request: RequestId, rng: &mut SimRng) -> Action {
        let r = world.request(request);
        let (here, dest) = (r.position, r.destination);
        match self.kind {
            BaselineKind::RandomWalk => {
                let nbrs = world.neighbors(here);
                Action::Move(nbrs[rng.random_range(0..nbrs.len())])
            }
            BaselineKind::GreedyMaxFidelity => greedy_max_fidelity_step(world, here, dest).map_or(Action::Abandon, Action::Move),
            BaselineKind::HopShortestPath => hop_shortest_step(world, here, dest).map_or(Action::Abandon, Action::Move),
            BaselineKind::GlobalStale => match self.plans.get_mut(&request).and_then(VecDeque::pop_front) {
                Some(next) => Action::Move(next),
                None => Action::Abandon,
            },
        }
    }

    fn on_finish(&mut self, _world: &World, request: RequestId) {
        self.plans.remove(&request);
    }
}

/// The destination if adjacent, else the neighbor whose edge holds the
/// freshest available link; hop-shortest direction when no edge has links.
pub fn greedy_max_fidelity_step(world: &World, here: NodeId, dest: NodeId) -> Option<NodeId> {
    let nbrs = world.neighbors(here);
    if nbrs.contains(&dest) {
        return Some(dest);
    }
    let mut best: Option<(NodeId, f64)> = None;
    for v in &nbrs {
        let e = world.edge_between(here, *v).expect("neighbor edge");
        let (count, f) = world.available(e);
        if count == 0 {
            continue;
        }
        if best.is_none_or(|(bv, bf)| f > bf || (f == bf && *v < bv)) {
            best = Some((*v, f));
        }
    }
    best.map(|(v, _)| v).or_else(|| hop_shortest_step(world, here, dest))
}

/// Neighbor on a fewest-hop path to `dest` over active edges (lowest id on ties).
pub fn hop_shortest_step(world: &World, here: NodeId, dest: NodeId) -> Option<NodeId> {
    let dist = world.hop_distances(dest);
    world
        .neighbors(here)
        .into_iter()
        .filter_map(|v| dist[v.0 as usize].map(|d| (d, v)))
        .min()
        .map(|(_, v)| v)
}

/// Widest path from `source` to `dest` on the delayed link state, where an
/// edge reported from `d` km away is seen `ceil(d / 1000)` steps late
/// (or `fixed_delay` steps when given). Includes both endpoints.
pub fn global_stale_plan(world: &World, source: NodeId, dest: NodeId, fixed_delay: Option<u64>) -> Option<Vec<NodeId>> {
    let topo = world.topology();
    let here = world.position(source);
    let mut edges = Vec::new();
    for (u, v) in world.line_graph().undirected_edges() {
        let e = world.edge_between(u, v).expect("line-graph edge is physical");
        let delay = fixed_delay.unwrap_or_else(|| {
            let d = here.sub(&world.position(u)).norm().min(here.sub(&world.position(v)).norm());
            crate::math::ceil(d / KM_PER_DELAY_STEP) as u64
        });
        let f = world.snapshot(delay).best_fidelity[e.0 as usize];
        let w = WernerFidelity::new(f.clamp(0.25, 1.0)).werner_parameter();
        if w > 0.0 {
            edges.push((u, v, w));
        }
    }
    let qualities: Vec<f64> = topo.nodes.iter().map(|n| n.repeater_quality).collect();
    widest_path(topo.nodes.len(), &edges, &qualities, source, dest).map(|(p, _)| p)
}

#[derive(PartialEq)]
struct Entry {
    cost: f64,
    node: NodeId,
}

impl Eq for Entry {}

impl Ord for Entry {
    fn cmp(&self, o: &Self) -> Ordering {
        o.cost.total_cmp(&self.cost).then_with(|| o.node.cmp(&self.node))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

/// Path maximizing the product of Werner parameters times the repeater
/// qualities of intermediate nodes, i.e. the folded end-to-end fidelity.
/// Edges are undirected `(u, v, werner_parameter)` with parameter in (0, 1].
/// Returns the node sequence and its Werner parameter.
pub fn widest_path(
    node_count: usize,
    edges: &[(NodeId, NodeId, f64)],
    qualities: &[f64],
    source: NodeId,
    dest: NodeId,
) -> Option<(Vec<NodeId>, f64)> {
    let mut adj: Vec<Vec<(NodeId, f64)>> = alloc::vec![Vec::new(); node_count];
    for &(u, v, w) in edges {
        adj[u.0 as usize].push((v, w));
        adj[v.0 as usize].push((u, w));
    }
    for a in &mut adj {
        a.sort_by_key(|(v, _)| *v);
    }
    // Minimize -ln(w) over edges plus -ln(q) over intermediate nodes.
    let mut cost = alloc::vec![f64::INFINITY; node_count];
    let mut prev: Vec<Option<NodeId>> = alloc::vec![None; node_count];
    let mut done = alloc::vec![false; node_count];
    let mut heap = BinaryHeap::new();
    cost[source.0 as usize] = 0.0;
    heap.push(Entry { cost: 0.0, node: source });
    while let Some(Entry { cost: c, node: u }) = heap.pop() {
        if done[u.0 as usize] {
            continue;
        }
        done[u.0 as usize] = true;
        if u == dest {
            break;
        }
        let through = if u == source { 0.0 } else { -crate::math::ln(qualities[u.0 as usize]) };
        for &(v, w) in &adj[u.0 as usize] {
            let nc = c + through - crate::math::ln(w);
            if !done[v.0 as usize] && nc < cost[v.0 as usize] {
                cost[v.0 as usize] = nc;
                prev[v.0 as usize] = Some(u);
                heap.push(Entry { cost: nc, node: v });
            }
        }
    }
    if !done[dest.0 as usize] || source == dest {
        return None;
    }
    let mut path = alloc::vec![dest];
    let mut v = dest;
    while let Some(p) = prev[v.0 as usize] {
        path.push(p);
        v = p;
    }
    path.reverse();
    Some((path, crate::math::exp(-cost[dest.0 as usize])))
}
