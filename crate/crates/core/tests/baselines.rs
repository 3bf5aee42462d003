use std::sync::Arc;

use proptest::prelude::*;
use qroute_core::baselines::*;
use qroute_core::geometry::GroundSite;
use qroute_core::netsim::*;
use qroute_core::quantum::{end_to_end_fidelity, DecayParams, WernerFidelity};
use qroute_core::rl::{run_episode, EpisodeMode, Policy, Action};
use qroute_core::rng::{self, Stream};

fn ground_topology(n: u32, edges: &[(u32, u32)]) -> Topology {
    let nodes = (0..n)
        .map(|i| PhysicalNode {
            id: NodeId(i),
            kind: NodeKind::Ground,
            cluster_id: Some(0),
            swap_probability: 1.0,
            repeater_quality: 1.0,
            placement: Placement::Site(GroundSite::from_degrees(0.0, 0.1 * i as f64).unwrap()),
        })
        .collect();
    let edges = edges
        .iter()
        .enumerate()
        .map(|(k, &(a, b))| PhysicalEdge {
            id: EdgeId(k as u32),
            a: NodeId(a.min(b)),
            b: NodeId(a.max(b)),
            medium: Medium::Fiber,
            static_length_km: Some(10.0),
        })
        .collect();
    Topology { nodes, edges, cluster_count: 1 }
}

/// Links never decay and nothing is generated unless injected.
fn scripted(n: u32, edges: &[(u32, u32)]) -> World {
    let spec = ScenarioSpec {
        warmup_steps: 0,
        decay: DecayParams { coherence_time_s: 1e12, ..DecayParams::default() },
        ..ScenarioSpec::default()
    };
    let mut w = World::cold(Arc::new(spec), Arc::new(ground_topology(n, edges)), 1).unwrap();
    for e in 0..edges.len() {
        w.set_probability_override(EdgeId(e as u32), Some(0.0));
    }
    w
}

#[test]
fn greedy_takes_an_adjacent_destination() {
    let mut w = scripted(3, &[(0, 1), (0, 2)]);
    w.inject_link(EdgeId(0), WernerFidelity::new(0.99));
    assert_eq!(greedy_max_fidelity_step(&w, NodeId(0), NodeId(2)), Some(NodeId(2)));
}

#[test]
fn greedy_picks_the_freshest_edge() {
    let mut w = scripted(4, &[(0, 1), (0, 2), (2, 3)]);
    w.inject_link(EdgeId(0), WernerFidelity::new(0.7));
    w.inject_link(EdgeId(1), WernerFidelity::new(0.9));
    assert_eq!(greedy_max_fidelity_step(&w, NodeId(0), NodeId(3)), Some(NodeId(2)));
}

#[test]
fn greedy_falls_back_to_fewest_hops() {
    // 0-1-2-3 and 0-4-3: without links the shorter branch wins.
    let w = scripted(5, &[(0, 1), (1, 2), (2, 3), (0, 4), (4, 3)]);
    assert_eq!(greedy_max_fidelity_step(&w, NodeId(0), NodeId(3)), Some(NodeId(4)));
    assert_eq!(hop_shortest_step(&w, NodeId(0), NodeId(3)), Some(NodeId(4)));
}

#[test]
fn unreachable_destination_fails_immediately() {
    let mut w = scripted(4, &[(0, 1), (2, 3)]);
    w.step();
    let r = w.spawn_custom(0, NodeId(0), NodeId(3), 20);
    let mut p = BaselinePolicy::new(BaselineKind::GlobalStale);
    p.on_spawn(&w, r);
    assert!(p.plan(r).is_none());
    assert_eq!(p.decide(&w, r, &mut rng::stream(1, Stream::Policy)), Action::Abandon);
    w.abandon(r);
    assert_eq!(w.request(r).failure, Some(FailureReason::Abandoned));
}

#[test]
fn stale_plan_uses_the_oldest_snapshot() {
    let mut w = scripted(4, &[(0, 1), (1, 3), (0, 2), (2, 3)]);
    w.set_history_len(2);
    // The first snapshot sees only the upper route; later the lower one is better.
    w.inject_link(EdgeId(0), WernerFidelity::new(0.95));
    w.inject_link(EdgeId(1), WernerFidelity::new(0.95));
    w.step();
    w.inject_link(EdgeId(2), WernerFidelity::new(0.99));
    w.inject_link(EdgeId(3), WernerFidelity::new(0.99));
    w.step();
    assert_eq!(w.history().front().unwrap().step, 1);
    let fresh = global_stale_plan(&w, NodeId(0), NodeId(3), Some(0)).unwrap();
    let stale = global_stale_plan(&w, NodeId(0), NodeId(3), Some(1_000_000)).unwrap();
    assert_eq!(fresh, [NodeId(0), NodeId(2), NodeId(3)]);
    assert_eq!(stale, [NodeId(0), NodeId(1), NodeId(3)]);
}

/// Best Werner parameter over all simple paths.
fn exhaustive(n: usize, edges: &[(NodeId, NodeId, f64)], q: &[f64], s: NodeId, d: NodeId) -> Option<f64> {
    fn go(v: NodeId, d: NodeId, acc: f64, seen: &mut Vec<bool>, adj: &[Vec<(NodeId, f64)>], q: &[f64], best: &mut Option<f64>) {
        if v == d {
            *best = Some(best.map_or(acc, |b: f64| b.max(acc)));
            return;
        }
        for &(w, x) in &adj[v.0 as usize] {
            if seen[w.0 as usize] {
                continue;
            }
            seen[w.0 as usize] = true;
            let through = if w == d { 1.0 } else { q[w.0 as usize] };
            go(w, d, acc * x * through, seen, adj, q, best);
            seen[w.0 as usize] = false;
        }
    }
    let mut adj = vec![Vec::new(); n];
    for &(u, v, w) in edges {
        adj[u.0 as usize].push((v, w));
        adj[v.0 as usize].push((u, w));
    }
    let mut seen = vec![false; n];
    seen[s.0 as usize] = true;
    let mut best = None;
    go(s, d, 1.0, &mut seen, &adj, q, &mut best);
    best
}

proptest! {
    #[test]
    fn widest_path_is_optimal(
        n in 2usize..=10,
        raw in prop::collection::vec((0u32..10, 0u32..10, 0.3f64..1.0), 0..25),
        q in prop::collection::vec(0.5f64..1.0, 10),
    ) {
        let mut edges: Vec<(NodeId, NodeId, f64)> = Vec::new();
        for (a, b, w) in raw {
            let (a, b) = (a % n as u32, b % n as u32);
            if a != b && !edges.iter().any(|(u, v, _)| (u.0, v.0) == (a.min(b), a.max(b))) {
                edges.push((NodeId(a.min(b)), NodeId(a.max(b)), w));
            }
        }
        let (s, d) = (NodeId(0), NodeId(n as u32 - 1));
        let got = widest_path(n, &edges, &q, s, d);
        let want = exhaustive(n, &edges, &q, s, d);
        prop_assert_eq!(got.is_some(), want.is_some());
        if let (Some((path, w)), Some(best)) = (got, want) {
            prop_assert!((w - best).abs() <= 1e-12 * best.max(1e-300), "{} vs {}", w, best);
            prop_assert_eq!(path[0], s);
            prop_assert_eq!(*path.last().unwrap(), d);
            // The reported value is the fold along the returned path.
            let hops: Vec<WernerFidelity> = path
                .windows(2)
                .map(|p| {
                    let (a, b) = (p[0].min(p[1]), p[0].max(p[1]));
                    let x = edges.iter().find(|(u, v, _)| (*u, *v) == (a, b)).unwrap().2;
                    WernerFidelity::from_werner_parameter(x)
                })
                .collect();
            let inner: Vec<f64> = path[1..path.len() - 1].iter().map(|v| q[v.0 as usize]).collect();
            let folded = end_to_end_fidelity(&hops, &inner).unwrap().werner_parameter();
            prop_assert!((folded - w).abs() < 1e-9);
        }
    }
}

#[test]
fn fresh_global_planning_beats_greedy_on_a_static_network() {
    // Ground-only network: fiber links are static apart from generation.
    let spec = ScenarioSpec {
        cluster_count: 1,
        nodes_per_cluster: 10,
        ground_stations_per_cluster: 0,
        satellite_share: Some(0.0),
        cross_cluster_pairs: false,
        ..ScenarioSpec::default()
    };
    let spec = Arc::new(spec);
    let topo = Arc::new(generate_topology(&spec, 3).unwrap());
    let (mut stale, mut greedy) = (0, 0);
    for e in 0..5 {
        let seed = rng::episode_seed(3, e);
        let w = World::new(Arc::clone(&spec), Arc::clone(&topo), seed).unwrap();
        stale += compute_edr(&run_episode(w, &mut BaselinePolicy::global_stale(Some(0)), EpisodeMode::Eval, &mut rng::stream(seed, Stream::Policy)));
        let w = World::new(Arc::clone(&spec), Arc::clone(&topo), seed).unwrap();
        greedy += compute_edr(&run_episode(w, &mut BaselinePolicy::new(BaselineKind::GreedyMaxFidelity), EpisodeMode::Eval, &mut rng::stream(seed, Stream::Policy)));
    }
    assert!(stale >= greedy, "{stale} < {greedy}");
}
