use std::sync::Arc;

use proptest::prelude::*;
use qroute_core::gnn::{
    message_pass, score_edge, score_neighbors, sequence_gradient, sequence_loss, Decision, Embeddings, GnnConfig,
    MessageDirection, ParameterSet, SequenceStep, EDGE_FEATURES, NODE_FEATURES,
};
use qroute_core::linegraph::{DirectedEdgeId, DirectedLineGraph, LineGraphMode};
use qroute_core::netsim::NodeId;
use qroute_core::rng::{stream, Stream};
use rand::Rng;
use qroute_core::rng::SimRng as ChaCha8Rng;

fn n(i: u32) -> NodeId {
    NodeId(i)
}

fn small_config(direction: MessageDirection) -> GnnConfig {
    GnnConfig { embedding_dim: 4, hidden_dim: 5, direction }
}

fn random_graph(rng: &mut ChaCha8Rng, vertices: u32, p: f64, mode: LineGraphMode) -> Arc<DirectedLineGraph> {
    let mut edges = Vec::new();
    // Spanning path keeps every vertex present.
    for v in 1..vertices {
        edges.push((n(v - 1), n(v)));
    }
    for a in 0..vertices {
        for b in a + 2..vertices {
            if rng.random::<f64>() < p {
                edges.push((n(a), n(b)));
            }
        }
    }
    Arc::new(DirectedLineGraph::build(edges, mode).unwrap())
}

fn random_vec(rng: &mut ChaCha8Rng, len: usize, scale: f64) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(-scale..scale)).collect()
}

/// Scaled-up random parameters so every nonlinearity is exercised.
fn random_params(cfg: GnnConfig, rng: &mut ChaCha8Rng) -> ParameterSet {
    let mut p = ParameterSet::init(cfg, rng);
    p.scale(1.5);
    p
}

struct Instance {
    params: ParameterSet,
    h0: Embeddings,
    graphs: Vec<Arc<DirectedLineGraph>>,
    edge_features: Vec<Vec<f64>>,
    node_features: Vec<f64>,
    decisions: Vec<Option<Decision>>,
}

impl Instance {
    fn steps(&self) -> Vec<SequenceStep<'_>> {
        (0..self.graphs.len())
            .map(|t| SequenceStep {
                graph: &self.graphs[t],
                edge_features: &self.edge_features[t],
                node_features: &self.node_features,
                decision: self.decisions[t],
            })
            .collect()
    }
}

fn instance(seed: u64, direction: MessageDirection) -> Instance {
    let mut rng = stream(seed, Stream::Init);
    let cfg = small_config(direction);
    let params = random_params(cfg, &mut rng);
    let g0 = random_graph(&mut rng, 6, 0.3, LineGraphMode::Literal);
    // Topology change mid-sequence: one edge dropped, one added.
    let e = g0.undirected_edges().last().unwrap();
    let g1 = Arc::new(g0.incremental_update(qroute_core::linegraph::Edit::Remove(e.0, e.1)).unwrap());
    let g1 = if g1.has_edge(n(0), n(5)) {
        g1
    } else {
        Arc::new(g1.incremental_update(qroute_core::linegraph::Edit::Add(n(0), n(5))).unwrap())
    };
    let graphs = vec![Arc::clone(&g0), Arc::clone(&g0), Arc::clone(&g1), Arc::clone(&g1), Arc::clone(&g1)];
    let edge_features: Vec<Vec<f64>> =
        graphs.iter().map(|g| random_vec(&mut rng, g.node_count() * EDGE_FEATURES, 1.0)).collect();
    let node_features = random_vec(&mut rng, 6 * NODE_FEATURES, 1.0);
    let h0 = Embeddings::from_raw(Arc::clone(&g0), cfg.embedding_dim, random_vec(&mut rng, g0.node_count() * 4, 0.8));
    let mut decisions = Vec::new();
    for (t, g) in graphs.iter().enumerate() {
        if t == 1 {
            decisions.push(None);
            continue;
        }
        let i = rng.random_range(0..g.node_count());
        decisions.push(Some(Decision {
            edge: g.node(i),
            observation: rng.random::<f64>(),
            target: rng.random::<f64>(),
        }));
    }
    Instance { params, h0, graphs, edge_features, node_features, decisions }
}

fn gradient_check(seed: u64, direction: MessageDirection) -> (usize, usize) {
    let inst = instance(seed, direction);
    let steps = inst.steps();
    let mut grad = inst.params.zeros_like();
    sequence_gradient(&inst.params, &inst.h0, &steps, &mut grad).unwrap();
    let mut p = inst.params.clone();
    let h = 1e-5;
    let mut ok = 0;
    for k in 0..p.len() {
        let orig = p.as_slice()[k];
        p.as_mut_slice()[k] = orig + h;
        let up = sequence_loss(&p, &inst.h0, &steps).unwrap().sse;
        p.as_mut_slice()[k] = orig - h;
        let down = sequence_loss(&p, &inst.h0, &steps).unwrap().sse;
        p.as_mut_slice()[k] = orig;
        let numeric = (up - down) / (2.0 * h);
        let analytic = grad.as_slice()[k];
        let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
        if rel < 1e-4 {
            ok += 1;
        }
    }
    (ok, p.len())
}

#[test]
fn backward_matches_finite_differences() {
    for seed in 0..10 {
        for dir in [MessageDirection::Backward, MessageDirection::Forward] {
            let (ok, total) = gradient_check(seed, dir);
            assert!(ok as f64 >= 0.99 * total as f64, "seed {seed} {dir:?}: {ok}/{total}");
        }
    }
}

#[test]
fn zero_loss_gives_zero_gradient() {
    let mut inst = instance(3, MessageDirection::Backward);
    let steps = inst.steps();
    // Replace targets with the model's own predictions.
    let mut preds = Vec::new();
    {
        let mut store = inst.h0.clone();
        for s in &steps {
            store = message_pass(&inst.params, &store, s.graph, s.edge_features, s.node_features).unwrap();
            preds.push(s.decision.map(|d| {
                score_edge(&inst.params, d.observation, &store, d.edge, s.edge_features, s.node_features).unwrap()
            }));
        }
    }
    drop(steps);
    for (d, p) in inst.decisions.iter_mut().zip(&preds) {
        if let (Some(d), Some(p)) = (d.as_mut(), p) {
            d.target = *p;
        }
    }
    let steps = inst.steps();
    let mut grad = inst.params.zeros_like();
    let loss = sequence_gradient(&inst.params, &inst.h0, &steps, &mut grad).unwrap();
    assert_eq!(loss.sse, 0.0);
    assert!(grad.as_slice().iter().all(|g| *g == 0.0));
}

#[test]
fn zero_params_and_features_give_zero_embeddings() {
    let cfg = GnnConfig::default();
    let p = ParameterSet::zeros(cfg);
    let g = Arc::new(DirectedLineGraph::build([(n(0), n(1)), (n(1), n(2))], LineGraphMode::Literal).unwrap());
    let store = Embeddings::zeros(Arc::clone(&g), cfg.embedding_dim);
    let out = message_pass(&p, &store, &g, &vec![0.0; g.node_count() * EDGE_FEATURES], &[0.0; 3 * NODE_FEATURES]).unwrap();
    assert!(out.data().iter().all(|x| *x == 0.0));
}

#[test]
fn isolated_edge_depends_only_on_own_features() {
    let cfg = small_config(MessageDirection::Backward);
    let p = random_params(cfg, &mut stream(5, Stream::Init));
    let g = Arc::new(DirectedLineGraph::build([(n(0), n(1))], LineGraphMode::NonBacktracking).unwrap());
    assert_eq!(g.arc_count(), 0);
    let store = Embeddings::zeros(Arc::clone(&g), 4);
    let ef = [0.3, 0.1, 0.9, -0.2, 0.5, 0.4];
    let a = message_pass(&p, &store, &g, &ef, &[0.1; 2 * NODE_FEATURES]).unwrap();
    let b = message_pass(&p, &store, &g, &ef, &[0.7; 2 * NODE_FEATURES]).unwrap();
    assert_eq!(a, b);
    let mut ef2 = ef;
    ef2[3] = 0.8;
    let c = message_pass(&p, &store, &g, &ef2, &[0.1; 2 * NODE_FEATURES]).unwrap();
    assert_eq!(a.row(0), c.row(0));
    assert_ne!(a.row(1), c.row(1));
}

/// Arc-hop distance in the line graph from `src` to every node, following
/// arcs against the message direction (the way information spreads).
fn spread_distance(g: &DirectedLineGraph, src: usize, dir: MessageDirection) -> Vec<Option<usize>> {
    let mut dist = vec![None; g.node_count()];
    dist[src] = Some(0);
    let mut frontier = vec![src];
    let mut d = 0;
    while !frontier.is_empty() {
        d += 1;
        let mut next = Vec::new();
        for &i in &frontier {
            // i's value reaches every node that aggregates from i.
            let receivers = match dir {
                MessageDirection::Backward => g.predecessors(i),
                MessageDirection::Forward => g.successors(i),
            };
            for &j in receivers {
                if dist[j].is_none() {
                    dist[j] = Some(d);
                    next.push(j);
                }
            }
        }
        frontier = next;
    }
    dist
}

#[test]
fn perturbation_spreads_one_arc_hop_per_round() {
    let cfg = small_config(MessageDirection::Backward);
    let p = random_params(cfg, &mut stream(9, Stream::Init));
    let path: Vec<(NodeId, NodeId)> = (0..7).map(|i| (n(i), n(i + 1))).collect();
    let g = Arc::new(DirectedLineGraph::build(path, LineGraphMode::NonBacktracking).unwrap());
    let src = g.index_of(DirectedEdgeId::new(n(6), n(7))).unwrap();
    let dist = spread_distance(&g, src, cfg.direction);
    let nf = vec![0.2; 8 * NODE_FEATURES];
    let ef = vec![0.1; g.node_count() * EDGE_FEATURES];
    let mut ef_pert = ef.clone();
    ef_pert[src * EDGE_FEATURES] = 0.9;
    let (mut a, mut b) = (Embeddings::zeros(Arc::clone(&g), 4), Embeddings::zeros(Arc::clone(&g), 4));
    for k in 1..=4 {
        a = message_pass(&p, &a, &g, &ef, &nf).unwrap();
        b = message_pass(&p, &b, &g, &ef_pert, &nf).unwrap();
        for i in 0..g.node_count() {
            let changed = a.row(i) != b.row(i);
            match dist[i] {
                Some(d) if d <= k => assert!(changed, "round {k}: node {i} at distance {d} unchanged"),
                _ => assert!(!changed, "round {k}: node {i} changed too early"),
            }
        }
    }
}

#[test]
fn scores_match_standalone_and_isolated_node_errors() {
    let cfg = small_config(MessageDirection::Backward);
    let mut rng = stream(2, Stream::Init);
    let p = random_params(cfg, &mut rng);
    let g = random_graph(&mut rng, 7, 0.4, LineGraphMode::Literal);
    let ef = random_vec(&mut rng, g.node_count() * EDGE_FEATURES, 1.0);
    let nf = random_vec(&mut rng, 8 * NODE_FEATURES, 1.0);
    let store = message_pass(&p, &Embeddings::zeros(Arc::clone(&g), 4), &g, &ef, &nf).unwrap();
    for v in 0..7 {
        let scores = score_neighbors(&p, 0.25, n(v), &store, &ef, &nf).unwrap();
        for (w, s) in scores {
            let alone = score_edge(&p, 0.25, &store, DirectedEdgeId::new(n(v), w), &ef, &nf).unwrap();
            assert_eq!(s, alone);
        }
    }
    assert!(score_neighbors(&p, 0.25, n(7), &store, &ef, &nf).is_err());
}

#[test]
fn identical_neighbors_score_equally() {
    let cfg = small_config(MessageDirection::Backward);
    let p = random_params(cfg, &mut stream(4, Stream::Init));
    // Star: 0 in the middle, leaves 1 and 2 look the same.
    let g = Arc::new(DirectedLineGraph::build([(n(0), n(1)), (n(0), n(2))], LineGraphMode::Literal).unwrap());
    let ef = vec![0.5; g.node_count() * EDGE_FEATURES];
    let nf = [0.9, 0.0, 1.0, 0.3, 1.0, 0.0, 0.3, 1.0, 0.0];
    let mut store = Embeddings::zeros(Arc::clone(&g), 4);
    for _ in 0..3 {
        store = message_pass(&p, &store, &g, &ef, &nf).unwrap();
    }
    let s = score_neighbors(&p, 0.1, n(0), &store, &ef, &nf).unwrap();
    assert_eq!(s[0].1, s[1].1);
}

#[test]
fn relabeling_nodes_permutes_scores() {
    let cfg = small_config(MessageDirection::Backward);
    let mut rng = stream(6, Stream::Init);
    let p = random_params(cfg, &mut rng);
    let vertices = 6u32;
    let g = random_graph(&mut rng, vertices, 0.4, LineGraphMode::Literal);
    let perm: Vec<u32> = vec![3, 5, 0, 1, 4, 2];
    let relabel = |v: NodeId| n(perm[v.0 as usize]);
    let g2 = Arc::new(
        DirectedLineGraph::build(g.undirected_edges().map(|(a, b)| (relabel(a), relabel(b))), LineGraphMode::Literal)
            .unwrap(),
    );
    let ef_phys: Vec<f64> = random_vec(&mut rng, 64 * EDGE_FEATURES, 1.0);
    // Features keyed by undirected edge so both labelings agree.
    let feat = |e: DirectedEdgeId, unmap: &dyn Fn(NodeId) -> NodeId| {
        let (a, b) = (unmap(e.tail).0.min(unmap(e.head).0), unmap(e.tail).0.max(unmap(e.head).0));
        let k = (a * 8 + b) as usize;
        ef_phys[k * EDGE_FEATURES..(k + 1) * EDGE_FEATURES].to_vec()
    };
    let inv: Vec<u32> = (0..vertices).map(|i| perm.iter().position(|&x| x == i).unwrap() as u32).collect();
    let ident = |v: NodeId| v;
    let unperm = |v: NodeId| n(inv[v.0 as usize]);
    let ef1: Vec<f64> = g.nodes().iter().flat_map(|e| feat(*e, &ident)).collect();
    let ef2: Vec<f64> = g2.nodes().iter().flat_map(|e| feat(*e, &unperm)).collect();
    let nf1 = random_vec(&mut rng, vertices as usize * NODE_FEATURES, 1.0);
    let mut nf2 = vec![0.0; nf1.len()];
    for v in 0..vertices as usize {
        let w = perm[v] as usize;
        nf2[w * NODE_FEATURES..(w + 1) * NODE_FEATURES].copy_from_slice(&nf1[v * NODE_FEATURES..(v + 1) * NODE_FEATURES]);
    }
    let (mut s1, mut s2) = (Embeddings::zeros(Arc::clone(&g), 4), Embeddings::zeros(Arc::clone(&g2), 4));
    for _ in 0..3 {
        s1 = message_pass(&p, &s1, &g, &ef1, &nf1).unwrap();
        s2 = message_pass(&p, &s2, &g2, &ef2, &nf2).unwrap();
    }
    for v in 0..vertices {
        let a = score_neighbors(&p, 0.3, n(v), &s1, &ef1, &nf1).unwrap();
        let b = score_neighbors(&p, 0.3, relabel(n(v)), &s2, &ef2, &nf2).unwrap();
        for (w, s) in a {
            let other = b.iter().find(|(x, _)| *x == relabel(w)).unwrap().1;
            assert!((s - other).abs() < 1e-12);
        }
    }
}

#[test]
fn feature_length_mismatch_is_error() {
    let cfg = small_config(MessageDirection::Backward);
    let p = ParameterSet::zeros(cfg);
    let g = Arc::new(DirectedLineGraph::build([(n(0), n(1))], LineGraphMode::Literal).unwrap());
    let store = Embeddings::zeros(Arc::clone(&g), 4);
    assert!(message_pass(&p, &store, &g, &[0.0; 5], &[0.0; 6]).is_err());
    assert!(message_pass(&p, &store, &g, &[0.0; 6], &[0.0; 3]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn outputs_stay_finite(seed in 0u64..1000, scale in 0.1f64..50.0) {
        let cfg = small_config(MessageDirection::Backward);
        let mut rng = stream(seed, Stream::Init);
        let mut p = ParameterSet::init(cfg, &mut rng);
        p.scale(scale);
        let g = random_graph(&mut rng, 6, 0.5, LineGraphMode::Literal);
        let ef = random_vec(&mut rng, g.node_count() * EDGE_FEATURES, 100.0);
        let nf = random_vec(&mut rng, 6 * NODE_FEATURES, 100.0);
        let mut store = Embeddings::zeros(Arc::clone(&g), 4);
        for _ in 0..5 {
            store = message_pass(&p, &store, &g, &ef, &nf).unwrap();
        }
        prop_assert!(store.data().iter().all(|x| x.is_finite() && x.abs() <= 1.0));
        for (_, s) in score_neighbors(&p, 1.0, n(0), &store, &ef, &nf).unwrap() {
            prop_assert!(s.is_finite());
        }
    }
}
