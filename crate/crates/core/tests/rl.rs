use std::sync::Arc;

use proptest::prelude::*;
use qroute_core::baselines::{BaselineKind, BaselinePolicy};
use qroute_core::geometry::GroundSite;
use qroute_core::gnn::{Decision, GnnConfig, ParameterSet};
use qroute_core::linegraph::DirectedEdgeId;
use qroute_core::netsim::*;
use qroute_core::rl::*;
use qroute_core::rng::{self, Stream};

fn line_topology(n: u32) -> Topology {
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
    let edges = (0..n - 1)
        .map(|i| PhysicalEdge {
            id: EdgeId(i),
            a: NodeId(i),
            b: NodeId(i + 1),
            medium: Medium::Fiber,
            static_length_km: Some(10.0),
        })
        .collect();
    Topology { nodes, edges, cluster_count: 1 }
}

fn certain_links(spec: ScenarioSpec, n: u32, seed: u64) -> World {
    let topo = line_topology(n);
    let edges = topo.edges.len();
    let mut w = World::cold(Arc::new(spec), Arc::new(topo), seed).unwrap();
    for e in 0..edges {
        w.set_probability_override(EdgeId(e as u32), Some(1.0));
    }
    w
}

#[test]
fn uniform_exploration_passes_chi_square() {
    let scores: Vec<(NodeId, f64)> = (0..5).map(|i| (NodeId(i), i as f64)).collect();
    let mut rng = rng::stream(1, Stream::Policy);
    let mut counts = [0usize; 5];
    let n = 10_000;
    for _ in 0..n {
        counts[select_action(&scores, 1.0, &mut rng)] += 1;
    }
    let expected = n as f64 / 5.0;
    let chi2: f64 = counts.iter().map(|c| (*c as f64 - expected).powi(2) / expected).sum();
    // 99.9% quantile of chi-square with 4 degrees of freedom.
    assert!(chi2 < 18.467, "{chi2} {counts:?}");
}

proptest! {
    #[test]
    fn greedy_choice_ignores_positive_scaling(raw in prop::collection::vec(-5.0f64..5.0, 1..12), k in 0.01f64..100.0) {
        let scores: Vec<(NodeId, f64)> = raw.iter().enumerate().map(|(i, s)| (NodeId(i as u32), *s)).collect();
        let scaled: Vec<(NodeId, f64)> = scores.iter().map(|(v, s)| (*v, s * k)).collect();
        let mut rng = rng::stream(2, Stream::Policy);
        let a = select_action(&scores, 0.0, &mut rng);
        let b = select_action(&scaled, 0.0, &mut rng);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn replay_evicts_in_push_order(capacity in 1usize..20, pushes in 0usize..60) {
        let mut b = ReplayBuffer::new(capacity);
        for i in 0..pushes {
            b.push(i);
        }
        let kept: Vec<usize> = b.iter().copied().collect();
        let first = pushes.saturating_sub(capacity);
        prop_assert_eq!(kept, (first..pushes).collect::<Vec<_>>());
    }
}

fn completed_trajectories(seed: u64) -> Vec<(Trajectory, f64)> {
    let spec = Arc::new(ScenarioSpec::default());
    let topo = Arc::new(generate_topology(&spec, 7).unwrap());
    let w = World::new(spec, topo, seed).unwrap();
    let mut p = BaselinePolicy::new(BaselineKind::RandomWalk);
    let log = run_episode(w, &mut p, EpisodeMode::Eval, &mut rng::stream(seed, Stream::Policy));
    let mut out: Vec<(Trajectory, f64)> = log
        .requests
        .iter()
        .map(|r| (Trajectory::from_request(r), r.outcome.as_ref().and_then(|o| o.fidelity).unwrap_or(0.0)))
        .collect();
    let w = World::new(Arc::new(ScenarioSpec::default()), Arc::new(generate_topology(&ScenarioSpec::default(), 7).unwrap()), seed).unwrap();
    let mut p = BaselinePolicy::new(BaselineKind::HopShortestPath);
    let log = run_episode(w, &mut p, EpisodeMode::Eval, &mut rng::stream(seed, Stream::Policy));
    out.extend(log.requests.iter().map(|r| (Trajectory::from_request(r), r.outcome.as_ref().and_then(|o| o.fidelity).unwrap_or(0.0))));
    out
}

#[test]
fn first_target_is_the_discounted_return() {
    let gamma = 0.95;
    let mut successes = 0;
    for (traj, f) in completed_trajectories(3) {
        let targets = evaluation_targets(&traj, gamma);
        assert_eq!(targets.len(), traj.len());
        if traj.completed {
            successes += 1;
            assert_eq!(targets[0].value, qroute_core::math::powi(gamma, traj.len() as i32 - 1) * f);
            assert_eq!(targets.last().unwrap().value, traj.outcome.as_ref().unwrap().hop_fidelities.last().unwrap().unwrap());
            for t in &targets {
                assert!((0.0..=1.0).contains(&t.value));
            }
        } else {
            assert!(targets.iter().all(|t| t.value == 0.0));
        }
    }
    assert!(successes > 10);
}

#[test]
fn one_step_arrival_targets_the_link_fidelity() {
    let mut w = certain_links(ScenarioSpec { warmup_steps: 0, ..ScenarioSpec::default() }, 2, 1);
    w.step();
    let r = w.spawn_custom(0, NodeId(0), NodeId(1), 20);
    let outcome = w.move_agent(r, NodeId(1)).unwrap();
    let MoveOutcome::Completed { fidelity } = outcome else { panic!("{outcome:?}") };
    let targets = evaluation_targets(&Trajectory::from_request(w.request(r)), 0.5);
    assert_eq!(targets, [EvalTarget { step: 0, value: fidelity }]);
}

#[test]
fn direct_route_completes_every_request() {
    let spec = ScenarioSpec { warmup_steps: 0, pairs: 1, ..ScenarioSpec::default() };
    let mut w = certain_links(spec, 2, 4);
    w.step();
    let mut p = BaselinePolicy::new(BaselineKind::HopShortestPath);
    let log = run_episode(w, &mut p, EpisodeMode::Eval, &mut rng::stream(4, Stream::Policy));
    assert!(!log.requests.is_empty());
    assert_eq!(compute_edr(&log), log.requests.len());
}

#[test]
fn one_step_ttl_on_two_hops_always_fails() {
    let spec = ScenarioSpec {
        warmup_steps: 0,
        ttl: TtlRule { fixed: Some(1), ..TtlRule::default() },
        ..ScenarioSpec::default()
    };
    for seed in 0..5 {
        let mut w = certain_links(spec.clone(), 3, seed);
        assert_eq!(w.spec().ttl.fixed, Some(1));
        w.step();
        let r = w.spawn_custom(0, NodeId(0), NodeId(2), 1);
        w.move_agent(r, NodeId(1)).unwrap();
        w.step();
        assert_eq!(w.request(r).failure, Some(FailureReason::Expired));
    }
}

fn tiny() -> TrainerConfig {
    TrainerConfig {
        total_steps: 1500,
        batch_size: 4,
        train_every: 25,
        init_rounds: 3,
        epsilon_decay: 0.99,
        gnn: GnnConfig { embedding_dim: 4, hidden_dim: 6, ..GnnConfig::default() },
        ..TrainerConfig::default()
    }
}

fn scenario() -> (Arc<ScenarioSpec>, Arc<Topology>) {
    let spec = Arc::new(ScenarioSpec::default());
    let topo = Arc::new(generate_topology(&spec, 7).unwrap());
    (spec, topo)
}

#[test]
fn training_is_deterministic() {
    let (spec, topo) = scenario();
    let run = || {
        let mut t = Trainer::new(tiny(), 5);
        let rows = train(&spec, &topo, &mut t, 5, |_, _| {}).unwrap();
        (rows, t.params().checksum(), t.updates())
    };
    let (a, b) = (run(), run());
    assert_eq!(a.0.len(), 2);
    assert!(a.2 > 0);
    for (x, y) in a.0.iter().zip(&b.0) {
        assert_eq!(x.loss.to_bits(), y.loss.to_bits());
        assert_eq!(x.train_edr, y.train_edr);
    }
    assert_eq!(a.1, b.1);
}

#[test]
fn epsilon_follows_the_closed_form() {
    let (spec, topo) = scenario();
    let cfg = tiny();
    let mut t = Trainer::new(cfg, 6);
    train(&spec, &topo, &mut t, 6, |_, _| {}).unwrap();
    assert!(t.updates() > 0);
    assert_eq!(t.epsilon(), cfg.epsilon_after(t.updates()));
    let mut fresh = Trainer::new(cfg, 6);
    assert_eq!(fresh.train_step().unwrap(), None);
    assert_eq!(fresh.epsilon(), cfg.epsilon_start);
}

#[test]
fn failed_trajectories_are_stored_with_zero_targets() {
    let (spec, topo) = scenario();
    let mut t = Trainer::new(tiny(), 7);
    train(&spec, &topo, &mut t, 7, |_, _| {}).unwrap();
    let zero = t
        .buffer()
        .iter()
        .filter(|w| w.steps.iter().filter_map(|s| s.decision).all(|d| d.target == 0.0))
        .count();
    assert!(zero > 0);
    for w in t.buffer().iter() {
        assert!(w.steps.len() <= tiny().sequence_length);
        assert!(w.decisions() > 0);
    }
}

fn one_window(params: &ParameterSet, target: Option<f64>) -> Window {
    let (spec, topo) = scenario();
    let w = World::new(spec, Arc::clone(&topo), 8).unwrap();
    let graph = Arc::clone(w.line_graph());
    let ef: Arc<[f32]> = edge_features(&w, &graph).iter().map(|x| *x as f32).collect::<Vec<_>>().into();
    let (s, d) = w.pairs()[0];
    let next = w.neighbors(s)[0];
    let nf: Arc<[f64]> = node_features(&topo, d).into();
    let mut window = Window {
        h0: None,
        node_features: nf,
        steps: (0..4)
            .map(|k| WindowStep {
                graph: Arc::clone(&graph),
                edge_features: Arc::clone(&ef),
                decision: (k >= 2).then_some(Decision { edge: DirectedEdgeId::new(s, next), observation: 0.1, target: 0.0 }),
            })
            .collect(),
    };
    // Set every target to the current prediction, or to a fixed value.
    for k in 2..4 {
        let value = match target {
            Some(v) => v,
            None => {
                let mut probe = window.clone();
                probe.steps.truncate(k + 1);
                for s in &mut probe.steps[..k] {
                    s.decision = None;
                }
                let l = probe.evaluate(params, None).unwrap();
                assert_eq!(l.count, 1);
                // sse = (pred - 0)^2 with target 0; recover the prediction by a second probe.
                probe.steps[k].decision.as_mut().unwrap().target = 1.0;
                let l1 = probe.evaluate(params, None).unwrap();
                (l.sse - l1.sse + 1.0) / 2.0
            }
        };
        window.steps[k].decision.as_mut().unwrap().target = value;
    }
    window
}

#[test]
fn exact_targets_give_zero_gradient() {
    let cfg = tiny();
    let t = Trainer::new(cfg, 9);
    let window = one_window(t.params(), None);
    let mut grad = t.params().zeros_like();
    let loss = window.evaluate(t.params(), Some(&mut grad)).unwrap();
    assert!(loss.sse < 1e-24, "{}", loss.sse);
    assert!(grad.norm() < 1e-10, "{}", grad.norm());
}

#[test]
fn single_sequence_can_be_overfit() {
    let cfg = TrainerConfig { batch_size: 1, learning_rate: 5e-3, ..tiny() };
    let mut t = Trainer::new(cfg, 10);
    let window = one_window(t.params(), Some(0.6));
    t.push(window);
    let mut losses = Vec::new();
    for _ in 0..500 {
        losses.push(t.train_step().unwrap().unwrap());
    }
    let last = *losses.last().unwrap();
    assert!(last < 1e-4, "final loss {last}");
    assert!(losses[..50].iter().sum::<f64>() > losses[450..].iter().sum::<f64>());
}

#[test]
fn evaluation_leaves_parameters_untouched() {
    let (spec, topo) = scenario();
    let params = Arc::new(ParameterSet::init(tiny().gnn, &mut rng::stream(1, Stream::Init)));
    let before = params.checksum();
    let w = World::new(spec, topo, 11).unwrap();
    let mut p = GnnPolicy::evaluation(Arc::clone(&params), 3);
    let log = run_episode(w, &mut p, EpisodeMode::Eval, &mut rng::stream(11, Stream::Policy));
    assert!(p.error().is_none());
    assert!(!log.requests.is_empty());
    assert_eq!(p.params().checksum(), before);
    assert!(p.drain_windows().is_empty());
}

#[test]
fn training_mode_runs_one_agent_at_a_time() {
    let (spec, topo) = scenario();
    let mut w = World::new(spec, topo, 12).unwrap();
    w.set_record_events(true);
    let mut p = BaselinePolicy::new(BaselineKind::RandomWalk);
    let log = run_episode(w, &mut p, EpisodeMode::Train, &mut rng::stream(12, Stream::Policy));
    let mut spans: Vec<(u64, u64)> = log.requests.iter().map(|r| (r.created_at, r.finished_at.unwrap())).collect();
    spans.sort();
    for pair in spans.windows(2) {
        assert!(pair[1].0 >= pair[0].1, "{pair:?}");
    }
}
