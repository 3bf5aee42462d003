use std::collections::HashMap;

use qroute::config::{EventRecording, Sweep, SweepAxis};
use qroute::experiment::{self, ExperimentError};
use qroute::{Approach, Config};

fn baseline_config() -> Config {
    let mut c = Config::default();
    c.experiment.approaches = vec![Approach::HopShortestPath, Approach::RandomWalk];
    c.experiment.episodes = 5;
    c.experiment.permutations = 2000;
    c
}

#[test]
fn sweep_produces_one_row_per_cell_approach_episode() {
    let mut c = baseline_config();
    c.experiment.sweep = Some(Sweep { axis: SweepAxis::ClusterSize, values: vec![10.0, 30.0] });
    let out = experiment::run(&c, None).unwrap();
    let rows = experiment::metrics_rows(&c, &out.records);
    assert_eq!(rows.len(), 20);
    assert_eq!(out.report.cells.len(), 2);
    // Paired episodes: every approach sees the same topology and seed.
    let mut seen: HashMap<(usize, u64), (u64, u64)> = HashMap::new();
    for r in &out.records {
        let key = (r.cell, r.episode);
        let v = (r.topology_checksum, r.episode_seed);
        assert_eq!(*seen.entry(key).or_insert(v), v);
    }
    assert_ne!(out.report.cells[0].topology_checksum, out.report.cells[1].topology_checksum);
    let t = out.report.cells[0].test(Approach::RandomWalk).unwrap();
    assert!(t.p_value > 0.0 && t.p_value <= 1.0 && t.p_holm >= t.p_value);
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let mut a = baseline_config();
    a.experiment.threads = Some(1);
    let mut b = baseline_config();
    b.experiment.threads = Some(3);
    let (ra, rb) = (experiment::run(&a, None).unwrap(), experiment::run(&b, None).unwrap());
    let edr = |o: &experiment::Outcome| o.records.iter().map(|r| (r.approach, r.episode, r.edr)).collect::<Vec<_>>();
    assert_eq!(edr(&ra), edr(&rb));
}

#[test]
fn without_satellites_clusters_cannot_connect() {
    let mut c = baseline_config();
    c.scenario.constellation.count = 0;
    c.scenario.pairs = 2;
    c.experiment.episodes = 2;
    c.experiment.events = EventRecording::None;
    let out = experiment::run(&c, None).unwrap();
    assert!(out.records.iter().all(|r| r.edr == 0 && r.requests > 0 && r.events.is_none()));
}

#[test]
fn learned_without_parameters_is_an_error() {
    let mut c = baseline_config();
    c.experiment.approaches = vec![Approach::Learned];
    assert!(matches!(experiment::run(&c, None), Err(ExperimentError::MissingParams)));
}

#[test]
fn events_are_recorded_for_the_first_episode_only() {
    let c = baseline_config();
    let out = experiment::run(&c, None).unwrap();
    for r in &out.records {
        assert_eq!(r.events.is_some(), r.episode == 0);
    }
}
