use qroute::config::SweepAxis;
use qroute::{Approach, Config, ConfigError};
use qroute_core::linkmodel::LinkParams;

#[test]
fn empty_object_is_the_default_config() {
    let c = Config::from_json("{}").unwrap();
    assert_eq!(c.experiment.episodes, 30);
    assert_eq!(c.experiment.approaches, Approach::all().to_vec());
    assert_eq!(c.experiment.reference(), Some(Approach::Learned));
}

#[test]
fn schema_errors_carry_the_field_path() {
    let err = Config::from_json(r#"{"scenario": {"attempts_per_step": {"fiber": "many"}}}"#).unwrap_err();
    match err {
        ConfigError::Schema { path, .. } => assert_eq!(path, "scenario.attempts_per_step.fiber"),
        e => panic!("unexpected {e}"),
    }
    assert!(matches!(Config::from_json(r#"{"experiment": {"episods": 3}}"#), Err(ConfigError::Schema { .. })));
}

#[test]
fn partial_link_override_keeps_other_fields() {
    let c = Config::from_json(r#"{"scenario": {"ss_link": {"pointing_jitter_rad": 1e-5}}}"#).unwrap();
    let base = LinkParams::ss_default();
    assert_eq!(c.scenario.ss_link.pointing_jitter_rad, 1e-5);
    assert_eq!(c.scenario.ss_link.wavelength_m, base.wavelength_m);
    assert_eq!(c.scenario.ss_link.eta_det, base.eta_det);
    assert!(Config::from_json(r#"{"scenario": {"gs_link": {"bogus": 1}}}"#).is_err());
}

#[test]
fn link_preset_by_name() {
    let c = Config::from_json(r#"{"scenario": {"gs_link": "ss-default"}}"#).unwrap();
    assert_eq!(c.scenario.gs_link, LinkParams::ss_default());
    let c = Config::from_json(r#"{"scenario": {"gs_link": {"preset": "ss-default", "eta_det": 0.3}}}"#).unwrap();
    assert_eq!(c.scenario.gs_link.eta_det, 0.3);
    assert_eq!(c.scenario.gs_link.divergence_rad, LinkParams::ss_default().divergence_rad);
    assert!(Config::from_json(r#"{"scenario": {"gs_link": "laser"}}"#).is_err());
}

#[test]
fn invalid_experiments_are_rejected() {
    for text in [
        r#"{"experiment": {"episodes": 0}}"#,
        r#"{"experiment": {"approaches": []}}"#,
        r#"{"experiment": {"approaches": ["greedy_max_fidelity", "greedy_max_fidelity"]}}"#,
        r#"{"experiment": {"approaches": ["random_walk"], "reference": "learned"}}"#,
        r#"{"experiment": {"sweep": {"axis": "cluster_size", "values": []}}}"#,
        r#"{"experiment": {"sweep": {"axis": "cluster_size", "values": [2.5]}}}"#,
        r#"{"experiment": {"sweep": {"axis": "detector_efficiency", "values": [1.5]}}}"#,
        r#"{"experiment": {"threads": 0}}"#,
    ] {
        assert!(matches!(Config::from_json(text), Err(ConfigError::Invalid { .. })), "{text}");
    }
}

#[test]
fn sweep_cells_apply_the_axis() {
    let c = Config::from_json(r#"{"experiment": {"sweep": {"axis": "pointing_jitter", "values": [5e-6, 1e-5]}}}"#).unwrap();
    let cells = c.cells();
    assert_eq!(cells.len(), 2);
    assert_eq!(cells[1].0, Some(1e-5));
    assert_eq!(cells[1].1.ss_link.pointing_jitter_rad, 1e-5);
    let s = SweepAxis::DetectorEfficiency.apply(&c.scenario, 0.6);
    assert_eq!((s.gs_link.eta_det, s.ss_link.eta_det), (0.6, 0.6));
}

#[test]
fn round_trips_through_json() {
    let mut c = Config::default();
    c.experiment.episodes = 4;
    c.experiment.approaches = vec![Approach::HopShortestPath, Approach::RandomWalk];
    let back = Config::from_json(&serde_json::to_string(&c).unwrap()).unwrap();
    assert_eq!(back.experiment.episodes, 4);
    assert_eq!(back.experiment.approaches, c.experiment.approaches);
    assert_eq!(back.scenario, c.scenario);
}
