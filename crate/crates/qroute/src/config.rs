//! Experiment configuration files.
//!
//! A config is one JSON document with three optional sections:
//!
//! ```json
//! {
//!   "scenario":   { "cluster_count": 2, "nodes_per_cluster": 10 },
//!   "trainer":    { "total_steps": 15000, "gnn": { "embedding_dim": 16 } },
//!   "experiment": { "seed": 7, "episodes": 30, "approaches": ["learned", "random_walk"] }
//! }
//! ```
//!
//! `scenario` and `trainer` take every field of [`ScenarioSpec`] and
//! [`TrainerConfig`]; missing keys keep their defaults and unknown keys are
//! rejected with the path to the offending key.

use std::path::{Path, PathBuf};

use qroute_core::baselines::BaselineKind;
use qroute_core::netsim::ScenarioSpec;
use qroute_core::rl::TrainerConfig;
use serde::{Deserialize, Serialize};

use crate::approach::Approach;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub scenario: ScenarioSpec,
    pub trainer: TrainerConfig,
    pub experiment: ExperimentConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Master seed: topology, episode seeds and training all derive from it.
    pub seed: u64,
    /// Topology seed when it should differ from `seed`.
    pub topology_seed: Option<u64>,
    pub episodes: u64,
    pub approaches: Vec<Approach>,
    /// Approach every other approach is tested against.
    pub reference: Option<Approach>,
    pub sweep: Option<Sweep>,
    /// Sign flips per permutation test.
    pub permutations: usize,
    /// Fixed staleness for `global_stale`; `None` uses the distance rule.
    pub staleness_delay_steps: Option<u64>,
    /// Parameters for `learned`; trained on the base scenario when absent.
    pub checkpoint: Option<PathBuf>,
    /// Save a checkpoint every this many training episodes.
    pub checkpoint_every: Option<u64>,
    pub events: EventRecording,
    /// Worker threads; `None` uses all cores.
    pub threads: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            topology_seed: None,
            episodes: 30,
            approaches: Approach::all(),
            reference: None,
            sweep: None,
            permutations: 100_000,
            staleness_delay_steps: None,
            checkpoint: None,
            checkpoint_every: None,
            events: EventRecording::FirstEpisode,
            threads: None,
        }
    }
}

impl ExperimentConfig {
    pub fn topology_seed(&self) -> u64 {
        self.topology_seed.unwrap_or(self.seed)
    }

    /// Explicit reference, else `learned` when present, else the first approach.
    pub fn reference(&self) -> Option<Approach> {
        self.reference.or_else(|| {
            if self.approaches.contains(&Approach::Learned) {
                Some(Approach::Learned)
            } else {
                self.approaches.first().copied()
            }
        })
    }
}

/// Which episodes write their event log to `events.ndjson`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventRecording {
    None,
    /// Episode 0 of every (cell, approach).
    FirstEpisode,
    All,
}

/// One scenario knob and the values it takes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Ground nodes per cluster.
    ClusterSize,
    /// Concurrent source-destination pairs.
    Pairs,
    /// Number of ground clusters.
    IslandCount,
    /// Satellites as a share of all nodes.
    SatelliteShare,
    /// Detector efficiency of ground-satellite and inter-satellite receivers.
    DetectorEfficiency,
    /// RMS pointing jitter of inter-satellite terminals, radians.
    PointingJitter,
    /// Zenith transmittance of ground-satellite links.
    ZenithTransmittance,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::ClusterSize => "cluster_size",
            SweepAxis::Pairs => "pairs",
            SweepAxis::IslandCount => "island_count",
            SweepAxis::SatelliteShare => "satellite_share",
            SweepAxis::DetectorEfficiency => "detector_efficiency",
            SweepAxis::PointingJitter => "pointing_jitter",
            SweepAxis::ZenithTransmittance => "zenith_transmittance",
        }
    }

    fn integral(self) -> bool {
        matches!(self, SweepAxis::ClusterSize | SweepAxis::Pairs | SweepAxis::IslandCount)
    }

    /// `base` with this axis set to `value`.
    pub fn apply(self, base: &ScenarioSpec, value: f64) -> ScenarioSpec {
        let mut s = base.clone();
        match self {
            SweepAxis::ClusterSize => s.nodes_per_cluster = value as usize,
            SweepAxis::Pairs => s.pairs = value as usize,
            SweepAxis::IslandCount => s.cluster_count = value as usize,
            SweepAxis::SatelliteShare => s.satellite_share = Some(value),
            SweepAxis::DetectorEfficiency => {
                s.gs_link.eta_det = value;
                s.ss_link.eta_det = value;
            }
            SweepAxis::PointingJitter => s.ss_link.pointing_jitter_rad = value,
            SweepAxis::ZenithTransmittance => s.gs_link.zenith_transmittance = value,
        }
        s
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    /// Malformed JSON or a schema violation at `path` (e.g. `scenario.gs_link.eta_det`).
    #[error("config error at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("invalid config at `{path}`: {message}")]
    Invalid { path: String, message: String },
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: Config = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            ConfigError::Schema { path, message: e.into_inner().to_string() }
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_owned(), source })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |path: &str, message: String| ConfigError::Invalid { path: path.into(), message };
        self.scenario.validate().map_err(|e| invalid("scenario", e.to_string()))?;
        self.trainer.validate().map_err(|e| invalid("trainer", e.into()))?;
        let x = &self.experiment;
        if x.episodes == 0 {
            return Err(invalid("experiment.episodes", "must be positive".into()));
        }
        if x.approaches.is_empty() {
            return Err(invalid("experiment.approaches", "must name at least one approach".into()));
        }
        for (i, a) in x.approaches.iter().enumerate() {
            if x.approaches[..i].contains(a) {
                return Err(invalid("experiment.approaches", format!("`{a}` listed twice")));
            }
        }
        if let Some(r) = x.reference {
            if !x.approaches.contains(&r) {
                return Err(invalid("experiment.reference", format!("`{r}` is not among the approaches")));
            }
        }
        if x.permutations == 0 {
            return Err(invalid("experiment.permutations", "must be positive".into()));
        }
        if x.threads == Some(0) {
            return Err(invalid("experiment.threads", "must be positive".into()));
        }
        if let Some(sweep) = &x.sweep {
            if sweep.values.is_empty() {
                return Err(invalid("experiment.sweep.values", "must not be empty".into()));
            }
            for (i, &v) in sweep.values.iter().enumerate() {
                let path = format!("experiment.sweep.values[{i}]");
                if !v.is_finite() || (sweep.axis.integral() && (v < 0.0 || v.fract() != 0.0)) {
                    return Err(invalid(&path, format!("{v} is not a valid {}", sweep.axis.name())));
                }
                sweep.axis.apply(&self.scenario, v).validate().map_err(|e| invalid(&path, e.to_string()))?;
            }
        }
        Ok(())
    }

    /// Scenario of every sweep cell, with the axis value (`None` without a sweep).
    pub fn cells(&self) -> Vec<(Option<f64>, ScenarioSpec)> {
        match &self.experiment.sweep {
            Some(s) => s.values.iter().map(|&v| (Some(v), s.axis.apply(&self.scenario, v))).collect(),
            None => vec![(None, self.scenario.clone())],
        }
    }
}

/// Baseline policy for `kind` with the configured staleness.
pub(crate) fn baseline_for(kind: BaselineKind, x: &ExperimentConfig) -> qroute_core::baselines::BaselinePolicy {
    use qroute_core::baselines::BaselinePolicy;
    match kind {
        BaselineKind::GlobalStale => BaselinePolicy::global_stale(x.staleness_delay_steps),
        k => BaselinePolicy::new(k),
    }
}
