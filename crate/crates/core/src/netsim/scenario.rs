//! Scenario description: what to build and how the simulator behaves.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::geometry::{EarthModel, GeometryError};
use crate::linegraph::LineGraphMode;
use crate::linkmodel::{DiffractionMode, LinkParams, LinkParamsError};
use crate::quantum::{DecayParams, QuantumError};

/// One value per physical medium.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerMedium<T> {
    pub fiber: T,
    pub gs_air: T,
    pub ss_air: T,
}

/// Ground vs satellite node settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerNodeKind<T> {
    pub ground: T,
    pub satellite: T,
}

/// Walker-style shell. `in_plane_spacing_deg` / `plane_spacing_deg`, when
/// set, replace the uniform `360 / n` spacing so a short "train" of
/// satellites can be parked over a region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConstellationSpec {
    pub count: usize,
    pub planes: usize,
    pub phasing: usize,
    pub altitude_km: f64,
    pub inclination_deg: f64,
    pub raan_offset_deg: f64,
    pub phase_offset_deg: f64,
    pub in_plane_spacing_deg: Option<f64>,
    pub plane_spacing_deg: Option<f64>,
}

impl Default for ConstellationSpec {
    fn default() -> Self {
        Self {
            count: 6,
            planes: 1,
            phasing: 0,
            altitude_km: 550.0,
            inclination_deg: 0.0,
            raan_offset_deg: 0.0,
            phase_offset_deg: 0.0,
            in_plane_spacing_deg: Some(4.0),
            plane_spacing_deg: None,
        }
    }
}

/// Request time-to-live: `factor * hops`, at least `min_steps`, where
/// `hops` is the shortest hop count at spawn time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TtlRule {
    pub factor: u32,
    pub min_steps: u32,
    pub fixed: Option<u32>,
}

impl Default for TtlRule {
    fn default() -> Self {
        Self { factor: 4, min_steps: 20, fixed: None }
    }
}

/// Complete scenario. Every field has a default, so a config file only
/// needs the keys it changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: String,
    pub earth: EarthModel,

    pub cluster_count: usize,
    pub nodes_per_cluster: usize,
    /// Ground stations per cluster; overridden by `ground_station_share`.
    pub ground_stations_per_cluster: usize,
    pub ground_station_share: Option<f64>,
    /// Explicit `[lat, lon]` centers in degrees; otherwise clusters are laid
    /// along the equator `cluster_spacing_km` apart.
    pub cluster_centers_deg: Vec<[f64; 2]>,
    pub cluster_spacing_km: f64,
    pub cluster_radius_km: f64,
    pub connect_radius_km: f64,
    pub max_generation_attempts: u32,

    pub constellation: ConstellationSpec,
    /// Satellites as a share of all nodes; overrides `constellation.count`.
    pub satellite_share: Option<f64>,
    pub ss_max_range_km: f64,

    /// Each link block is a preset name or a partial object; see
    /// [`crate::linkmodel::config_form`].
    #[serde(deserialize_with = "crate::linkmodel::config_form::gs")]
    pub gs_link: LinkParams,
    #[serde(deserialize_with = "crate::linkmodel::config_form::ss")]
    pub ss_link: LinkParams,
    #[serde(deserialize_with = "crate::linkmodel::config_form::gs")]
    pub fiber_link: LinkParams,
    pub diffraction_mode: DiffractionMode,

    pub decay: DecayParams,
    pub initial_fidelity: PerMedium<f64>,
    pub attempts_per_step: PerMedium<u32>,
    pub link_capacity: usize,
    /// Links below this fidelity are discarded from memory.
    pub purge_fidelity: f64,
    /// End-to-end pairs below this fidelity count as failed deliveries.
    pub fidelity_threshold: f64,

    pub swap_probability: PerNodeKind<f64>,
    pub repeater_quality: PerNodeKind<f64>,

    pub step_duration_s: f64,
    pub request_interval_steps: u32,
    pub episode_steps: u32,
    pub warmup_steps: u32,
    /// Episode start time is drawn uniformly from `[0, epoch_jitter_s]`.
    pub epoch_jitter_s: f64,
    pub pairs: usize,
    /// Draw source and destination from different clusters when possible.
    pub cross_cluster_pairs: bool,
    pub ttl: TtlRule,
    pub line_graph_mode: LineGraphMode,
    /// Lets an agent stay put for a step (costs TTL, no link).
    pub allow_wait: bool,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        Self {
            name: String::from("default"),
            earth: EarthModel::default(),
            cluster_count: 2,
            nodes_per_cluster: 10,
            ground_stations_per_cluster: 2,
            ground_station_share: None,
            cluster_centers_deg: Vec::new(),
            cluster_spacing_km: 1500.0,
            cluster_radius_km: 60.0,
            connect_radius_km: 45.0,
            max_generation_attempts: 200,
            constellation: ConstellationSpec::default(),
            satellite_share: None,
            ss_max_range_km: 5000.0,
            gs_link: LinkParams::gs_default(),
            ss_link: LinkParams::ss_default(),
            fiber_link: LinkParams::gs_default(),
            diffraction_mode: DiffractionMode::General,
            decay: DecayParams { f_initial: 1.0, f_background: 0.25, coherence_time_s: 10.0, stretch_exponent: 1.0 },
            initial_fidelity: PerMedium { fiber: 0.98, gs_air: 0.95, ss_air: 0.95 },
            attempts_per_step: PerMedium { fiber: 1, gs_air: 10_000, ss_air: 10_000 },
            link_capacity: 3,
            purge_fidelity: 0.5,
            fidelity_threshold: 0.5,
            swap_probability: PerNodeKind { ground: 0.95, satellite: 0.95 },
            repeater_quality: PerNodeKind { ground: 0.99, satellite: 0.99 },
            step_duration_s: 0.01,
            request_interval_steps: 10,
            episode_steps: 1000,
            warmup_steps: 100,
            epoch_jitter_s: 60.0,
            pairs: 1,
            cross_cluster_pairs: true,
            ttl: TtlRule::default(),
            line_graph_mode: LineGraphMode::Literal,
            allow_wait: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioError {
    Invalid { field: &'static str, reason: &'static str },
    Link { field: &'static str, source: LinkParamsError },
    Geometry(GeometryError),
    Decay(QuantumError),
    /// Random geometric graph stayed disconnected.
    Disconnected { cluster: usize, attempts: u32 },
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScenarioError::Invalid { field, reason } => write!(f, "invalid scenario field `{field}`: {reason}"),
            ScenarioError::Link { field, source } => write!(f, "invalid `{field}`: {source}"),
            ScenarioError::Geometry(e) => write!(f, "{e}"),
            ScenarioError::Decay(e) => write!(f, "invalid `decay`: {e}"),
            ScenarioError::Disconnected { cluster, attempts } => {
                write!(f, "cluster {cluster} still disconnected after {attempts} attempts")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for ScenarioError {}

fn invalid(field: &'static str, reason: &'static str) -> ScenarioError {
    ScenarioError::Invalid { field, reason }
}

impl ScenarioSpec {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        self.earth.validate().map_err(ScenarioError::Geometry)?;
        if self.cluster_count == 0 {
            return Err(invalid("cluster_count", "need at least one cluster"));
        }
        if self.nodes_per_cluster < 2 {
            return Err(invalid("nodes_per_cluster", "need at least two nodes per cluster"));
        }
        if self.ground_stations() > self.nodes_per_cluster {
            return Err(invalid("ground_stations_per_cluster", "more ground stations than nodes"));
        }
        if self.cluster_count > 1 && self.ground_stations() == 0 {
            return Err(invalid(
                "ground_stations_per_cluster",
                "multiple clusters need ground stations or cross-cluster requests are unroutable",
            ));
        }
        if !self.cluster_centers_deg.is_empty() && self.cluster_centers_deg.len() != self.cluster_count {
            return Err(invalid("cluster_centers_deg", "length must equal cluster_count"));
        }
        if !(self.cluster_radius_km > 0.0) || !(self.connect_radius_km > 0.0) {
            return Err(invalid("cluster_radius_km", "radii must be positive"));
        }
        if let Some(s) = self.satellite_share {
            if !(0.0..1.0).contains(&s) {
                return Err(invalid("satellite_share", "must lie in [0, 1)"));
            }
        }
        if let Some(s) = self.ground_station_share {
            if !(0.0..=1.0).contains(&s) {
                return Err(invalid("ground_station_share", "must lie in [0, 1]"));
            }
        }
        if self.satellite_count() > 0 {
            if self.constellation.planes == 0 {
                return Err(invalid("constellation.planes", "must be positive"));
            }
            if !(self.constellation.altitude_km > 0.0) {
                return Err(invalid("constellation.altitude_km", "must be positive"));
            }
        }
        for (field, p) in [("gs_link", &self.gs_link), ("ss_link", &self.ss_link), ("fiber_link", &self.fiber_link)] {
            p.validate().map_err(|source| ScenarioError::Link { field, source })?;
        }
        self.decay.validate().map_err(ScenarioError::Decay)?;
        let fid = self.initial_fidelity;
        if [fid.fiber, fid.gs_air, fid.ss_air].iter().any(|f| !(0.25..=1.0).contains(f)) {
            return Err(invalid("initial_fidelity", "must lie in [0.25, 1]"));
        }
        if self.link_capacity == 0 {
            return Err(invalid("link_capacity", "must be positive"));
        }
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !unit(self.swap_probability.ground) || !unit(self.swap_probability.satellite) {
            return Err(invalid("swap_probability", "must lie in [0, 1]"));
        }
        if !unit(self.repeater_quality.ground) || !unit(self.repeater_quality.satellite) {
            return Err(invalid("repeater_quality", "must lie in [0, 1]"));
        }
        if !(self.step_duration_s > 0.0) {
            return Err(invalid("step_duration_s", "must be positive"));
        }
        if self.request_interval_steps == 0 {
            return Err(invalid("request_interval_steps", "must be positive"));
        }
        if self.pairs == 0 {
            return Err(invalid("pairs", "need at least one source-destination pair"));
        }
        if self.ttl.fixed == Some(0) || (self.ttl.fixed.is_none() && self.ttl.min_steps == 0 && self.ttl.factor == 0) {
            return Err(invalid("ttl", "must allow at least one step"));
        }
        if !(self.epoch_jitter_s >= 0.0) {
            return Err(invalid("epoch_jitter_s", "must be non-negative"));
        }
        Ok(())
    }

    pub fn ground_stations(&self) -> usize {
        match self.ground_station_share {
            Some(share) => libm::round(share * self.nodes_per_cluster as f64) as usize,
            None => self.ground_stations_per_cluster,
        }
    }

    pub fn ground_node_count(&self) -> usize {
        self.cluster_count * self.nodes_per_cluster
    }

    pub fn satellite_count(&self) -> usize {
        match self.satellite_share {
            Some(share) => libm::round(share / (1.0 - share) * self.ground_node_count() as f64) as usize,
            None => self.constellation.count,
        }
    }

    pub fn link_params(&self, medium: super::Medium) -> &LinkParams {
        match medium {
            super::Medium::Fiber => &self.fiber_link,
            super::Medium::GsAir => &self.gs_link,
            super::Medium::SsAir => &self.ss_link,
        }
    }
}

impl<T: Copy> PerMedium<T> {
    pub fn get(&self, medium: super::Medium) -> T {
        match medium {
            super::Medium::Fiber => self.fiber,
            super::Medium::GsAir => self.gs_air,
            super::Medium::SsAir => self.ss_air,
        }
    }
}
