//! Physical topology: ground clusters joined by fiber, ground stations and a
//! satellite shell.

use alloc::collections::VecDeque;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::scenario::{ScenarioError, ScenarioSpec};
use crate::geometry::{CircularOrbit, GroundSite};
use crate::math;
use crate::rng::{self, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EdgeId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Ground,
    GroundStation,
    Satellite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Medium {
    Fiber,
    GsAir,
    SsAir,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    Site(GroundSite),
    Orbit(CircularOrbit),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicalNode {
    pub id: NodeId,
    pub kind: NodeKind,
    pub cluster_id: Option<u32>,
    pub swap_probability: f64,
    pub repeater_quality: f64,
    pub placement: Placement,
}

impl PhysicalNode {
    pub fn is_satellite(&self) -> bool {
        self.kind == NodeKind::Satellite
    }
}

/// Potential elementary link. Endpoints are stored with `a < b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicalEdge {
    pub id: EdgeId,
    pub a: NodeId,
    pub b: NodeId,
    pub medium: Medium,
    pub static_length_km: Option<f64>,
}

impl PhysicalEdge {
    pub fn other(&self, v: NodeId) -> NodeId {
        if v == self.a {
            self.b
        } else {
            self.a
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub nodes: Vec<PhysicalNode>,
    pub edges: Vec<PhysicalEdge>,
    pub cluster_count: u32,
}

impl Topology {
    pub fn node(&self, id: NodeId) -> &PhysicalNode {
        &self.nodes[id.0 as usize]
    }

    pub fn edge(&self, id: EdgeId) -> &PhysicalEdge {
        &self.edges[id.0 as usize]
    }

    pub fn satellites(&self) -> impl Iterator<Item = &PhysicalNode> + '_ {
        self.nodes.iter().filter(|n| n.is_satellite())
    }

    pub fn ground_nodes(&self) -> impl Iterator<Item = &PhysicalNode> + '_ {
        self.nodes.iter().filter(|n| !n.is_satellite())
    }

    /// FNV-1a over every field; used to assert that paired runs share a world.
    pub fn checksum(&self) -> u64 {
        let mut h = 0xcbf2_9ce4_8422_2325u64;
        let mut eat = |x: u64| {
            for b in x.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        eat(self.cluster_count as u64);
        for n in &self.nodes {
            eat(n.id.0 as u64);
            eat(n.kind as u64);
            eat(n.cluster_id.map_or(u64::MAX, u64::from));
            eat(n.swap_probability.to_bits());
            eat(n.repeater_quality.to_bits());
            match n.placement {
                Placement::Site(s) => {
                    eat(s.latitude_rad.to_bits());
                    eat(s.longitude_rad.to_bits());
                }
                Placement::Orbit(o) => {
                    eat(o.altitude_km.to_bits());
                    eat(o.inclination_rad.to_bits());
                    eat(o.raan_rad.to_bits());
                    eat(o.phase_rad.to_bits());
                }
            }
        }
        for e in &self.edges {
            eat(e.id.0 as u64);
            eat(e.a.0 as u64);
            eat(e.b.0 as u64);
            eat(e.medium as u64);
            eat(e.static_length_km.map_or(u64::MAX, f64::to_bits));
        }
        h
    }
}

/// Build the topology described by `spec`. Deterministic in `seed`.
pub fn generate_topology(spec: &ScenarioSpec, seed: u64) -> Result<Topology, ScenarioError> {
    spec.validate()?;
    let earth = &spec.earth;
    let mut rng = rng::stream(seed, Stream::Topology);
    let mut nodes: Vec<PhysicalNode> = Vec::new();
    let mut edges: Vec<PhysicalEdge> = Vec::new();

    let centers: Vec<(f64, f64)> = if spec.cluster_centers_deg.is_empty() {
        let step = spec.cluster_spacing_km / earth.radius_km;
        (0..spec.cluster_count).map(|i| (0.0, i as f64 * step)).collect()
    } else {
        spec.cluster_centers_deg.iter().map(|c| (c[0].to_radians(), c[1].to_radians())).collect()
    };

    for (cluster, &(lat0, lon0)) in centers.iter().enumerate() {
        let sites = place_cluster(spec, lat0, lon0, cluster, &mut rng)?;
        let base = nodes.len() as u32;
        let n = sites.len();
        let stations = pick_stations(n, spec.ground_stations(), &mut rng);
        for (i, site) in sites.iter().enumerate() {
            nodes.push(PhysicalNode {
                id: NodeId(base + i as u32),
                kind: if stations[i] { NodeKind::GroundStation } else { NodeKind::Ground },
                cluster_id: Some(cluster as u32),
                swap_probability: spec.swap_probability.ground,
                repeater_quality: spec.repeater_quality.ground,
                placement: Placement::Site(*site),
            });
        }
        for i in 0..n {
            for j in i + 1..n {
                let d = sites[i].surface_distance_km(&sites[j], earth);
                if d <= spec.connect_radius_km {
                    edges.push(PhysicalEdge {
                        id: EdgeId(edges.len() as u32),
                        a: NodeId(base + i as u32),
                        b: NodeId(base + j as u32),
                        medium: Medium::Fiber,
                        static_length_km: Some(d),
                    });
                }
            }
        }
    }

    let first_sat = nodes.len() as u32;
    let c = &spec.constellation;
    let total = spec.satellite_count();
    let planes = c.planes.min(total).max(1);
    let per_plane = total.div_ceil(planes);
    let plane_step = c.plane_spacing_deg.unwrap_or(360.0 / planes as f64);
    let slot_step = c.in_plane_spacing_deg.unwrap_or(360.0 / per_plane as f64);
    for k in 0..total {
        let (p, s) = (k / per_plane, k % per_plane);
        // Center a spaced train on the phase offset.
        let centered = if c.in_plane_spacing_deg.is_some() { (per_plane as f64 - 1.0) / 2.0 } else { 0.0 };
        let raan = c.raan_offset_deg + plane_step * p as f64;
        let phase = c.phase_offset_deg
            + slot_step * (s as f64 - centered)
            + 360.0 * (c.phasing * p) as f64 / total.max(1) as f64;
        let orbit = CircularOrbit::new(
            c.altitude_km,
            c.inclination_deg.to_radians(),
            math::wrap_pi(raan.to_radians()),
            math::wrap_pi(phase.to_radians()),
        )
        .map_err(ScenarioError::Geometry)?;
        nodes.push(PhysicalNode {
            id: NodeId(first_sat + k as u32),
            kind: NodeKind::Satellite,
            cluster_id: None,
            swap_probability: spec.swap_probability.satellite,
            repeater_quality: spec.repeater_quality.satellite,
            placement: Placement::Orbit(orbit),
        });
    }

    let station_ids: Vec<NodeId> =
        nodes.iter().filter(|n| n.kind == NodeKind::GroundStation).map(|n| n.id).collect();
    for &g in &station_ids {
        for k in 0..total {
            let s = NodeId(first_sat + k as u32);
            edges.push(PhysicalEdge { id: EdgeId(edges.len() as u32), a: g, b: s, medium: Medium::GsAir, static_length_km: None });
        }
    }
    for i in 0..total {
        for j in i + 1..total {
            edges.push(PhysicalEdge {
                id: EdgeId(edges.len() as u32),
                a: NodeId(first_sat + i as u32),
                b: NodeId(first_sat + j as u32),
                medium: Medium::SsAir,
                static_length_km: None,
            });
        }
    }

    Ok(Topology { nodes, edges, cluster_count: spec.cluster_count as u32 })
}

/// Uniform points in a disk around `(lat0, lon0)`, resampled until the
/// random geometric graph is connected.
fn place_cluster<R: Rng>(
    spec: &ScenarioSpec,
    lat0: f64,
    lon0: f64,
    cluster: usize,
    rng: &mut R,
) -> Result<Vec<GroundSite>, ScenarioError> {
    let earth = &spec.earth;
    let n = spec.nodes_per_cluster;
    for _ in 0..spec.max_generation_attempts {
        let mut sites = Vec::with_capacity(n);
        for _ in 0..n {
            let r = spec.cluster_radius_km * math::sqrt(rng.random::<f64>());
            let theta = 2.0 * PI * rng.random::<f64>();
            let (east, north) = (r * math::cos(theta), r * math::sin(theta));
            let lat = (lat0 + north / earth.radius_km).clamp(-PI / 2.0, PI / 2.0);
            let lon = math::wrap_pi(lon0 + east / (earth.radius_km * math::cos(lat0).max(1e-6)));
            sites.push(GroundSite::new(lat, lon).map_err(ScenarioError::Geometry)?);
        }
        if connected(&sites, |a, b| a.surface_distance_km(b, earth) <= spec.connect_radius_km) {
            return Ok(sites);
        }
    }
    Err(ScenarioError::Disconnected { cluster, attempts: spec.max_generation_attempts })
}

fn connected<T>(items: &[T], adjacent: impl Fn(&T, &T) -> bool) -> bool {
    if items.is_empty() {
        return true;
    }
    let mut seen = alloc::vec![false; items.len()];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    let mut count = 1;
    while let Some(i) = queue.pop_front() {
        for j in 0..items.len() {
            if !seen[j] && adjacent(&items[i], &items[j]) {
                seen[j] = true;
                count += 1;
                queue.push_back(j);
            }
        }
    }
    count == items.len()
}

fn pick_stations<R: Rng>(n: usize, k: usize, rng: &mut R) -> Vec<bool> {
    let mut order: Vec<usize> = (0..n).collect();
    // Partial Fisher-Yates: the first k entries become the stations.
    for i in 0..k.min(n) {
        let j = rng.random_range(i..n);
        order.swap(i, j);
    }
    let mut flags = alloc::vec![false; n];
    for &i in &order[..k.min(n)] {
        flags[i] = true;
    }
    flags
}
