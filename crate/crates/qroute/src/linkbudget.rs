//! Link-budget tables: per-photon and per-step success probabilities of
//! ground-satellite and inter-satellite links across parameter sweeps.

use qroute_core::geometry;
use qroute_core::linkmodel::{p_gs, p_ss, LinkParams};
use qroute_core::netsim::ScenarioSpec;
use serde::{Deserialize, Serialize};

/// One table row. `parameter` names the swept knob (`base` for the
/// scenario's own values).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetRow {
    pub link: &'static str,
    pub parameter: &'static str,
    pub value: f64,
    pub elevation_deg: Option<f64>,
    pub distance_km: f64,
    pub p_photon: f64,
    /// Probability of at least one success in one step's attempts.
    pub p_step: f64,
}

pub const ELEVATIONS_DEG: [f64; 8] = [20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0, 90.0];
pub const SS_DISTANCES_KM: [f64; 5] = [250.0, 500.0, 1000.0, 2000.0, 4000.0];

/// Slant range to a satellite at `altitude_km` seen at `elevation`.
pub fn slant_from_elevation(spec: &ScenarioSpec, altitude_km: f64, elevation: f64) -> f64 {
    let re = spec.earth.radius_km;
    let gamma = (re * elevation.cos() / (re + altitude_km)).acos() - elevation;
    geometry::slant_range(&spec.earth, altitude_km, gamma)
}

fn gs_rows(spec: &ScenarioSpec, parameter: &'static str, value: f64, p: &LinkParams, out: &mut Vec<BudgetRow>) {
    let h = spec.constellation.altitude_km;
    for el in ELEVATIONS_DEG {
        let d = slant_from_elevation(spec, h, el.to_radians());
        let prob = p_gs(p, el.to_radians(), d, spec.diffraction_mode);
        out.push(BudgetRow {
            link: "gs",
            parameter,
            value,
            elevation_deg: Some(el),
            distance_km: d,
            p_photon: prob.value(),
            p_step: prob.per_step(spec.attempts_per_step.gs_air),
        });
    }
}

fn ss_rows(spec: &ScenarioSpec, parameter: &'static str, value: f64, p: &LinkParams, out: &mut Vec<BudgetRow>) {
    for d in SS_DISTANCES_KM {
        let prob = p_ss(p, true, d, spec.diffraction_mode);
        out.push(BudgetRow {
            link: "ss",
            parameter,
            value,
            elevation_deg: None,
            distance_km: d,
            p_photon: prob.value(),
            p_step: prob.per_step(spec.attempts_per_step.ss_air),
        });
    }
}

/// The scenario's links, then sweeps over detector efficiency and zenith
/// transmittance (ground-satellite) and pointing jitter (inter-satellite).
pub fn table(spec: &ScenarioSpec) -> Vec<BudgetRow> {
    let mut out = Vec::new();
    gs_rows(spec, "base", 0.0, &spec.gs_link, &mut out);
    for v in [0.5, 0.7, 0.9] {
        gs_rows(spec, "eta_det", v, &LinkParams { eta_det: v, ..spec.gs_link }, &mut out);
    }
    for v in [0.5, 0.7, 0.9] {
        gs_rows(spec, "zenith_transmittance", v, &LinkParams { zenith_transmittance: v, ..spec.gs_link }, &mut out);
    }
    ss_rows(spec, "base", 0.0, &spec.ss_link, &mut out);
    for v in [0.5, 0.7, 0.9] {
        ss_rows(spec, "eta_det", v, &LinkParams { eta_det: v, ..spec.ss_link }, &mut out);
    }
    for v in [5e-6, 7.5e-6, 10e-6] {
        ss_rows(spec, "pointing_jitter_rad", v, &LinkParams { pointing_jitter_rad: v, ..spec.ss_link }, &mut out);
    }
    out
}
