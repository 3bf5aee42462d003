//! Per-photon success probabilities for elementary links.
//!
//! Ground-to-satellite links combine hardware efficiency, slant-path
//! atmospheric extinction and Gaussian-beam collection; inter-satellite
//! links drop the atmosphere but pay pointing jitter at both terminals;
//! fiber links decay exponentially with length.

use core::f64::consts::{FRAC_PI_2, PI};
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::math;

/// Hardware and atmosphere constants for one link class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkParams {
    pub wavelength_m: f64,
    pub tx_aperture_m: f64,
    pub rx_aperture_m: f64,
    /// Far-field 1/e^2 half-angle divergence.
    pub divergence_rad: f64,
    pub zenith_transmittance: f64,
    pub pointing_jitter_rad: f64,
    pub eta_source: f64,
    pub eta_opt_tx: f64,
    pub eta_opt_rx: f64,
    pub eta_det: f64,
    pub min_elevation_rad: f64,
    pub fiber_loss_db_per_km: f64,
    pub fiber_hw_efficiency: f64,
    /// Multiply by the local detection probability at the source
    /// (entanglement-based attempts).
    #[serde(default)]
    pub entanglement_based: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LinkParamsError {
    OutOfRange(&'static str),
    UnknownPreset,
}

impl fmt::Display for LinkParamsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LinkParamsError::OutOfRange(field) => write!(f, "link parameter `{field}` out of range"),
            LinkParamsError::UnknownPreset => write!(f, "unknown link preset (expected gs-default or ss-default)"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for LinkParamsError {}

impl LinkParams {
    /// Ground-to-satellite column of the reference hardware table, range
    /// midpoints where a range is given.
    pub fn gs_default() -> Self {
        Self {
            wavelength_m: 850e-9,
            tx_aperture_m: 0.30,
            rx_aperture_m: 1.0,
            divergence_rad: 10e-6,
            zenith_transmittance: 0.8,
            pointing_jitter_rad: 0.35e-6,
            eta_source: 0.5,
            eta_opt_tx: 0.65,
            eta_opt_rx: 0.16,
            eta_det: 0.5,
            min_elevation_rad: 20f64.to_radians(),
            fiber_loss_db_per_km: 0.2,
            fiber_hw_efficiency: 1.0,
            entanglement_based: false,
        }
    }

    /// Inter-satellite column of the reference hardware table.
    pub fn ss_default() -> Self {
        Self {
            wavelength_m: 850e-9,
            tx_aperture_m: 0.10,
            rx_aperture_m: 0.10,
            divergence_rad: 30e-6,
            zenith_transmittance: 1.0,
            pointing_jitter_rad: 7.5e-6,
            eta_source: 0.5,
            eta_opt_tx: 0.65,
            eta_opt_rx: 0.65,
            eta_det: 0.7,
            min_elevation_rad: 20f64.to_radians(),
            fiber_loss_db_per_km: 0.2,
            fiber_hw_efficiency: 1.0,
            entanglement_based: false,
        }
    }

    pub fn preset(name: &str) -> Result<Self, LinkParamsError> {
        match name {
            "gs-default" => Ok(Self::gs_default()),
            "ss-default" => Ok(Self::ss_default()),
            _ => Err(LinkParamsError::UnknownPreset),
        }
    }

    pub fn zenith_optical_depth(&self) -> f64 {
        -math::ln(self.zenith_transmittance)
    }

    /// Divergence of diffraction-limited optics with waist `D_T / 2`.
    pub fn diffraction_limited_divergence(&self) -> f64 {
        2.0 * self.wavelength_m / (PI * self.tx_aperture_m)
    }

    pub fn validate(&self) -> Result<(), LinkParamsError> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        let checks: [(&'static str, bool); 13] = [
            ("wavelength_m", self.wavelength_m > 0.0),
            ("tx_aperture_m", self.tx_aperture_m > 0.0),
            ("rx_aperture_m", self.rx_aperture_m > 0.0),
            ("divergence_rad", self.divergence_rad > 0.0),
            ("zenith_transmittance", self.zenith_transmittance > 0.0 && self.zenith_transmittance <= 1.0),
            ("pointing_jitter_rad", self.pointing_jitter_rad >= 0.0),
            ("eta_source", unit(self.eta_source)),
            ("eta_opt_tx", unit(self.eta_opt_tx)),
            ("eta_opt_rx", unit(self.eta_opt_rx)),
            ("eta_det", unit(self.eta_det)),
            ("min_elevation_rad", self.min_elevation_rad.is_finite()),
            ("fiber_loss_db_per_km", self.fiber_loss_db_per_km >= 0.0),
            ("fiber_hw_efficiency", unit(self.fiber_hw_efficiency)),
        ];
        match checks.iter().find(|(_, ok)| !ok) {
            Some((name, _)) => Err(LinkParamsError::OutOfRange(name)),
            None => Ok(()),
        }
    }

    fn hardware_product(&self) -> f64 {
        let base = self.eta_source * self.eta_opt_tx * self.eta_opt_rx * self.eta_det;
        if self.entanglement_based {
            base * self.eta_det
        } else {
            base
        }
    }
}

/// Probability in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LinkProbability(f64);

impl LinkProbability {
    pub const ZERO: LinkProbability = LinkProbability(0.0);

    /// Clamps into `[0, 1]`; NaN maps to 0.
    pub fn new(value: f64) -> Self {
        if value.is_nan() {
            return Self(0.0);
        }
        Self(value.clamp(0.0, 1.0))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Success probability of at least one of `attempts` independent tries.
    pub fn per_step(self, attempts: u32) -> f64 {
        if attempts == 0 {
            return 0.0;
        }
        1.0 - math::powi(1.0 - self.0, attempts as i32)
    }
}

/// Which diffraction formula to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiffractionMode {
    /// Beam radius `theta_div * L` with `theta_div` a free parameter.
    #[default]
    General,
    /// Divergence fixed by the transmit aperture and wavelength.
    DiffractionLimited,
}

/// Beer-Lambert attenuation along a slant path; 0 at or below the horizon.
pub fn atmospheric_transmittance(p: &LinkParams, zenith_angle: f64) -> f64 {
    if !(zenith_angle < FRAC_PI_2) {
        return 0.0;
    }
    if zenith_angle == 0.0 {
        return p.zenith_transmittance;
    }
    let sec = 1.0 / math::cos(zenith_angle.abs());
    math::powf(p.zenith_transmittance, sec)
}

/// Fraction of a Gaussian beam captured by the receive aperture at `distance_km`.
pub fn diffraction_transmissivity(p: &LinkParams, distance_km: f64, mode: DiffractionMode) -> f64 {
    if distance_km <= 0.0 {
        return 1.0;
    }
    let l = distance_km * 1e3;
    let exponent = match mode {
        DiffractionMode::General => {
            let a_r = p.rx_aperture_m / 2.0;
            let w = p.divergence_rad * l;
            2.0 * a_r * a_r / (w * w)
        }
        DiffractionMode::DiffractionLimited => {
            let num = PI * PI * p.tx_aperture_m * p.tx_aperture_m * p.rx_aperture_m * p.rx_aperture_m;
            num / (8.0 * p.wavelength_m * p.wavelength_m * l * l)
        }
    };
    // 1 - exp(-x) without cancellation for small x.
    -libm::expm1(-exponent)
}

/// Mean pointing efficiency of one jittering terminal.
pub fn pointing_efficiency_single(p: &LinkParams) -> f64 {
    let ratio = p.pointing_jitter_rad / p.divergence_rad;
    1.0 / (1.0 + 16.0 * ratio * ratio)
}

/// Both terminals jitter independently.
pub fn pointing_efficiency_ss(p: &LinkParams) -> f64 {
    let single = pointing_efficiency_single(p);
    single * single
}

/// Ground-satellite link; zero below the minimum elevation.
pub fn p_gs(p: &LinkParams, elevation: f64, slant_km: f64, mode: DiffractionMode) -> LinkProbability {
    if elevation < p.min_elevation_rad {
        return LinkProbability::ZERO;
    }
    let hw = p.hardware_product() * pointing_efficiency_single(p);
    let zenith = FRAC_PI_2 - elevation;
    LinkProbability::new(hw * atmospheric_transmittance(p, zenith) * diffraction_transmissivity(p, slant_km, mode))
}

/// Inter-satellite link; zero when the Earth blocks the line of sight.
pub fn p_ss(p: &LinkParams, visible: bool, distance_km: f64, mode: DiffractionMode) -> LinkProbability {
    if !visible {
        return LinkProbability::ZERO;
    }
    let hw = p.hardware_product() * pointing_efficiency_ss(p);
    LinkProbability::new(hw * diffraction_transmissivity(p, distance_km, mode))
}

pub fn p_fiber(p: &LinkParams, distance_km: f64) -> LinkProbability {
    let db = p.fiber_loss_db_per_km * distance_km.max(0.0);
    LinkProbability::new(p.fiber_hw_efficiency * math::powf(10.0, -db / 10.0))
}

/// Config-file form of [`LinkParams`]: either a preset name or an object
/// whose omitted fields come from its `preset` key (or the field's default
/// preset). Use with `#[serde(deserialize_with = "...")]`.
pub mod config_form {
    use alloc::string::String;
    use core::fmt;

    use serde::de::{self, value::MapAccessDeserializer, Deserializer, MapAccess, Visitor};
    use serde::Deserialize;

    use super::LinkParams;

    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    struct Patch {
        preset: Option<String>,
        wavelength_m: Option<f64>,
        tx_aperture_m: Option<f64>,
        rx_aperture_m: Option<f64>,
        divergence_rad: Option<f64>,
        zenith_transmittance: Option<f64>,
        pointing_jitter_rad: Option<f64>,
        eta_source: Option<f64>,
        eta_opt_tx: Option<f64>,
        eta_opt_rx: Option<f64>,
        eta_det: Option<f64>,
        min_elevation_rad: Option<f64>,
        fiber_loss_db_per_km: Option<f64>,
        fiber_hw_efficiency: Option<f64>,
        entanglement_based: Option<bool>,
    }

    struct LinkVisitor(LinkParams);

    impl<'de> Visitor<'de> for LinkVisitor {
        type Value = LinkParams;

        fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            f.write_str("a link preset name or an object of link parameters")
        }

        fn visit_str<E: de::Error>(self, v: &str) -> Result<LinkParams, E> {
            LinkParams::preset(v).map_err(E::custom)
        }

        fn visit_map<A: MapAccess<'de>>(self, map: A) -> Result<LinkParams, A::Error> {
            let p = Patch::deserialize(MapAccessDeserializer::new(map))?;
            let mut out = match &p.preset {
                Some(name) => LinkParams::preset(name).map_err(de::Error::custom)?,
                None => self.0,
            };
            if let Some(v) = p.wavelength_m {
                out.wavelength_m = v;
            }
            if let Some(v) = p.tx_aperture_m {
                out.tx_aperture_m = v;
            }
            if let Some(v) = p.rx_aperture_m {
                out.rx_aperture_m = v;
            }
            if let Some(v) = p.divergence_rad {
                out.divergence_rad = v;
            }
            if let Some(v) = p.zenith_transmittance {
                out.zenith_transmittance = v;
            }
            if let Some(v) = p.pointing_jitter_rad {
                out.pointing_jitter_rad = v;
            }
            if let Some(v) = p.eta_source {
                out.eta_source = v;
            }
            if let Some(v) = p.eta_opt_tx {
                out.eta_opt_tx = v;
            }
            if let Some(v) = p.eta_opt_rx {
                out.eta_opt_rx = v;
            }
            if let Some(v) = p.eta_det {
                out.eta_det = v;
            }
            if let Some(v) = p.min_elevation_rad {
                out.min_elevation_rad = v;
            }
            if let Some(v) = p.fiber_loss_db_per_km {
                out.fiber_loss_db_per_km = v;
            }
            if let Some(v) = p.fiber_hw_efficiency {
                out.fiber_hw_efficiency = v;
            }
            if let Some(v) = p.entanglement_based {
                out.entanglement_based = v;
            }
            Ok(out)
        }
    }

    pub fn gs<'de, D: Deserializer<'de>>(d: D) -> Result<LinkParams, D::Error> {
        d.deserialize_any(LinkVisitor(LinkParams::gs_default()))
    }

    pub fn ss<'de, D: Deserializer<'de>>(d: D) -> Result<LinkParams, D::Error> {
        d.deserialize_any(LinkVisitor(LinkParams::ss_default()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn perfect() -> LinkParams {
        LinkParams {
            eta_source: 1.0,
            eta_opt_tx: 1.0,
            eta_opt_rx: 1.0,
            eta_det: 1.0,
            pointing_jitter_rad: 0.0,
            ..LinkParams::gs_default()
        }
    }

    #[test]
    fn presets_validate_and_roundtrip_names() {
        LinkParams::gs_default().validate().unwrap();
        LinkParams::ss_default().validate().unwrap();
        assert_eq!(LinkParams::preset("gs-default").unwrap(), LinkParams::gs_default());
        assert!(LinkParams::preset("nope").is_err());
        let p = LinkParams::gs_default();
        assert!((p.zenith_optical_depth() - 0.8f64.ln().abs()).abs() < 1e-12);
        let bad = LinkParams { eta_det: 1.5, ..p };
        assert_eq!(bad.validate(), Err(LinkParamsError::OutOfRange("eta_det")));
    }

    #[test]
    fn atmosphere_examples() {
        let p = LinkParams::gs_default();
        assert_eq!(atmospheric_transmittance(&p, 0.0), 0.8);
        assert!((atmospheric_transmittance(&p, 60f64.to_radians()) - 0.64).abs() < 1e-12);
        assert!(atmospheric_transmittance(&p, FRAC_PI_2 - 1e-9) < 1e-12);
        assert_eq!(atmospheric_transmittance(&p, FRAC_PI_2), 0.0);
    }

    #[test]
    fn diffraction_examples() {
        let p = LinkParams::gs_default();
        assert_eq!(diffraction_transmissivity(&p, 0.0, DiffractionMode::General), 1.0);
        let tiny = LinkParams { rx_aperture_m: 1e-12, ..p };
        assert!(diffraction_transmissivity(&tiny, 1000.0, DiffractionMode::General) < 1e-20);
        let limited = LinkParams { divergence_rad: p.diffraction_limited_divergence(), ..p };
        let a = diffraction_transmissivity(&limited, 1000.0, DiffractionMode::General);
        let b = diffraction_transmissivity(&p, 1000.0, DiffractionMode::DiffractionLimited);
        // pi^2 (0.3)^2 (1.0)^2 / (8 (850e-9)^2 (1e6)^2)
        let x = PI * PI * 0.09 / (8.0 * 850e-9 * 850e-9 * 1e12);
        assert!((b - (1.0 - (-x).exp())).abs() < 1e-12);
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn pointing_examples() {
        let mut p = LinkParams { divergence_rad: 20e-6, pointing_jitter_rad: 0.0, ..LinkParams::ss_default() };
        assert_eq!(pointing_efficiency_single(&p), 1.0);
        assert_eq!(pointing_efficiency_ss(&p), 1.0);
        p.pointing_jitter_rad = 5e-6;
        assert!((pointing_efficiency_single(&p) - 0.5).abs() < 1e-15);
        assert!((pointing_efficiency_ss(&p) - 0.25).abs() < 1e-15);
        p.pointing_jitter_rad = 10e-6;
        assert!((pointing_efficiency_single(&p) - 0.2).abs() < 1e-15);
        assert!((pointing_efficiency_ss(&p) - 0.04).abs() < 1e-15);
    }

    #[test]
    fn gs_examples() {
        let p = LinkParams::gs_default();
        assert_eq!(p_gs(&p, 10f64.to_radians(), 800.0, DiffractionMode::General), LinkProbability::ZERO);
        let q = perfect();
        let v = p_gs(&q, FRAC_PI_2, 1e-12, DiffractionMode::General).value();
        assert!((v - 0.8).abs() < 1e-12);
        let oracle = p.eta_source * p.eta_opt_tx * p.eta_opt_rx * p.eta_det
            * (1.0 / (1.0 + 16.0 * (p.pointing_jitter_rad / p.divergence_rad).powi(2)))
            * 0.8
            * (1.0 - (-2.0 * 0.25 / (p.divergence_rad * 550e3).powi(2)).exp());
        let got = p_gs(&p, FRAC_PI_2, 550.0, DiffractionMode::General).value();
        assert!(((got - oracle) / oracle).abs() < 1e-12);
    }

    #[test]
    fn ss_examples() {
        let p = LinkParams::ss_default();
        assert_eq!(p_ss(&p, false, 100.0, DiffractionMode::General), LinkProbability::ZERO);
        let q = LinkParams { zenith_transmittance: 1.0, ..perfect() };
        assert!((p_ss(&q, true, 1e-12, DiffractionMode::General).value() - 1.0).abs() < 1e-12);
        let pe = 1.0 / (1.0 + 16.0 * (p.pointing_jitter_rad / p.divergence_rad).powi(2));
        let oracle = p.eta_source * p.eta_opt_tx * p.eta_opt_rx * p.eta_det * pe * pe
            * -(-2.0 * 0.05f64.powi(2) / (p.divergence_rad * 2000e3).powi(2)).exp_m1();
        let got = p_ss(&p, true, 2000.0, DiffractionMode::General).value();
        assert!(((got - oracle) / oracle).abs() < 1e-12);
    }

    #[test]
    fn fiber_examples() {
        let p = LinkParams { fiber_hw_efficiency: 0.9, ..LinkParams::gs_default() };
        assert_eq!(p_fiber(&p, 0.0).value(), 0.9);
        let q = LinkParams { fiber_hw_efficiency: 1.0, ..p };
        assert!((p_fiber(&q, 50.0).value() - 0.1).abs() < 1e-15);
        // 10^(-0.02 d) = 1/2  =>  d = log10(2) / 0.02
        let half = 2f64.log10() / 0.02;
        assert!((half - 15.051_499_783).abs() < 1e-6);
        let a = p_fiber(&q, 7.0).value();
        let b = p_fiber(&q, 7.0 + half).value();
        assert!((b / a - 0.5).abs() < 1e-12);
    }

    #[test]
    fn per_step_probability() {
        let p = LinkProbability::new(0.1);
        assert_eq!(p.per_step(0), 0.0);
        assert!((p.per_step(1) - 0.1).abs() < 1e-15);
        assert!((p.per_step(2) - 0.19).abs() < 1e-15);
    }

    fn arb_params() -> impl Strategy<Value = LinkParams> {
        (
            (400e-9f64..1700e-9, 0.01f64..1.0, 0.01f64..2.0, 1e-6f64..1e-4, 0.05f64..1.0, 0.0f64..2e-5),
            (0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0, 0.0f64..1.0),
        )
            .prop_map(|((wl, dt, dr, div, tz, jit), (s, tx, rx, det, hw))| LinkParams {
                wavelength_m: wl,
                tx_aperture_m: dt,
                rx_aperture_m: dr,
                divergence_rad: div,
                zenith_transmittance: tz,
                pointing_jitter_rad: jit,
                eta_source: s,
                eta_opt_tx: tx,
                eta_opt_rx: rx,
                eta_det: det,
                fiber_hw_efficiency: hw,
                ..LinkParams::gs_default()
            })
    }

    proptest! {
        #[test]
        fn probabilities_in_unit_interval(p in arb_params(), el in -1.6f64..1.6, d in 0.0f64..1e5) {
            for mode in [DiffractionMode::General, DiffractionMode::DiffractionLimited] {
                let g = p_gs(&p, el, d, mode).value();
                let s = p_ss(&p, true, d, mode).value();
                prop_assert!((0.0..=1.0).contains(&g));
                prop_assert!((0.0..=1.0).contains(&s));
            }
            prop_assert!((0.0..=1.0).contains(&p_fiber(&p, d).value()));
        }

        #[test]
        fn monotone_in_distance_and_elevation(p in arb_params(), d1 in 1.0f64..5e4, d2 in 1.0f64..5e4, e1 in 0.35f64..1.57, e2 in 0.35f64..1.57) {
            let (near, far) = if d1 < d2 { (d1, d2) } else { (d2, d1) };
            let m = DiffractionMode::General;
            prop_assert!(p_gs(&p, 1.0, near, m).value() >= p_gs(&p, 1.0, far, m).value());
            prop_assert!(p_ss(&p, true, near, m).value() >= p_ss(&p, true, far, m).value());
            let (lo, hi) = if e1 < e2 { (e1, e2) } else { (e2, e1) };
            prop_assert!(p_gs(&p, hi, 800.0, m).value() >= p_gs(&p, lo, 800.0, m).value());
        }

        #[test]
        fn modes_agree_at_diffraction_limit(p in arb_params(), d in 1.0f64..1e5) {
            let q = LinkParams { divergence_rad: p.diffraction_limited_divergence(), ..p };
            let a = diffraction_transmissivity(&q, d, DiffractionMode::General);
            let b = diffraction_transmissivity(&q, d, DiffractionMode::DiffractionLimited);
            prop_assert!((a - b).abs() < 1e-9);
        }

        #[test]
        fn ss_decreasing_in_jitter(p in arb_params(), j1 in 0.0f64..1e-4, j2 in 0.0f64..1e-4) {
            prop_assume!((j1 - j2).abs() > 1e-9);
            let p = LinkParams { eta_source: 1.0, eta_opt_tx: 1.0, eta_opt_rx: 1.0, eta_det: 1.0, ..p };
            let (lo, hi) = if j1 < j2 { (j1, j2) } else { (j2, j1) };
            let a = p_ss(&LinkParams { pointing_jitter_rad: lo, ..p }, true, 500.0, DiffractionMode::General).value();
            let b = p_ss(&LinkParams { pointing_jitter_rad: hi, ..p }, true, 500.0, DiffractionMode::General).value();
            prop_assert!(a > b || a == 0.0);
        }
    }
}
