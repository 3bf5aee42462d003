//! Ground sites, circular orbits and the geometric quantities that feed the
//! optical link model.
//!
//! Satellite positions are expressed in an Earth-centered inertial frame.
//! Ground sites rotate with the Earth at [`EarthModel::rotation_rate_rad_s`],
//! so a site's position and a satellite's sub-point are both functions of
//! simulation time.

use core::f64::consts::{FRAC_PI_2, PI};
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::math;

/// Spherical Earth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EarthModel {
    pub radius_km: f64,
    /// Lowest altitude an inter-satellite line of sight may graze.
    pub grazing_altitude_km: f64,
    /// Gravitational parameter, km^3/s^2.
    pub mu_km3_s2: f64,
    pub rotation_rate_rad_s: f64,
}

impl Default for EarthModel {
    fn default() -> Self {
        Self {
            radius_km: 6371.0,
            grazing_altitude_km: 20.0,
            mu_km3_s2: 398_600.441_8,
            rotation_rate_rad_s: 7.292_115_9e-5,
        }
    }
}

impl EarthModel {
    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.radius_km > 0.0) || !(self.grazing_altitude_km >= 0.0) || !(self.mu_km3_s2 > 0.0) {
            return Err(GeometryError::InvalidEarth);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GeometryError {
    InvalidEarth,
    InvalidSite { latitude_rad: f64, longitude_rad: f64 },
    InvalidOrbit,
    Tle(&'static str),
}

impl fmt::Display for GeometryError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeometryError::InvalidEarth => write!(f, "earth radius and mu must be positive"),
            GeometryError::InvalidSite { latitude_rad, longitude_rad } => write!(
                f,
                "ground site out of range (lat {latitude_rad} rad, lon {longitude_rad} rad)"
            ),
            GeometryError::InvalidOrbit => write!(f, "orbit altitude must be positive and angles finite"),
            GeometryError::Tle(msg) => write!(f, "malformed TLE: {msg}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for GeometryError {}

/// Geodetic location on the sphere, radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundSite {
    pub latitude_rad: f64,
    pub longitude_rad: f64,
}

impl GroundSite {
    pub fn new(latitude_rad: f64, longitude_rad: f64) -> Result<Self, GeometryError> {
        let ok = latitude_rad.is_finite()
            && longitude_rad.is_finite()
            && (-FRAC_PI_2..=FRAC_PI_2).contains(&latitude_rad)
            && (-PI..PI).contains(&longitude_rad);
        if !ok {
            return Err(GeometryError::InvalidSite { latitude_rad, longitude_rad });
        }
        Ok(Self { latitude_rad, longitude_rad })
    }

    /// Longitude is wrapped into `[-180, 180)`.
    pub fn from_degrees(latitude_deg: f64, longitude_deg: f64) -> Result<Self, GeometryError> {
        Self::new(latitude_deg.to_radians(), math::wrap_pi(longitude_deg.to_radians()))
    }

    /// Point on the sphere of radius `radius_km`, Earth-fixed frame.
    pub fn to_ecef(&self, radius_km: f64) -> EcefPosition {
        let (sl, cl) = (math::sin(self.latitude_rad), math::cos(self.latitude_rad));
        let (so, co) = (math::sin(self.longitude_rad), math::cos(self.longitude_rad));
        EcefPosition::new(radius_km * cl * co, radius_km * cl * so, radius_km * sl)
    }

    /// Position at time `t_s` in the inertial frame used by [`propagate`].
    pub fn position_at(&self, earth: &EarthModel, t_s: f64) -> EcefPosition {
        let rotated = GroundSite {
            latitude_rad: self.latitude_rad,
            longitude_rad: math::wrap_pi(self.longitude_rad + earth.rotation_rate_rad_s * t_s),
        };
        rotated.to_ecef(earth.radius_km)
    }

    /// Great-circle distance to `other` on the surface.
    pub fn surface_distance_km(&self, other: &GroundSite, earth: &EarthModel) -> f64 {
        earth.radius_km * central_angle(self, other)
    }
}

/// Circular Keplerian orbit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircularOrbit {
    pub altitude_km: f64,
    pub inclination_rad: f64,
    pub raan_rad: f64,
    /// Argument of latitude at epoch.
    pub phase_rad: f64,
}

impl CircularOrbit {
    pub fn new(altitude_km: f64, inclination_rad: f64, raan_rad: f64, phase_rad: f64) -> Result<Self, GeometryError> {
        let orbit = Self { altitude_km, inclination_rad, raan_rad, phase_rad };
        orbit.validate()?;
        Ok(orbit)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let finite = self.inclination_rad.is_finite() && self.raan_rad.is_finite() && self.phase_rad.is_finite();
        if !(self.altitude_km > 0.0) || !finite {
            return Err(GeometryError::InvalidOrbit);
        }
        Ok(())
    }

    pub fn radius_km(&self, earth: &EarthModel) -> f64 {
        earth.radius_km + self.altitude_km
    }

    pub fn mean_motion_rad_s(&self, earth: &EarthModel) -> f64 {
        let r = self.radius_km(earth);
        math::sqrt(earth.mu_km3_s2 / (r * r * r))
    }

    pub fn period_s(&self, earth: &EarthModel) -> f64 {
        2.0 * PI / self.mean_motion_rad_s(earth)
    }

    /// Lossy approximation of a two-line element set: eccentricity, drag
    /// and the element epoch are ignored; altitude comes from the mean
    /// motion and the phase from argument of perigee plus mean anomaly.
    pub fn from_tle(earth: &EarthModel, line1: &str, line2: &str) -> Result<Self, GeometryError> {
        if line1.len() != 69 || line2.len() != 69 {
            return Err(GeometryError::Tle("lines must be 69 characters"));
        }
        if !line1.starts_with('1') || !line2.starts_with('2') {
            return Err(GeometryError::Tle("line numbers must be 1 and 2"));
        }
        let field = |range: core::ops::Range<usize>| -> Result<f64, GeometryError> {
            line2
                .get(range)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .ok_or(GeometryError::Tle("unparseable numeric field"))
        };
        let inclination = field(8..16)?.to_radians();
        let raan = field(17..25)?.to_radians();
        let arg_perigee = field(34..42)?.to_radians();
        let mean_anomaly = field(43..51)?.to_radians();
        let revs_per_day = field(52..63)?;
        if !(revs_per_day > 0.0) {
            return Err(GeometryError::Tle("mean motion must be positive"));
        }
        let n = revs_per_day * 2.0 * PI / 86_400.0;
        let a = math::powf(earth.mu_km3_s2 / (n * n), 1.0 / 3.0);
        Self::new(a - earth.radius_km, inclination, raan, math::wrap_pi(arg_perigee + mean_anomaly))
    }
}

/// Anything that yields a satellite position over time.
pub trait Propagator {
    fn position(&self, earth: &EarthModel, t_s: f64) -> EcefPosition;
}

impl Propagator for CircularOrbit {
    fn position(&self, earth: &EarthModel, t_s: f64) -> EcefPosition {
        propagate(earth, self, t_s)
    }
}

/// Cartesian position in an Earth-centered frame, km.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EcefPosition {
    pub x_km: f64,
    pub y_km: f64,
    pub z_km: f64,
}

impl EcefPosition {
    pub const fn new(x_km: f64, y_km: f64, z_km: f64) -> Self {
        Self { x_km, y_km, z_km }
    }

    pub fn dot(&self, o: &EcefPosition) -> f64 {
        self.x_km * o.x_km + self.y_km * o.y_km + self.z_km * o.z_km
    }

    pub fn norm(&self) -> f64 {
        math::sqrt(self.dot(self))
    }

    pub fn sub(&self, o: &EcefPosition) -> EcefPosition {
        EcefPosition::new(self.x_km - o.x_km, self.y_km - o.y_km, self.z_km - o.z_km)
    }

    pub fn add_scaled(&self, o: &EcefPosition, s: f64) -> EcefPosition {
        EcefPosition::new(self.x_km + s * o.x_km, self.y_km + s * o.y_km, self.z_km + s * o.z_km)
    }

    /// Sub-point of this position, in the inertial frame's longitude.
    pub fn subpoint(&self) -> GroundSite {
        let r = self.norm();
        let lat = if r > 0.0 { math::atan2(self.z_km, math::sqrt(self.x_km * self.x_km + self.y_km * self.y_km)) } else { 0.0 };
        GroundSite { latitude_rad: lat, longitude_rad: math::wrap_pi(math::atan2(self.y_km, self.x_km)) }
    }
}

/// Central angle between two points on the sphere (spherical law of cosines).
pub fn central_angle(g: &GroundSite, s: &GroundSite) -> f64 {
    let c = math::sin(g.latitude_rad) * math::sin(s.latitude_rad)
        + math::cos(g.latitude_rad) * math::cos(s.latitude_rad) * math::cos(s.longitude_rad - g.longitude_rad);
    math::acos(c.clamp(-1.0, 1.0))
}

/// Ground-to-satellite line-of-sight distance.
pub fn slant_range(earth: &EarthModel, h_s: f64, gamma: f64) -> f64 {
    let re = earth.radius_km;
    let rs = re + h_s;
    math::sqrt((rs * rs + re * re - 2.0 * re * rs * math::cos(gamma)).max(0.0))
}

/// Elevation of the satellite above the local horizontal; `pi/2` at `gamma = 0`.
pub fn elevation(earth: &EarthModel, h_s: f64, gamma: f64) -> f64 {
    let ratio = earth.radius_km / (earth.radius_km + h_s);
    math::atan2(math::cos(gamma) - ratio, math::sin(gamma))
}

/// Position on a circular orbit at `t_s` seconds after epoch.
pub fn propagate(earth: &EarthModel, orbit: &CircularOrbit, t_s: f64) -> EcefPosition {
    let r = orbit.radius_km(earth);
    let u = orbit.phase_rad + orbit.mean_motion_rad_s(earth) * t_s;
    let (su, cu) = (math::sin(u), math::cos(u));
    let (si, ci) = (math::sin(orbit.inclination_rad), math::cos(orbit.inclination_rad));
    let (so, co) = (math::sin(orbit.raan_rad), math::cos(orbit.raan_rad));
    EcefPosition::new(r * (co * cu - so * su * ci), r * (so * cu + co * su * ci), r * su * si)
}

pub fn inter_satellite_distance(a: &EcefPosition, b: &EcefPosition) -> f64 {
    a.sub(b).norm()
}

/// Closest approach of the segment `a -> b` to the Earth's center.
pub fn segment_min_radius(a: &EcefPosition, b: &EcefPosition) -> f64 {
    let d = b.sub(a);
    let dd = d.dot(&d);
    if dd == 0.0 {
        return a.norm();
    }
    let s = (-a.dot(&d) / dd).clamp(0.0, 1.0);
    a.add_scaled(&d, s).norm()
}

/// Line of sight between two satellites clears the grazing altitude.
pub fn visibility(earth: &EarthModel, a: &EcefPosition, b: &EcefPosition) -> bool {
    segment_min_radius(a, b) > earth.radius_km + earth.grazing_altitude_km
}

/// Elevation, slant range and zenith angle of a satellite seen from a site
/// at time `t_s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LookAngles {
    pub central_angle: f64,
    pub elevation: f64,
    pub zenith: f64,
    pub slant_km: f64,
}

pub fn look_angles(earth: &EarthModel, site: &GroundSite, sat: &EcefPosition, t_s: f64) -> LookAngles {
    let sub = sat.subpoint();
    let sub = GroundSite {
        latitude_rad: sub.latitude_rad,
        longitude_rad: math::wrap_pi(sub.longitude_rad - earth.rotation_rate_rad_s * t_s),
    };
    let gamma = central_angle(site, &sub);
    let h_s = sat.norm() - earth.radius_km;
    let el = elevation(earth, h_s, gamma);
    LookAngles { central_angle: gamma, elevation: el, zenith: FRAC_PI_2 - el, slant_km: slant_range(earth, h_s, gamma) }
}
