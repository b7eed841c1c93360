//! Geographic primitives on a spherical Earth.
//!
//! Positions are exchanged as latitude/longitude pairs while dead reckoning
//! works in a local planar frame, so this module provides the bridge between
//! the two: great-circle distance, a local equirectangular frame and the
//! fractional point used by the collaboration step.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Mean Earth radius in meters.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Radius of the disc around a frame origin inside which the local
/// projection is considered accurate.
pub const FRAME_VALIDITY_M: f64 = 10_000.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeodesyError {
    #[error("latitude {0} outside [-90, 90]")]
    Latitude(f64),
    #[error("longitude {0} outside [-180, 180]")]
    Longitude(f64),
    #[error("fraction {0} outside [0, 1]")]
    Fraction(f64),
    #[error("point is {distance_m:.1} m from the frame origin, beyond the {FRAME_VALIDITY_M} m validity disc")]
    OutsideFrame { distance_m: f64 },
}

/// A latitude/longitude pair in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self, GeodesyError> {
        let p = Self { lat, lon };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), GeodesyError> {
        if !(-90.0..=90.0).contains(&self.lat) {
            return Err(GeodesyError::Latitude(self.lat));
        }
        if !(-180.0..=180.0).contains(&self.lon) {
            return Err(GeodesyError::Longitude(self.lon));
        }
        Ok(())
    }

    /// Bitwise equality of both coordinates.
    pub fn bit_eq(&self, other: &GeoPoint) -> bool {
        self.lat.to_bits() == other.lat.to_bits() && self.lon.to_bits() == other.lon.to_bits()
    }

    fn to_unit_vector(self) -> [f64; 3] {
        let (lat, lon) = (self.lat.to_radians(), self.lon.to_radians());
        [lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin()]
    }

    fn from_vector(v: [f64; 3]) -> GeoPoint {
        let lat = v[2].atan2(v[0].hypot(v[1])).to_degrees();
        let lon = v[1].atan2(v[0]).to_degrees();
        GeoPoint { lat, lon }
    }
}

/// Great-circle distance in meters using the haversine formula.
pub fn haversine(a: GeoPoint, b: GeoPoint) -> f64 {
    let (phi_a, phi_b) = (a.lat.to_radians(), b.lat.to_radians());
    let d_phi = phi_b - phi_a;
    let d_lambda = (b.lon - a.lon).to_radians();
    let h = (d_phi / 2.0).sin().powi(2) + phi_a.cos() * phi_b.cos() * (d_lambda / 2.0).sin().powi(2);
    // rounding can push h a hair above 1 for antipodes
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

/// The point a `fraction` of the way from `a` to `b`.
///
/// Interpolates linearly in the plane tangent to the sphere at `a`
/// (gnomonic projection), which keeps the result on the great circle
/// through both points. The endpoints are returned exactly for fractions
/// 0 and 1.
pub fn intermediate_point(a: GeoPoint, b: GeoPoint, fraction: f64) -> Result<GeoPoint, GeodesyError> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(GeodesyError::Fraction(fraction));
    }
    if fraction == 0.0 || a == b {
        return Ok(a);
    }
    if fraction == 1.0 {
        return Ok(b);
    }
    let va = a.to_unit_vector();
    let vb = b.to_unit_vector();
    let cos_ab: f64 = va.iter().zip(&vb).map(|(x, y)| x * y).sum();
    // b lifted onto the tangent plane at a
    let tb = vb.map(|c| c / cos_ab);
    let t = [0, 1, 2].map(|i| va[i] + fraction * (tb[i] - va[i]));
    Ok(GeoPoint::from_vector(t))
}

/// Local equirectangular frame: x meters east, y meters north of `origin`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalFrame {
    origin: GeoPoint,
    m_per_deg_lat: f64,
    m_per_deg_lon: f64,
}

impl LocalFrame {
    pub fn new(origin: GeoPoint) -> Self {
        let m_per_deg_lat = EARTH_RADIUS_M.to_radians();
        Self {
            origin,
            m_per_deg_lat,
            m_per_deg_lon: m_per_deg_lat * origin.lat.to_radians().cos(),
        }
    }

    pub fn origin(&self) -> GeoPoint {
        self.origin
    }

    pub fn project(&self, p: GeoPoint) -> (f64, f64) {
        let mut d_lon = p.lon - self.origin.lon;
        if d_lon > 180.0 {
            d_lon -= 360.0;
        } else if d_lon < -180.0 {
            d_lon += 360.0;
        }
        (d_lon * self.m_per_deg_lon, (p.lat - self.origin.lat) * self.m_per_deg_lat)
    }

    pub fn unproject(&self, x: f64, y: f64) -> GeoPoint {
        let lat = self.origin.lat + y / self.m_per_deg_lat;
        let mut lon = self.origin.lon + x / self.m_per_deg_lon;
        if lon > 180.0 {
            lon -= 360.0;
        } else if lon < -180.0 {
            lon += 360.0;
        }
        GeoPoint { lat, lon }
    }

    /// Rejects points outside the validity disc around the origin.
    pub fn check_within(&self, p: GeoPoint) -> Result<(), GeodesyError> {
        let distance_m = haversine(self.origin, p);
        if distance_m > FRAME_VALIDITY_M {
            return Err(GeodesyError::OutsideFrame { distance_m });
        }
        Ok(())
    }
}
