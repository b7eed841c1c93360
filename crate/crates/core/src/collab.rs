//! Accumulation-of-errors (AOE) collaboration.
//!
//! Two devices within range pull their estimates toward each other along the
//! segment joining them. The share of the segment a device travels is its
//! fraction of the pair's combined error counters, so the less trustworthy
//! estimate moves more. Stationary devices drain their counters on every
//! encounter and end up acting as reset points for their neighbours.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geodesy::{intermediate_point, GeoPoint};
use crate::radio::AdvertisementPayload;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CollabError {
    #[error("lower threshold ({lower}) must be less than upper threshold ({upper})")]
    Thresholds { lower: u32, upper: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollabConfig {
    /// Errors a device must exceed before it corrects its own location.
    pub lower: u32,
    /// Peers at or above this error count are ignored.
    pub upper: u32,
}

impl Default for CollabConfig {
    fn default() -> Self {
        Self { lower: 40, upper: 80 }
    }
}

impl CollabConfig {
    pub fn new(lower: u32, upper: u32) -> Result<Self, CollabError> {
        let cfg = Self { lower, upper };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CollabError> {
        if self.lower >= self.upper {
            return Err(CollabError::Thresholds { lower: self.lower, upper: self.upper });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviceState {
    pub location: GeoPoint,
    pub errors: u32,
    /// Location at the end of the previous tick.
    pub previous_location: GeoPoint,
}

impl DeviceState {
    pub fn new(location: GeoPoint) -> Self {
        Self { location, errors: 0, previous_location: location }
    }

    pub fn payload(&self) -> AdvertisementPayload {
        AdvertisementPayload {
            lat: self.location.lat,
            lon: self.location.lon,
            errors: i32::try_from(self.errors).unwrap_or(i32::MAX),
        }
    }

    /// The peer view reconstructed from a received advertisement.
    pub fn from_payload(p: &AdvertisementPayload) -> Self {
        let location = GeoPoint { lat: p.lat, lon: p.lon };
        Self {
            location,
            errors: p.errors.max(0) as u32,
            previous_location: location,
        }
    }
}

/// Increments the error counter by one unit of accumulated drift.
pub fn accumulate_error(state: DeviceState) -> DeviceState {
    DeviceState { errors: state.errors.saturating_add(1), ..state }
}

/// Outcome of one directed exchange, kept for event logs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exchange {
    pub state: DeviceState,
    /// `a.errors / (a.errors + b.errors)`; `None` when both counters are zero.
    pub ratio: Option<f64>,
    pub updated: bool,
}

/// Runs the AOE update for device `a` against peer `b` and returns the new `a`.
pub fn aoe_step(a: DeviceState, b: &DeviceState, cfg: &CollabConfig) -> DeviceState {
    aoe_exchange(a, b, cfg).state
}

pub fn aoe_exchange(a: DeviceState, b: &DeviceState, cfg: &CollabConfig) -> Exchange {
    let sum = u64::from(a.errors) + u64::from(b.errors);
    if sum == 0 {
        return Exchange { state: a, ratio: None, updated: false };
    }
    let ratio = f64::from(a.errors) / sum as f64;
    let stationary = a.previous_location == a.location;

    let mut next = a;
    let mut updated = false;
    if cfg.lower < a.errors && b.errors < cfg.upper {
        // ratio is in [0, 1] by construction
        let candidate = intermediate_point(a.location, b.location, ratio).expect("ratio within [0, 1]");
        updated = !candidate.bit_eq(&a.location);
        next.location = candidate;
    }
    if stationary && a.errors > 0 {
        next.errors -= 1;
    }
    Exchange { state: next, ratio: Some(ratio), updated }
}
