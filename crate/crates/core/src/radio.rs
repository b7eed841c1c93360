//! Simulated BLE channel: log-distance path loss, distance inversion, the
//! proximity predicate and the advertisement payload layout.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Payload length on the wire: two binary64 coordinates and an i32 counter.
pub const PAYLOAD_LEN: usize = 20;

/// Default proximity cutoff in meters.
pub const DEFAULT_CUTOFF_M: f64 = 4.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RadioError {
    #[error("distance must be positive, got {0} m")]
    Distance(f64),
    #[error("path-loss exponent must be positive, got {0}")]
    Exponent(f64),
    #[error("noise sigma must be non-negative, got {0} dB")]
    NoiseSigma(f64),
    #[error("reference power must be finite, got {0}")]
    ReferencePower(f64),
    #[error("proximity cutoff must be positive, got {0} m")]
    Cutoff(f64),
    #[error("malformed payload: expected {PAYLOAD_LEN} bytes, got {0}")]
    MalformedPayload(usize),
}

/// Log-distance path-loss model with log-normal shadowing.
///
/// Received strength falls with distance:
/// `rssi = p0 - 10 * exponent * log10(d) + noise`, with `p0` measured at 1 m.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLossModel {
    pub p0_dbm: f64,
    pub exponent: f64,
    pub noise_sigma_db: f64,
}

impl Default for PathLossModel {
    fn default() -> Self {
        Self { p0_dbm: -59.0, exponent: 2.0, noise_sigma_db: 2.0 }
    }
}

impl PathLossModel {
    pub fn validate(&self) -> Result<(), RadioError> {
        if !self.p0_dbm.is_finite() {
            return Err(RadioError::ReferencePower(self.p0_dbm));
        }
        if !(self.exponent > 0.0) || !self.exponent.is_finite() {
            return Err(RadioError::Exponent(self.exponent));
        }
        if !(self.noise_sigma_db >= 0.0) || !self.noise_sigma_db.is_finite() {
            return Err(RadioError::NoiseSigma(self.noise_sigma_db));
        }
        Ok(())
    }

    /// RSSI at distance `d` meters; `noise_db` is drawn by the caller.
    pub fn rssi_at(&self, d: f64, noise_db: f64) -> Result<f64, RadioError> {
        if !(d > 0.0) {
            return Err(RadioError::Distance(d));
        }
        Ok(self.p0_dbm - 10.0 * self.exponent * d.log10() + noise_db)
    }

    pub fn distance_from_rssi(&self, rssi_dbm: f64) -> f64 {
        10f64.powf((self.p0_dbm - rssi_dbm) / (10.0 * self.exponent))
    }

    /// True iff the distance implied by `rssi_dbm` is strictly below `cutoff_m`.
    ///
    /// Compared in the RSSI domain so that a noiseless reading taken exactly
    /// at the cutoff is rejected without rounding ambiguity.
    pub fn in_proximity(&self, rssi_dbm: f64, cutoff_m: f64) -> Result<bool, RadioError> {
        if !(cutoff_m > 0.0) {
            return Err(RadioError::Cutoff(cutoff_m));
        }
        Ok(rssi_dbm > self.rssi_at(cutoff_m, 0.0)?)
    }
}

/// What a device advertises to its neighbours.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdvertisementPayload {
    pub lat: f64,
    pub lon: f64,
    pub errors: i32,
}

impl AdvertisementPayload {
    /// Little-endian layout: lat (0..8), lon (8..16), errors (16..20).
    pub fn encode(&self) -> [u8; PAYLOAD_LEN] {
        let mut out = [0u8; PAYLOAD_LEN];
        out[0..8].copy_from_slice(&self.lat.to_le_bytes());
        out[8..16].copy_from_slice(&self.lon.to_le_bytes());
        out[16..20].copy_from_slice(&self.errors.to_le_bytes());
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, RadioError> {
        let bytes: &[u8; PAYLOAD_LEN] = bytes
            .try_into()
            .map_err(|_| RadioError::MalformedPayload(bytes.len()))?;
        let f = |r: std::ops::Range<usize>| f64::from_le_bytes(bytes[r].try_into().unwrap());
        Ok(Self {
            lat: f(0..8),
            lon: f(8..16),
            errors: i32::from_le_bytes(bytes[16..20].try_into().unwrap()),
        })
    }

    /// Field-wise bit equality (distinguishes NaN payloads and signed zeros).
    pub fn bit_eq(&self, other: &Self) -> bool {
        self.lat.to_bits() == other.lat.to_bits()
            && self.lon.to_bits() == other.lon.to_bits()
            && self.errors == other.errors
    }
}
