//! Execution replay: many devices walking on a shared clock, detecting each
//! other through the simulated radio and exchanging corrections.

mod engine;
mod load;
mod rng;
mod sweep;
mod synthetic;

use std::collections::HashSet;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::collab::CollabConfig;
use crate::geodesy::GeoPoint;
use crate::inertial::{InertialError, InertialSample, PeakDetectorConfig};
use crate::pdr::PdrError;
use crate::radio::{PathLossModel, DEFAULT_CUTOFF_M};

pub use engine::{run, run_parallel_pdr};
pub use load::{load_scenario, read_groundtruth_csv, write_groundtruth_csv, JsonScenarioSource, ScenarioSource};
pub use sweep::{sweep, SweepCell, SweepGrid};
pub use synthetic::{generate_synthetic, synthesize_inertial, PathShape, SyntheticParams};

/// Default replay tick, equal to the inertial sampling interval.
pub const DEFAULT_TICK_MS: u64 = 300;

/// Default look-back for the stationarity test: two step periods at a
/// normal walking cadence.
pub const DEFAULT_STATIONARY_WINDOW_MS: u64 = 1_200;

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
    #[error("device `{id}`: {source}")]
    Device {
        id: String,
        #[source]
        source: DeviceError,
    },
    #[error("{path}: {message}")]
    Load { path: PathBuf, message: String },
}

impl ReplayError {
    pub(crate) fn invalid(field: impl Into<String>, message: impl ToString) -> Self {
        Self::Invalid { field: field.into(), message: message.to_string() }
    }

    pub(crate) fn device(id: &str, source: impl Into<DeviceError>) -> Self {
        Self::Device { id: id.to_string(), source: source.into() }
    }
}

#[derive(Debug, Error)]
pub enum DeviceError {
    #[error("inertial stream: {0}")]
    Inertial(#[from] InertialError),
    #[error("groundtruth: {0}")]
    Groundtruth(String),
    #[error(transparent)]
    Pdr(#[from] PdrError),
    #[error("synthetic inertial: {0}")]
    Synthetic(String),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
}

/// A groundtruth fix, timed relative to the device's own start.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundtruthPoint {
    pub t_ms: u64,
    pub lat: f64,
    pub lon: f64,
}

impl GroundtruthPoint {
    pub fn point(&self) -> GeoPoint {
        GeoPoint { lat: self.lat, lon: self.lon }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GroundtruthSource {
    Inline(Vec<GroundtruthPoint>),
    Csv { csv: PathBuf },
}

/// Noise settings for inertial data synthesized from a device's groundtruth.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SyntheticInertial {
    /// Constant gyro bias in rad/s.
    #[serde(default)]
    pub gyro_bias: f64,
    /// White gyro noise standard deviation in rad/s.
    #[serde(default)]
    pub gyro_noise: f64,
    /// White accelerometer noise standard deviation in m/s².
    #[serde(default)]
    pub accel_noise: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InertialSource {
    Inline(Vec<InertialSample>),
    Csv { csv: PathBuf },
    Synthetic { synthetic: SyntheticInertial },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceSpec {
    pub id: String,
    pub groundtruth: GroundtruthSource,
    pub inertial: InertialSource,
    #[serde(default)]
    pub start_offset_ms: u64,
    pub step_length_m: f64,
    #[serde(default)]
    pub initial_heading_rad: f64,
}

impl DeviceSpec {
    /// Inline groundtruth, or an empty slice when it lives in a CSV file.
    pub fn groundtruth_points(&self) -> &[GroundtruthPoint] {
        match &self.groundtruth {
            GroundtruthSource::Inline(g) => g,
            GroundtruthSource::Csv { .. } => &[],
        }
    }
}

/// How the per-device error counter grows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorGrowth {
    /// One unit per detected step.
    #[default]
    PerStep,
    /// One unit per tick while the device is walking.
    PerTick,
}

fn default_cutoff() -> f64 {
    DEFAULT_CUTOFF_M
}

fn default_tick() -> u64 {
    DEFAULT_TICK_MS
}

fn default_stationary_window() -> u64 {
    DEFAULT_STATIONARY_WINDOW_MS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub devices: Vec<DeviceSpec>,
    #[serde(default)]
    pub path_loss: PathLossModel,
    #[serde(default)]
    pub collab: CollabConfig,
    #[serde(default = "default_cutoff")]
    pub proximity_cutoff_m: f64,
    #[serde(default = "default_tick")]
    pub tick_ms: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub peak_detector: PeakDetectorConfig,
    #[serde(default)]
    pub error_growth: ErrorGrowth,
    /// Minimum number of ticks between two exchanges of the same pair;
    /// zero exchanges on every overlapping tick.
    #[serde(default)]
    pub debounce_ticks: u32,
    /// A device counts as stationary when its estimate has not changed over
    /// this many milliseconds (rounded up to whole ticks, at least one).
    #[serde(default = "default_stationary_window")]
    pub stationary_window_ms: u64,
}

impl Scenario {
    /// Checks scenario-level invariants. Streams are checked when the run
    /// prepares each device.
    pub fn validate(&self) -> Result<(), ReplayError> {
        if self.devices.is_empty() {
            return Err(ReplayError::invalid("devices", "at least one device is required"));
        }
        if self.tick_ms == 0 {
            return Err(ReplayError::invalid("tick_ms", "must be positive"));
        }
        self.collab.validate().map_err(|e| ReplayError::invalid("collab.lower", e))?;
        self.path_loss.validate().map_err(|e| ReplayError::invalid("path_loss", e))?;
        if !(self.proximity_cutoff_m > 0.0) || !self.proximity_cutoff_m.is_finite() {
            return Err(ReplayError::invalid(
                "proximity_cutoff_m",
                format!("must be positive, got {}", self.proximity_cutoff_m),
            ));
        }
        self.peak_detector.validate().map_err(|e| ReplayError::invalid("peak_detector", e))?;

        let mut seen = HashSet::new();
        for (i, d) in self.devices.iter().enumerate() {
            let field = |name: &str| format!("devices[{i}].{name}");
            if d.id.is_empty() {
                return Err(ReplayError::invalid(field("id"), "must not be empty"));
            }
            if !seen.insert(d.id.as_str()) {
                return Err(ReplayError::invalid(field("id"), format!("duplicate id `{}`", d.id)));
            }
            if !(d.step_length_m > 0.0) || !d.step_length_m.is_finite() {
                return Err(ReplayError::invalid(
                    field("step_length_m"),
                    format!("must be positive, got {}", d.step_length_m),
                ));
            }
            if !d.initial_heading_rad.is_finite() {
                return Err(ReplayError::invalid(field("initial_heading_rad"), "must be finite"));
            }
            if let GroundtruthSource::Inline(gt) = &d.groundtruth {
                validate_groundtruth(gt).map_err(|m| ReplayError::invalid(field("groundtruth"), m))?;
            }
        }
        Ok(())
    }

    /// Number of ticks the stationarity test looks back.
    pub fn stationary_window_ticks(&self) -> usize {
        self.stationary_window_ms.div_ceil(self.tick_ms.max(1)).max(1) as usize
    }

    pub fn device_ids(&self) -> Vec<&str> {
        self.devices.iter().map(|d| d.id.as_str()).collect()
    }
}

pub(crate) fn validate_groundtruth(gt: &[GroundtruthPoint]) -> Result<(), String> {
    if gt.is_empty() {
        return Err("must not be empty".into());
    }
    for (i, p) in gt.iter().enumerate() {
        p.point().validate().map_err(|e| format!("point {i}: {e}"))?;
        if i > 0 && p.t_ms <= gt[i - 1].t_ms {
            return Err(format!("point {i}: timestamp {} ms does not increase", p.t_ms));
        }
    }
    Ok(())
}

/// One device's recorded tracks, sampled on the replay clock.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceTrack {
    pub id: String,
    /// Global replay time of each sample.
    pub t_ms: Vec<u64>,
    pub groundtruth: Vec<GeoPoint>,
    pub pdr: Vec<GeoPoint>,
    pub aoe: Vec<GeoPoint>,
    /// AOE error counter after each tick.
    pub errors: Vec<u32>,
    pub final_errors: u32,
}

/// One directed exchange: `id_a` ran the update against `id_b`'s broadcast.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollabEvent {
    pub t_ms: u64,
    pub id_a: String,
    pub id_b: String,
    pub ratio_a: Option<f64>,
    pub updated_a: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunRecord {
    pub devices: Vec<DeviceTrack>,
    pub events: Vec<CollabEvent>,
}

impl RunRecord {
    /// Exchanges run by `id` and how many of them moved its estimate.
    pub fn collaboration_counts(&self, id: &str) -> (usize, usize) {
        self.events
            .iter()
            .filter(|e| e.id_a == id)
            .fold((0, 0), |(n, u), e| (n + 1, u + usize::from(e.updated_a)))
    }

    pub fn location_updates(&self) -> usize {
        self.events.iter().filter(|e| e.updated_a).count()
    }

    pub fn device(&self, id: &str) -> Option<&DeviceTrack> {
        self.devices.iter().find(|d| d.id == id)
    }
}
