//! Inertial stream processing: acceleration magnitude, peak-based step
//! detection, gyro heading integration and step-length calibration.

use std::f64::consts::PI;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Standard gravity, the resting magnitude of the accelerometer.
pub const GRAVITY: f64 = 9.81;

/// Column header of the inertial CSV format.
pub const CSV_HEADER: [&str; 5] = ["t_ms", "ax", "ay", "az", "gz"];

#[derive(Debug, Error)]
pub enum InertialError {
    #[error("sample {index}: timestamp {t_ms} ms does not increase past {prev_ms} ms")]
    NonMonotonic { index: usize, prev_ms: u64, t_ms: u64 },
    #[error("sample {index}: non-finite value")]
    NonFinite { index: usize },
    #[error("invalid peak detector config: {0}")]
    Config(&'static str),
    #[error("line length must be positive, got {0}")]
    LineLength(f64),
    #[error("calibration failed: no steps detected")]
    NoSteps,
    #[error("inertial CSV header must be `t_ms,ax,ay,az,gz`, found `{0}`")]
    Header(String),
    #[error("inertial CSV line {line}: {message}")]
    Csv { line: u64, message: String },
}

/// One IMU reading: acceleration in m/s² and z-axis angular rate in rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InertialSample {
    pub t_ms: u64,
    pub ax: f64,
    pub ay: f64,
    pub az: f64,
    pub gz: f64,
}

impl InertialSample {
    pub fn magnitude(&self) -> f64 {
        magnitude(self)
    }
}

/// A detected step, stamped with the heading integrated up to the peak.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepEvent {
    pub t_ms: u64,
    pub heading: f64,
    pub magnitude: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakDetectorConfig {
    /// Magnitude (m/s²) a local maximum must reach to count as a step.
    pub min_peak_height: f64,
    /// Minimum time between two accepted peaks.
    pub min_peak_separation_ms: u64,
    /// Width of a centered moving average applied to the magnitude before
    /// peak picking; `None` disables smoothing.
    #[serde(default)]
    pub smoothing_window: Option<usize>,
}

impl Default for PeakDetectorConfig {
    fn default() -> Self {
        Self {
            min_peak_height: 10.5,
            min_peak_separation_ms: 300,
            smoothing_window: None,
        }
    }
}

impl PeakDetectorConfig {
    pub fn validate(&self) -> Result<(), InertialError> {
        if !(self.min_peak_height > 0.0) {
            return Err(InertialError::Config("min_peak_height must be positive"));
        }
        if self.min_peak_separation_ms == 0 {
            return Err(InertialError::Config("min_peak_separation_ms must be positive"));
        }
        if self.smoothing_window == Some(0) {
            return Err(InertialError::Config("smoothing_window must be at least 1"));
        }
        Ok(())
    }
}

pub fn magnitude(s: &InertialSample) -> f64 {
    (s.ax * s.ax + s.ay * s.ay + s.az * s.az).sqrt()
}

/// Checks that timestamps strictly increase and every value is finite.
pub fn validate_stream(stream: &[InertialSample]) -> Result<(), InertialError> {
    for (index, s) in stream.iter().enumerate() {
        if ![s.ax, s.ay, s.az, s.gz].iter().all(|v| v.is_finite()) {
            return Err(InertialError::NonFinite { index });
        }
        if index > 0 && s.t_ms <= stream[index - 1].t_ms {
            return Err(InertialError::NonMonotonic {
                index,
                prev_ms: stream[index - 1].t_ms,
                t_ms: s.t_ms,
            });
        }
    }
    Ok(())
}

/// Wraps an angle into (-π, π].
pub fn wrap_angle(theta: f64) -> f64 {
    let w = theta.rem_euclid(2.0 * PI);
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}

/// Heading as a function of time, from trapezoidal integration of `gz`.
///
/// Before the first sample the heading is the initial heading; after the
/// last one it holds the final value.
#[derive(Debug, Clone)]
pub struct HeadingTrack {
    times: Vec<u64>,
    rates: Vec<f64>,
    // unwrapped heading at each sample time
    cumulative: Vec<f64>,
    initial: f64,
}

impl HeadingTrack {
    pub fn at(&self, t_ms: u64) -> f64 {
        wrap_angle(self.unwrapped_at(t_ms))
    }

    /// Heading at `t_ms` without wrapping.
    pub fn unwrapped_at(&self, t_ms: u64) -> f64 {
        if self.times.is_empty() || t_ms <= self.times[0] {
            return self.initial;
        }
        let i = match self.times.binary_search(&t_ms) {
            Ok(i) => return self.cumulative[i],
            Err(i) => i,
        };
        if i == self.times.len() {
            return *self.cumulative.last().unwrap();
        }
        // gz is linear between samples, so integrate the partial trapezoid
        let (t0, t1) = (self.times[i - 1], self.times[i]);
        let (g0, g1) = (self.rates[i - 1], self.rates[i]);
        let dt = (t_ms - t0) as f64 / 1000.0;
        let g = g0 + (g1 - g0) * (t_ms - t0) as f64 / (t1 - t0) as f64;
        self.cumulative[i - 1] + 0.5 * (g0 + g) * dt
    }

    /// Unwrapped heading after the last sample.
    pub fn final_unwrapped(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(self.initial)
    }
}

pub fn integrate_heading(stream: &[InertialSample], initial_heading: f64) -> Result<HeadingTrack, InertialError> {
    validate_stream(stream)?;
    let mut cumulative = Vec::with_capacity(stream.len());
    let mut acc = initial_heading;
    for (i, s) in stream.iter().enumerate() {
        if i > 0 {
            let prev = &stream[i - 1];
            let dt = (s.t_ms - prev.t_ms) as f64 / 1000.0;
            acc += 0.5 * (prev.gz + s.gz) * dt;
        }
        cumulative.push(acc);
    }
    Ok(HeadingTrack {
        times: stream.iter().map(|s| s.t_ms).collect(),
        rates: stream.iter().map(|s| s.gz).collect(),
        cumulative,
        initial: initial_heading,
    })
}

fn smoothed(series: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    (0..series.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(series.len());
            series[lo..hi].iter().sum::<f64>() / (hi - lo) as f64
        })
        .collect()
}

/// Detects steps with headings measured from a zero initial heading.
pub fn detect_steps(stream: &[InertialSample], cfg: &PeakDetectorConfig) -> Result<Vec<StepEvent>, InertialError> {
    detect_steps_with_heading(stream, cfg, 0.0)
}

/// Counts strict local maxima of the acceleration magnitude that reach
/// `min_peak_height` and lie at least `min_peak_separation_ms` after the
/// previously accepted peak.
pub fn detect_steps_with_heading(
    stream: &[InertialSample],
    cfg: &PeakDetectorConfig,
    initial_heading: f64,
) -> Result<Vec<StepEvent>, InertialError> {
    cfg.validate()?;
    let heading = integrate_heading(stream, initial_heading)?;
    let raw: Vec<f64> = stream.iter().map(magnitude).collect();
    let mags = match cfg.smoothing_window {
        Some(w) if w > 1 => smoothed(&raw, w),
        _ => raw,
    };

    let mut steps: Vec<StepEvent> = Vec::new();
    for i in 1..mags.len().saturating_sub(1) {
        let m = mags[i];
        if !(m > mags[i - 1] && m > mags[i + 1] && m >= cfg.min_peak_height) {
            continue;
        }
        let t_ms = stream[i].t_ms;
        if let Some(last) = steps.last() {
            if t_ms - last.t_ms < cfg.min_peak_separation_ms {
                continue;
            }
        }
        steps.push(StepEvent {
            t_ms,
            heading: heading.at(t_ms),
            magnitude: m,
        });
    }
    Ok(steps)
}

/// Average step length from walking a line of known length.
pub fn calibrate_step_length(
    line_length: f64,
    stream: &[InertialSample],
    cfg: &PeakDetectorConfig,
) -> Result<f64, InertialError> {
    if !(line_length > 0.0) {
        return Err(InertialError::LineLength(line_length));
    }
    let steps = detect_steps(stream, cfg)?.len();
    if steps == 0 {
        return Err(InertialError::NoSteps);
    }
    Ok(line_length / steps as f64)
}

/// A flat-held walking signal: gravity plus a cosine bump of the given
/// amplitude once per `period_ms`, sampled every `sample_ms` from t = 0.
/// Crests fall on t = 0, period, 2·period, ...
pub fn synthetic_walk_signal(duration_ms: u64, period_ms: u64, sample_ms: u64, amplitude: f64) -> Vec<InertialSample> {
    (0..duration_ms)
        .step_by(sample_ms as usize)
        .map(|t_ms| {
            let phase = 2.0 * PI * t_ms as f64 / period_ms as f64;
            InertialSample {
                t_ms,
                ax: 0.0,
                ay: 0.0,
                az: GRAVITY + amplitude * phase.cos(),
                gz: 0.0,
            }
        })
        .collect()
}

pub fn read_csv<R: Read>(reader: R) -> Result<Vec<InertialSample>, InertialError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(csv_error)?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(InertialError::Header(header.iter().collect::<Vec<_>>().join(",")));
    }
    let samples = rdr
        .deserialize()
        .collect::<Result<Vec<InertialSample>, _>>()
        .map_err(csv_error)?;
    validate_stream(&samples)?;
    Ok(samples)
}

pub fn write_csv<W: Write>(writer: W, samples: &[InertialSample]) -> Result<(), InertialError> {
    let mut wtr = csv::Writer::from_writer(writer);
    for s in samples {
        wtr.serialize(s).map_err(csv_error)?;
    }
    wtr.flush().map_err(|e| InertialError::Csv { line: 0, message: e.to_string() })
}

fn csv_error(e: csv::Error) -> InertialError {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    InertialError::Csv { line, message: e.to_string() }
}
