//! Trajectory evaluation: discrete Fréchet distance, pointwise localization
//! errors, third-quantile summaries, empirical CDFs and improvement over the
//! PDR baseline.

use serde::Serialize;
use thiserror::Error;

use crate::geodesy::{haversine, GeoPoint};
use crate::replay::RunRecord;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("empty trajectory or sample set")]
    Empty,
    #[error("length mismatch: estimate has {estimate} points, groundtruth {groundtruth}")]
    LengthMismatch { estimate: usize, groundtruth: usize },
}

/// An ordered, non-empty sequence of positions.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory(Vec<GeoPoint>);

impl Trajectory {
    pub fn new(points: Vec<GeoPoint>) -> Result<Self, MetricsError> {
        if points.is_empty() {
            return Err(MetricsError::Empty);
        }
        Ok(Self(points))
    }

    pub fn points(&self) -> &[GeoPoint] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Discrete Fréchet distance under haversine ground distance.
///
/// Row-by-row dynamic programming over the coupling table, keeping a single
/// row sized by the shorter trajectory.
pub fn dfd(p: &Trajectory, q: &Trajectory) -> f64 {
    // max/min are exact, so transposing the table does not change the value
    let (rows, cols) = if p.len() >= q.len() { (p.points(), q.points()) } else { (q.points(), p.points()) };
    let mut row = vec![0.0f64; cols.len()];
    for (i, a) in rows.iter().enumerate() {
        let mut diag = 0.0; // row[j - 1] of the previous row
        for (j, b) in cols.iter().enumerate() {
            let d = haversine(*a, *b);
            let up = row[j];
            row[j] = match (i, j) {
                (0, 0) => d,
                (0, _) => d.max(row[j - 1]),
                (_, 0) => d.max(up),
                _ => d.max(up.min(row[j - 1]).min(diag)),
            };
            diag = up;
        }
    }
    row[cols.len() - 1]
}

/// Element-wise haversine distance between matching points.
pub fn localization_errors(estimate: &Trajectory, groundtruth: &Trajectory) -> Result<Vec<f64>, MetricsError> {
    if estimate.len() != groundtruth.len() {
        return Err(MetricsError::LengthMismatch { estimate: estimate.len(), groundtruth: groundtruth.len() });
    }
    Ok(estimate.points().iter().zip(groundtruth.points()).map(|(a, b)| haversine(*a, *b)).collect())
}

fn sorted(samples: &[f64]) -> Result<Vec<f64>, MetricsError> {
    if samples.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Quantile by linear interpolation between closest ranks on sorted input.
fn quantile_sorted(v: &[f64], p: f64) -> f64 {
    let h = p * (v.len() - 1) as f64;
    let lo = h.floor() as usize;
    if lo + 1 >= v.len() {
        return v[v.len() - 1];
    }
    v[lo] + (h - lo as f64) * (v[lo + 1] - v[lo])
}

pub fn quantile(samples: &[f64], p: f64) -> Result<f64, MetricsError> {
    Ok(quantile_sorted(&sorted(samples)?, p.clamp(0.0, 1.0)))
}

/// The 75th percentile, interpolating linearly between closest ranks.
pub fn third_quantile(samples: &[f64]) -> Result<f64, MetricsError> {
    quantile(samples, 0.75)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CdfPoint {
    pub error: f64,
    pub fraction: f64,
    /// Marks the first point at which the CDF reaches 0.75.
    pub is_q3: bool,
}

/// Empirical CDF evaluated at each distinct sample value.
pub fn cdf(samples: &[f64]) -> Result<Vec<CdfPoint>, MetricsError> {
    let v = sorted(samples)?;
    let n = v.len() as f64;
    let mut out: Vec<CdfPoint> = Vec::new();
    for (i, &x) in v.iter().enumerate() {
        let fraction = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.error == x => last.fraction = fraction,
            _ => out.push(CdfPoint { error: x, fraction, is_q3: false }),
        }
    }
    if let Some(p) = out.iter_mut().find(|p| p.fraction >= 0.75) {
        p.is_q3 = true;
    }
    Ok(out)
}

/// Scores of one device's PDR and AOE tracks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviceMetrics {
    pub id: String,
    pub dfd_pdr: f64,
    pub dfd_aoe: f64,
    pub q3_pdr: f64,
    pub q3_aoe: f64,
    /// Sorted ascending.
    pub errors_pdr: Vec<f64>,
    /// Sorted ascending.
    pub errors_aoe: Vec<f64>,
    pub collaborations: usize,
    pub location_updates: usize,
    /// `(q3_pdr - q3_aoe) / q3_pdr`, zero when the baseline is exact.
    pub improvement: f64,
}

impl DeviceMetrics {
    pub fn improved_q3(&self) -> bool {
        self.q3_aoe < self.q3_pdr
    }

    pub fn improved_dfd(&self) -> bool {
        self.dfd_aoe < self.dfd_pdr
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImprovementSummary {
    /// Mean of the per-device relative q3 improvements.
    pub mean_improvement: f64,
    /// Relative change of the mean q3 across devices.
    pub aggregate_improvement: f64,
    pub devices: usize,
    pub improved_q3: usize,
    pub improved_dfd: usize,
    pub mean_q3_pdr: f64,
    pub mean_q3_aoe: f64,
    pub mean_dfd_pdr: f64,
    pub mean_dfd_aoe: f64,
    pub total_collaborations: usize,
    pub total_location_updates: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub devices: Vec<DeviceMetrics>,
    pub summary: ImprovementSummary,
}

fn relative_improvement(baseline: f64, candidate: f64) -> f64 {
    if baseline > 0.0 {
        (baseline - candidate) / baseline
    } else {
        0.0
    }
}

pub fn evaluate_device(
    id: &str,
    groundtruth: &Trajectory,
    pdr: &Trajectory,
    aoe: &Trajectory,
    collaborations: usize,
    location_updates: usize,
) -> Result<DeviceMetrics, MetricsError> {
    let errors_pdr = sorted(&localization_errors(pdr, groundtruth)?)?;
    let errors_aoe = sorted(&localization_errors(aoe, groundtruth)?)?;
    let q3_pdr = quantile_sorted(&errors_pdr, 0.75);
    let q3_aoe = quantile_sorted(&errors_aoe, 0.75);
    Ok(DeviceMetrics {
        id: id.to_string(),
        dfd_pdr: dfd(pdr, groundtruth),
        dfd_aoe: dfd(aoe, groundtruth),
        q3_pdr,
        q3_aoe,
        errors_pdr,
        errors_aoe,
        collaborations,
        location_updates,
        improvement: relative_improvement(q3_pdr, q3_aoe),
    })
}

pub fn improvement_summary(devices: &[DeviceMetrics]) -> ImprovementSummary {
    let n = devices.len().max(1) as f64;
    let mean = |f: fn(&DeviceMetrics) -> f64| devices.iter().map(f).sum::<f64>() / n;
    let mean_q3_pdr = mean(|d| d.q3_pdr);
    let mean_q3_aoe = mean(|d| d.q3_aoe);
    ImprovementSummary {
        mean_improvement: mean(|d| d.improvement),
        aggregate_improvement: relative_improvement(mean_q3_pdr, mean_q3_aoe),
        devices: devices.len(),
        improved_q3: devices.iter().filter(|d| d.improved_q3()).count(),
        improved_dfd: devices.iter().filter(|d| d.improved_dfd()).count(),
        mean_q3_pdr,
        mean_q3_aoe,
        mean_dfd_pdr: mean(|d| d.dfd_pdr),
        mean_dfd_aoe: mean(|d| d.dfd_aoe),
        total_collaborations: devices.iter().map(|d| d.collaborations).sum(),
        total_location_updates: devices.iter().map(|d| d.location_updates).sum(),
    }
}

impl MetricsReport {
    pub fn from_devices(devices: Vec<DeviceMetrics>) -> Self {
        let summary = improvement_summary(&devices);
        Self { devices, summary }
    }

    /// Scores every device of a run. Devices without recorded samples are skipped.
    pub fn from_record(record: &RunRecord) -> Result<Self, MetricsError> {
        let mut devices = Vec::with_capacity(record.devices.len());
        for track in &record.devices {
            if track.t_ms.is_empty() {
                continue;
            }
            let (collabs, updates) = record.collaboration_counts(&track.id);
            devices.push(evaluate_device(
                &track.id,
                &Trajectory::new(track.groundtruth.clone())?,
                &Trajectory::new(track.pdr.clone())?,
                &Trajectory::new(track.aoe.clone())?,
                collabs,
                updates,
            )?);
        }
        Ok(Self::from_devices(devices))
    }
}
