//! CSV output of runs, metrics and sweeps. Every file is written to a
//! sibling temporary and renamed into place, so it is either complete or
//! absent.

use std::fs;
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::geodesy::GeoPoint;
use crate::metrics::{cdf, MetricsError, MetricsReport};
use crate::replay::{CollabEvent, DeviceTrack, RunRecord, SweepGrid};

pub const TRACK_HEADER: [&str; 8] = ["t_ms", "gt_lat", "gt_lon", "pdr_lat", "pdr_lon", "aoe_lat", "aoe_lon", "errors"];
pub const EVENTS_HEADER: [&str; 5] = ["t_ms", "id_a", "id_b", "ratio_a", "updated_a"];
pub const METRICS_HEADER: [&str; 6] = ["device_id", "dfd_m", "q3_pdr_m", "q3_aoe_m", "improvement", "collabs"];
pub const CDF_HEADER: [&str; 3] = ["error_m", "fraction", "is_q3"];
pub const GRID_HEADER: [&str; 9] = [
    "lower",
    "upper",
    "mean_q3_m",
    "mean_dfd_m",
    "mean_q3_pdr_m",
    "mean_dfd_pdr_m",
    "collabs",
    "location_updates",
    "improvement",
];

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

fn csv_err(e: csv::Error) -> io::Error {
    io::Error::other(e)
}

/// Writes `path` through a temporary file in the same directory.
pub fn write_atomic<F>(path: &Path, write: F) -> Result<(), ExportError>
where
    F: FnOnce(&mut dyn Write) -> io::Result<()>,
{
    let io_err = |source| ExportError::Io { path: path.to_path_buf(), source };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err)?;
    }
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    let result = (|| {
        let mut w = BufWriter::new(fs::File::create(&tmp)?);
        write(&mut w)?;
        w.into_inner().map_err(|e| e.into_error())?.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.map_err(io_err)
}

pub fn write_track_csv(w: &mut dyn Write, track: &DeviceTrack) -> io::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(TRACK_HEADER).map_err(csv_err)?;
    for i in 0..track.t_ms.len() {
        let (g, p, a) = (track.groundtruth[i], track.pdr[i], track.aoe[i]);
        out.write_record([
            track.t_ms[i].to_string(),
            g.lat.to_string(),
            g.lon.to_string(),
            p.lat.to_string(),
            p.lon.to_string(),
            a.lat.to_string(),
            a.lon.to_string(),
            track.errors[i].to_string(),
        ])
        .map_err(csv_err)?;
    }
    out.flush()
}

/// Reads a track file back. `final_errors` is taken from the last row.
pub fn read_track_csv<R: Read>(id: &str, reader: R) -> Result<DeviceTrack, String> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| e.to_string())?;
    if headers.iter().ne(TRACK_HEADER) {
        return Err(format!("expected header `{}`", TRACK_HEADER.join(",")));
    }
    let mut track = DeviceTrack {
        id: id.to_string(),
        t_ms: Vec::new(),
        groundtruth: Vec::new(),
        pdr: Vec::new(),
        aoe: Vec::new(),
        errors: Vec::new(),
        final_errors: 0,
    };
    for row in rdr.records() {
        let row = row.map_err(|e| e.to_string())?;
        let line = row.position().map_or(0, |p| p.line());
        let field = |i: usize| -> Result<f64, String> {
            row[i].parse::<f64>().map_err(|e| format!("line {line}, column {}: {e}", TRACK_HEADER[i]))
        };
        let point = |i: usize| -> Result<GeoPoint, String> {
            let p = GeoPoint { lat: field(i)?, lon: field(i + 1)? };
            p.validate().map_err(|e| format!("line {line}: {e}"))?;
            Ok(p)
        };
        track.t_ms.push(row[0].parse().map_err(|e| format!("line {line}, column t_ms: {e}"))?);
        track.groundtruth.push(point(1)?);
        track.pdr.push(point(3)?);
        track.aoe.push(point(5)?);
        track.errors.push(row[7].parse().map_err(|e| format!("line {line}, column errors: {e}"))?);
    }
    if track.t_ms.is_empty() {
        return Err("no samples".into());
    }
    track.final_errors = *track.errors.last().unwrap();
    Ok(track)
}

pub fn write_events_csv(w: &mut dyn Write, events: &[CollabEvent]) -> io::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(EVENTS_HEADER).map_err(csv_err)?;
    for e in events {
        out.write_record([
            e.t_ms.to_string(),
            e.id_a.clone(),
            e.id_b.clone(),
            e.ratio_a.map_or_else(String::new, |r| r.to_string()),
            e.updated_a.to_string(),
        ])
        .map_err(csv_err)?;
    }
    out.flush()
}

pub fn read_events_csv<R: Read>(reader: R) -> Result<Vec<CollabEvent>, String> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| e.to_string())?;
    if headers.iter().ne(EVENTS_HEADER) {
        return Err(format!("expected header `{}`", EVENTS_HEADER.join(",")));
    }
    let mut events = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| e.to_string())?;
        let line = row.position().map_or(0, |p| p.line());
        let bad = |column: &str, e: &dyn std::fmt::Display| format!("line {line}, column {column}: {e}");
        events.push(CollabEvent {
            t_ms: row[0].parse().map_err(|e| bad("t_ms", &e))?,
            id_a: row[1].to_string(),
            id_b: row[2].to_string(),
            ratio_a: match &row[3] {
                "" => None,
                r => Some(r.parse().map_err(|e| bad("ratio_a", &e))?),
            },
            updated_a: row[4].parse().map_err(|e| bad("updated_a", &e))?,
        });
    }
    Ok(events)
}

/// Per-device scores; `dfd_m` is the AOE track's distance to groundtruth.
pub fn write_metrics_csv(w: &mut dyn Write, report: &MetricsReport) -> io::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(METRICS_HEADER).map_err(csv_err)?;
    for d in &report.devices {
        out.write_record([
            d.id.clone(),
            d.dfd_aoe.to_string(),
            d.q3_pdr.to_string(),
            d.q3_aoe.to_string(),
            d.improvement.to_string(),
            d.collaborations.to_string(),
        ])
        .map_err(csv_err)?;
    }
    out.flush()
}

pub fn write_cdf_csv(w: &mut dyn Write, samples: &[f64]) -> io::Result<()> {
    let table = cdf(samples).map_err(io::Error::other)?;
    let mut out = csv::Writer::from_writer(w);
    out.write_record(CDF_HEADER).map_err(csv_err)?;
    for p in table {
        out.write_record([p.error.to_string(), p.fraction.to_string(), p.is_q3.to_string()])
            .map_err(csv_err)?;
    }
    out.flush()
}

pub fn write_grid_csv(w: &mut dyn Write, grid: &SweepGrid) -> io::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(GRID_HEADER).map_err(csv_err)?;
    for c in &grid.cells {
        let s = &c.report.summary;
        out.write_record([
            c.lower.to_string(),
            c.upper.to_string(),
            s.mean_q3_aoe.to_string(),
            s.mean_dfd_aoe.to_string(),
            s.mean_q3_pdr.to_string(),
            s.mean_dfd_pdr.to_string(),
            s.total_collaborations.to_string(),
            s.total_location_updates.to_string(),
            s.mean_improvement.to_string(),
        ])
        .map_err(csv_err)?;
    }
    out.flush()
}

/// Writes a report's metrics table and both CDFs of every device under
/// `dir`; returns the written paths.
pub fn write_report(dir: &Path, report: &MetricsReport) -> Result<Vec<PathBuf>, ExportError> {
    let mut written = Vec::new();
    let path = dir.join("metrics.csv");
    write_atomic(&path, |w| write_metrics_csv(w, report))?;
    written.push(path);
    for d in &report.devices {
        for (kind, samples) in [("pdr", &d.errors_pdr), ("aoe", &d.errors_aoe)] {
            let path = dir.join("cdf").join(format!("{}_{kind}.csv", d.id));
            write_atomic(&path, |w| write_cdf_csv(w, samples))?;
            written.push(path);
        }
    }
    Ok(written)
}

/// Writes one track file per device, the event log, and the report.
pub fn write_run(dir: &Path, record: &RunRecord, report: &MetricsReport) -> Result<Vec<PathBuf>, ExportError> {
    let mut written = Vec::new();
    for track in &record.devices {
        let path = dir.join("tracks").join(format!("{}.csv", track.id));
        write_atomic(&path, |w| write_track_csv(w, track))?;
        written.push(path);
    }
    let path = dir.join("events.csv");
    write_atomic(&path, |w| write_events_csv(w, &record.events))?;
    written.push(path);
    written.extend(write_report(dir, report)?);
    Ok(written)
}
