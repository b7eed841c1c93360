use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::{Path, PathBuf};

use super::{validate_groundtruth, DeviceError, GroundtruthPoint, GroundtruthSource, InertialSource, ReplayError, Scenario};
use crate::inertial::{self, InertialSample};

pub const GROUNDTRUTH_HEADER: [&str; 3] = ["t_ms", "lat", "lon"];

/// Anything that can produce a scenario. Dataset adapters implement this to
/// feed recorded walks into the replay engine.
pub trait ScenarioSource {
    fn load(&self) -> Result<Scenario, ReplayError>;
}

/// A scenario JSON file, with CSV references resolved against its directory.
#[derive(Debug, Clone)]
pub struct JsonScenarioSource {
    pub path: PathBuf,
}

impl ScenarioSource for JsonScenarioSource {
    fn load(&self) -> Result<Scenario, ReplayError> {
        load_scenario(&self.path)
    }
}

/// Parses and validates a scenario file. Relative CSV paths are resolved
/// against the directory that holds the file.
pub fn load_scenario(path: &Path) -> Result<Scenario, ReplayError> {
    let load_err = |message: String| ReplayError::Load { path: path.to_path_buf(), message };
    let text = std::fs::read_to_string(path).map_err(|e| load_err(e.to_string()))?;
    let mut scenario: Scenario = serde_json::from_str(&text)
        .map_err(|e| load_err(format!("line {} column {}: {}", e.line(), e.column(), strip_position(&e))))?;
    let base = path.parent().unwrap_or(Path::new(""));
    for d in &mut scenario.devices {
        if let GroundtruthSource::Csv { csv } = &mut d.groundtruth {
            *csv = resolve(base, csv);
        }
        if let InertialSource::Csv { csv } = &mut d.inertial {
            *csv = resolve(base, csv);
        }
    }
    scenario.validate()?;
    Ok(scenario)
}

fn strip_position(e: &serde_json::Error) -> String {
    let s = e.to_string();
    match s.rfind(" at line ") {
        Some(i) => s[..i].to_string(),
        None => s,
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Reads a `t_ms,lat,lon` groundtruth CSV. Errors carry the 1-based line.
pub fn read_groundtruth_csv<R: Read>(reader: R) -> Result<Vec<GroundtruthPoint>, DeviceError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| DeviceError::Groundtruth(e.to_string()))?;
    if headers.iter().ne(GROUNDTRUTH_HEADER) {
        return Err(DeviceError::Groundtruth(format!(
            "expected header `{}`, found `{}`",
            GROUNDTRUTH_HEADER.join(","),
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut out = Vec::new();
    for row in rdr.deserialize::<GroundtruthPoint>() {
        let p = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            DeviceError::Groundtruth(format!("line {line}: {e}"))
        })?;
        out.push(p);
    }
    validate_groundtruth(&out).map_err(DeviceError::Groundtruth)?;
    Ok(out)
}

pub fn write_groundtruth_csv<W: Write>(writer: W, points: &[GroundtruthPoint]) -> Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    w.write_record(GROUNDTRUTH_HEADER)?;
    for p in points {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}

fn open(path: &Path) -> Result<BufReader<File>, DeviceError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| DeviceError::Io { path: path.to_path_buf(), message: e.to_string() })
}

pub(crate) fn read_groundtruth_file(path: &Path) -> Result<Vec<GroundtruthPoint>, DeviceError> {
    read_groundtruth_csv(open(path)?).map_err(|e| DeviceError::Io { path: path.to_path_buf(), message: e.to_string() })
}

pub(crate) fn read_inertial_file(path: &Path) -> Result<Vec<InertialSample>, DeviceError> {
    inertial::read_csv(open(path)?).map_err(|e| DeviceError::Io { path: path.to_path_buf(), message: e.to_string() })
}
