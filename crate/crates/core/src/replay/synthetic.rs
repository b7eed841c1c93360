use rand::seq::IndexedRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::rng::device_rng;
use super::{
    DeviceSpec, ErrorGrowth, GroundtruthPoint, GroundtruthSource, InertialSource, ReplayError, Scenario,
    SyntheticInertial, DEFAULT_STATIONARY_WINDOW_MS, DEFAULT_TICK_MS,
};
use crate::collab::CollabConfig;
use crate::geodesy::{GeoPoint, LocalFrame};
use crate::inertial::{wrap_angle, InertialSample, PeakDetectorConfig, GRAVITY};
use crate::radio::{PathLossModel, DEFAULT_CUTOFF_M};

/// Sampling interval of synthesized inertial streams.
pub const SAMPLE_MS: u64 = 300;

/// Height of the acceleration bump marking a step.
const STEP_PEAK: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathShape {
    /// Back and forth along a single straight corridor.
    Corridor,
    /// Random walks on a square lattice of corridors.
    #[default]
    Grid,
    /// Laps around the perimeter of the lattice.
    Loop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticParams {
    pub devices: usize,
    /// Side of the square walking area in meters.
    pub area_m: f64,
    pub shape: PathShape,
    /// Corridor spacing of the lattice, in steps.
    pub corridor_steps: u32,
    pub steps_per_device: usize,
    pub step_length_m: f64,
    /// Time between consecutive steps; a multiple of 300 ms, at least 600.
    pub step_period_ms: u64,
    /// Delay between consecutive device starts.
    pub stagger_ms: u64,
    /// Nominal gyro bias in rad/s. Each device draws a constant bias whose
    /// magnitude is uniform in [0.5, 1.5] times this, with a random sign.
    pub gyro_bias: f64,
    pub gyro_noise_sigma: f64,
    pub accel_noise_sigma: f64,
    pub origin: GeoPoint,
    pub seed: u64,
    pub collab: CollabConfig,
    pub path_loss: PathLossModel,
    pub proximity_cutoff_m: f64,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        Self {
            devices: 16,
            area_m: 25.0,
            shape: PathShape::Grid,
            corridor_steps: 7,
            steps_per_device: 150,
            step_length_m: 0.7,
            step_period_ms: 600,
            stagger_ms: 5_000,
            gyro_bias: 0.05,
            gyro_noise_sigma: 0.005,
            accel_noise_sigma: 0.05,
            origin: GeoPoint { lat: 46.5191, lon: 6.5668 },
            seed: 42,
            collab: CollabConfig::default(),
            path_loss: PathLossModel::default(),
            proximity_cutoff_m: DEFAULT_CUTOFF_M,
        }
    }
}

impl SyntheticParams {
    pub fn validate(&self) -> Result<(), ReplayError> {
        let positive = |field: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ReplayError::invalid(field, format!("must be positive, got {v}")))
            }
        };
        let sigma = |field: &str, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ReplayError::invalid(field, format!("must be a non-negative standard deviation, got {v}")))
            }
        };
        if self.devices == 0 {
            return Err(ReplayError::invalid("devices", "at least one device is required"));
        }
        if self.steps_per_device == 0 {
            return Err(ReplayError::invalid("steps_per_device", "must be positive"));
        }
        if self.corridor_steps == 0 {
            return Err(ReplayError::invalid("corridor_steps", "must be positive"));
        }
        positive("step_length_m", self.step_length_m)?;
        positive("area_m", self.area_m)?;
        if self.area_m < self.corridor_steps as f64 * self.step_length_m {
            return Err(ReplayError::invalid("area_m", "smaller than one corridor segment"));
        }
        if self.step_period_ms < 2 * SAMPLE_MS || !self.step_period_ms.is_multiple_of(SAMPLE_MS) {
            return Err(ReplayError::invalid(
                "step_period_ms",
                format!("must be a multiple of {SAMPLE_MS} ms and at least {} ms", 2 * SAMPLE_MS),
            ));
        }
        sigma("gyro_bias", self.gyro_bias)?;
        sigma("gyro_noise_sigma", self.gyro_noise_sigma)?;
        sigma("accel_noise_sigma", self.accel_noise_sigma)?;
        self.origin.validate().map_err(|e| ReplayError::invalid("origin", e))?;
        self.collab.validate().map_err(|e| ReplayError::invalid("collab.lower", e))?;
        self.path_loss.validate().map_err(|e| ReplayError::invalid("path_loss", e))?;
        positive("proximity_cutoff_m", self.proximity_cutoff_m)
    }
}

const DIRECTIONS: [(i64, i64); 4] = [(1, 0), (0, 1), (-1, 0), (0, -1)];

/// Builds a self-contained scenario of lattice walks whose inertial streams
/// are synthesized from the groundtruth at run time.
pub fn generate_synthetic(params: &SyntheticParams) -> Result<Scenario, ReplayError> {
    params.validate()?;
    let seg_len = params.corridor_steps as f64 * params.step_length_m;
    let cells = (params.area_m / seg_len).floor() as i64;
    let (nx, ny) = match params.shape {
        PathShape::Corridor => (cells, 0),
        PathShape::Grid | PathShape::Loop => (cells, cells),
    };
    let frame = LocalFrame::new(params.origin);
    let width = (params.devices.max(2) - 1).to_string().len();

    let devices = (0..params.devices)
        .map(|i| {
            let id = format!("d{:0width$}", i + 1);
            let mut rng = device_rng(params.seed, "generate", &id);
            let nodes = lattice_walk(params, nx, ny, &mut rng);
            let points: Vec<GroundtruthPoint> = nodes
                .iter()
                .enumerate()
                .map(|(k, &(x, y))| {
                    let p = frame.unproject(x, y);
                    GroundtruthPoint { t_ms: k as u64 * params.step_period_ms, lat: p.lat, lon: p.lon }
                })
                .collect();
            let (x0, y0) = nodes[0];
            let (x1, y1) = nodes[1];
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let bias = sign * params.gyro_bias * rng.random_range(0.5..1.5);
            DeviceSpec {
                id,
                groundtruth: GroundtruthSource::Inline(points),
                inertial: InertialSource::Synthetic {
                    synthetic: SyntheticInertial {
                        gyro_bias: bias,
                        gyro_noise: params.gyro_noise_sigma,
                        accel_noise: params.accel_noise_sigma,
                    },
                },
                start_offset_ms: i as u64 * params.stagger_ms,
                step_length_m: params.step_length_m,
                initial_heading_rad: (y1 - y0).atan2(x1 - x0),
            }
        })
        .collect();

    let scenario = Scenario {
        devices,
        path_loss: params.path_loss,
        collab: params.collab,
        proximity_cutoff_m: params.proximity_cutoff_m,
        tick_ms: DEFAULT_TICK_MS,
        seed: params.seed,
        peak_detector: PeakDetectorConfig::default(),
        error_growth: ErrorGrowth::PerStep,
        debounce_ticks: 0,
        stationary_window_ms: DEFAULT_STATIONARY_WINDOW_MS,
    };
    scenario.validate()?;
    Ok(scenario)
}

// Planar positions after each step, starting at a random lattice node.
fn lattice_walk<R: Rng>(params: &SyntheticParams, nx: i64, ny: i64, rng: &mut R) -> Vec<(f64, f64)> {
    let seg = i64::from(params.corridor_steps);
    let on_perimeter = |i: i64, j: i64| i == 0 || j == 0 || i == nx || j == ny;
    let allowed = |(i, j): (i64, i64), (di, dj): (i64, i64)| {
        let (a, b) = (i + di, j + dj);
        if a < 0 || b < 0 || a > nx || b > ny {
            return false;
        }
        match params.shape {
            // both endpoints on the perimeter and the edge runs along it
            PathShape::Loop => on_perimeter(i, j) && on_perimeter(a, b) && (di == 0 && (i == 0 || i == nx) || dj == 0 && (j == 0 || j == ny)),
            _ => true,
        }
    };

    let mut node = loop {
        let n = (rng.random_range(0..=nx), rng.random_range(0..=ny));
        if params.shape != PathShape::Loop || on_perimeter(n.0, n.1) {
            break n;
        }
    };
    let mut dir: Option<(i64, i64)> = None;
    let step = params.step_length_m;
    let mut out = vec![(node.0 as f64 * seg as f64 * step, node.1 as f64 * seg as f64 * step)];
    let mut cell = (node.0 * seg, node.1 * seg);
    while out.len() <= params.steps_per_device {
        let options: Vec<(i64, i64)> = DIRECTIONS
            .iter()
            .copied()
            .filter(|&d| allowed(node, d) && dir != Some((-d.0, -d.1)))
            .collect();
        let d = match options.choose(rng) {
            Some(&d) => d,
            // dead end: turn around
            None => {
                let (di, dj) = dir.expect("a lattice node always has a neighbor");
                (-di, -dj)
            }
        };
        for _ in 0..seg {
            if out.len() > params.steps_per_device {
                break;
            }
            cell = (cell.0 + d.0, cell.1 + d.1);
            out.push((cell.0 as f64 * step, cell.1 as f64 * step));
        }
        node = (node.0 + d.0, node.1 + d.1);
        dir = Some(d);
    }
    out
}

/// Synthesizes a flat-held inertial stream that walks `groundtruth`: one
/// acceleration crest at every fix after the first and a gyro pulse on the
/// sample before it that turns onto the new course. Fix times must be
/// multiples of 300 ms, at least 600 ms apart.
pub fn synthesize_inertial<R: Rng>(
    groundtruth: &[GroundtruthPoint],
    initial_heading: f64,
    noise: &SyntheticInertial,
    rng: &mut R,
) -> Result<Vec<InertialSample>, String> {
    let first = groundtruth.first().ok_or("groundtruth is empty")?;
    for (k, g) in groundtruth.iter().enumerate() {
        if !g.t_ms.is_multiple_of(SAMPLE_MS) {
            return Err(format!("fix {k}: t_ms {} is not a multiple of {SAMPLE_MS}", g.t_ms));
        }
        if k > 0 && g.t_ms < groundtruth[k - 1].t_ms + 2 * SAMPLE_MS {
            return Err(format!("fix {k}: less than {} ms after the previous fix", 2 * SAMPLE_MS));
        }
    }
    let gyro = Normal::new(0.0, noise.gyro_noise).map_err(|_| "gyro_noise must be non-negative")?;
    let accel = Normal::new(0.0, noise.accel_noise).map_err(|_| "accel_noise must be non-negative")?;
    if !noise.gyro_bias.is_finite() {
        return Err("gyro_bias must be finite".into());
    }

    let frame = LocalFrame::new(first.point());
    let t0 = first.t_ms;
    let last = groundtruth.last().unwrap().t_ms;
    // one trailing sample so the final crest is a local maximum
    let mut samples: Vec<InertialSample> = (t0..=last + SAMPLE_MS)
        .step_by(SAMPLE_MS as usize)
        .map(|t_ms| InertialSample { t_ms, ax: 0.0, ay: 0.0, az: GRAVITY, gz: 0.0 })
        .collect();
    let index = |t: u64| ((t - t0) / SAMPLE_MS) as usize;

    let mut heading = initial_heading;
    let mut prev = frame.project(first.point());
    for (k, g) in groundtruth.iter().enumerate().skip(1) {
        let (x, y) = frame.project(g.point());
        let (dx, dy) = (x - prev.0, y - prev.1);
        if dx == 0.0 && dy == 0.0 {
            return Err(format!("fix {k}: zero-length step"));
        }
        let course = dy.atan2(dx);
        let turn = wrap_angle(course - heading);
        if turn != 0.0 {
            samples[index(g.t_ms - SAMPLE_MS)].gz = turn / (SAMPLE_MS as f64 / 1000.0);
        }
        samples[index(g.t_ms)].az += STEP_PEAK;
        heading = course;
        prev = (x, y);
    }

    for s in &mut samples {
        s.gz += noise.gyro_bias + gyro.sample(rng);
        s.ax += accel.sample(rng);
        s.ay += accel.sample(rng);
        s.az += accel.sample(rng);
    }
    Ok(samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geodesy::haversine;
    use crate::inertial::detect_steps_with_heading;
    use crate::pdr::PdrState;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pdr_track(spec: &DeviceSpec, noise: &SyntheticInertial, seed: u64) -> Vec<GeoPoint> {
        let gt = spec.groundtruth_points();
        let samples = synthesize_inertial(gt, spec.initial_heading_rad, noise, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let steps = detect_steps_with_heading(&samples, &PeakDetectorConfig::default(), spec.initial_heading_rad).unwrap();
        let mut pdr = PdrState::new(gt[0].point(), spec.step_length_m, spec.initial_heading_rad).unwrap();
        let mut out = vec![pdr.position()];
        for s in &steps {
            pdr.advance(s);
            out.push(pdr.position());
        }
        out
    }

    fn noiseless() -> SyntheticParams {
        SyntheticParams { gyro_bias: 0.0, gyro_noise_sigma: 0.0, accel_noise_sigma: 0.0, ..Default::default() }
    }

    #[test]
    fn zero_noise_pdr_follows_groundtruth() {
        for shape in [PathShape::Corridor, PathShape::Grid, PathShape::Loop] {
            let s = generate_synthetic(&SyntheticParams { shape, devices: 4, ..noiseless() }).unwrap();
            for d in &s.devices {
                let gt = d.groundtruth_points();
                let track = pdr_track(d, &SyntheticInertial::default(), 0);
                assert_eq!(track.len(), gt.len(), "{shape:?} {}", d.id);
                for (k, (p, g)) in track.iter().zip(gt).enumerate() {
                    assert!(haversine(*p, g.point()) < 1e-3 * k.max(1) as f64, "{shape:?} {} step {k}", d.id);
                }
            }
        }
    }

    #[test]
    fn steps_have_the_configured_length() {
        let p = SyntheticParams { shape: PathShape::Grid, devices: 3, ..noiseless() };
        let s = generate_synthetic(&p).unwrap();
        for d in &s.devices {
            let gt = d.groundtruth_points();
            assert_eq!(gt.len(), p.steps_per_device + 1);
            for w in gt.windows(2) {
                assert!((haversine(w[0].point(), w[1].point()) - p.step_length_m).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn gyro_bias_drift_grows_with_duration() {
        // a straight walk east, one fix per step
        let frame = LocalFrame::new(GeoPoint { lat: 46.5, lon: 6.5 });
        let gt: Vec<GroundtruthPoint> = (0..150u64)
            .map(|k| {
                let p = frame.unproject(0.7 * k as f64, 0.0);
                GroundtruthPoint { t_ms: 600 * k, lat: p.lat, lon: p.lon }
            })
            .collect();
        let spec = DeviceSpec {
            id: "d".into(),
            groundtruth: GroundtruthSource::Inline(gt.clone()),
            inertial: InertialSource::Synthetic { synthetic: SyntheticInertial::default() },
            start_offset_ms: 0,
            step_length_m: 0.7,
            initial_heading_rad: 0.0,
        };
        let noise = SyntheticInertial { gyro_bias: 0.01, ..Default::default() };
        let track = pdr_track(&spec, &noise, 0);
        let err: Vec<f64> = track.iter().zip(&gt).map(|(p, g)| haversine(*p, g.point())).collect();
        assert!(err.windows(2).skip(1).all(|w| w[1] > w[0]), "{err:?}");
    }

    #[test]
    fn staggered_offsets_are_honored() {
        let s = generate_synthetic(&SyntheticParams::default()).unwrap();
        assert_eq!(s.devices.len(), 16);
        for (i, d) in s.devices.iter().enumerate() {
            assert_eq!(d.start_offset_ms, i as u64 * 5_000);
        }
        assert_eq!(s.devices[0].id, "d01");
        assert_eq!(s.devices[15].id, "d16");
    }

    #[test]
    fn generation_is_deterministic() {
        let p = SyntheticParams::default();
        assert_eq!(generate_synthetic(&p).unwrap(), generate_synthetic(&p).unwrap());
        let other = generate_synthetic(&SyntheticParams { seed: 7, ..p.clone() }).unwrap();
        assert_ne!(generate_synthetic(&p).unwrap(), other);
    }

    #[test]
    fn invalid_parameters_name_the_field() {
        let err = generate_synthetic(&SyntheticParams { devices: 0, ..Default::default() }).unwrap_err();
        assert!(err.to_string().starts_with("devices"));
        let err = generate_synthetic(&SyntheticParams { step_period_ms: 450, ..Default::default() }).unwrap_err();
        assert!(err.to_string().starts_with("step_period_ms"));
        let err = generate_synthetic(&SyntheticParams { gyro_bias: -1.0, ..Default::default() }).unwrap_err();
        assert!(err.to_string().starts_with("gyro_bias"));
    }

    #[test]
    fn synthesis_rejects_off_grid_fixes() {
        let gt = [
            GroundtruthPoint { t_ms: 0, lat: 46.5, lon: 6.5 },
            GroundtruthPoint { t_ms: 450, lat: 46.500_006, lon: 6.5 },
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(synthesize_inertial(&gt, 0.0, &SyntheticInertial::default(), &mut rng).is_err());
    }
}
