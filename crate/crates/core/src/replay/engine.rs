use std::collections::VecDeque;

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::load::{read_groundtruth_file, read_inertial_file};
use super::rng::{device_rng, pair_rng};
use super::synthetic::synthesize_inertial;
use super::{
    validate_groundtruth, CollabEvent, DeviceError, DeviceTrack, ErrorGrowth, GroundtruthPoint, GroundtruthSource,
    InertialSource, ReplayError, RunRecord, Scenario,
};
use crate::collab::{aoe_exchange, DeviceState};
use crate::geodesy::{haversine, intermediate_point, GeoPoint};
use crate::inertial::{detect_steps_with_heading, validate_stream, StepEvent};
use crate::pdr::PdrState;
use crate::radio::AdvertisementPayload;

/// Groundtruth separations below this are clamped before entering the
/// path-loss model, which is undefined at zero distance.
const MIN_SEPARATION_M: f64 = 0.01;

/// A device with its streams loaded, steps detected and times made global.
struct Prepared {
    id: String,
    start: u64,
    end: u64,
    groundtruth: Vec<(u64, GeoPoint)>,
    steps: Vec<StepEvent>,
}

impl Prepared {
    fn groundtruth_at(&self, t: u64) -> GeoPoint {
        let gt = &self.groundtruth;
        let i = gt.partition_point(|(ti, _)| *ti <= t);
        if i == 0 {
            return gt[0].1;
        }
        if i == gt.len() {
            return gt[i - 1].1;
        }
        let ((t0, p0), (t1, p1)) = (gt[i - 1], gt[i]);
        let f = (t - t0) as f64 / (t1 - t0) as f64;
        intermediate_point(p0, p1, f).expect("fraction within [0, 1]")
    }

    fn present(&self, t: u64) -> bool {
        t >= self.start
    }
}

fn prepare(scenario: &Scenario) -> Result<Vec<Prepared>, ReplayError> {
    scenario
        .devices
        .iter()
        .map(|spec| {
            let id = spec.id.as_str();
            let groundtruth: Vec<GroundtruthPoint> = match &spec.groundtruth {
                GroundtruthSource::Inline(g) => g.clone(),
                GroundtruthSource::Csv { csv } => read_groundtruth_file(csv).map_err(|e| ReplayError::device(id, e))?,
            };
            validate_groundtruth(&groundtruth)
                .map_err(|m| ReplayError::device(id, DeviceError::Groundtruth(m)))?;

            let samples = match &spec.inertial {
                InertialSource::Inline(s) => s.clone(),
                InertialSource::Csv { csv } => read_inertial_file(csv).map_err(|e| ReplayError::device(id, e))?,
                InertialSource::Synthetic { synthetic } => {
                    let mut rng = device_rng(scenario.seed, "inertial", id);
                    synthesize_inertial(&groundtruth, spec.initial_heading_rad, synthetic, &mut rng)
                        .map_err(|m| ReplayError::device(id, DeviceError::Synthetic(m)))?
                }
            };
            validate_stream(&samples).map_err(|e| ReplayError::device(id, e))?;
            let steps = detect_steps_with_heading(&samples, &scenario.peak_detector, spec.initial_heading_rad)
                .map_err(|e| ReplayError::device(id, e))?;

            // construct once to surface step-length and anchor errors before the run
            PdrState::new(groundtruth[0].point(), spec.step_length_m, spec.initial_heading_rad)
                .map_err(|e| ReplayError::device(id, e))?;

            let start = spec.start_offset_ms;
            let last = samples.last().map_or(0, |s| s.t_ms).max(groundtruth.last().unwrap().t_ms);
            Ok(Prepared {
                id: spec.id.clone(),
                start,
                end: start + last,
                groundtruth: groundtruth.iter().map(|g| (start + g.t_ms, g.point())).collect(),
                steps: steps.into_iter().map(|s| StepEvent { t_ms: start + s.t_ms, ..s }).collect(),
            })
        })
        .collect()
}

/// Per-device mutable state during a run.
struct Agent {
    pdr: PdrState,
    // PDR state whose position is rebased by collaboration
    aoe_pdr: PdrState,
    aoe: DeviceState,
    // estimate at the end of each of the last few ticks, oldest first
    history: VecDeque<GeoPoint>,
    next_step: usize,
}

/// Replays every device on a shared clock with collaboration enabled.
///
/// The PDR track of the returned record evolves independently of the
/// corrections, so it doubles as the standalone baseline.
pub fn run(scenario: &Scenario) -> Result<RunRecord, ReplayError> {
    run_with(scenario, true)
}

/// The same replay with collaboration disabled; AOE tracks equal PDR tracks.
pub fn run_parallel_pdr(scenario: &Scenario) -> Result<RunRecord, ReplayError> {
    run_with(scenario, false)
}

fn run_with(scenario: &Scenario, collaborate: bool) -> Result<RunRecord, ReplayError> {
    scenario.validate()?;
    let devices = prepare(scenario)?;
    let n = devices.len();
    let tick = scenario.tick_ms;
    let sim_end = devices.iter().map(|d| d.end).max().unwrap_or(0);

    let mut agents: Vec<Agent> = scenario
        .devices
        .iter()
        .zip(&devices)
        .map(|(spec, dev)| {
            let origin = dev.groundtruth[0].1;
            let pdr = PdrState::new(origin, spec.step_length_m, spec.initial_heading_rad)
                .expect("validated in prepare");
            Agent {
                pdr,
                aoe_pdr: pdr,
                aoe: DeviceState::new(origin),
                history: VecDeque::from([origin]),
                next_step: 0,
            }
        })
        .collect();

    let mut tracks: Vec<DeviceTrack> = devices
        .iter()
        .map(|d| DeviceTrack {
            id: d.id.clone(),
            t_ms: Vec::new(),
            groundtruth: Vec::new(),
            pdr: Vec::new(),
            aoe: Vec::new(),
            errors: Vec::new(),
            final_errors: 0,
        })
        .collect();

    // pairs indexed i < j in row-major order
    let mut pair_rngs: Vec<ChaCha8Rng> = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            pair_rngs.push(pair_rng(scenario.seed, &devices[i].id, &devices[j].id));
        }
    }
    let mut last_exchange: Vec<Option<u64>> = vec![None; pair_rngs.len()];
    let noise = Normal::new(0.0, scenario.path_loss.noise_sigma_db).expect("validated sigma");
    let mut events = Vec::new();
    let window = scenario.stationary_window_ticks();

    let mut k: u64 = 0;
    loop {
        let now = k * tick;
        if now > sim_end + tick {
            break;
        }

        // movement
        for (dev, agent) in devices.iter().zip(agents.iter_mut()) {
            if !dev.present(now) {
                continue;
            }
            agent.aoe.previous_location = agent.history[0];
            while let Some(step) = dev.steps.get(agent.next_step).filter(|s| s.t_ms <= now) {
                agent.pdr.advance(step);
                agent.aoe_pdr.advance(step);
                if scenario.error_growth == ErrorGrowth::PerStep {
                    agent.aoe.errors = agent.aoe.errors.saturating_add(1);
                }
                agent.next_step += 1;
            }
            if scenario.error_growth == ErrorGrowth::PerTick && now <= dev.end {
                agent.aoe.errors = agent.aoe.errors.saturating_add(1);
            }
            agent.aoe.location = agent.aoe_pdr.position();
        }

        // proximity and exchange
        if collaborate {
            let truth: Vec<GeoPoint> = devices.iter().map(|d| d.groundtruth_at(now)).collect();
            let mut peers: Vec<Vec<usize>> = vec![Vec::new(); n];
            let mut p = 0;
            for i in 0..n {
                for j in i + 1..n {
                    let pair = p;
                    p += 1;
                    if !(devices[i].present(now) && devices[j].present(now)) {
                        continue;
                    }
                    let d = haversine(truth[i], truth[j]).max(MIN_SEPARATION_M);
                    let rssi = scenario
                        .path_loss
                        .rssi_at(d, noise.sample(&mut pair_rngs[pair]))
                        .expect("positive separation");
                    let close = scenario
                        .path_loss
                        .in_proximity(rssi, scenario.proximity_cutoff_m)
                        .expect("validated cutoff");
                    if !close {
                        continue;
                    }
                    let debounced = scenario.debounce_ticks > 0
                        && last_exchange[pair].is_some_and(|t| now - t < u64::from(scenario.debounce_ticks) * tick);
                    if debounced {
                        continue;
                    }
                    last_exchange[pair] = Some(now);
                    peers[i].push(j);
                    peers[j].push(i);
                }
            }

            // every exchange of this tick reads the same broadcasts
            let broadcasts: Vec<[u8; 20]> = agents.iter().map(|a| a.aoe.payload().encode()).collect();
            let mut updated: Vec<DeviceState> = Vec::with_capacity(n);
            for (i, agent) in agents.iter().enumerate() {
                let mut state = agent.aoe;
                for &j in &peers[i] {
                    let payload = AdvertisementPayload::decode(&broadcasts[j]).expect("20-byte payload");
                    let peer = DeviceState::from_payload(&payload);
                    let ex = aoe_exchange(state, &peer, &scenario.collab);
                    events.push(CollabEvent {
                        t_ms: now,
                        id_a: devices[i].id.clone(),
                        id_b: devices[j].id.clone(),
                        ratio_a: ex.ratio,
                        updated_a: ex.updated,
                    });
                    state = ex.state;
                }
                updated.push(state);
            }
            for ((dev, agent), state) in devices.iter().zip(agents.iter_mut()).zip(updated) {
                if !state.location.bit_eq(&agent.aoe.location) {
                    agent
                        .aoe_pdr
                        .override_position(state.location)
                        .map_err(|e| ReplayError::device(&dev.id, e))?;
                }
                agent.aoe = DeviceState { location: agent.aoe_pdr.position(), ..state };
            }
        }

        for (dev, agent) in devices.iter().zip(agents.iter_mut()) {
            if dev.present(now) {
                agent.history.push_back(agent.aoe.location);
                if agent.history.len() > window {
                    agent.history.pop_front();
                }
            }
        }

        // recording, over each device's own walk
        for ((dev, agent), track) in devices.iter().zip(&agents).zip(tracks.iter_mut()) {
            if dev.present(now) && now < dev.end + tick {
                track.t_ms.push(now);
                track.groundtruth.push(dev.groundtruth_at(now));
                track.pdr.push(agent.pdr.position());
                track.aoe.push(agent.aoe.location);
                track.errors.push(agent.aoe.errors);
            }
        }
        k += 1;
    }

    for (track, agent) in tracks.iter_mut().zip(&agents) {
        track.final_errors = agent.aoe.errors;
    }
    Ok(RunRecord { devices: tracks, events })
}
