//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits nonzero if any failed.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use aoe_core::collab::{aoe_step, CollabConfig, DeviceState};
use aoe_core::geodesy::{haversine, GeoPoint, LocalFrame};
use aoe_core::inertial::{detect_steps, synthetic_walk_signal, write_csv, PeakDetectorConfig};
use aoe_core::metrics::{dfd, MetricsReport, Trajectory};
use aoe_core::radio::{AdvertisementPayload, PathLossModel, PAYLOAD_LEN};
use aoe_core::replay::{
    generate_synthetic, run, run_parallel_pdr, synthesize_inertial, write_groundtruth_csv, GroundtruthSource,
    InertialSource, Scenario, SyntheticParams,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const BIN: &str = env!("CARGO_BIN_EXE_aoe-sim");
const NEVER_LOWER: u32 = 999_999;
const NEVER_UPPER: u32 = 1_000_000;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn cli(args: &[&str]) -> Result<String, String> {
    let out = Command::new(BIN).args(args).output().map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("aoe-sim {}: {}", args.join(" "), String::from_utf8_lossy(&out.stderr)));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn path(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

fn read_tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                files.insert(p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    files
}

fn dense_scenario() -> Scenario {
    generate_synthetic(&SyntheticParams::default()).expect("default synthetic scenario")
}

// ---------------------------------------------------------------- criterion 1

/// Rewrites every device of `scenario` to CSV-referenced streams under `dir`,
/// standing in for recorded walks.
fn as_recorded(scenario: &Scenario, dir: &Path) -> Scenario {
    let mut out = scenario.clone();
    for d in &mut out.devices {
        let gt = d.groundtruth_points().to_vec();
        let noise = match &d.inertial {
            InertialSource::Synthetic { synthetic } => *synthetic,
            _ => unreachable!("generated scenarios synthesize their streams"),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(d.start_offset_ms ^ 0x5eed);
        let samples = synthesize_inertial(&gt, d.initial_heading_rad, &noise, &mut rng).unwrap();
        let gt_path = dir.join(format!("{}_gt.csv", d.id));
        let imu_path = dir.join(format!("{}_imu.csv", d.id));
        write_groundtruth_csv(fs::File::create(&gt_path).unwrap(), &gt).unwrap();
        write_csv(fs::File::create(&imu_path).unwrap(), &samples).unwrap();
        d.groundtruth = GroundtruthSource::Csv { csv: PathBuf::from(gt_path.file_name().unwrap()) };
        d.inertial = InertialSource::Csv { csv: PathBuf::from(imu_path.file_name().unwrap()) };
    }
    out
}

fn tracks_identical(dir: &Path) -> Result<usize, String> {
    let mut n = 0;
    for entry in fs::read_dir(dir.join("tracks")).map_err(|e| e.to_string())? {
        let p = entry.unwrap().path();
        let text = fs::read_to_string(&p).unwrap();
        for line in text.lines().skip(1) {
            let f: Vec<&str> = line.split(',').collect();
            ensure(f[3] == f[5] && f[4] == f[6], format!("{}: AOE differs from PDR at `{line}`", p.display()))?;
            n += 1;
        }
    }
    Ok(n)
}

fn criterion_1() -> Outcome {
    let synthetic = Scenario { collab: CollabConfig::new(NEVER_LOWER, NEVER_UPPER).unwrap(), ..dense_scenario() };
    let record = run(&synthetic).map_err(|e| e.to_string())?;
    ensure(!record.events.is_empty(), "no exchanges took place, degeneracy would be vacuous")?;
    let mut samples = 0;
    for d in &record.devices {
        for (p, a) in d.pdr.iter().zip(&d.aoe) {
            ensure(p.bit_eq(a), format!("synthetic device {} diverged", d.id))?;
        }
        samples += d.pdr.len();
    }

    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let recorded = as_recorded(&dense_scenario(), tmp.path());
    let file = tmp.path().join("recorded.json");
    fs::write(&file, serde_json::to_string(&recorded).unwrap()).unwrap();
    let out = tmp.path().join("out");
    cli(&[
        "simulate",
        "--scenario",
        path(&file),
        "--out",
        path(&out),
        "--lower",
        &NEVER_LOWER.to_string(),
        "--upper",
        &NEVER_UPPER.to_string(),
    ])?;
    let rows = tracks_identical(&out)?;
    let events = fs::read_to_string(out.join("events.csv")).unwrap().lines().count() - 1;
    ensure(events > 0, "recorded run had no exchanges")?;
    Ok(format!(
        "{} devices, {samples} synthetic samples and {rows} recorded-input rows bit-identical ({} + {events} exchanges)",
        record.devices.len(),
        record.events.len()
    ))
}

// ---------------------------------------------------------------- criterion 2

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let scenario = dense_scenario();
    ensure(scenario.devices.len() == 16, "scenario must have 16 devices")?;
    let record = run(&scenario).map_err(|e| e.to_string())?;
    let s = MetricsReport::from_record(&record).map_err(|e| e.to_string())?.summary;
    let elapsed = start.elapsed().as_secs_f64();
    let need = (0.6 * s.devices as f64).ceil() as usize;
    let detail = format!(
        "q3 improved {}/{} (need {need}), DFD improved {}/{} (need {need}), mean per-device q3 improvement {:.2}% \
         (need 20%), aggregate {:.2}%, {elapsed:.1} s",
        s.improved_q3,
        s.devices,
        s.improved_dfd,
        s.devices,
        100.0 * s.mean_improvement,
        100.0 * s.aggregate_improvement
    );
    let ok = s.improved_q3 >= need && s.improved_dfd >= need && s.mean_improvement >= 0.20 && elapsed < 60.0;
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------- criterion 3

fn random_trajectory(rng: &mut ChaCha8Rng, len: usize) -> Vec<GeoPoint> {
    let frame = LocalFrame::new(GeoPoint { lat: 46.5191, lon: 6.5668 });
    (0..len).map(|_| frame.unproject(rng.random_range(-30.0..30.0), rng.random_range(-30.0..30.0))).collect()
}

// c(i, j) = max(d(p_i, q_j), min(c(i-1, j), c(i-1, j-1), c(i, j-1)))
fn dfd_recursive(p: &[GeoPoint], q: &[GeoPoint]) -> f64 {
    fn c(i: usize, j: usize, p: &[GeoPoint], q: &[GeoPoint], memo: &mut HashMap<(usize, usize), f64>) -> f64 {
        if let Some(&v) = memo.get(&(i, j)) {
            return v;
        }
        let d = haversine(p[i], q[j]);
        let v = match (i, j) {
            (0, 0) => d,
            (0, _) => c(0, j - 1, p, q, memo).max(d),
            (_, 0) => c(i - 1, 0, p, q, memo).max(d),
            _ => c(i - 1, j, p, q, memo)
                .min(c(i - 1, j - 1, p, q, memo))
                .min(c(i, j - 1, p, q, memo))
                .max(d),
        };
        memo.insert((i, j), v);
        v
    }
    c(p.len() - 1, q.len() - 1, p, q, &mut HashMap::new())
}

// minimum over every monotone coupling of its longest link
fn dfd_brute(p: &[GeoPoint], q: &[GeoPoint]) -> f64 {
    fn walk(i: usize, j: usize, worst: f64, p: &[GeoPoint], q: &[GeoPoint]) -> f64 {
        let worst = worst.max(haversine(p[i], q[j]));
        if i + 1 == p.len() && j + 1 == q.len() {
            return worst;
        }
        let mut best = f64::INFINITY;
        if i + 1 < p.len() {
            best = best.min(walk(i + 1, j, worst, p, q));
        }
        if j + 1 < q.len() {
            best = best.min(walk(i, j + 1, worst, p, q));
        }
        if i + 1 < p.len() && j + 1 < q.len() {
            best = best.min(walk(i + 1, j + 1, worst, p, q));
        }
        best
    }
    walk(0, 0, 0.0, p, q)
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for k in 0..200 {
        let (m, n) = (rng.random_range(1..=50), rng.random_range(1..=50));
        let (p, q) = (random_trajectory(&mut rng, m), random_trajectory(&mut rng, n));
        let fast = dfd(&Trajectory::new(p.clone()).unwrap(), &Trajectory::new(q.clone()).unwrap());
        let diff = (fast - dfd_recursive(&p, &q)).abs();
        worst = worst.max(diff);
        ensure(diff <= 1e-12, format!("recursive oracle pair {k} ({m}x{n}): differs by {diff}"))?;
    }
    let mut brute_pairs = 0;
    for m in 1..=8 {
        for n in 1..=8 {
            for _ in 0..3 {
                let (p, q) = (random_trajectory(&mut rng, m), random_trajectory(&mut rng, n));
                let fast = dfd(&Trajectory::new(p.clone()).unwrap(), &Trajectory::new(q.clone()).unwrap());
                let diff = (fast - dfd_brute(&p, &q)).abs();
                worst = worst.max(diff);
                ensure(diff <= 1e-12, format!("coupling oracle {m}x{n}: differs by {diff}"))?;
                brute_pairs += 1;
            }
        }
    }
    Ok(format!("200 recursive pairs (len <= 50) and {brute_pairs} enumerated pairs (len <= 8), max diff {worst:e}"))
}

// ---------------------------------------------------------------- criterion 4

fn criterion_4() -> Outcome {
    let (duration, period) = (120_000, 600);
    let signal = synthetic_walk_signal(duration, period, 300, 2.0);
    // crests of 9.81 + 2 cos(2 pi t / 600) within [0, duration)
    let analytic = (0..duration).filter(|t| t % period == 0).count();
    let detected = detect_steps(&signal, &PeakDetectorConfig::default()).map_err(|e| e.to_string())?.len();
    let rel = (detected as f64 - analytic as f64).abs() / analytic as f64;
    let detail = format!("{detected} detected vs {analytic} analytic peaks, relative error {:.2}%", 100.0 * rel);
    ensure(analytic == 200, "signal must carry 200 analytic peaks")?;
    if rel <= 0.03 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------- criterion 5

fn criterion_5() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for exponent in [1.5, 2.0, 3.0] {
        let model = PathLossModel { exponent, ..PathLossModel::default() };
        for k in 0..=1000 {
            // log-spaced over [0.1, 100] m
            let d = 0.1 * 1000f64.powf(k as f64 / 1000.0);
            let rssi = model.rssi_at(d, 0.0).map_err(|e| e.to_string())?;
            let rel = (model.distance_from_rssi(rssi) - d).abs() / d;
            worst = worst.max(rel);
            ensure(rel <= 1e-9, format!("exponent {exponent}, d = {d}: relative error {rel:e}"))?;
            cases += 1;
        }
    }
    Ok(format!("{cases} distances over exponents 1.5/2/3, max relative error {worst:e}"))
}

// ---------------------------------------------------------------- criterion 6

fn criterion_6() -> Outcome {
    let frame = LocalFrame::new(GeoPoint { lat: 46.5191, lon: 6.5668 });
    let at = |x: f64, y: f64| frame.unproject(x, y);
    let moving = |p: GeoPoint, errors: u32| DeviceState { location: p, errors, previous_location: at(-50.0, -50.0) };
    let cfg = CollabConfig::new(40, 80).unwrap();
    let (a0, b0) = (at(0.0, 0.0), at(8.0, 0.0));

    let a = moving(a0, 0);
    ensure(aoe_step(a, &moving(b0, 0), &cfg) == a, "both zero: state must be unchanged")?;

    let r = aoe_step(moving(a0, 60), &moving(b0, 20), &cfg);
    let (from_a, to_b, total) = (haversine(a0, r.location), haversine(r.location, b0), haversine(a0, b0));
    ensure((from_a / total - 0.75).abs() < 1e-9, format!("60/20: moved {:.6} of the segment", from_a / total))?;
    ensure((from_a + to_b - total).abs() < 1e-6 * total, "60/20: new point off the segment")?;
    ensure(r.errors == 60, "60/20: moving device must keep its counter")?;

    let r = aoe_step(moving(a0, 30), &moving(b0, 20), &cfg);
    ensure(r.location.bit_eq(&a0), "30/20: below lower threshold must not move")?;

    let r = aoe_step(moving(a0, 50), &moving(b0, 90), &cfg);
    ensure(r.location.bit_eq(&a0), "50/90: peer above upper threshold must be ignored")?;

    let still = DeviceState { errors: 5, ..DeviceState::new(at(1.0, 1.0)) };
    let r = aoe_step(still, &moving(b0, 20), &cfg);
    ensure(r.errors == 4, format!("stationary 5: counter became {}", r.errors))?;
    Ok("no-op, 75% move, lower-guard rejection, upper-guard rejection, stationary drain".into())
}

// ---------------------------------------------------------------- criterion 7

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for i in 0..100_000 {
        let p = AdvertisementPayload {
            lat: f64::from_bits(rng.random()),
            lon: f64::from_bits(rng.random()),
            errors: rng.random(),
        };
        let bytes = p.encode();
        ensure(bytes.len() == 20, format!("encoded length {}", bytes.len()))?;
        let back = AdvertisementPayload::decode(&bytes).map_err(|e| e.to_string())?;
        ensure(back.bit_eq(&p), format!("payload {i} did not round-trip: {p:?}"))?;
    }
    ensure(PAYLOAD_LEN == 20, "payload constant must be 20 bytes")?;
    ensure(AdvertisementPayload::decode(&[0u8; 19]).is_err(), "19-byte input must be rejected")?;
    Ok("100000 random payloads bit-exact, 20 bytes each".into())
}

// ---------------------------------------------------------------- criterion 8

fn criterion_8() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let scenario = tmp.path().join("dense.json");
    cli(&["gen", "--out", path(&scenario)])?;
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    cli(&["simulate", "--scenario", path(&scenario), "--out", path(&a)])?;
    cli(&["simulate", "--scenario", path(&scenario), "--out", path(&b)])?;
    let (ta, tb) = (read_tree(&a), read_tree(&b));
    ensure(!ta.is_empty() && ta == tb, "simulate outputs differ between identical runs")?;

    let grid = ["--lowers", "20,40,60", "--uppers", "80,120"];
    let (s1, s8) = (tmp.path().join("s1"), tmp.path().join("s8"));
    cli(&[&["sweep", "--scenario", path(&scenario), "--out", path(&s1), "--jobs", "1"][..], &grid].concat())?;
    cli(&[&["sweep", "--scenario", path(&scenario), "--out", path(&s8), "--jobs", "8"][..], &grid].concat())?;
    let (g1, g8) = (read_tree(&s1), read_tree(&s8));
    ensure(g1 == g8, "sweep outputs differ between --jobs 1 and --jobs 8")?;
    Ok(format!("{} simulate files and {} sweep files byte-identical", ta.len(), g1.len()))
}

// ---------------------------------------------------------------- criterion 9

fn criterion_9() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let scenario = tmp.path().join("dense.json");
    cli(&["gen", "--out", path(&scenario)])?;
    let out = tmp.path().join("sweep");
    let lowers = [0, 10, 20, 30, 40, 50, 60, 80, 100, 150, NEVER_LOWER];
    let lowers_arg = lowers.iter().map(u32::to_string).collect::<Vec<_>>().join(",");
    let upper = NEVER_UPPER.to_string();
    cli(&["sweep", "--scenario", path(&scenario), "--out", path(&out), "--lowers", &lowers_arg, "--uppers", &upper, "--jobs", "4"])?;

    let text = fs::read_to_string(out.join("grid.csv")).map_err(|e| e.to_string())?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
    ensure(rows.len() == lowers.len(), "one grid row per lower threshold")?;

    let updates: Vec<u64> = rows.iter().map(|r| r[col("location_updates")].parse().unwrap()).collect();
    for (w, l) in updates.windows(2).zip(lowers.windows(2)) {
        ensure(w[1] <= w[0], format!("updates rose from {} to {} between lower {} and {}", w[0], w[1], l[0], l[1]))?;
    }
    let last = rows.last().unwrap();
    ensure(last[col("mean_q3_m")] == last[col("mean_q3_pdr_m")], "max-lower row q3 differs from PDR")?;
    ensure(last[col("mean_dfd_m")] == last[col("mean_dfd_pdr_m")], "max-lower row DFD differs from PDR")?;

    // per device, against an independent collaboration-free run
    let s = aoe_core::replay::load_scenario(&scenario).map_err(|e| e.to_string())?;
    let baseline = MetricsReport::from_record(&run_parallel_pdr(&s).unwrap()).unwrap();
    let top = s.clone();
    let top = Scenario { collab: CollabConfig::new(NEVER_LOWER, NEVER_UPPER).unwrap(), ..top };
    let maxed = MetricsReport::from_record(&run(&top).unwrap()).unwrap();
    for (m, b) in maxed.devices.iter().zip(&baseline.devices) {
        ensure(m.q3_aoe == b.q3_aoe && m.dfd_aoe == b.dfd_aoe, format!("device {} differs from baseline", m.id))?;
    }
    Ok(format!("location updates by rising lower {updates:?}; max-lower row equals PDR baseline"))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        ("no-collaboration degeneracy", criterion_1),
        ("collaboration improvement at desk scale", criterion_2),
        ("DFD oracle equivalence", criterion_3),
        ("step detection accuracy", criterion_4),
        ("path-loss round trip", criterion_5),
        ("AOE unit semantics", criterion_6),
        ("payload codec", criterion_7),
        ("determinism", criterion_8),
        ("threshold-sweep shape", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {} {name}: PASS ({detail}) [{secs:.2} s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} {name}: FAIL ({detail}) [{secs:.2} s]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
