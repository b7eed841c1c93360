//! `aoe-sim`: replay collaborative PDR scenarios and emit plot-ready CSV.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use aoe_core::export::{self, write_atomic};
use aoe_core::metrics::{ImprovementSummary, MetricsReport};
use aoe_core::replay::{self, generate_synthetic, load_scenario, RunRecord, Scenario, SyntheticParams};

#[derive(Parser)]
#[command(name = "aoe-sim", version, about = "Collaborative pedestrian dead-reckoning replay simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Replay a scenario and write tracks, events, metrics and CDFs.
    Simulate {
        #[command(flatten)]
        input: ScenarioArgs,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        lower: Option<u32>,
        #[arg(long)]
        upper: Option<u32>,
    },
    /// Replay a scenario once per threshold pair and write the grid.
    Sweep {
        #[command(flatten)]
        input: ScenarioArgs,
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated lower thresholds.
        #[arg(long, value_delimiter = ',', required = true)]
        lowers: Vec<u32>,
        /// Comma-separated upper thresholds.
        #[arg(long, value_delimiter = ',', required = true)]
        uppers: Vec<u32>,
        /// Maximum number of cells replayed concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Write a synthetic scenario file.
    Gen {
        /// Scenario file to write.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = SyntheticParams::default().devices)]
        devices: usize,
        /// Nominal per-device gyro bias in rad/s.
        #[arg(long = "noise-gyro", default_value_t = SyntheticParams::default().gyro_bias)]
        noise_gyro: f64,
        #[arg(long, default_value_t = SyntheticParams::default().seed)]
        seed: u64,
        #[arg(long)]
        lower: Option<u32>,
        #[arg(long)]
        upper: Option<u32>,
        #[arg(long)]
        cutoff: Option<f64>,
    },
    /// Recompute metrics and CDFs from the track files of a simulate run.
    Metrics {
        /// Directory written by `simulate`; defaults to --out.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct ScenarioArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Proximity cutoff in meters.
    #[arg(long)]
    cutoff: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

impl ScenarioArgs {
    fn load(&self, lower: Option<u32>, upper: Option<u32>) -> Result<Scenario> {
        let mut s = load_scenario(&self.scenario)?;
        if let Some(c) = self.cutoff {
            s.proximity_cutoff_m = c;
        }
        if let Some(seed) = self.seed {
            s.seed = seed;
        }
        if let Some(l) = lower {
            s.collab.lower = l;
        }
        if let Some(u) = upper {
            s.collab.upper = u;
        }
        s.validate()?;
        Ok(s)
    }
}

fn summary_line(s: &ImprovementSummary) -> String {
    format!(
        "improvement: mean per-device {:.1}%, aggregate {:.1}%; q3 improved on {}/{} devices, DFD on {}/{}; \
         mean q3 {:.2} m -> {:.2} m; {} exchanges, {} location updates",
        100.0 * s.mean_improvement,
        100.0 * s.aggregate_improvement,
        s.improved_q3,
        s.devices,
        s.improved_dfd,
        s.devices,
        s.mean_q3_pdr,
        s.mean_q3_aoe,
        s.total_collaborations,
        s.total_location_updates,
    )
}

fn simulate(scenario: &Scenario, out: &Path) -> Result<()> {
    let record = replay::run(scenario)?;
    let report = MetricsReport::from_record(&record)?;
    export::write_run(out, &record, &report)?;
    println!("{}", summary_line(&report.summary));
    Ok(())
}

fn sweep(scenario: &Scenario, out: &Path, lowers: &[u32], uppers: &[u32], jobs: usize) -> Result<()> {
    let grid = replay::sweep(scenario, lowers, uppers, jobs)?;
    for cell in &grid.cells {
        let dir = out.join("cells").join(format!("l{}_u{}", cell.lower, cell.upper));
        export::write_report(&dir, &cell.report)?;
    }
    write_atomic(&out.join("grid.csv"), |w| export::write_grid_csv(w, &grid))?;
    for cell in &grid.cells {
        println!("lower {:>6} upper {:>7}: {}", cell.lower, cell.upper, summary_line(&cell.report.summary));
    }
    Ok(())
}

fn gen(params: &SyntheticParams, out: &Path) -> Result<()> {
    let scenario = generate_synthetic(params)?;
    let mut json = serde_json::to_string_pretty(&scenario)?;
    json.push('\n');
    write_atomic(out, |w| w.write_all(json.as_bytes()))?;
    println!("wrote {} devices to {}", scenario.devices.len(), out.display());
    Ok(())
}

fn metrics(input: &Path, out: &Path) -> Result<()> {
    let tracks_dir = input.join("tracks");
    let mut paths: Vec<PathBuf> = fs::read_dir(&tracks_dir)
        .with_context(|| format!("{}", tracks_dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    paths.retain(|p| p.extension().is_some_and(|e| e == "csv"));
    paths.sort();
    if paths.is_empty() {
        bail!("{}: no track files", tracks_dir.display());
    }
    let mut record = RunRecord::default();
    for p in &paths {
        let id = p.file_stem().unwrap().to_string_lossy();
        let file = fs::File::open(p).with_context(|| format!("{}", p.display()))?;
        let track = export::read_track_csv(&id, file).map_err(|e| anyhow::anyhow!("{}: {e}", p.display()))?;
        record.devices.push(track);
    }
    let events = input.join("events.csv");
    if events.exists() {
        let file = fs::File::open(&events).with_context(|| format!("{}", events.display()))?;
        record.events = export::read_events_csv(file).map_err(|e| anyhow::anyhow!("{}: {e}", events.display()))?;
    }
    let report = MetricsReport::from_record(&record)?;
    export::write_report(out, &report)?;
    println!("{}", summary_line(&report.summary));
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { input, out, lower, upper } => {
            let scenario = input.load(lower, upper)?;
            simulate(&scenario, &out)
        }
        Command::Sweep { input, out, lowers, uppers, jobs } => {
            let scenario = input.load(None, None)?;
            sweep(&scenario, &out, &lowers, &uppers, jobs)
        }
        Command::Gen { out, devices, noise_gyro, seed, lower, upper, cutoff } => {
            let defaults = SyntheticParams::default();
            let params = SyntheticParams {
                devices,
                gyro_bias: noise_gyro,
                seed,
                collab: aoe_core::CollabConfig {
                    lower: lower.unwrap_or(defaults.collab.lower),
                    upper: upper.unwrap_or(defaults.collab.upper),
                },
                proximity_cutoff_m: cutoff.unwrap_or(defaults.proximity_cutoff_m),
                ..defaults
            };
            gen(&params, &out)
        }
        Command::Metrics { input, out } => metrics(input.as_deref().unwrap_or(&out), &out),
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
