use rayon::prelude::*;

use super::{run, ReplayError, Scenario};
use crate::collab::CollabConfig;
use crate::metrics::MetricsReport;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub lower: u32,
    pub upper: u32,
    pub report: MetricsReport,
}

/// Cells in row-major order: lowers outer, uppers inner.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub cells: Vec<SweepCell>,
}

impl SweepGrid {
    pub fn cell(&self, lower: u32, upper: u32) -> Option<&SweepCell> {
        self.cells.iter().find(|c| c.lower == lower && c.upper == upper)
    }
}

/// Runs the scenario once per (lower, upper) pair on up to `jobs` threads.
/// Every pair is checked before the first run starts.
pub fn sweep(scenario: &Scenario, lowers: &[u32], uppers: &[u32], jobs: usize) -> Result<SweepGrid, ReplayError> {
    if lowers.is_empty() {
        return Err(ReplayError::invalid("lowers", "must not be empty"));
    }
    if uppers.is_empty() {
        return Err(ReplayError::invalid("uppers", "must not be empty"));
    }
    if jobs == 0 {
        return Err(ReplayError::invalid("jobs", "must be positive"));
    }
    let mut configs = Vec::with_capacity(lowers.len() * uppers.len());
    for &lower in lowers {
        for &upper in uppers {
            let cfg = CollabConfig::new(lower, upper).map_err(|e| ReplayError::invalid("lowers/uppers", e))?;
            configs.push(cfg);
        }
    }
    scenario.validate()?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| ReplayError::invalid("jobs", e))?;
    let cells = pool.install(|| {
        configs
            .par_iter()
            .map(|&collab| {
                let cell_scenario = Scenario { collab, ..scenario.clone() };
                let record = run(&cell_scenario)?;
                let report = MetricsReport::from_record(&record)
                    .map_err(|e| ReplayError::invalid("scenario", e))?;
                Ok(SweepCell { lower: collab.lower, upper: collab.upper, report })
            })
            .collect::<Result<Vec<_>, ReplayError>>()
    })?;
    Ok(SweepGrid { cells })
}
