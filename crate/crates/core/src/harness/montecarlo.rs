use rayon::prelude::*;

use super::report::{MetricsReport, PickEvent, RunTotals};
use super::sim::{run_scenario_with, RunOptions};
use super::{HarnessError, RunConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloResult {
    /// Seeds in run order.
    pub seeds: Vec<u64>,
    /// Per-run reports, same order as `seeds`.
    pub runs: Vec<MetricsReport>,
    pub picks: Vec<PickEvent>,
    pub totals: RunTotals,
    /// Pooled over every run.
    pub report: MetricsReport,
}

/// Runs seeds `cfg.seed .. cfg.seed + runs` in parallel and pools the picks.
pub fn run_monte_carlo(cfg: &RunConfig, runs: u32) -> Result<MonteCarloResult, HarnessError> {
    cfg.validate()?;
    if runs == 0 {
        return Err(HarnessError::Config("runs must be at least 1".into()));
    }
    let seeds: Vec<u64> = (0..u64::from(runs)).map(|i| cfg.seed.wrapping_add(i)).collect();
    let results = seeds
        .par_iter()
        .map(|&seed| {
            let c = RunConfig { seed, ..cfg.clone() };
            run_scenario_with(&c, RunOptions { record_logs: false })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut picks = Vec::new();
    let mut totals = RunTotals::default();
    let mut reports = Vec::with_capacity(results.len());
    for r in results {
        totals.merge(&r.totals);
        picks.extend(r.picks);
        reports.push(r.report);
    }
    let report = MetricsReport::from_picks(cfg.gripper, cfg.motion, cfg.perception.detector.name(), runs, &picks, &totals);
    Ok(MonteCarloResult {
        seeds,
        runs: reports,
        picks,
        totals,
        report,
    })
}
