use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::perception::write_metrics_csv;

use super::montecarlo::MonteCarloResult;
use super::report::{MetricsReport, PickEvent};
use super::sim::RunResult;
use super::{HarnessError, RunConfig};

fn csv_err(e: csv::Error) -> HarnessError {
    HarnessError::Io(std::io::Error::other(e.to_string()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), HarnessError> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| HarnessError::Io(e.into()))?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

/// One row per attempt.
pub fn write_picks_csv<W: Write>(writer: W, picks: &[PickEvent]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "attempt_index",
        "target_id",
        "fruit_id",
        "outcome",
        "position_error",
        "terminal_state",
        "controllers",
        "wall_steps",
    ])
    .map_err(csv_err)?;
    for p in picks {
        let controllers: Vec<String> = p.controller_trace.iter().map(|(c, s)| format!("{}:{}", c.as_str(), s.as_str())).collect();
        w.write_record([
            p.attempt_index.to_string(),
            p.target_id.to_string(),
            p.fruit_id.map(|f| f.to_string()).unwrap_or_default(),
            p.outcome.map(|o| o.category.as_str().to_string()).unwrap_or_default(),
            p.position_error.map(|e| format!("{e:.6}")).unwrap_or_default(),
            p.terminal_state().map(|s| s.as_str().to_string()).unwrap_or_default(),
            controllers.join(";"),
            p.wall_steps.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn write_detection_csv(path: &Path, report: &MetricsReport) -> Result<(), HarnessError> {
    let w = BufWriter::new(File::create(path)?);
    write_metrics_csv(w, &[(report.detector.clone(), report.detection)])?;
    Ok(())
}

/// Writes the full artefact set of a single run into `dir`.
pub fn write_run(dir: &Path, cfg: &RunConfig, result: &RunResult) -> Result<(), HarnessError> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("events.jsonl"), result.log.transitions_jsonl())?;
    fs::write(dir.join("tracks.jsonl"), result.log.tracks_jsonl())?;
    fs::write(dir.join("telemetry.jsonl"), result.log.telemetry_jsonl())?;
    write_picks_csv(BufWriter::new(File::create(dir.join("picks.csv"))?), &result.picks)?;
    write_detection_csv(&dir.join("metrics.csv"), &result.report)?;
    fs::write(dir.join("summary.txt"), result.report.summary_table())?;
    write_json(&dir.join("report.json"), &result.report)?;
    write_json(&dir.join("config.json"), cfg)?;
    Ok(())
}

#[derive(Serialize)]
struct RunRow<'a> {
    seed: u64,
    attempts: u64,
    picks_with_outcome: u64,
    successes: u64,
    success_rate: Option<f64>,
    fruit_total: u64,
    ticks: u64,
    #[serde(skip)]
    _report: &'a MetricsReport,
}

/// Writes pooled and per-run Monte-Carlo results into `dir`.
pub fn write_monte_carlo(dir: &Path, cfg: &RunConfig, result: &MonteCarloResult) -> Result<(), HarnessError> {
    fs::create_dir_all(dir)?;
    write_picks_csv(BufWriter::new(File::create(dir.join("picks.csv"))?), &result.picks)?;
    write_detection_csv(&dir.join("metrics.csv"), &result.report)?;
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(dir.join("runs.csv"))?));
    for (seed, r) in result.seeds.iter().zip(&result.runs) {
        w.serialize(RunRow {
            seed: *seed,
            attempts: r.attempts,
            picks_with_outcome: r.picks_with_outcome,
            successes: r.fruit_harvested,
            success_rate: r.success_rate,
            fruit_total: r.fruit_total,
            ticks: r.ticks,
            _report: r,
        })
        .map_err(csv_err)?;
    }
    w.flush()?;
    fs::write(dir.join("summary.txt"), result.report.summary_table())?;
    write_json(&dir.join("report.json"), &result.report)?;
    write_json(&dir.join("config.json"), cfg)?;
    Ok(())
}
