//! Closed-loop simulation runs, Monte-Carlo batches and their output files.

mod config;
mod montecarlo;
mod output;
mod report;
mod sim;

use thiserror::Error;

use crate::perception::PerceptionError;
use crate::planning::PlanningError;
use crate::tracking::TrackingError;
use crate::world::WorldError;

pub use config::RunConfig;
pub use montecarlo::{run_monte_carlo, MonteCarloResult};
pub use output::{write_monte_carlo, write_run};
pub use report::{CategoryStat, MetricsReport, PickEvent, RunTotals};
pub use sim::{run_scenario, run_scenario_with, run_world, EventLog, RunOptions, RunResult, TelemetryRecord, TrackRecord, TransitionRecord};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Planning(#[from] PlanningError),
    #[error(transparent)]
    Tracking(#[from] TrackingError),
    #[error(transparent)]
    Perception(#[from] PerceptionError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl HarnessError {
    pub fn is_config(&self) -> bool {
        matches!(self, HarnessError::Config(_))
    }
}
