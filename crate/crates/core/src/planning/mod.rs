//! Target filtering and ordering, obstacle planes, straight-line planning
//! and the picking state machine.

mod machine;
mod motion;
mod planes;
mod targets;

use thiserror::Error;

pub use machine::{sm_step, Controller, MachineConfig, PickMachine, PickState, SmCommand, SmEvent};
pub use motion::{plan_straight, PoseSet, WAYPOINT_SPACING};
pub use planes::{MotionPhase, ObstaclePlanes};
pub use targets::{filter_targets, first_target_hint, order_targets, ReachabilitySphere, RoIBox, TaggedTarget, TargetTag};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanningError {
    #[error("invalid planning config: {0}")]
    InvalidConfig(String),
    #[error("plan failed at waypoint {waypoint} (clearance {clearance:.4} m)")]
    PlanFailure { waypoint: usize, clearance: f64 },
    #[error("no transition from {state} on {event}")]
    ContractViolation { state: PickState, event: String },
}
