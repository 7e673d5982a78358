//! Simulation ground truth: scenarios, rendering, arm and gripper actuation
//! and the pick-outcome model.

mod arm;
mod gripper;
mod outcome;
mod render;
mod scenario;

use thiserror::Error;

pub use arm::{apply_ee_velocity, tool_rotation, ArmState, GuardEvent, JointProxyMap, SingularityRegion, DEFAULT_JOINT_LIMITS};
pub use gripper::{actuate_gripper, FeedbackFlag, GripperCommand, GripperKind, GripperModel, GripperState};
pub use outcome::{
    sample_pick_outcome, CategoryWeights, Motion, OutcomeCategory, OutcomeEntry, OutcomeModel, PickOutcome, ResidualMode,
};
pub use render::{add_noise, render_view, truth_boxes, RenderConfig, RenderedView, Surface, TruthBox};
pub use scenario::{
    generate_scenario, Fruit, NearObstacle, Obstacle, ObstacleKind, ScenarioConfig, StemMode, WorldScenario,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WorldError {
    #[error("invalid scenario config: {0}")]
    InvalidConfig(String),
    #[error("invalid command: {0}")]
    InvalidCommand(String),
    #[error("no outcome distribution configured for {gripper:?} gripper with {motion:?} motion")]
    UnconfiguredCombination { gripper: GripperKind, motion: Motion },
}
