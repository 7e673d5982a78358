//! Final-approach controllers: direct cartesian servoing with a joint-limit
//! guard, and pixel-error visual servoing from the hand camera.

mod direct;
mod ibvs;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use direct::{direct_step, joint_limit_guard, DirectConfig, DirectState, GuardDecision};
pub use ibvs::{ibvs_step, ibvs_velocity, IbvsConfig, IbvsState, IbvsStep};

/// Control loop period, seconds.
pub const CONTROL_DT: f64 = 1.0 / 15.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerStatus {
    Running,
    Success,
    FailMissedFrames,
    FailSingularity,
    FailBboxSize,
    FailTraversal,
    FailTimeout,
    FailJointLimit,
}

impl ControllerStatus {
    pub fn is_terminal(self) -> bool {
        self != ControllerStatus::Running
    }

    pub fn is_failure(self) -> bool {
        self.is_terminal() && self != ControllerStatus::Success
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ControllerStatus::Running => "running",
            ControllerStatus::Success => "success",
            ControllerStatus::FailMissedFrames => "fail_missed_frames",
            ControllerStatus::FailSingularity => "fail_singularity",
            ControllerStatus::FailBboxSize => "fail_bbox_size",
            ControllerStatus::FailTraversal => "fail_traversal",
            ControllerStatus::FailTimeout => "fail_timeout",
            ControllerStatus::FailJointLimit => "fail_joint_limit",
        }
    }
}

impl fmt::Display for ControllerStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControlError {
    #[error("invalid controller config: {0}")]
    InvalidConfig(String),
}
