use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{ControlError, ControllerStatus, CONTROL_DT};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DirectConfig {
    pub ee_vel: f64,
    pub position_tolerance: f64,
    /// Degrees.
    pub joint_limit_margin: f64,
    pub timeout: f64,
    pub dt: f64,
}

impl Default for DirectConfig {
    fn default() -> Self {
        Self {
            ee_vel: 0.1,
            position_tolerance: 0.002,
            joint_limit_margin: 2.0,
            timeout: 10.0,
            dt: CONTROL_DT,
        }
    }
}

impl DirectConfig {
    pub fn validate(&self) -> Result<(), ControlError> {
        let ok = self.ee_vel > 0.0 && self.position_tolerance > 0.0 && self.joint_limit_margin >= 0.0 && self.timeout > 0.0 && self.dt > 0.0;
        if !ok {
            return Err(ControlError::InvalidConfig(format!("direct controller {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectState {
    pub goal: Vector3<f64>,
    pub elapsed: f64,
    pub status: ControllerStatus,
}

impl DirectState {
    pub fn new(goal: Vector3<f64>) -> Self {
        Self {
            goal,
            elapsed: 0.0,
            status: ControllerStatus::Running,
        }
    }
}

/// One servo tick towards the goal. The command never overshoots: on the
/// last tick its speed is cut to the remaining distance over `dt`.
pub fn direct_step(state: &DirectState, ee: &Vector3<f64>, cfg: &DirectConfig) -> (DirectState, Vector3<f64>) {
    let mut next = *state;
    if state.status.is_terminal() {
        return (next, Vector3::zeros());
    }
    let err = state.goal - ee;
    let remaining = err.norm();
    if remaining <= cfg.position_tolerance {
        next.status = ControllerStatus::Success;
        return (next, Vector3::zeros());
    }
    next.elapsed += cfg.dt;
    if next.elapsed > cfg.timeout {
        next.status = ControllerStatus::FailTimeout;
        return (next, Vector3::zeros());
    }
    let speed = cfg.ee_vel.min(remaining / cfg.dt);
    (next, err / remaining * speed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GuardDecision {
    Ok,
    StopFailure,
    /// Send the negated previous command for one tick.
    ReverseOneStep,
}

/// Over-limit recovery takes precedence over the margin stop.
pub fn joint_limit_guard(joints: &[f64; 6], limits: &[(f64, f64); 6], margin: f64) -> GuardDecision {
    let over = joints.iter().zip(limits).any(|(j, (lo, hi))| j < lo || j > hi);
    if over {
        return GuardDecision::ReverseOneStep;
    }
    let near = joints.iter().zip(limits).any(|(j, (lo, hi))| j - lo < margin || hi - j < margin);
    if near {
        GuardDecision::StopFailure
    } else {
        GuardDecision::Ok
    }
}
