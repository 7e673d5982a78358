//! Cartesian end-effector arm with a synthetic joint-proxy map.
//!
//! Orientation is fixed perpendicular to the trellis; only the end-effector
//! position moves. Joint angles are a linear function of displacement from a
//! reference position, which is enough to exercise joint-limit and
//! singularity guards.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::geometry::RigidTransform;
use crate::planning::{MotionPhase, ObstaclePlanes};

use super::WorldError;

/// Gripper frame rotation: tool `z` points into the trellis (world `-z`),
/// tool `y` points down.
pub fn tool_rotation() -> Matrix3<f64> {
    Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, -1.0))
}

/// Workspace sphere inside which proxy joint speeds are amplified.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingularityRegion {
    pub center: [f64; 3],
    pub radius: f64,
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct JointProxyMap {
    /// Degrees of joint motion per meter of end-effector motion.
    pub jacobian: [[f64; 3]; 6],
    pub reference_position: [f64; 3],
    pub reference_joints: [f64; 6],
    pub singularity: Option<SingularityRegion>,
}

impl Default for JointProxyMap {
    fn default() -> Self {
        Self {
            jacobian: [
                [45.0, 0.0, 10.0],
                [0.0, 60.0, 25.0],
                [10.0, 35.0, 80.0],
                [-20.0, 40.0, 0.0],
                [0.0, 0.0, 50.0],
                [30.0, -10.0, 0.0],
            ],
            reference_position: [0.0, 1.5, 0.6],
            reference_joints: [0.0, -90.0, 90.0, -90.0, -90.0, 0.0],
            singularity: None,
        }
    }
}

impl JointProxyMap {
    pub fn joints_at(&self, p: &Vector3<f64>) -> [f64; 6] {
        let d = p - Vector3::from(self.reference_position);
        std::array::from_fn(|i| {
            let row = self.jacobian[i];
            self.reference_joints[i] + row[0] * d.x + row[1] * d.y + row[2] * d.z
        })
    }

    /// Largest absolute proxy joint speed (deg/s) for ee velocity `v` at `p`.
    pub fn joint_speed(&self, p: &Vector3<f64>, v: &Vector3<f64>) -> f64 {
        let base = self
            .jacobian
            .iter()
            .map(|row| (row[0] * v.x + row[1] * v.y + row[2] * v.z).abs())
            .fold(0.0, f64::max);
        match self.singularity {
            Some(s) if (p - Vector3::from(s.center)).norm() <= s.radius => base * s.gain,
            _ => base,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmState {
    pub ee_pose: RigidTransform,
    pub joint_proxies: [f64; 6],
    pub joint_limits: [(f64, f64); 6],
    pub ee_velocity_cap: f64,
    pub proxy: JointProxyMap,
    /// Proxy joint speed produced by the last command, deg/s.
    pub joint_speed: f64,
}

pub const DEFAULT_JOINT_LIMITS: [(f64, f64); 6] = [
    (-360.0, 360.0),
    (-360.0, 360.0),
    (-180.0, 180.0),
    (-360.0, 360.0),
    (-360.0, 360.0),
    (-360.0, 360.0),
];

impl ArmState {
    pub fn at(position: Vector3<f64>, proxy: JointProxyMap, ee_velocity_cap: f64) -> Result<Self, WorldError> {
        if !(ee_velocity_cap > 0.0) || position.iter().any(|x| !x.is_finite()) {
            return Err(WorldError::InvalidConfig(format!(
                "arm needs a finite position and a positive velocity cap ({ee_velocity_cap})"
            )));
        }
        let joints = proxy.joints_at(&position);
        Ok(Self {
            ee_pose: RigidTransform::new(tool_rotation(), position).expect("tool rotation is proper"),
            joint_proxies: joints,
            joint_limits: DEFAULT_JOINT_LIMITS,
            ee_velocity_cap,
            proxy,
            joint_speed: 0.0,
        })
    }

    pub fn position(&self) -> Vector3<f64> {
        *self.ee_pose.translation()
    }

    /// Moves the end effector to `p` directly (used for known, precomputed
    /// paths).
    pub fn teleport(&mut self, p: Vector3<f64>) {
        self.ee_pose = self.ee_pose.with_translation(p);
        self.joint_proxies = self.proxy.joints_at(&p);
        self.joint_speed = 0.0;
    }
}

/// Reports from the plane guards during a commanded motion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum GuardEvent {
    /// Gross motion reached the hard plane; the arm stopped there.
    EmergencyStop { truncated_by: f64 },
    /// Final approach pressed the rigid body against the soft plane.
    SoftPlaneContact { truncated_by: f64 },
}

/// Integrates a world-frame velocity command for `dt` seconds under the
/// plane guard for `phase`.
pub fn apply_ee_velocity(
    arm: &ArmState,
    v: &Vector3<f64>,
    dt: f64,
    planes: &ObstaclePlanes,
    phase: MotionPhase,
) -> Result<(ArmState, Vec<GuardEvent>), WorldError> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(WorldError::InvalidCommand(format!("velocity {v:?}")));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(WorldError::InvalidCommand(format!("dt {dt}")));
    }
    let speed = v.norm();
    let v = if speed > arm.ee_velocity_cap { v * (arm.ee_velocity_cap / speed) } else { *v };
    let p0 = arm.position();
    let mut disp = v * dt;
    let mut events = Vec::new();

    let c0 = planes.clearance(&p0, phase);
    let c1 = planes.clearance(&(p0 + disp), phase);
    if c1 < 0.0 && c1 < c0 {
        // clearance is affine in position, so the crossing is linear in t
        let t = if c0 > 0.0 { c0 / (c0 - c1) } else { 0.0 };
        let lost = disp.norm() * (1.0 - t);
        disp *= t;
        events.push(match phase {
            MotionPhase::Gross => GuardEvent::EmergencyStop { truncated_by: lost },
            MotionPhase::FinalApproach => GuardEvent::SoftPlaneContact { truncated_by: lost },
        });
    }

    let mut next = arm.clone();
    let p1 = p0 + disp;
    next.ee_pose = arm.ee_pose.with_translation(p1);
    next.joint_proxies = arm.proxy.joints_at(&p1);
    next.joint_speed = arm.proxy.joint_speed(&p0, &(disp / dt));
    Ok((next, events))
}
