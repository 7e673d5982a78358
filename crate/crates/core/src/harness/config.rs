use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::control::{DirectConfig, IbvsConfig};
use crate::geometry::{CameraIntrinsics, RigidTransform};
use crate::perception::PerceptionConfig;
use crate::planning::{ObstaclePlanes, PoseSet};
use crate::tracking::NoiseConfig;
use crate::world::{GripperKind, JointProxyMap, Motion, OutcomeModel, RenderConfig, ScenarioConfig};

use super::HarnessError;

/// Full description of one simulated run. Every field has a default, so a
/// config file only needs the values it changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    pub scenario: ScenarioConfig,
    pub gripper: GripperKind,
    pub motion: Motion,
    pub ibvs_enabled: bool,
    pub noise: NoiseConfig,
    pub ibvs: IbvsConfig,
    pub direct: DirectConfig,
    pub perception: PerceptionConfig,
    pub render: RenderConfig,
    pub outcome: OutcomeModel,
    pub planes: ObstaclePlanes,
    pub poses: PoseSet,
    pub intrinsics: CameraIntrinsics,
    /// Camera pose in the tool frame.
    pub hand_eye: RigidTransform,
    pub joint_proxy: JointProxyMap,
    /// RoI centre relative to the platform origin.
    pub roi_center: [f64; 3],
    pub roi_extents: [f64; 3],
    /// Reachability sphere centre relative to the platform origin.
    pub reach_center: [f64; 3],
    pub reach_radius: f64,
    /// Horizontal overlap between consecutive platform stops, meters.
    pub roi_overlap: f64,
    /// Tracks this close to an already attempted target are skipped.
    pub attempt_exclusion_radius: f64,
    /// A true fruit this close to the end effector sits in the gripper cup.
    pub capture_radius: f64,
    /// Gross-motion speed along planned paths, m/s.
    pub gross_speed: f64,
    /// Arm speed cap, m/s.
    pub ee_velocity_cap: f64,
    /// Durations of precomputed moves and gripper actuation, ticks.
    pub known_move_ticks: u32,
    pub gripper_ticks: u32,
    /// Stationary frames collected at the look pose before selecting.
    pub look_settle_ticks: u32,
    /// Per-plan failure probability standing in for planner timeouts.
    pub plan_failure_probability: f64,
    pub max_sim_time: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            scenario: ScenarioConfig::default(),
            gripper: GripperKind::Soft,
            motion: Motion::Complex,
            ibvs_enabled: false,
            noise: NoiseConfig::default(),
            ibvs: IbvsConfig::default(),
            direct: DirectConfig::default(),
            perception: PerceptionConfig::default(),
            render: RenderConfig::default(),
            outcome: OutcomeModel::default(),
            planes: ObstaclePlanes::default(),
            poses: PoseSet::default(),
            intrinsics: CameraIntrinsics::downscaled_default(),
            hand_eye: RigidTransform::from_translation(Vector3::new(0.0, 0.0, -0.125)),
            joint_proxy: JointProxyMap::default(),
            roi_center: [0.0, 1.5, 0.0],
            roi_extents: [0.5, 0.5, 0.8],
            reach_center: [0.0, 1.2, 0.8],
            reach_radius: 1.0,
            roi_overlap: 0.1,
            attempt_exclusion_radius: 0.05,
            capture_radius: 0.03,
            gross_speed: 0.5,
            ee_velocity_cap: 1.0,
            known_move_ticks: 15,
            gripper_ticks: 8,
            look_settle_ticks: 15,
            plan_failure_probability: 0.0,
            max_sim_time: 900.0,
        }
    }
}

impl RunConfig {
    pub fn from_json_str(s: &str) -> Result<Self, HarnessError> {
        let cfg: RunConfig = serde_json::from_str(s).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    /// Platform advance between stops.
    pub fn platform_step(&self) -> f64 {
        self.roi_extents[0] - self.roi_overlap
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let cfg_err = |e: String| HarnessError::Config(e);
        self.scenario.validate().map_err(|e| cfg_err(e.to_string()))?;
        self.noise.validate().map_err(|e| cfg_err(e.to_string()))?;
        self.ibvs.validate().map_err(|e| cfg_err(e.to_string()))?;
        self.direct.validate().map_err(|e| cfg_err(e.to_string()))?;
        self.perception.validate().map_err(|e| cfg_err(e.to_string()))?;
        self.outcome.validate().map_err(|e| cfg_err(e.to_string()))?;
        self.planes.validate().map_err(|e| cfg_err(e.to_string()))?;
        if self.outcome.entry(self.gripper, self.motion).is_none() {
            return Err(cfg_err(format!(
                "no outcome distribution for {} gripper with {} motion",
                self.gripper.as_str(),
                self.motion.as_str()
            )));
        }
        if !self.roi_extents.iter().all(|e| *e > 0.0) || !(self.reach_radius > 0.0) {
            return Err(cfg_err("RoI extents and reach radius must be positive".into()));
        }
        if !(self.roi_overlap >= 0.0 && self.platform_step() > 0.0) {
            return Err(cfg_err(format!(
                "RoI overlap {} must be non-negative and below the RoI width {}",
                self.roi_overlap, self.roi_extents[0]
            )));
        }
        let positive = [
            ("attempt_exclusion_radius", self.attempt_exclusion_radius),
            ("capture_radius", self.capture_radius),
            ("gross_speed", self.gross_speed),
            ("ee_velocity_cap", self.ee_velocity_cap),
            ("max_sim_time", self.max_sim_time),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(cfg_err(format!("{name} = {v} must be positive")));
            }
        }
        if self.gross_speed > self.ee_velocity_cap || self.direct.ee_vel > self.ee_velocity_cap || self.ibvs.ee_vel > self.ee_velocity_cap {
            return Err(cfg_err("controller speeds exceed the arm velocity cap".into()));
        }
        if !(0.0..=1.0).contains(&self.plan_failure_probability) {
            return Err(cfg_err("plan_failure_probability must lie in [0, 1]".into()));
        }
        if self.known_move_ticks == 0 || self.gripper_ticks == 0 {
            return Err(cfg_err("move and gripper durations must be at least one tick".into()));
        }
        Ok(())
    }
}
