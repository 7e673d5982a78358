use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::perception::Detection2D;

use super::{ControlError, ControllerStatus, CONTROL_DT};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IbvsConfig {
    /// (m/s) per pixel.
    pub g_u: f64,
    pub g_v: f64,
    pub ee_vel: f64,
    /// Success once the tracked box's mean dimension reaches this, pixels.
    pub size_threshold: f64,
    pub assoc_dist_2d: f64,
    pub miss_threshold: u32,
    pub timeout: f64,
    pub traversal_limit: f64,
    /// Proxy joint speed treated as a singularity, deg/s.
    pub singularity_joint_speed: f64,
    pub bbox_min: f64,
    pub bbox_max: f64,
    pub dt: f64,
}

impl Default for IbvsConfig {
    fn default() -> Self {
        Self {
            g_u: 0.001,
            g_v: 0.001,
            ee_vel: 0.1,
            size_threshold: 120.0,
            assoc_dist_2d: 30.0,
            miss_threshold: 15,
            timeout: 10.0,
            traversal_limit: 0.3,
            singularity_joint_speed: 60.0,
            bbox_min: 4.0,
            bbox_max: 200.0,
            dt: CONTROL_DT,
        }
    }
}

impl IbvsConfig {
    pub fn validate(&self) -> Result<(), ControlError> {
        let pos = [
            self.g_u,
            self.g_v,
            self.ee_vel,
            self.size_threshold,
            self.assoc_dist_2d,
            self.timeout,
            self.traversal_limit,
            self.singularity_joint_speed,
            self.bbox_min,
            self.bbox_max,
            self.dt,
        ];
        if !pos.iter().all(|x| *x > 0.0 && x.is_finite()) || self.miss_threshold == 0 || self.bbox_min > self.bbox_max {
            return Err(ControlError::InvalidConfig(format!("ibvs controller {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IbvsState {
    /// Image point the target is driven to.
    pub reference: (f64, f64),
    /// Last associated detection centroid.
    pub tracked_px: (f64, f64),
    pub prev_cmd: Vector3<f64>,
    pub miss_count: u32,
    pub elapsed: f64,
    pub path_length: f64,
    pub status: ControllerStatus,
}

impl IbvsState {
    /// Locks onto the detection nearest `hint`, or `hint` itself when the
    /// frame has none.
    pub fn start(reference: (f64, f64), hint: (f64, f64), detections: &[Detection2D]) -> Self {
        let tracked_px = nearest(hint, detections).map(|(_, d)| d.centroid).unwrap_or(hint);
        Self {
            reference,
            tracked_px,
            prev_cmd: Vector3::zeros(),
            miss_count: 0,
            elapsed: 0.0,
            path_length: 0.0,
            status: ControllerStatus::Running,
        }
    }
}

fn nearest(p: (f64, f64), detections: &[Detection2D]) -> Option<(f64, &Detection2D)> {
    detections
        .iter()
        .map(|d| (((d.centroid.0 - p.0).powi(2) + (d.centroid.1 - p.1).powi(2)).sqrt(), d))
        .min_by(|a, b| a.0.total_cmp(&b.0))
}

/// The pixel-error velocity law in the camera optical frame. Returns zero
/// when the composed vector vanishes.
pub fn ibvs_velocity(du: f64, dv: f64, cfg: &IbvsConfig) -> Vector3<f64> {
    let u_vel = du * cfg.g_u;
    let v_vel = dv * cfg.g_v;
    let d_vel = cfg.ee_vel - u_vel.abs().max(v_vel.abs());
    let v = Vector3::new(u_vel, v_vel, d_vel);
    let n = v.norm();
    if n == 0.0 {
        Vector3::zeros()
    } else {
        v * (cfg.ee_vel / n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IbvsStep {
    pub state: IbvsState,
    /// Camera-frame velocity, m/s.
    pub cmd: Vector3<f64>,
    pub status: ControllerStatus,
    pub delta: Option<(f64, f64)>,
    pub bbox_dim: Option<f64>,
}

/// One controller tick on the current hand-camera detections.
/// `joint_speed` is the proxy joint speed produced by the previous command.
pub fn ibvs_step(state: &IbvsState, detections: &[Detection2D], joint_speed: f64, cfg: &IbvsConfig) -> IbvsStep {
    let mut s = *state;
    let finish = |mut s: IbvsState, status: ControllerStatus, delta, bbox_dim| {
        s.status = status;
        IbvsStep {
            state: s,
            cmd: Vector3::zeros(),
            status,
            delta,
            bbox_dim,
        }
    };
    if state.status.is_terminal() {
        return finish(s, state.status, None, None);
    }
    if joint_speed > cfg.singularity_joint_speed {
        return finish(s, ControllerStatus::FailSingularity, None, None);
    }
    s.elapsed += cfg.dt;
    if s.elapsed > cfg.timeout {
        return finish(s, ControllerStatus::FailTimeout, None, None);
    }

    let (cmd, delta, bbox_dim) = match nearest(s.tracked_px, detections).filter(|(d, _)| *d <= cfg.assoc_dist_2d) {
        None => {
            s.miss_count += 1;
            if s.miss_count > cfg.miss_threshold {
                return finish(s, ControllerStatus::FailMissedFrames, None, None);
            }
            (s.prev_cmd, None, None)
        }
        Some((_, det)) => {
            s.miss_count = 0;
            s.tracked_px = det.centroid;
            let dim = det.bbox.mean_dim();
            let du = det.centroid.0 - s.reference.0;
            let dv = det.centroid.1 - s.reference.1;
            if dim < cfg.bbox_min || dim > cfg.bbox_max {
                return finish(s, ControllerStatus::FailBboxSize, Some((du, dv)), Some(dim));
            }
            if dim >= cfg.size_threshold {
                return finish(s, ControllerStatus::Success, Some((du, dv)), Some(dim));
            }
            (ibvs_velocity(du, dv, cfg), Some((du, dv)), Some(dim))
        }
    };

    s.path_length += cmd.norm() * cfg.dt;
    if s.path_length > cfg.traversal_limit {
        return finish(s, ControllerStatus::FailTraversal, delta, bbox_dim);
    }
    s.prev_cmd = cmd;
    IbvsStep {
        state: s,
        cmd,
        status: ControllerStatus::Running,
        delta,
        bbox_dim,
    }
}
