//! Patch-masked depth extraction and 3D fruit observations.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::geometry::{deproject, CameraModel, GeometryError};
use crate::raster::{DepthRaster, HsvRaster};

use super::{Detection2D, HsvThresholds, PerceptionError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectionReason {
    DepthRange,
    SizeRange,
    MotionGate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FruitObservation {
    pub position: Vector3<f64>,
    /// Mean box dimension projected to the measured depth, meters.
    pub size: f64,
    /// Camera-frame depth used for the measurement.
    pub depth: f64,
    pub valid: bool,
    pub rejection_reason: Option<RejectionReason>,
}

impl FruitObservation {
    /// A valid observation at `position`, for feeding the tracker directly.
    pub fn at(position: Vector3<f64>, size: f64) -> Self {
        Self {
            position,
            size,
            depth: f64::NAN,
            valid: true,
            rejection_reason: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ValidityConfig {
    pub depth_min: f64,
    pub depth_max: f64,
    pub size_min: f64,
    pub size_max: f64,
}

impl Default for ValidityConfig {
    fn default() -> Self {
        Self {
            depth_min: 0.2,
            depth_max: 1.6,
            size_min: 0.02,
            size_max: 0.12,
        }
    }
}

impl ValidityConfig {
    pub fn validate(&self) -> Result<(), PerceptionError> {
        if !(0.0 <= self.depth_min && self.depth_min <= self.depth_max && 0.0 <= self.size_min && self.size_min <= self.size_max) {
            return Err(PerceptionError::InvalidConfig(format!("validity ranges {self:?}")));
        }
        Ok(())
    }
}

/// Median of `values`; even counts average the two middle values.
pub(crate) fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

/// Median depth over the pixels whose colour passes `t`, falling back to the
/// depth at the patch centroid when none do.
pub fn extract_patch_depth(depth_patch: &DepthRaster, hsv_patch: &HsvRaster, t: &HsvThresholds) -> Result<f64, PerceptionError> {
    if depth_patch.is_empty() || !depth_patch.same_shape(hsv_patch) {
        return Err(PerceptionError::InvalidPatch {
            depth: (depth_patch.width(), depth_patch.height()),
            color: (hsv_patch.width(), hsv_patch.height()),
        });
    }
    let mut masked: Vec<f64> = depth_patch
        .pixels()
        .iter()
        .zip(hsv_patch.pixels())
        .filter(|(_, c)| t.passes(c))
        .map(|(d, _)| *d)
        .collect();
    Ok(median(&mut masked).unwrap_or_else(|| *depth_patch.get(depth_patch.width() / 2, depth_patch.height() / 2)))
}

/// Lifts a detection at depth `d` into a world-frame observation and applies
/// the depth and size range checks.
pub fn deproject_detection(
    det: &Detection2D,
    d: f64,
    cam: &CameraModel,
    checks: &ValidityConfig,
) -> Result<FruitObservation, GeometryError> {
    let (u, v) = det.centroid;
    let position = deproject(u, v, d, cam)?;
    let size = det.bbox.mean_dim() * d / cam.intrinsics.mean_focal();
    let rejection_reason = if !(checks.depth_min..=checks.depth_max).contains(&d) {
        Some(RejectionReason::DepthRange)
    } else if !(checks.size_min..=checks.size_max).contains(&size) {
        Some(RejectionReason::SizeRange)
    } else {
        None
    };
    Ok(FruitObservation {
        position,
        size,
        depth: d,
        valid: rejection_reason.is_none(),
        rejection_reason,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MotionGateConfig {
    pub v_lin_max: f64,
    pub v_ang_max: f64,
}

impl Default for MotionGateConfig {
    fn default() -> Self {
        Self {
            v_lin_max: 0.05,
            v_ang_max: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateDecision {
    Pass,
    Drop,
}

/// Drops frames taken while the camera moves faster than the gate; the
/// thresholds themselves pass.
pub fn motion_gate(linear_vel: f64, angular_vel: f64, gate: &MotionGateConfig) -> GateDecision {
    if linear_vel > gate.v_lin_max || angular_vel > gate.v_ang_max {
        GateDecision::Drop
    } else {
        GateDecision::Pass
    }
}

/// Crops the detection's box from full-frame rasters, extracts its depth
/// and deprojects it.
pub fn observe_detection(
    det: &Detection2D,
    color: &HsvRaster,
    depth: &DepthRaster,
    patch_thresholds: &HsvThresholds,
    cam: &CameraModel,
    checks: &ValidityConfig,
) -> Result<FruitObservation, PerceptionError> {
    let (c0, r0, cols, rows) = det.bbox.pixel_window(depth.width(), depth.height());
    let d = extract_patch_depth(&depth.crop(c0, r0, cols, rows), &color.crop(c0, r0, cols, rows), patch_thresholds)?;
    Ok(deproject_detection(det, d, cam, checks)?)
}
