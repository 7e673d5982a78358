//! HSV blob detection, patch-masked depth, 3D observations, motion gating
//! and detector scoring.

mod boxes;
mod depth;
mod hsv;
mod metrics;
mod synthetic;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::GeometryError;

pub use boxes::BBox;
pub use depth::{
    deproject_detection, extract_patch_depth, motion_gate, observe_detection, FruitObservation, GateDecision,
    MotionGateConfig, RejectionReason, ValidityConfig,
};
pub use hsv::{detect_hsv, Detection2D, DetectionSource, HsvThresholds};
pub use metrics::{
    evaluate_box_rows, evaluate_detections, read_box_rows, write_box_rows, write_metrics_csv, AssocRule, BoxRow,
    DetectionMetrics, METRICS_CSV_HEADER,
};
pub use synthetic::SyntheticDetector;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PerceptionError {
    #[error("invalid patch: depth {depth:?} and colour {color:?} must be equal and non-empty")]
    InvalidPatch { depth: (usize, usize), color: (usize, usize) },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("invalid perception config: {0}")]
    InvalidConfig(String),
    #[error("csv: {0}")]
    Csv(String),
}

/// Which detector produces 2D boxes.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DetectorKind {
    #[default]
    Hsv,
    Synthetic(SyntheticDetector),
}

impl DetectorKind {
    pub fn name(&self) -> &'static str {
        match self {
            DetectorKind::Hsv => "hsv",
            DetectorKind::Synthetic(_) => "synthetic",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PerceptionConfig {
    pub detector: DetectorKind,
    pub detection_thresholds: HsvThresholds,
    pub patch_thresholds: HsvThresholds,
    pub validity: ValidityConfig,
    pub motion_gate: MotionGateConfig,
    pub assoc_rule: AssocRule,
}

impl Default for PerceptionConfig {
    fn default() -> Self {
        Self {
            detector: DetectorKind::Hsv,
            detection_thresholds: HsvThresholds::plum(),
            patch_thresholds: HsvThresholds::plum_patch(),
            validity: ValidityConfig::default(),
            motion_gate: MotionGateConfig::default(),
            assoc_rule: AssocRule::default(),
        }
    }
}

impl PerceptionConfig {
    pub fn validate(&self) -> Result<(), PerceptionError> {
        self.detection_thresholds.validate()?;
        self.patch_thresholds.validate()?;
        self.validity.validate()?;
        if let DetectorKind::Synthetic(s) = &self.detector {
            s.validate()?;
        }
        if !(self.motion_gate.v_lin_max >= 0.0 && self.motion_gate.v_ang_max >= 0.0) {
            return Err(PerceptionError::InvalidConfig("motion gate thresholds must be non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.assoc_rule.min_overlap) {
            return Err(PerceptionError::InvalidConfig("association overlap must lie in [0, 1]".into()));
        }
        Ok(())
    }
}
