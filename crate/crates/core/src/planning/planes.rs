use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::geometry::Plane;

use super::PlanningError;

/// Which plane constrains a motion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotionPhase {
    /// Gross arm motion: the whole end effector stays behind the hard plane.
    Gross,
    /// Final approach: only the soft gripper zone may pass the soft plane.
    FinalApproach,
}

/// Virtual safety planes parallel to the trellis, offset along its outward
/// normal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObstaclePlanes {
    pub trellis_plane: Plane,
    pub hard_standoff: f64,
    pub soft_standoff: f64,
    /// Length of the compliant gripper zone ahead of the rigid body, meters.
    pub soft_zone_extent: f64,
}

impl ObstaclePlanes {
    pub fn new(trellis_plane: Plane, hard_standoff: f64, soft_standoff: f64, soft_zone_extent: f64) -> Result<Self, PlanningError> {
        let p = Self {
            trellis_plane,
            hard_standoff,
            soft_standoff,
            soft_zone_extent,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), PlanningError> {
        if !(self.soft_standoff >= 0.0 && self.hard_standoff > self.soft_standoff && self.soft_zone_extent >= 0.0) {
            return Err(PlanningError::InvalidConfig(format!(
                "obstacle planes need 0 <= soft ({}) < hard ({}) and soft zone >= 0 ({})",
                self.soft_standoff, self.hard_standoff, self.soft_zone_extent
            )));
        }
        Ok(())
    }

    pub fn outward_normal(&self) -> Vector3<f64> {
        *self.trellis_plane.normal()
    }

    pub fn hard_plane(&self) -> Plane {
        self.trellis_plane.offset(self.hard_standoff)
    }

    pub fn soft_plane(&self) -> Plane {
        self.trellis_plane.offset(self.soft_standoff)
    }

    /// Signed clearance of an end-effector position under `phase`;
    /// negative means the constraint is violated.
    pub fn clearance(&self, ee: &Vector3<f64>, phase: MotionPhase) -> f64 {
        match phase {
            MotionPhase::Gross => self.hard_plane().signed_distance(ee),
            MotionPhase::FinalApproach => {
                let rigid = ee + self.outward_normal() * self.soft_zone_extent;
                self.soft_plane().signed_distance(&rigid)
            }
        }
    }
}

impl Default for ObstaclePlanes {
    fn default() -> Self {
        Self {
            trellis_plane: Plane::new(Vector3::zeros(), Vector3::z()).expect("unit normal"),
            hard_standoff: 0.15,
            soft_standoff: 0.04,
            soft_zone_extent: 0.07,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clearance_by_phase() {
        let p = ObstaclePlanes::default();
        let ee = Vector3::new(0.0, 1.0, 0.10);
        assert!((p.clearance(&ee, MotionPhase::Gross) + 0.05).abs() < 1e-12);
        assert!((p.clearance(&ee, MotionPhase::FinalApproach) - 0.13).abs() < 1e-12);
        // at the trellis itself the rigid body still clears the soft plane
        assert!(p.clearance(&Vector3::zeros(), MotionPhase::FinalApproach) > 0.0);
    }

    #[test]
    fn rejects_inverted_planes() {
        let t = ObstaclePlanes::default().trellis_plane;
        assert!(ObstaclePlanes::new(t, 0.05, 0.1, 0.05).is_err());
        assert!(ObstaclePlanes::new(t, 0.15, 0.05, 0.05).is_ok());
    }
}
