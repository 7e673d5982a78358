use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::planes::{MotionPhase, ObstaclePlanes};
use super::PlanningError;

/// Fixed arm poses, expressed relative to the platform origin, plus the
/// approach offset used for the dynamic poses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PoseSet {
    pub home: Vector3<f64>,
    pub drop: Vector3<f64>,
    pub look: Vector3<f64>,
    /// Distance of the approach pose from the fruit along the outward normal.
    pub approach_offset: f64,
}

impl Default for PoseSet {
    fn default() -> Self {
        Self {
            home: Vector3::new(0.0, 1.2, 0.7),
            drop: Vector3::new(0.35, 0.9, 0.6),
            look: Vector3::new(0.0, 1.5, 0.6),
            approach_offset: 0.15,
        }
    }
}

impl PoseSet {
    pub fn approach(&self, fruit: &Vector3<f64>, planes: &ObstaclePlanes) -> Vector3<f64> {
        fruit + planes.outward_normal() * self.approach_offset
    }

    /// The fixed poses shifted by the platform position.
    pub fn at_platform(&self, platform: &Vector3<f64>) -> Self {
        Self {
            home: self.home + platform,
            drop: self.drop + platform,
            look: self.look + platform,
            approach_offset: self.approach_offset,
        }
    }
}

/// Waypoint spacing of straight-line plans, meters.
pub const WAYPOINT_SPACING: f64 = 0.01;

/// Straight-line path from `from` to `to` with waypoints about every
/// centimeter; fails if any waypoint violates the plane for `phase`.
pub fn plan_straight(
    from: &Vector3<f64>,
    to: &Vector3<f64>,
    planes: &ObstaclePlanes,
    phase: MotionPhase,
) -> Result<Vec<Vector3<f64>>, PlanningError> {
    if !from.iter().chain(to.iter()).all(|x| x.is_finite()) {
        return Err(PlanningError::InvalidConfig("non-finite plan endpoint".into()));
    }
    let len = (to - from).norm();
    let n = (len / WAYPOINT_SPACING).ceil() as usize;
    let path: Vec<Vector3<f64>> = if n == 0 {
        vec![*to]
    } else {
        (0..=n).map(|i| if i == n { *to } else { from.lerp(to, i as f64 / n as f64) }).collect()
    };
    for (i, w) in path.iter().enumerate() {
        let c = planes.clearance(w, phase);
        if c < 0.0 {
            return Err(PlanningError::PlanFailure { waypoint: i, clearance: c });
        }
    }
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_path() {
        let p = Vector3::new(0.0, 1.5, 0.5);
        let path = plan_straight(&p, &p, &ObstaclePlanes::default(), MotionPhase::Gross).unwrap();
        assert_eq!(path, vec![p]);
    }

    #[test]
    fn goal_beyond_hard_plane_fails() {
        let from = Vector3::new(0.0, 1.5, 0.6);
        let to = Vector3::new(0.0, 1.5, 0.1);
        assert!(matches!(
            plan_straight(&from, &to, &ObstaclePlanes::default(), MotionPhase::Gross),
            Err(PlanningError::PlanFailure { .. })
        ));
    }

    #[test]
    fn boundary_is_inclusive() {
        let planes = ObstaclePlanes::default();
        let poses = PoseSet::default();
        let fruit = Vector3::new(0.1, 1.4, 0.0);
        let approach = poses.approach(&fruit, &planes);
        assert_eq!(planes.clearance(&approach, MotionPhase::Gross), 0.0);
        let path = plan_straight(&poses.look, &approach, &planes, MotionPhase::Gross).unwrap();
        assert_eq!(*path.last().unwrap(), approach);
        assert_eq!(path[0], poses.look);
        for w in path.windows(2) {
            assert!((w[1] - w[0]).norm() <= WAYPOINT_SPACING + 1e-12);
        }
    }

    #[test]
    fn approach_clears_hard_plane_for_canopy_fruit() {
        let planes = ObstaclePlanes::default();
        for z in [0.0, 0.013, 0.07, 0.1199] {
            let a = PoseSet::default().approach(&Vector3::new(0.0, 1.5, z), &planes);
            assert!(planes.clearance(&a, MotionPhase::Gross) >= 0.0);
        }
    }
}
