use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::tracking::TrackSnapshot;

use super::PlanningError;

/// Axis-aligned pick window. `extents` are full edge lengths along world
/// `x` (row), `y` (height) and `z` (depth from the trellis).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoIBox {
    pub center: Vector3<f64>,
    pub extents: Vector3<f64>,
}

impl RoIBox {
    pub const DEFAULT_EXTENTS: [f64; 3] = [0.5, 0.5, 0.8];

    pub fn new(center: Vector3<f64>, extents: Vector3<f64>) -> Result<Self, PlanningError> {
        if !extents.iter().all(|e| *e > 0.0 && e.is_finite()) || !center.iter().all(|c| c.is_finite()) {
            return Err(PlanningError::InvalidConfig(format!("RoI extents {extents:?}")));
        }
        Ok(Self { center, extents })
    }

    pub fn with_default_extents(center: Vector3<f64>) -> Self {
        Self {
            center,
            extents: Vector3::from(Self::DEFAULT_EXTENTS),
        }
    }

    pub fn min(&self) -> Vector3<f64> {
        self.center - self.extents * 0.5
    }

    pub fn max(&self) -> Vector3<f64> {
        self.center + self.extents * 0.5
    }

    /// Faces are inside.
    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        let (lo, hi) = (self.min(), self.max());
        (0..3).all(|i| lo[i] <= p[i] && p[i] <= hi[i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReachabilitySphere {
    pub center: Vector3<f64>,
    pub radius: f64,
}

impl ReachabilitySphere {
    pub fn new(center: Vector3<f64>, radius: f64) -> Result<Self, PlanningError> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(PlanningError::InvalidConfig(format!("reach radius {radius}")));
        }
        Ok(Self { center, radius })
    }

    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        (p - self.center).norm() <= self.radius
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetTag {
    InRoi,
    InWorkspace,
    Outside,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaggedTarget {
    pub id: u64,
    pub position: Vector3<f64>,
    pub tag: TargetTag,
}

pub fn filter_targets(tracks: &[TrackSnapshot], roi: &RoIBox, sphere: &ReachabilitySphere) -> Vec<TaggedTarget> {
    tracks
        .iter()
        .map(|t| TaggedTarget {
            id: t.id,
            position: t.position,
            tag: if roi.contains(&t.position) {
                TargetTag::InRoi
            } else if sphere.contains(&t.position) {
                TargetTag::InWorkspace
            } else {
                TargetTag::Outside
            },
        })
        .collect()
}

/// RoI targets from highest to lowest, skipping the strip of width
/// `overlap` at the leading edge of the previous stop's window.
pub fn order_targets(tagged: &[TaggedTarget], prev_roi: Option<&RoIBox>, overlap: f64) -> Vec<TaggedTarget> {
    let mut out: Vec<TaggedTarget> = tagged
        .iter()
        .filter(|t| t.tag == TargetTag::InRoi)
        .filter(|t| match prev_roi {
            Some(prev) => {
                let hi = prev.max().x;
                !(hi - overlap <= t.position.x && t.position.x <= hi)
            }
            None => true,
        })
        .copied()
        .collect();
    out.sort_by(|a, b| b.position.y.total_cmp(&a.position.y).then(a.id.cmp(&b.id)));
    out
}

/// The target projecting furthest along the drop-to-home direction.
pub fn first_target_hint(queue: &[TaggedTarget], drop: &Vector3<f64>, home: &Vector3<f64>) -> Option<u64> {
    let axis = home - drop;
    let len = axis.norm();
    if len == 0.0 {
        return None;
    }
    let axis = axis / len;
    queue
        .iter()
        .map(|t| ((t.position - drop).dot(&axis), t.id))
        .max_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1)))
        .map(|(_, id)| id)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn snap(id: u64, x: f64, y: f64, z: f64) -> TrackSnapshot {
        TrackSnapshot {
            id,
            position: Vector3::new(x, y, z),
            trace_p: 0.0,
            misses: 0,
        }
    }

    fn roi() -> RoIBox {
        RoIBox::with_default_extents(Vector3::new(0.0, 1.5, 0.0))
    }

    fn sphere() -> ReachabilitySphere {
        ReachabilitySphere::new(Vector3::new(0.0, 1.2, 0.8), 1.0).unwrap()
    }

    #[test]
    fn tagging() {
        let tracks = [snap(0, 0.0, 1.5, 0.0), snap(1, 0.251, 1.5, 0.0), snap(2, 0.25, 1.5, 0.0), snap(3, 5.0, 0.0, 0.0)];
        let tags: Vec<TargetTag> = filter_targets(&tracks, &roi(), &sphere()).iter().map(|t| t.tag).collect();
        assert_eq!(tags, vec![TargetTag::InRoi, TargetTag::InWorkspace, TargetTag::InRoi, TargetTag::Outside]);
    }

    #[test]
    fn ordering_high_to_low() {
        let tracks = [snap(0, 0.0, 1.4, 0.0), snap(1, 0.0, 1.7, 0.0), snap(2, 0.1, 1.3, 0.0), snap(3, 0.0, 1.0, 0.0)];
        let q = order_targets(&filter_targets(&tracks, &roi(), &sphere()), None, 0.1);
        let heights: Vec<f64> = q.iter().map(|t| t.position.y).collect();
        assert_eq!(heights, vec![1.7, 1.4, 1.3]);
        assert!(order_targets(&[], None, 0.1).is_empty());
    }

    #[test]
    fn ties_by_id() {
        let tracks = [snap(5, 0.0, 1.5, 0.0), snap(2, 0.1, 1.5, 0.0)];
        let q = order_targets(&filter_targets(&tracks, &roi(), &sphere()), None, 0.1);
        assert_eq!(q.iter().map(|t| t.id).collect::<Vec<_>>(), vec![2, 5]);
    }

    #[test]
    fn overlap_band_excluded() {
        let prev = roi();
        let cur = RoIBox::with_default_extents(Vector3::new(0.4, 1.5, 0.0));
        let tracks = [snap(0, 0.2, 1.5, 0.0), snap(1, 0.3, 1.5, 0.0), snap(2, 0.15, 1.6, 0.0)];
        let q = order_targets(&filter_targets(&tracks, &cur, &sphere()), Some(&prev), 0.1);
        assert_eq!(q.iter().map(|t| t.id).collect::<Vec<_>>(), vec![1]);
    }

    #[test]
    fn hint_is_argmax_projection() {
        let drop = Vector3::new(0.0, 1.0, 0.5);
        let home = Vector3::new(1.0, 1.0, 0.5);
        let tag = |id, x| TaggedTarget {
            id,
            position: Vector3::new(x, 1.5, 0.0),
            tag: TargetTag::InRoi,
        };
        assert_eq!(first_target_hint(&[tag(3, 0.1)], &drop, &home), Some(3));
        assert_eq!(first_target_hint(&[tag(0, 0.1), tag(1, 0.3)], &drop, &home), Some(1));
        assert_eq!(first_target_hint(&[tag(0, 0.1)], &drop, &drop), None);
        assert_eq!(first_target_hint(&[], &drop, &home), None);
    }

    #[test]
    fn invalid_regions() {
        assert!(RoIBox::new(Vector3::zeros(), Vector3::new(0.5, 0.0, 0.8)).is_err());
        assert!(ReachabilitySphere::new(Vector3::zeros(), -1.0).is_err());
    }

    proptest::proptest! {
        #[test]
        fn queue_is_sorted(ys in proptest::collection::vec(1.25f64..1.75, 0..30)) {
            let tracks: Vec<TrackSnapshot> = ys.iter().enumerate().map(|(i, y)| snap(i as u64, 0.0, *y, 0.0)).collect();
            let q = order_targets(&filter_targets(&tracks, &roi(), &sphere()), None, 0.1);
            proptest::prop_assert_eq!(q.len(), tracks.len());
            for w in q.windows(2) {
                proptest::prop_assert!(w[0].position.y >= w[1].position.y);
            }
        }
    }
}
