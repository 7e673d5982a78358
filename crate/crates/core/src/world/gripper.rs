use serde::{Deserialize, Serialize};

use super::scenario::{Fruit, NearObstacle};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GripperKind {
    Soft,
    ParallelHorizontal,
    ParallelVertical,
}

impl GripperKind {
    pub fn has_feedback(self) -> bool {
        !matches!(self, GripperKind::Soft)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            GripperKind::Soft => "soft",
            GripperKind::ParallelHorizontal => "parallel_horizontal",
            GripperKind::ParallelVertical => "parallel_vertical",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GripperState {
    Open,
    Closed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackFlag {
    Grasped,
    Empty,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GripperCommand {
    Open,
    Close,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GripperModel {
    pub kind: GripperKind,
    pub state: GripperState,
    pub feedback_flag: FeedbackFlag,
    /// Width at which a parallel close stops without contact, meters.
    pub min_close_width: f64,
    pub torque_limit: f64,
}

impl GripperModel {
    pub fn new(kind: GripperKind) -> Self {
        Self {
            kind,
            state: GripperState::Open,
            feedback_flag: if kind.has_feedback() { FeedbackFlag::Empty } else { FeedbackFlag::None },
            min_close_width: 0.02,
            torque_limit: 1.0,
        }
    }

    /// Sets the closing width limit from the tracked fruit diameter.
    pub fn with_min_close_width_from_diameter(mut self, diameter: f64, fraction: f64) -> Self {
        self.min_close_width = diameter * fraction;
        self
    }

    fn obstacle_between_fingers(&self, fruit: &Fruit) -> bool {
        matches!(
            (self.kind, fruit.near_obstacle),
            (GripperKind::ParallelHorizontal, NearObstacle::Side) | (GripperKind::ParallelVertical, NearObstacle::AboveBelow)
        )
    }
}

/// Opens or closes the gripper around whatever is in the cup.
///
/// A parallel close runs until it hits something wider than the width limit
/// (torque stop, `grasped`) or reaches the limit (`empty`). Obstacles caught
/// between finger and fruit also register as contact. The soft gripper is
/// open loop and never reports feedback.
pub fn actuate_gripper(g: &GripperModel, cmd: GripperCommand, fruit_in_cup: Option<&Fruit>) -> GripperModel {
    let mut next = *g;
    match cmd {
        GripperCommand::Open => {
            next.state = GripperState::Open;
            next.feedback_flag = if g.kind.has_feedback() { FeedbackFlag::Empty } else { FeedbackFlag::None };
        }
        GripperCommand::Close => {
            next.state = GripperState::Closed;
            next.feedback_flag = if !g.kind.has_feedback() {
                FeedbackFlag::None
            } else {
                let contact = fruit_in_cup
                    .map(|f| f.diameter >= g.min_close_width || g.obstacle_between_fingers(f))
                    .unwrap_or(false);
                if contact {
                    FeedbackFlag::Grasped
                } else {
                    FeedbackFlag::Empty
                }
            };
        }
    }
    next
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::Hsv;
    use crate::world::scenario::StemMode;
    use nalgebra::Vector3;

    fn plum(d: f64, near: NearObstacle) -> Fruit {
        Fruit {
            id: 0,
            position: Vector3::zeros(),
            diameter: d,
            stem_mode: StemMode::Abscission,
            near_obstacle: near,
            color: Hsv::default(),
        }
    }

    #[test]
    fn parallel_close_on_nothing_is_empty() {
        let g = GripperModel::new(GripperKind::ParallelVertical);
        let c = actuate_gripper(&g, GripperCommand::Close, None);
        assert_eq!(c.state, GripperState::Closed);
        assert_eq!(c.feedback_flag, FeedbackFlag::Empty);
    }

    #[test]
    fn parallel_close_on_fruit_is_grasped() {
        let g = GripperModel::new(GripperKind::ParallelHorizontal);
        let f = plum(0.05, NearObstacle::None);
        assert_eq!(actuate_gripper(&g, GripperCommand::Close, Some(&f)).feedback_flag, FeedbackFlag::Grasped);
        // fruit narrower than the width limit slips through
        let tiny = plum(0.01, NearObstacle::None);
        assert_eq!(actuate_gripper(&g, GripperCommand::Close, Some(&tiny)).feedback_flag, FeedbackFlag::Empty);
        // but an obstacle beside it stops the fingers
        let tiny_side = plum(0.01, NearObstacle::Side);
        assert_eq!(actuate_gripper(&g, GripperCommand::Close, Some(&tiny_side)).feedback_flag, FeedbackFlag::Grasped);
    }

    #[test]
    fn soft_is_open_loop() {
        let g = GripperModel::new(GripperKind::Soft);
        let c = actuate_gripper(&g, GripperCommand::Close, Some(&plum(0.05, NearObstacle::None)));
        assert_eq!(c.state, GripperState::Closed);
        assert_eq!(c.feedback_flag, FeedbackFlag::None);
        let c = actuate_gripper(&g, GripperCommand::Close, None);
        assert_eq!(c.feedback_flag, FeedbackFlag::None);
    }

    #[test]
    fn close_then_open() {
        for kind in [GripperKind::Soft, GripperKind::ParallelHorizontal] {
            let g = GripperModel::new(kind);
            let c = actuate_gripper(&g, GripperCommand::Close, None);
            let o = actuate_gripper(&c, GripperCommand::Open, None);
            assert_eq!(o.state, GripperState::Open);
        }
    }

    #[test]
    fn width_limit_from_diameter() {
        let g = GripperModel::new(GripperKind::ParallelVertical).with_min_close_width_from_diameter(0.05, 0.8);
        assert!((g.min_close_width - 0.04).abs() < 1e-12);
        let f = plum(0.035, NearObstacle::None);
        assert_eq!(actuate_gripper(&g, GripperCommand::Close, Some(&f)).feedback_flag, FeedbackFlag::Empty);
    }
}
