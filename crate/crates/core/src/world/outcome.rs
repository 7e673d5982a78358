//! Stochastic grasp-outcome model.
//!
//! Two layers: a positioning error above tolerance is a deterministic
//! bad-positioning failure; otherwise the category is drawn from the
//! configured per-(gripper, motion) categorical distribution. Defaults come
//! from field trial counts of straight and angled soft-gripper picks and the
//! success rates of the two parallel-gripper orientations.

use std::fmt;

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use super::gripper::GripperKind;
use super::WorldError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeCategory {
    Success,
    GripForceFailure,
    BadPositioningFailure,
    KnockedOffFailure,
    GripperFailure,
    OtherFailure,
}

impl OutcomeCategory {
    pub const ALL: [OutcomeCategory; 6] = [
        OutcomeCategory::Success,
        OutcomeCategory::GripForceFailure,
        OutcomeCategory::BadPositioningFailure,
        OutcomeCategory::KnockedOffFailure,
        OutcomeCategory::GripperFailure,
        OutcomeCategory::OtherFailure,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            OutcomeCategory::Success => "success",
            OutcomeCategory::GripForceFailure => "grip_force_failure",
            OutcomeCategory::BadPositioningFailure => "bad_positioning_failure",
            OutcomeCategory::KnockedOffFailure => "knocked_off_failure",
            OutcomeCategory::GripperFailure => "gripper_failure",
            OutcomeCategory::OtherFailure => "other_failure",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            OutcomeCategory::Success => "Success",
            OutcomeCategory::GripForceFailure => "Grip Force Failure",
            OutcomeCategory::BadPositioningFailure => "Bad Positioning Failure",
            OutcomeCategory::KnockedOffFailure => "Knocked Off Target Failure",
            OutcomeCategory::GripperFailure => "Gripper Failure",
            OutcomeCategory::OtherFailure => "Other Failure",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// Whether the fruit leaves the tree (harvested or on the ground).
    pub fn detaches_fruit(self) -> bool {
        matches!(self, OutcomeCategory::Success | OutcomeCategory::KnockedOffFailure)
    }
}

impl fmt::Display for OutcomeCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Motion {
    /// Straight in, straight out.
    Simple,
    /// Straight in, rotate, angled out.
    Complex,
}

impl Motion {
    pub fn as_str(self) -> &'static str {
        match self {
            Motion::Simple => "simple",
            Motion::Complex => "complex",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PickOutcome {
    pub category: OutcomeCategory,
    pub fruit_id: Option<u32>,
}

/// Relative weights per category; need not sum to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct CategoryWeights {
    pub success: f64,
    pub grip_force_failure: f64,
    pub bad_positioning_failure: f64,
    pub knocked_off_failure: f64,
    pub gripper_failure: f64,
    pub other_failure: f64,
}

impl CategoryWeights {
    pub fn as_array(&self) -> [f64; 6] {
        [
            self.success,
            self.grip_force_failure,
            self.bad_positioning_failure,
            self.knocked_off_failure,
            self.gripper_failure,
            self.other_failure,
        ]
    }

    pub fn probabilities(&self) -> [f64; 6] {
        let w = self.as_array();
        let total: f64 = w.iter().sum();
        w.map(|x| x / total)
    }

    pub fn only(category: OutcomeCategory) -> Self {
        let mut w = [0.0; 6];
        w[category.index()] = 1.0;
        Self::from_array(w)
    }

    pub fn from_array(w: [f64; 6]) -> Self {
        Self {
            success: w[0],
            grip_force_failure: w[1],
            bad_positioning_failure: w[2],
            knocked_off_failure: w[3],
            gripper_failure: w[4],
            other_failure: w[5],
        }
    }
}

/// What happens to the bad-positioning weight when the controller placed the
/// gripper within tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ResidualMode {
    /// Keep the full table, bad positioning included (positioning failures
    /// the simulator cannot see, such as fruit slipping through finger gaps).
    #[default]
    Full,
    /// Drop the bad-positioning weight and renormalize the rest.
    Renormalized,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeEntry {
    pub gripper: GripperKind,
    pub motion: Motion,
    pub weights: CategoryWeights,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutcomeModel {
    pub positioning_tolerance: f64,
    pub residual: ResidualMode,
    pub table: Vec<OutcomeEntry>,
}

impl Default for OutcomeModel {
    fn default() -> Self {
        // Trial counts: straight 4/7/6/1/0/2 of 20, angled 27/5/9/9/2/12 of 64.
        let soft_simple = CategoryWeights::from_array([4.0, 7.0, 6.0, 1.0, 0.0, 2.0]);
        let soft_complex = CategoryWeights::from_array([27.0, 5.0, 9.0, 9.0, 2.0, 12.0]);
        let parallel = |rate: f64| CategoryWeights {
            success: rate,
            other_failure: 1.0 - rate,
            ..Default::default()
        };
        Self {
            positioning_tolerance: 0.02,
            residual: ResidualMode::Full,
            table: vec![
                OutcomeEntry {
                    gripper: GripperKind::Soft,
                    motion: Motion::Simple,
                    weights: soft_simple,
                },
                OutcomeEntry {
                    gripper: GripperKind::Soft,
                    motion: Motion::Complex,
                    weights: soft_complex,
                },
                OutcomeEntry {
                    gripper: GripperKind::ParallelHorizontal,
                    motion: Motion::Simple,
                    weights: parallel(0.10),
                },
                OutcomeEntry {
                    gripper: GripperKind::ParallelVertical,
                    motion: Motion::Simple,
                    weights: parallel(0.30),
                },
            ],
        }
    }
}

impl OutcomeModel {
    /// Same model with every configured combination forced to `category`.
    pub fn forced(category: OutcomeCategory) -> Self {
        let mut m = Self::default();
        for e in &mut m.table {
            e.weights = CategoryWeights::only(category);
        }
        m
    }

    pub fn entry(&self, gripper: GripperKind, motion: Motion) -> Option<&OutcomeEntry> {
        self.table.iter().find(|e| e.gripper == gripper && e.motion == motion)
    }

    pub fn validate(&self) -> Result<(), WorldError> {
        if !(self.positioning_tolerance >= 0.0) {
            return Err(WorldError::InvalidConfig(format!(
                "positioning tolerance {}",
                self.positioning_tolerance
            )));
        }
        for e in &self.table {
            self.residual_weights(e)?;
        }
        Ok(())
    }

    fn residual_weights(&self, e: &OutcomeEntry) -> Result<[f64; 6], WorldError> {
        let mut w = e.weights.as_array();
        if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(WorldError::InvalidConfig(format!(
                "negative or non-finite outcome weights for {:?}/{:?}",
                e.gripper, e.motion
            )));
        }
        if self.residual == ResidualMode::Renormalized {
            w[OutcomeCategory::BadPositioningFailure.index()] = 0.0;
        }
        if w.iter().sum::<f64>() <= 0.0 {
            return Err(WorldError::InvalidConfig(format!(
                "outcome weights for {:?}/{:?} have no mass",
                e.gripper, e.motion
            )));
        }
        Ok(w)
    }

    /// Probability of each category for a pick placed within tolerance.
    pub fn residual_probabilities(&self, gripper: GripperKind, motion: Motion) -> Result<[f64; 6], WorldError> {
        let e = self.entry(gripper, motion).ok_or(WorldError::UnconfiguredCombination { gripper, motion })?;
        let w = self.residual_weights(e)?;
        let total: f64 = w.iter().sum();
        Ok(w.map(|x| x / total))
    }
}

/// Draws the outcome of one grasp.
pub fn sample_pick_outcome<R: Rng>(
    model: &OutcomeModel,
    gripper: GripperKind,
    motion: Motion,
    position_error: f64,
    fruit_id: Option<u32>,
    rng: &mut R,
) -> Result<PickOutcome, WorldError> {
    let entry = model
        .entry(gripper, motion)
        .ok_or(WorldError::UnconfiguredCombination { gripper, motion })?;
    if !(position_error <= model.positioning_tolerance) {
        return Ok(PickOutcome {
            category: OutcomeCategory::BadPositioningFailure,
            fruit_id,
        });
    }
    let w = model.residual_weights(entry)?;
    let dist = WeightedIndex::new(w).map_err(|e| WorldError::InvalidConfig(e.to_string()))?;
    Ok(PickOutcome {
        category: OutcomeCategory::ALL[dist.sample(rng)],
        fruit_id,
    })
}
