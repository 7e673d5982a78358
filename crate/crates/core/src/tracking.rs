//! Persistent multi-target EKF over every fruit seen so far.
//!
//! The state stacks one world position per target and the transition model
//! is static. Measurements observe a single target's position directly, so
//! the covariance stays block diagonal: each target carries its own 3x3
//! block and cross-target blocks are identically zero. [`TrackerState::state_vector`]
//! and [`TrackerState::covariance`] assemble the dense forms.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{project, CameraModel};
use crate::perception::FruitObservation;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrackingError {
    #[error("singular innovation covariance for target {0}")]
    NumericalFailure(u64),
    #[error("match references unknown target {0}")]
    UnknownTarget(u64),
    #[error("invalid noise config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseConfig {
    /// Process noise added to every diagonal entry per step, m^2.
    pub q: f64,
    /// Measurement noise per axis, m^2.
    pub r: f64,
    /// Initial covariance diagonal in the camera basis (third entry along
    /// the optical axis), m^2.
    pub p0: [f64; 3],
    pub assoc_dist: f64,
    pub miss_threshold: u32,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            q: 0.01,
            r: 0.02,
            p0: [0.05, 0.05, 0.1],
            assoc_dist: 0.03,
            miss_threshold: 5,
        }
    }
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<(), TrackingError> {
        let all_pos = [self.q, self.r, self.assoc_dist].iter().chain(self.p0.iter()).all(|x| *x > 0.0 && x.is_finite());
        if !all_pos {
            return Err(TrackingError::InvalidConfig(format!("{self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Target {
    id: u64,
    x: Vector3<f64>,
    p: Matrix3<f64>,
    misses: u32,
}

/// Read-only view of one track, as published to planning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackSnapshot {
    pub id: u64,
    pub position: Vector3<f64>,
    pub trace_p: f64,
    pub misses: u32,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrackerState {
    targets: Vec<Target>,
    next_id: u64,
    created: u64,
    pruned: u64,
}

/// An observation assigned to an existing target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Match {
    pub target_id: u64,
    pub observation: usize,
    pub measurement: Vector3<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Association {
    pub matches: Vec<Match>,
    /// Indices of observations that start new targets.
    pub new_targets: Vec<usize>,
}

impl TrackerState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn ids(&self) -> Vec<u64> {
        self.targets.iter().map(|t| t.id).collect()
    }

    pub fn tracks_created(&self) -> u64 {
        self.created
    }

    pub fn tracks_pruned(&self) -> u64 {
        self.pruned
    }

    pub fn position(&self, id: u64) -> Option<Vector3<f64>> {
        self.targets.iter().find(|t| t.id == id).map(|t| t.x)
    }

    pub fn block(&self, id: u64) -> Option<Matrix3<f64>> {
        self.targets.iter().find(|t| t.id == id).map(|t| t.p)
    }

    pub fn miss_counters(&self) -> Vec<u32> {
        self.targets.iter().map(|t| t.misses).collect()
    }

    /// Stacked `(x, y, z)` positions in id order.
    pub fn state_vector(&self) -> DVector<f64> {
        DVector::from_iterator(3 * self.len(), self.targets.iter().flat_map(|t| t.x.iter().copied()))
    }

    /// Dense `3n x 3n` covariance.
    pub fn covariance(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut p = DMatrix::zeros(3 * n, 3 * n);
        for (i, t) in self.targets.iter().enumerate() {
            p.fixed_view_mut::<3, 3>(3 * i, 3 * i).copy_from(&t.p);
        }
        p
    }

    pub fn snapshot(&self) -> Vec<TrackSnapshot> {
        self.targets
            .iter()
            .map(|t| TrackSnapshot {
                id: t.id,
                position: t.x,
                trace_p: t.p.trace(),
                misses: t.misses,
            })
            .collect()
    }

    /// Adds a target with an explicit world covariance; returns its id.
    pub fn add_target(&mut self, position: Vector3<f64>, covariance: Matrix3<f64>) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        self.created += 1;
        self.targets.push(Target {
            id,
            x: position,
            p: covariance,
            misses: 0,
        });
        id
    }

    pub fn predict_in_place(&mut self, cfg: &NoiseConfig) {
        for t in &mut self.targets {
            t.p += Matrix3::identity() * cfg.q;
        }
    }

    pub fn update_in_place(&mut self, matches: &[Match], cfg: &NoiseConfig) -> Result<(), TrackingError> {
        let r = Matrix3::identity() * cfg.r;
        for m in matches {
            let t = self
                .targets
                .iter_mut()
                .find(|t| t.id == m.target_id)
                .ok_or(TrackingError::UnknownTarget(m.target_id))?;
            let s = t.p + r;
            let s_inv = s.try_inverse().ok_or(TrackingError::NumericalFailure(t.id))?;
            let k = t.p * s_inv;
            t.x += k * (m.measurement - t.x);
            let i_k = Matrix3::identity() - k;
            let p = i_k * t.p * i_k.transpose() + k * r * k.transpose();
            t.p = 0.5 * (p + p.transpose());
            t.misses = 0;
        }
        Ok(())
    }

    pub fn prune_in_place(&mut self, cam: &CameraModel, observed: &BTreeSet<u64>, cfg: &NoiseConfig) {
        for t in &mut self.targets {
            if !observed.contains(&t.id) && project(&t.x, cam).in_frustum {
                t.misses += 1;
            }
        }
        let before = self.targets.len();
        self.targets.retain(|t| t.misses <= cfg.miss_threshold);
        self.pruned += (before - self.targets.len()) as u64;
    }
}

/// Static transition: state unchanged, `P += q I`.
pub fn predict(t: &TrackerState, cfg: &NoiseConfig) -> TrackerState {
    let mut next = t.clone();
    next.predict_in_place(cfg);
    next
}

/// Nearest-neighbour association in the world frame.
///
/// Each valid observation looks only at its nearest target. Observations are
/// processed in ascending order of that distance; an observation within
/// `assoc_dist` claims its target if still free, and every other observation
/// starts a new target.
pub fn associate(t: &TrackerState, obs: &[FruitObservation], cfg: &NoiseConfig) -> Association {
    let mut candidates: Vec<(f64, usize, Option<usize>)> = obs
        .iter()
        .enumerate()
        .filter(|(_, o)| o.valid)
        .map(|(i, o)| {
            let nearest = t
                .targets
                .iter()
                .enumerate()
                .map(|(k, tg)| ((tg.x - o.position).norm(), k))
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            match nearest {
                Some((d, k)) => (d, i, Some(k)),
                None => (f64::INFINITY, i, None),
            }
        })
        .collect();
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut claimed = vec![false; t.targets.len()];
    let mut out = Association::default();
    for (d, i, k) in candidates {
        match k {
            Some(k) if d <= cfg.assoc_dist && !claimed[k] => {
                claimed[k] = true;
                out.matches.push(Match {
                    target_id: t.targets[k].id,
                    observation: i,
                    measurement: obs[i].position,
                });
            }
            _ => out.new_targets.push(i),
        }
    }
    out.matches.sort_by_key(|m| m.observation);
    out.new_targets.sort_unstable();
    out
}

/// Joseph-form Kalman update of every matched target with `H = I`, `R = r I`.
pub fn update(t: &TrackerState, matches: &[Match], cfg: &NoiseConfig) -> Result<TrackerState, TrackingError> {
    let mut next = t.clone();
    next.update_in_place(matches, cfg)?;
    Ok(next)
}

/// Counts a miss for every unobserved target that projects into the camera
/// frustum and removes targets whose counter exceeds the threshold.
pub fn prune(t: &TrackerState, cam: &CameraModel, observed_ids: &BTreeSet<u64>, cfg: &NoiseConfig) -> TrackerState {
    let mut next = t.clone();
    next.prune_in_place(cam, observed_ids, cfg);
    next
}

/// Initial world covariance: `p0` in the camera basis rotated to world.
pub fn initial_covariance(cam: &CameraModel, cfg: &NoiseConfig) -> Matrix3<f64> {
    let r = cam.pose.rotation();
    let p = r * Matrix3::from_diagonal(&Vector3::from(cfg.p0)) * r.transpose();
    0.5 * (p + p.transpose())
}

/// One filter iteration: predict, associate, update, birth, prune.
pub fn step(t: &TrackerState, obs: &[FruitObservation], cam: &CameraModel, cfg: &NoiseConfig) -> Result<TrackerState, TrackingError> {
    let mut next = t.clone();
    step_in_place(&mut next, obs, cam, cfg)?;
    Ok(next)
}

pub fn step_in_place(t: &mut TrackerState, obs: &[FruitObservation], cam: &CameraModel, cfg: &NoiseConfig) -> Result<Association, TrackingError> {
    t.predict_in_place(cfg);
    let assoc = associate(t, obs, cfg);
    t.update_in_place(&assoc.matches, cfg)?;
    let mut observed: BTreeSet<u64> = assoc.matches.iter().map(|m| m.target_id).collect();
    let p0 = initial_covariance(cam, cfg);
    for &i in &assoc.new_targets {
        observed.insert(t.add_target(obs[i].position, p0));
    }
    t.prune_in_place(cam, &observed, cfg);
    Ok(assoc)
}
