//! Stand-in for a learned detector: perturbs ground-truth boxes and drops or
//! injects boxes to hit a configured recall and precision.

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::world::TruthBox;

use super::{BBox, Detection2D, DetectionSource, PerceptionError};

const FP_PLACEMENT_TRIES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticDetector {
    pub recall: f64,
    pub precision: f64,
    /// Standard deviation of box edge jitter, pixels.
    pub box_jitter_px: f64,
    /// Fruit with fewer visible pixels than this fraction of their full disc
    /// are never detected.
    pub min_visible_fraction: f64,
}

impl Default for SyntheticDetector {
    fn default() -> Self {
        Self {
            recall: 0.85,
            precision: 0.96,
            box_jitter_px: 1.0,
            min_visible_fraction: 0.25,
        }
    }
}

impl SyntheticDetector {
    pub fn validate(&self) -> Result<(), PerceptionError> {
        if !(0.0..=1.0).contains(&self.recall) || !(self.precision > 0.0 && self.precision <= 1.0) {
            return Err(PerceptionError::InvalidConfig(format!(
                "synthetic detector recall {} precision {}",
                self.recall, self.precision
            )));
        }
        if !(self.box_jitter_px >= 0.0) || !(0.0..=1.0).contains(&self.min_visible_fraction) {
            return Err(PerceptionError::InvalidConfig("synthetic detector jitter/visibility".into()));
        }
        Ok(())
    }

    pub fn detect<R: Rng>(&self, truths: &[TruthBox], width: u32, height: u32, rng: &mut R) -> Vec<Detection2D> {
        let jitter = Normal::new(0.0, self.box_jitter_px).expect("validated jitter");
        let (w, h) = (f64::from(width), f64::from(height));
        let clip = |b: BBox| BBox::new(b.u_min.max(0.0), b.v_min.max(0.0), b.u_max.min(w), b.v_max.min(h));
        let mut out = Vec::new();
        let mut sizes = Vec::new();
        for t in truths {
            let disc = std::f64::consts::FRAC_PI_4 * t.bbox.area();
            if disc <= 0.0 || (t.visible_pixels as f64) < self.min_visible_fraction * disc {
                continue;
            }
            if !rng.random_bool(self.recall) {
                continue;
            }
            let b = clip(BBox::new(
                t.bbox.u_min + jitter.sample(rng),
                t.bbox.v_min + jitter.sample(rng),
                t.bbox.u_max + jitter.sample(rng),
                t.bbox.v_max + jitter.sample(rng),
            ));
            if b.is_valid() {
                sizes.push(b.mean_dim());
                out.push(Detection2D::from_bbox(b, DetectionSource::Synthetic));
            }
        }
        let expected_fp = out.len() as f64 * (1.0 - self.precision) / self.precision;
        if expected_fp > 0.0 {
            let n = Poisson::new(expected_fp).expect("positive mean").sample(rng) as usize;
            let size = if sizes.is_empty() { 20.0 } else { sizes.iter().sum::<f64>() / sizes.len() as f64 };
            let half = 0.5 * size.min(w.min(h) - 2.0).max(2.0);
            for _ in 0..n {
                // background boxes: resample a few times to avoid landing on fruit
                let mut b = BBox::centered(w * 0.5, h * 0.5, half, half);
                for _ in 0..FP_PLACEMENT_TRIES {
                    b = BBox::centered(rng.random_range(half..w - half), rng.random_range(half..h - half), half, half);
                    if truths.iter().all(|t| t.bbox.intersection_area(&b) == 0.0) {
                        break;
                    }
                }
                out.push(Detection2D::from_bbox(b, DetectionSource::Synthetic));
            }
        }
        out
    }
}
