use serde::{Deserialize, Serialize};

use crate::raster::{Hsv, HsvRaster};

use super::{BBox, PerceptionError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectionSource {
    HandCamera,
    WideCamera,
    Synthetic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection2D {
    pub bbox: BBox,
    pub centroid: (f64, f64),
    pub source: DetectionSource,
}

impl Detection2D {
    /// Detection whose centroid is the box centre.
    pub fn from_bbox(bbox: BBox, source: DetectionSource) -> Self {
        Self {
            bbox,
            centroid: bbox.center(),
            source,
        }
    }
}

/// Per-channel HSV bounds plus connected-region size limits. When
/// `h_lo > h_hi` the hue interval wraps through 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HsvThresholds {
    pub h_lo: f64,
    pub h_hi: f64,
    pub s_lo: f64,
    pub s_hi: f64,
    pub v_lo: f64,
    pub v_hi: f64,
    pub min_region: usize,
    pub max_region: usize,
}

impl HsvThresholds {
    /// Detector thresholds tuned for red plums against foliage.
    pub fn plum() -> Self {
        Self {
            h_lo: 325.0,
            h_hi: 15.0,
            s_lo: 0.4,
            s_hi: 1.0,
            v_lo: 0.15,
            v_hi: 0.9,
            min_region: 12,
            max_region: 60_000,
        }
    }

    /// Loose thresholds for depth masking inside a box already known to
    /// contain fruit.
    pub fn plum_patch() -> Self {
        Self {
            h_lo: 310.0,
            h_hi: 25.0,
            s_lo: 0.25,
            s_hi: 1.0,
            v_lo: 0.05,
            v_hi: 1.0,
            min_region: 1,
            max_region: usize::MAX,
        }
    }

    pub fn validate(&self) -> Result<(), PerceptionError> {
        let ok_hue = (0.0..=360.0).contains(&self.h_lo) && (0.0..=360.0).contains(&self.h_hi);
        if !ok_hue || self.s_lo > self.s_hi || self.v_lo > self.v_hi {
            return Err(PerceptionError::InvalidConfig(format!("HSV bounds {self:?}")));
        }
        if self.min_region == 0 || self.min_region > self.max_region {
            return Err(PerceptionError::InvalidConfig(format!(
                "region bounds {}..{}",
                self.min_region, self.max_region
            )));
        }
        Ok(())
    }

    pub fn passes(&self, p: &Hsv) -> bool {
        let hue_ok = if self.h_lo <= self.h_hi {
            (self.h_lo..=self.h_hi).contains(&p.h)
        } else {
            p.h >= self.h_lo || p.h <= self.h_hi
        };
        hue_ok && (self.s_lo..=self.s_hi).contains(&p.s) && (self.v_lo..=self.v_hi).contains(&p.v)
    }
}

/// Thresholds the raster and returns one detection per 4-connected region
/// whose area lies in `[min_region, max_region]`, ordered by box top then
/// left edge.
pub fn detect_hsv(raster: &HsvRaster, t: &HsvThresholds) -> Vec<Detection2D> {
    let (w, h) = (raster.width(), raster.height());
    let mask: Vec<bool> = raster.pixels().iter().map(|p| t.passes(p)).collect();
    let mut seen = vec![false; w * h];
    let mut stack = Vec::new();
    let mut out = Vec::new();
    for start in 0..w * h {
        if !mask[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let (mut c0, mut r0, mut c1, mut r1) = (usize::MAX, usize::MAX, 0, 0);
        let mut area = 0usize;
        while let Some(idx) = stack.pop() {
            let (c, r) = (idx % w, idx / w);
            area += 1;
            c0 = c0.min(c);
            c1 = c1.max(c);
            r0 = r0.min(r);
            r1 = r1.max(r);
            let mut visit = |n: usize| {
                if mask[n] && !seen[n] {
                    seen[n] = true;
                    stack.push(n);
                }
            };
            if c > 0 {
                visit(idx - 1);
            }
            if c + 1 < w {
                visit(idx + 1);
            }
            if r > 0 {
                visit(idx - w);
            }
            if r + 1 < h {
                visit(idx + w);
            }
        }
        if (t.min_region..=t.max_region).contains(&area) {
            let bbox = BBox::new(c0 as f64, r0 as f64, (c1 + 1) as f64, (r1 + 1) as f64);
            out.push(Detection2D::from_bbox(bbox, DetectionSource::HandCamera));
        }
    }
    out.sort_by(|a, b| {
        a.bbox
            .v_min
            .total_cmp(&b.bbox.v_min)
            .then(a.bbox.u_min.total_cmp(&b.bbox.u_min))
            .then(a.bbox.v_max.total_cmp(&b.bbox.v_max))
            .then(a.bbox.u_max.total_cmp(&b.bbox.u_max))
    });
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::Raster;

    const FRUIT: Hsv = Hsv::new(350.0, 0.8, 0.5);
    const LEAF: Hsv = Hsv::new(95.0, 0.55, 0.35);

    fn paint_disc(r: &mut HsvRaster, u0: f64, v0: f64, radius: f64) {
        for row in 0..r.height() {
            for col in 0..r.width() {
                let du = col as f64 + 0.5 - u0;
                let dv = row as f64 + 0.5 - v0;
                if du * du + dv * dv <= radius * radius {
                    r.set(col, row, FRUIT);
                }
            }
        }
    }

    #[test]
    fn out_of_threshold_raster_is_empty() {
        let r = Raster::filled(64, 48, LEAF);
        assert!(detect_hsv(&r, &HsvThresholds::plum()).is_empty());
    }

    #[test]
    fn single_disc_tight_box() {
        let mut r = Raster::filled(320, 240, LEAF);
        paint_disc(&mut r, 160.0, 120.0, 9.0);
        let t = HsvThresholds {
            min_region: 50,
            ..HsvThresholds::plum()
        };
        let dets = detect_hsv(&r, &t);
        assert_eq!(dets.len(), 1);
        // brute-force scan of the mask for the tight box
        let (mut c0, mut r0, mut c1, mut r1) = (usize::MAX, usize::MAX, 0, 0);
        for row in 0..240 {
            for col in 0..320 {
                if t.passes(r.get(col, row)) {
                    c0 = c0.min(col);
                    r0 = r0.min(row);
                    c1 = c1.max(col);
                    r1 = r1.max(row);
                }
            }
        }
        let b = dets[0].bbox;
        assert_eq!(b, BBox::new(c0 as f64, r0 as f64, (c1 + 1) as f64, (r1 + 1) as f64));
        assert!((b.width() - 19.0).abs() <= 1.0 && (b.height() - 19.0).abs() <= 1.0);
        assert!(b.contains(dets[0].centroid.0, dets[0].centroid.1));
    }

    #[test]
    fn touching_discs_merge() {
        let mut r = Raster::filled(320, 240, LEAF);
        paint_disc(&mut r, 100.0, 120.0, 10.0);
        paint_disc(&mut r, 119.0, 120.0, 10.0);
        let dets = detect_hsv(&r, &HsvThresholds::plum());
        assert_eq!(dets.len(), 1);
        assert!(dets[0].bbox.width() >= 38.0);
    }

    #[test]
    fn diagonal_pixels_are_not_connected() {
        let mut r = Raster::filled(4, 4, LEAF);
        r.set(0, 0, FRUIT);
        r.set(1, 1, FRUIT);
        let t = HsvThresholds {
            min_region: 1,
            ..HsvThresholds::plum()
        };
        assert_eq!(detect_hsv(&r, &t).len(), 2);
    }

    #[test]
    fn region_size_filter() {
        let mut r = Raster::filled(100, 100, LEAF);
        paint_disc(&mut r, 20.0, 20.0, 2.0);
        paint_disc(&mut r, 60.0, 60.0, 12.0);
        let t = HsvThresholds {
            min_region: 30,
            max_region: 200,
            ..HsvThresholds::plum()
        };
        assert!(detect_hsv(&r, &t).is_empty());
        let t = HsvThresholds {
            min_region: 30,
            max_region: 1000,
            ..HsvThresholds::plum()
        };
        assert_eq!(detect_hsv(&r, &t).len(), 1);
    }

    #[test]
    fn hue_wraps_through_zero() {
        let t = HsvThresholds::plum();
        assert!(t.passes(&Hsv::new(355.0, 0.8, 0.5)));
        assert!(t.passes(&Hsv::new(5.0, 0.8, 0.5)));
        assert!(!t.passes(&Hsv::new(180.0, 0.8, 0.5)));
        let straight = HsvThresholds {
            h_lo: 10.0,
            h_hi: 40.0,
            ..t
        };
        assert!(straight.passes(&Hsv::new(20.0, 0.8, 0.5)));
        assert!(!straight.passes(&Hsv::new(355.0, 0.8, 0.5)));
    }

    #[test]
    fn thresholds_validate() {
        assert!(HsvThresholds::plum().validate().is_ok());
        let bad = HsvThresholds {
            min_region: 0,
            ..HsvThresholds::plum()
        };
        assert!(bad.validate().is_err());
        let bad = HsvThresholds {
            s_lo: 0.9,
            s_hi: 0.1,
            ..HsvThresholds::plum()
        };
        assert!(bad.validate().is_err());
    }

    proptest::proptest! {
        // Output is canonical regardless of where the blobs sit.
        #[test]
        fn output_is_sorted(centers in proptest::collection::vec((5.0f64..95.0, 5.0f64..95.0), 1..6)) {
            let mut r = Raster::filled(100, 100, LEAF);
            for (u, v) in &centers {
                paint_disc(&mut r, *u, *v, 3.0);
            }
            let t = HsvThresholds { min_region: 1, ..HsvThresholds::plum() };
            let dets = detect_hsv(&r, &t);
            for pair in dets.windows(2) {
                let key = |d: &Detection2D| (d.bbox.v_min, d.bbox.u_min);
                proptest::prop_assert!(key(&pair[0]) <= key(&pair[1]));
            }
            // mirroring the painting order changes nothing
            let mut r2 = Raster::filled(100, 100, LEAF);
            for (u, v) in centers.iter().rev() {
                paint_disc(&mut r2, *u, *v, 3.0);
            }
            proptest::prop_assert_eq!(dets, detect_hsv(&r2, &t));
        }
    }
}
