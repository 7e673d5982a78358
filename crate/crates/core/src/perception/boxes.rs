use serde::{Deserialize, Serialize};

/// Axis-aligned image box in continuous pixel coordinates. A box covering
/// columns `c0..=c1` has `u_min = c0` and `u_max = c1 + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub u_min: f64,
    pub v_min: f64,
    pub u_max: f64,
    pub v_max: f64,
}

impl BBox {
    pub const fn new(u_min: f64, v_min: f64, u_max: f64, v_max: f64) -> Self {
        Self { u_min, v_min, u_max, v_max }
    }

    pub fn centered(u: f64, v: f64, half_w: f64, half_h: f64) -> Self {
        Self::new(u - half_w, v - half_h, u + half_w, v + half_h)
    }

    pub fn is_valid(&self) -> bool {
        self.u_min < self.u_max && self.v_min < self.v_max
    }

    pub fn width(&self) -> f64 {
        self.u_max - self.u_min
    }

    pub fn height(&self) -> f64 {
        self.v_max - self.v_min
    }

    pub fn mean_dim(&self) -> f64 {
        0.5 * (self.width() + self.height())
    }

    pub fn area(&self) -> f64 {
        self.width().max(0.0) * self.height().max(0.0)
    }

    pub fn center(&self) -> (f64, f64) {
        (0.5 * (self.u_min + self.u_max), 0.5 * (self.v_min + self.v_max))
    }

    pub fn contains(&self, u: f64, v: f64) -> bool {
        (self.u_min..=self.u_max).contains(&u) && (self.v_min..=self.v_max).contains(&v)
    }

    pub fn intersection_area(&self, other: &BBox) -> f64 {
        let w = self.u_max.min(other.u_max) - self.u_min.max(other.u_min);
        let h = self.v_max.min(other.v_max) - self.v_min.max(other.v_min);
        if w > 0.0 && h > 0.0 {
            w * h
        } else {
            0.0
        }
    }

    /// True when the box touches or leaves the `width x height` image.
    pub fn is_truncated(&self, width: u32, height: u32) -> bool {
        self.u_min <= 0.0 || self.v_min <= 0.0 || self.u_max >= f64::from(width) || self.v_max >= f64::from(height)
    }

    /// Integer pixel window `(col0, row0, cols, rows)` covered by the box,
    /// clipped to the image.
    pub fn pixel_window(&self, width: usize, height: usize) -> (usize, usize, usize, usize) {
        let c0 = self.u_min.max(0.0).floor() as usize;
        let r0 = self.v_min.max(0.0).floor() as usize;
        let c1 = (self.u_max.ceil().max(0.0) as usize).min(width);
        let r1 = (self.v_max.ceil().max(0.0) as usize).min(height);
        (c0.min(c1), r0.min(r1), c1.saturating_sub(c0), r1.saturating_sub(r0))
    }
}
