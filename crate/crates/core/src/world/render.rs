//! Flat-shaded synthetic camera views.
//!
//! Fruit are discs of their projected diameter at constant centre depth;
//! obstacles are screen-space capsules with perspective-correct depth along
//! the axis. A z-buffer resolves occlusion so the nearest surface wins.

use nalgebra::Vector3;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::geometry::{project, CameraModel};
use crate::perception::BBox;
use crate::raster::{DepthRaster, Hsv, HsvRaster, Raster};

use super::scenario::WorldScenario;

const NEAR_CLIP: f64 = 0.01;

/// What a pixel shows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Surface {
    #[default]
    Background,
    Fruit(u32),
    Obstacle(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderConfig {
    pub background_color: Hsv,
    pub background_depth: f64,
    /// Per-pixel Gaussian HSV noise (standard deviation per channel).
    pub hsv_noise: Hsv,
    pub depth_noise_sd: f64,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            background_color: Hsv::new(95.0, 0.55, 0.35),
            background_depth: 4.0,
            hsv_noise: Hsv::new(0.0, 0.0, 0.0),
            depth_noise_sd: 0.0,
        }
    }
}

impl RenderConfig {
    /// Red-soil-like backdrop that shares the fruit hue band.
    pub fn red_soil() -> Self {
        Self {
            background_color: Hsv::new(12.0, 0.55, 0.42),
            ..Self::default()
        }
    }

    pub fn night() -> Self {
        Self {
            background_color: Hsv::new(100.0, 0.2, 0.08),
            hsv_noise: Hsv::new(4.0, 0.04, 0.03),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct RenderedView {
    pub color: HsvRaster,
    pub depth: DepthRaster,
    pub labels: Raster<Surface>,
}

impl RenderedView {
    pub fn fruit_pixel_count(&self, id: u32) -> usize {
        self.labels.pixels().iter().filter(|s| **s == Surface::Fruit(id)).count()
    }
}

/// Full-extent image box of a fruit, even where it is occluded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruthBox {
    pub fruit_id: u32,
    pub bbox: BBox,
    pub depth: f64,
    pub visible_pixels: usize,
    pub truncated: bool,
}

struct Canvas<'a> {
    view: RenderedView,
    zbuf: Vec<f64>,
    cam: &'a CameraModel,
}

impl Canvas<'_> {
    fn write(&mut self, col: usize, row: usize, depth: f64, color: Hsv, surface: Surface) {
        let w = self.view.color.width();
        let idx = row * w + col;
        if depth < self.zbuf[idx] {
            self.zbuf[idx] = depth;
            self.view.color.set(col, row, color);
            self.view.depth.set(col, row, depth);
            self.view.labels.set(col, row, surface);
        }
    }

    fn disc(&mut self, u0: f64, v0: f64, radius_px: f64, depth: f64, color: Hsv, surface: Surface) {
        let w = self.view.color.width();
        let h = self.view.color.height();
        let (c0, r0, cols, rows) = BBox::centered(u0, v0, radius_px, radius_px).pixel_window(w, h);
        let r2 = radius_px * radius_px;
        for row in r0..r0 + rows {
            let dv = row as f64 + 0.5 - v0;
            for col in c0..c0 + cols {
                let du = col as f64 + 0.5 - u0;
                if du * du + dv * dv <= r2 {
                    self.write(col, row, depth, color, surface);
                }
            }
        }
    }

    fn capsule(&mut self, a: &Vector3<f64>, b: &Vector3<f64>, radius: f64, color: Hsv, surface: Surface) {
        let (mut pa, mut pb) = (self.cam.world_to_camera(a), self.cam.world_to_camera(b));
        if pa.z < NEAR_CLIP && pb.z < NEAR_CLIP {
            return;
        }
        if pa.z < NEAR_CLIP {
            std::mem::swap(&mut pa, &mut pb);
        }
        if pb.z < NEAR_CLIP {
            let t = (pa.z - NEAR_CLIP) / (pa.z - pb.z);
            pb = pa + (pb - pa) * t;
        }
        let k = &self.cam.intrinsics;
        let f = k.mean_focal();
        let to_px = |p: &Vector3<f64>| (k.fx() * p.x / p.z + k.cx(), k.fy() * p.y / p.z + k.cy());
        let (ua, va) = to_px(&pa);
        let (ub, vb) = to_px(&pb);
        let rmax = radius * f / pa.z.min(pb.z);
        let w = self.view.color.width();
        let h = self.view.color.height();
        let bounds = BBox::new(ua.min(ub) - rmax, va.min(vb) - rmax, ua.max(ub) + rmax, va.max(vb) + rmax);
        let (c0, r0, cols, rows) = bounds.pixel_window(w, h);
        let (du, dv) = (ub - ua, vb - va);
        let len2 = du * du + dv * dv;
        for row in r0..r0 + rows {
            let pv = row as f64 + 0.5;
            for col in c0..c0 + cols {
                let pu = col as f64 + 0.5;
                let t = if len2 > 0.0 {
                    (((pu - ua) * du + (pv - va) * dv) / len2).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                let depth = 1.0 / ((1.0 - t) / pa.z + t / pb.z);
                let (qu, qv) = (ua + t * du - pu, va + t * dv - pv);
                let r_px = radius * f / depth;
                if qu * qu + qv * qv <= r_px * r_px {
                    self.write(col, row, depth, color, surface);
                }
            }
        }
    }
}

/// Renders colour, depth and surface-label rasters at the camera's
/// resolution. Noise-free; see [`add_noise`].
pub fn render_view(scenario: &WorldScenario, cam: &CameraModel, cfg: &RenderConfig) -> RenderedView {
    let w = cam.intrinsics.width() as usize;
    let h = cam.intrinsics.height() as usize;
    let mut canvas = Canvas {
        view: RenderedView {
            color: Raster::filled(w, h, cfg.background_color),
            depth: Raster::filled(w, h, cfg.background_depth),
            labels: Raster::filled(w, h, Surface::Background),
        },
        zbuf: vec![f64::INFINITY; w * h],
        cam,
    };
    let f = cam.intrinsics.mean_focal();
    for (idx, ob) in scenario.obstacles.iter().enumerate() {
        canvas.capsule(&ob.a, &ob.b, ob.radius, ob.color(), Surface::Obstacle(idx));
    }
    for fruit in &scenario.fruits {
        let pr = project(&fruit.position, cam);
        if !(pr.depth > NEAR_CLIP) {
            continue;
        }
        let r_px = fruit.radius() * f / pr.depth;
        canvas.disc(pr.u, pr.v, r_px, pr.depth, fruit.color, Surface::Fruit(fruit.id));
    }
    canvas.view
}

/// Adds Gaussian noise to colour and depth in place.
pub fn add_noise<R: Rng>(view: &mut RenderedView, cfg: &RenderConfig, rng: &mut R) {
    let n = cfg.hsv_noise;
    if n.h > 0.0 || n.s > 0.0 || n.v > 0.0 {
        let nh = Normal::new(0.0, n.h.max(0.0)).expect("finite sd");
        let ns = Normal::new(0.0, n.s.max(0.0)).expect("finite sd");
        let nv = Normal::new(0.0, n.v.max(0.0)).expect("finite sd");
        for px in view.color.pixels_mut() {
            *px = Hsv::new(
                px.h + nh.sample(rng),
                px.s + ns.sample(rng),
                px.v + nv.sample(rng),
            )
            .normalized();
        }
    }
    if cfg.depth_noise_sd > 0.0 {
        let nd = Normal::new(0.0, cfg.depth_noise_sd).expect("finite sd");
        for d in view.depth.pixels_mut() {
            *d = (*d + nd.sample(rng)).max(0.0);
        }
    }
}

/// Ground-truth boxes for every fruit in front of the camera whose
/// full-extent box meets the image, with visible pixel counts from `view`.
pub fn truth_boxes(scenario: &WorldScenario, cam: &CameraModel, view: &RenderedView) -> Vec<TruthBox> {
    let w = cam.intrinsics.width();
    let h = cam.intrinsics.height();
    let f = cam.intrinsics.mean_focal();
    let mut counts = std::collections::HashMap::new();
    for s in view.labels.pixels() {
        if let Surface::Fruit(id) = s {
            *counts.entry(*id).or_insert(0usize) += 1;
        }
    }
    scenario
        .fruits
        .iter()
        .filter_map(|fruit| {
            let pr = project(&fruit.position, cam);
            if !(pr.depth > NEAR_CLIP) {
                return None;
            }
            let r = fruit.radius() * f / pr.depth;
            let bbox = BBox::centered(pr.u, pr.v, r, r);
            let on_image = bbox.u_max > 0.0 && bbox.v_max > 0.0 && bbox.u_min < f64::from(w) && bbox.v_min < f64::from(h);
            on_image.then(|| TruthBox {
                fruit_id: fruit.id,
                bbox,
                depth: pr.depth,
                visible_pixels: counts.get(&fruit.id).copied().unwrap_or(0),
                truncated: bbox.is_truncated(w, h),
            })
        })
        .collect()
}
