//! Row-major image buffers shared by the renderer and perception, plus
//! PGM/PPM dumps for debugging.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

/// HSV colour: hue in degrees `[0, 360)`, saturation and value in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Hsv {
    pub h: f64,
    pub s: f64,
    pub v: f64,
}

impl Hsv {
    pub const fn new(h: f64, s: f64, v: f64) -> Self {
        Self { h, s, v }
    }

    /// Clamps saturation/value to `[0, 1]` and wraps hue into `[0, 360)`.
    pub fn normalized(self) -> Self {
        Self {
            h: self.h.rem_euclid(360.0),
            s: self.s.clamp(0.0, 1.0),
            v: self.v.clamp(0.0, 1.0),
        }
    }

    pub fn to_rgb8(self) -> [u8; 3] {
        let Hsv { h, s, v } = self.normalized();
        let c = v * s;
        let hp = h / 60.0;
        let x = c * (1.0 - (hp.rem_euclid(2.0) - 1.0).abs());
        let (r, g, b) = match hp as u32 {
            0 => (c, x, 0.0),
            1 => (x, c, 0.0),
            2 => (0.0, c, x),
            3 => (0.0, x, c),
            4 => (x, 0.0, c),
            _ => (c, 0.0, x),
        };
        let m = v - c;
        let q = |f: f64| ((f + m) * 255.0).round().clamp(0.0, 255.0) as u8;
        [q(r), q(g), q(b)]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Raster<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

pub type HsvRaster = Raster<Hsv>;
pub type DepthRaster = Raster<f64>;

impl<T: Clone> Raster<T> {
    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    /// Returns `None` when `data.len() != width * height`.
    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Option<Self> {
        (data.len() == width * height).then_some(Self { width, height, data })
    }

    /// Copies the `w x h` window starting at column `u0`, row `v0`, clipped to
    /// the raster.
    pub fn crop(&self, u0: usize, v0: usize, w: usize, h: usize) -> Self {
        let u1 = (u0 + w).min(self.width);
        let v1 = (v0 + h).min(self.height);
        let u0 = u0.min(u1);
        let v0 = v0.min(v1);
        let mut data = Vec::with_capacity((u1 - u0) * (v1 - v0));
        for row in v0..v1 {
            data.extend_from_slice(&self.data[row * self.width + u0..row * self.width + u1]);
        }
        Self {
            width: u1 - u0,
            height: v1 - v0,
            data,
        }
    }
}

impl<T> Raster<T> {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn get(&self, col: usize, row: usize) -> &T {
        &self.data[row * self.width + col]
    }

    pub fn get_mut(&mut self, col: usize, row: usize) -> &mut T {
        &mut self.data[row * self.width + col]
    }

    pub fn set(&mut self, col: usize, row: usize, value: T) {
        self.data[row * self.width + col] = value;
    }

    pub fn pixels(&self) -> &[T] {
        &self.data
    }

    pub fn pixels_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn same_shape<U>(&self, other: &Raster<U>) -> bool {
        self.width == other.width && self.height == other.height
    }
}

/// 8-bit binary PGM of a depth raster scaled so `max_depth` maps to 255.
pub fn write_depth_pgm<W: Write>(raster: &DepthRaster, max_depth: f64, mut out: W) -> io::Result<()> {
    write!(out, "P5\n{} {}\n255\n", raster.width(), raster.height())?;
    let bytes: Vec<u8> = raster
        .pixels()
        .iter()
        .map(|d| {
            if d.is_finite() && max_depth > 0.0 {
                (d / max_depth * 255.0).round().clamp(0.0, 255.0) as u8
            } else {
                0
            }
        })
        .collect();
    out.write_all(&bytes)
}

/// Binary PPM of an HSV raster converted to RGB.
pub fn write_hsv_ppm<W: Write>(raster: &HsvRaster, mut out: W) -> io::Result<()> {
    write!(out, "P6\n{} {}\n255\n", raster.width(), raster.height())?;
    let bytes: Vec<u8> = raster.pixels().iter().flat_map(|p| p.to_rgb8()).collect();
    out.write_all(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crop_is_clipped() {
        let r = Raster::from_vec(3, 2, vec![1, 2, 3, 4, 5, 6]).unwrap();
        let c = r.crop(1, 0, 5, 5);
        assert_eq!((c.width(), c.height()), (2, 2));
        assert_eq!(c.pixels(), &[2, 3, 5, 6]);
        assert!(Raster::from_vec(2, 2, vec![0u8; 3]).is_none());
    }

    #[test]
    fn primary_colours() {
        assert_eq!(Hsv::new(0.0, 1.0, 1.0).to_rgb8(), [255, 0, 0]);
        assert_eq!(Hsv::new(120.0, 1.0, 1.0).to_rgb8(), [0, 255, 0]);
        assert_eq!(Hsv::new(240.0, 1.0, 1.0).to_rgb8(), [0, 0, 255]);
        assert_eq!(Hsv::new(-120.0, 1.0, 1.0).to_rgb8(), [0, 0, 255]);
    }

    #[test]
    fn pnm_headers() {
        let d = Raster::filled(4, 3, 1.0);
        let mut buf = Vec::new();
        write_depth_pgm(&d, 2.0, &mut buf).unwrap();
        assert!(buf.starts_with(b"P5\n4 3\n255\n"));
        assert_eq!(buf.len(), 11 + 12);
        assert_eq!(*buf.last().unwrap(), 128);

        let c = Raster::filled(2, 2, Hsv::new(0.0, 1.0, 1.0));
        let mut buf = Vec::new();
        write_hsv_ppm(&c, &mut buf).unwrap();
        assert!(buf.starts_with(b"P6\n2 2\n255\n"));
        assert_eq!(buf.len(), 11 + 12);
    }
}
