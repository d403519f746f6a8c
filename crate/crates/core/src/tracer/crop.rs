use serde::{Deserialize, Serialize};

use crate::geometry::Point;
use crate::image_io::GrayImage;

/// Side length of the square crop fed to predictors.
pub const CROP_SIZE: usize = 64;
const HALF: f64 = (CROP_SIZE / 2) as f64;

/// A rotation-normalized window around the newest trace point.
///
/// Crop pixel `(c, r)` sits at offset `(c - 32, r - 32)` from `center` in a
/// frame rotated by `rotation`, so the newest context step points along +x.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizedCrop {
    /// Row-major intensities, 64×64.
    pub crop: Vec<f32>,
    pub rotation: f64,
    pub center: Point,
    /// Context points rasterized as a line fading from old (dim) to new (1.0).
    pub context_channel: Vec<f32>,
    /// The context points in source coordinates, oldest first.
    pub context: Vec<Point>,
}

impl NormalizedCrop {
    /// Crop coordinates (column, row) to source coordinates.
    pub fn to_source(&self, c: Point) -> Point {
        self.center + (c - Point::new(HALF, HALF)).rotated(self.rotation)
    }

    /// Source coordinates to crop coordinates (column, row).
    pub fn to_crop(&self, p: Point) -> Point {
        (p - self.center).rotated(-self.rotation) + Point::new(HALF, HALF)
    }

    pub fn at(&self, col: usize, row: usize) -> f32 {
        self.crop[row * CROP_SIZE + col]
    }

    /// Bilinear sample of the crop, 0 outside.
    pub fn sample(&self, c: Point) -> f32 {
        let (x0, y0) = (c.x.floor(), c.y.floor());
        let (fx, fy) = ((c.x - x0) as f32, (c.y - y0) as f32);
        let get = |x: f64, y: f64| -> f32 {
            if x < 0.0 || y < 0.0 || x >= CROP_SIZE as f64 || y >= CROP_SIZE as f64 {
                0.0
            } else {
                self.crop[y as usize * CROP_SIZE + x as usize]
            }
        };
        let top = get(x0, y0) * (1.0 - fx) + get(x0 + 1.0, y0) * fx;
        let bot = get(x0, y0 + 1.0) * (1.0 - fx) + get(x0 + 1.0, y0 + 1.0) * fx;
        top * (1.0 - fy) + bot * fy
    }
}

/// Background fill for crop pixels that fall outside the image.
pub const CROP_BACKGROUND: f32 = 0.0;

/// Rotate and crop the image so the last context step runs left to right
/// through the crop center.
pub fn normalize_crop(image: &GrayImage, context: &[Point]) -> NormalizedCrop {
    assert!(context.len() >= 2, "normalize_crop needs at least two context points");
    let last = context[context.len() - 1];
    let prev = context[context.len() - 2];
    let rotation = (last - prev).angle();
    let mut out = NormalizedCrop {
        crop: vec![0.0; CROP_SIZE * CROP_SIZE],
        rotation,
        center: last,
        context_channel: vec![0.0; CROP_SIZE * CROP_SIZE],
        context: context.to_vec(),
    };
    for r in 0..CROP_SIZE {
        for c in 0..CROP_SIZE {
            let src = out.to_source(Point::new(c as f64, r as f64));
            out.crop[r * CROP_SIZE + c] = image.sample(src, CROP_BACKGROUND);
        }
    }
    let k = context.len();
    let level = |i: f64| ((i + 1.0) / k as f64) as f32;
    let local: Vec<Point> = context.iter().map(|p| out.to_crop(*p)).collect();
    let mut put = |q: Point, v: f32, overwrite: bool| {
        let (c, r) = (q.x.round(), q.y.round());
        if c >= 0.0 && r >= 0.0 && c < CROP_SIZE as f64 && r < CROP_SIZE as f64 {
            let slot = &mut out.context_channel[r as usize * CROP_SIZE + c as usize];
            *slot = if overwrite { v } else { slot.max(v) };
        }
    };
    for i in 0..k.saturating_sub(1) {
        let (a, b) = (local[i], local[i + 1]);
        let n = (a.dist(b) * 4.0).ceil().max(1.0) as usize;
        for s in 0..=n {
            let t = s as f64 / n as f64;
            put(a.lerp(b, t), level(i as f64 + t), false);
        }
    }
    for (i, q) in local.iter().enumerate() {
        put(*q, level(i as f64), true);
    }
    out
}
