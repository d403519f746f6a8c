use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Scene;
use crate::geometry::{dist_to_segment, Point, Polyline};
use crate::image_io::GrayImage;

/// Centerline intensity of every stroke.
pub const STROKE_INTENSITY: f32 = 235.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenderConfig {
    /// Per-cable thickness factor is drawn from `1 ± jitter`.
    pub thickness_jitter: f64,
    /// Darken the under strand just outside the over strand's edges.
    pub seam: bool,
    pub seam_width: f64,
    pub seam_depth: f32,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig { thickness_jitter: 0.2, seam: true, seam_width: 2.0, seam_depth: 40.0 }
    }
}

/// Rasterize a scene with the default config.
pub fn render(scene: &Scene, seed: u64) -> GrayImage {
    render_with(scene, seed, &RenderConfig::default())
}

/// Anti-aliased coverage of a stroke of radius `r` at centerline distance `d`.
fn coverage(d: f64, r: f64) -> f32 {
    (r + 0.5 - d).clamp(0.0, 1.0) as f32
}

/// Distance field of a polyline, written into `field` inside the bounding
/// box grown by `reach`.
fn stamp_distance(field: &mut [f64], width: usize, height: usize, pts: &[Point], reach: f64) {
    let segs: Vec<(Point, Point)> = match pts.len() {
        0 => return,
        1 => vec![(pts[0], pts[0])],
        _ => pts.windows(2).map(|w| (w[0], w[1])).collect(),
    };
    for (a, b) in segs {
        let x0 = (a.x.min(b.x) - reach).floor().max(0.0) as usize;
        let y0 = (a.y.min(b.y) - reach).floor().max(0.0) as usize;
        let x1 = ((a.x.max(b.x) + reach).ceil() as i64).min(width as i64 - 1);
        let y1 = ((a.y.max(b.y) + reach).ceil() as i64).min(height as i64 - 1);
        if x1 < 0 || y1 < 0 {
            continue;
        }
        for y in y0..=y1 as usize {
            for x in x0..=x1 as usize {
                let d = dist_to_segment(Point::new(x as f64, y as f64), a, b);
                let slot = &mut field[y * width + x];
                if d < *slot {
                    *slot = d;
                }
            }
        }
    }
}

/// Rasterize a scene: white anti-aliased strokes on black, thickness
/// jittered per cable. Strokes composite by maximum, so an over strand is
/// never broken; with the seam enabled the under strand is darkened in a
/// thin band along the over strand's edges at each crossing.
pub fn render_with(scene: &Scene, seed: u64, cfg: &RenderConfig) -> GrayImage {
    let (w, h) = (scene.canvas.width, scene.canvas.height);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let radii: Vec<f64> = scene
        .cables
        .iter()
        .map(|c| {
            let j = if cfg.thickness_jitter > 0.0 { rng.gen_range(-cfg.thickness_jitter..=cfg.thickness_jitter) } else { 0.0 };
            0.5 * c.thickness * (1.0 + j)
        })
        .collect();
    let mut img = vec![0f32; w * h];
    let mut field = vec![f64::INFINITY; w * h];
    for (cable, &r) in scene.cables.iter().zip(&radii) {
        field.fill(f64::INFINITY);
        stamp_distance(&mut field, w, h, cable.points(), r + 1.0);
        for (px, d) in img.iter_mut().zip(&field) {
            *px = px.max(STROKE_INTENSITY * coverage(*d, r));
        }
    }
    if cfg.seam && !scene.crossings_gt.is_empty() {
        apply_seams(scene, &radii, cfg, &mut img);
    }
    GrayImage::from_f32(w, h, &img)
}

/// Local stretch of a strand around arc length `arc`.
fn strand_window(scene: &Scene, cable: usize, arc: f64, half: f64) -> Option<(Vec<Point>, usize)> {
    let idx = scene.cables.iter().position(|c| c.id == cable)?;
    let line = Polyline::new(scene.cables[idx].points().to_vec());
    let (lo, hi) = ((arc - half).max(0.0), (arc + half).min(line.length()));
    let steps = ((hi - lo) / 0.5).ceil().max(1.0) as usize;
    Some(((0..=steps).map(|k| line.point_at(lo + (hi - lo) * k as f64 / steps as f64)).collect(), idx))
}

fn apply_seams(scene: &Scene, radii: &[f64], cfg: &RenderConfig, img: &mut [f32]) {
    let (w, h) = (scene.canvas.width, scene.canvas.height);
    let mut cores: Vec<(Vec<Point>, f64)> = Vec::new();
    for c in &scene.crossings_gt {
        let (over, under) = (c.over_strand(), c.under_strand());
        let r_max = radii.iter().cloned().fold(0.0, f64::max);
        let half = 2.0 * r_max + cfg.seam_width + 8.0;
        let (Some((o_pts, oi)), Some((u_pts, ui))) =
            (strand_window(scene, over.cable, over.arc, half), strand_window(scene, under.cable, under.arc, half))
        else {
            continue;
        };
        let (ro, ru) = (radii[oi], radii[ui]);
        let box_half = (ro + ru + cfg.seam_width + 2.0).ceil() as i64;
        let (cx, cy) = (c.position.x.round() as i64, c.position.y.round() as i64);
        for y in (cy - box_half).max(0)..=(cy + box_half).min(h as i64 - 1) {
            for x in (cx - box_half).max(0)..=(cx + box_half).min(w as i64 - 1) {
                let p = Point::new(x as f64, y as f64);
                let d_o = min_dist(&o_pts, p);
                let d_u = min_dist(&u_pts, p);
                if d_u <= ru && d_o > ro - 0.5 && d_o <= ro + cfg.seam_width {
                    let slot = &mut img[y as usize * w + x as usize];
                    *slot = (*slot - cfg.seam_depth).max(0.0);
                }
            }
        }
        cores.push((o_pts, ro));
    }
    // Seams from neighboring crossings must not cut into an over stroke.
    for (pts, r) in cores {
        let reach = r + 1.0;
        let rect = crate::geometry::Rect::bounding(&pts).expect("window has points");
        let x0 = (rect.min.x - reach).floor().max(0.0) as usize;
        let y0 = (rect.min.y - reach).floor().max(0.0) as usize;
        let x1 = ((rect.max.x + reach).ceil() as usize).min(w - 1);
        let y1 = ((rect.max.y + reach).ceil() as usize).min(h - 1);
        for y in y0..=y1 {
            for x in x0..=x1 {
                let d = min_dist(&pts, Point::new(x as f64, y as f64));
                let slot = &mut img[y * w + x];
                *slot = slot.max(STROKE_INTENSITY * coverage(d + 0.5, r));
            }
        }
    }
}

fn min_dist(pts: &[Point], p: Point) -> f64 {
    pts.windows(2).map(|s| dist_to_segment(p, s[0], s[1])).fold(f64::INFINITY, f64::min)
}
