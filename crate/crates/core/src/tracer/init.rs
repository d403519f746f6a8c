use crate::geometry::Point;
use crate::image_io::GrayImage;

use super::{TraceConfig, TraceError};

/// Mean intensity along the chord from `from` in direction `dir`.
fn chord_mean(image: &GrayImage, from: Point, dir: Point, length: f64) -> f32 {
    let n = length.round().max(1.0) as usize;
    (1..=n).map(|t| image.sample(from + dir * (t as f64 * length / n as f64), 0.0)).sum::<f32>() / n as f32
}

/// Contiguous runs of bright directions on the 1° circle, as center angles
/// in degrees.
fn bright_lobes(scores: &[f32], threshold: f32) -> Vec<f64> {
    let n = scores.len();
    let above: Vec<bool> = scores.iter().map(|s| *s >= threshold).collect();
    if above.iter().all(|a| *a) {
        return Vec::new();
    }
    // start scanning just after a dark direction so runs do not wrap
    let start = (0..n).find(|&i| !above[i]).expect("some direction is dark");
    let mut lobes = Vec::new();
    let mut run: Option<(usize, usize)> = None;
    for k in 1..=n {
        let i = (start + k) % n;
        if above[i] {
            run = Some(match run {
                Some((a, len)) => (a, len + 1),
                None => (start + k, 1),
            });
        } else if let Some((a, len)) = run.take() {
            lobes.push(((a as f64 + (len - 1) as f64 / 2.0) % n as f64) * 360.0 / n as f64);
        }
    }
    lobes
}

/// Shift `p` across the ridge to the intensity centroid along `normal`.
fn refine_across(image: &GrayImage, p: Point, normal: Point, threshold: f32) -> Point {
    let (mut wsum, mut acc) = (0.0f64, 0.0f64);
    for k in -12..=12 {
        let off = k as f64 * 0.5;
        let v = image.sample(p + normal * off, 0.0) - threshold;
        if v > 0.0 {
            wsum += v as f64;
            acc += v as f64 * off;
        }
    }
    if wsum > 0.0 {
        p + normal * (acc / wsum)
    } else {
        p
    }
}

/// Distance from `p` to the nearest image border.
fn border_distance(image: &GrayImage, p: Point) -> f64 {
    let (w, h) = ((image.width() - 1) as f64, (image.height() - 1) as f64);
    p.x.min(p.y).min(w - p.x).min(h - p.y)
}

/// Analytic start of a trace: the start point plus three points about one
/// step apart along the brightest ridge leaving it.
pub fn init_trace(
    image: &GrayImage,
    start: Point,
    endpoint_hint: Option<Point>,
    cfg: &TraceConfig,
) -> Result<Vec<Point>, TraceError> {
    let thr = cfg.background_threshold;
    let near_cable = (-12i64..=12).any(|dy| {
        (-12i64..=12).any(|dx| {
            (dx * dx + dy * dy) as f64 <= 144.0
                && image.get_or(start.x.round() as i64 + dx, start.y.round() as i64 + dy, 0.0) > thr
        })
    });
    if !near_cable {
        return Err(TraceError::BadStart { x: start.x, y: start.y });
    }
    let step = cfg.step;
    let scores: Vec<f32> =
        (0..360).map(|d| chord_mean(image, start, Point::from_angle((d as f64).to_radians()), step)).collect();
    let lobes = bright_lobes(&scores, thr);
    let dir = match lobes.len() {
        0 => {
            // all directions bright or all dark: take the single best chord
            let best = (0..360).fold(0, |b, d| if scores[d] > scores[b] { d } else { b });
            Point::from_angle((best as f64).to_radians())
        }
        1 => Point::from_angle(lobes[0].to_radians()),
        _ => {
            let dirs: Vec<Point> = lobes.iter().map(|a| Point::from_angle(a.to_radians())).collect();
            let key = |d: &Point| -> f64 {
                match endpoint_hint {
                    Some(h) => d.dot((h - start).normalized()),
                    None => -border_distance(image, start + *d * (3.0 * step)),
                }
            };
            dirs.into_iter().min_by(|a, b| key(a).partial_cmp(&key(b)).unwrap()).expect("two or more lobes")
        }
    };

    let mut pts = vec![start];
    let mut heading = dir;
    for _ in 0..3 {
        let last = *pts.last().unwrap();
        // best chord within ±45° of the current heading
        let base = heading.angle().to_degrees().round() as i64;
        let best = (-45..=45)
            .map(|k| base + k)
            .max_by(|a, b| {
                let sa = chord_mean(image, last, Point::from_angle((*a as f64).to_radians()), step);
                let sb = chord_mean(image, last, Point::from_angle((*b as f64).to_radians()), step);
                // prefer the straighter direction among equals
                sa.partial_cmp(&sb).unwrap().then((b - base).abs().cmp(&(a - base).abs()))
            })
            .expect("non-empty range");
        let d = Point::from_angle((best as f64).to_radians());
        let q = refine_across(image, last + d * step, d.left_normal(), thr);
        let q = last + (q - last).normalized() * step;
        heading = (q - last).normalized();
        pts.push(q);
    }
    Ok(pts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene_gen::{render_with, CablePath, Canvas, Layer, RenderConfig, Scene};

    fn straight_scene() -> GrayImage {
        let cable = CablePath::from_controls(0, vec![Point::new(40.0, 100.0), Point::new(200.0, 100.0)], 6.0);
        let scene = Scene::from_cables(Canvas::new(256, 200), vec![cable], |_| Layer::A).unwrap();
        render_with(&scene, 0, &RenderConfig { thickness_jitter: 0.0, ..Default::default() })
    }

    #[test]
    fn from_endpoint_follows_the_cable() {
        let img = straight_scene();
        let pts = init_trace(&img, Point::new(40.0, 100.0), None, &TraceConfig::default()).unwrap();
        assert_eq!(pts.len(), 4);
        for w in pts.windows(2) {
            assert!((w[0].dist(w[1]) - 12.0).abs() <= 2.0);
        }
        for p in &pts {
            assert!((p.y - 100.0).abs() < 0.5, "{p:?}");
        }
        assert!(pts[3].x > pts[0].x);
    }

    #[test]
    fn background_start_is_rejected() {
        let img = straight_scene();
        assert!(matches!(
            init_trace(&img, Point::new(100.0, 30.0), None, &TraceConfig::default()),
            Err(TraceError::BadStart { .. })
        ));
    }

    #[test]
    fn mid_cable_start_moves_away_from_hint() {
        let img = straight_scene();
        let hint = Point::new(40.0, 100.0);
        let start = Point::new(120.0, 100.0);
        let pts = init_trace(&img, start, Some(hint), &TraceConfig::default()).unwrap();
        assert!((pts[1] - start).dot(hint - start) < 0.0);
        let other = Point::new(200.0, 100.0);
        let pts = init_trace(&img, start, Some(other), &TraceConfig::default()).unwrap();
        assert!((pts[1] - start).dot(other - start) < 0.0);
    }
}
