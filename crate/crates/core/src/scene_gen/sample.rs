use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CablePath, Canvas, SceneError};
use crate::geometry::{Point, Polyline};

/// How the anchor points of a random cable are drawn.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleMethod {
    /// Each new anchor lands outside an exclusion radius around every
    /// earlier anchor.
    ExclusionRadius,
    /// Part of the path is doubled back on itself at a small lateral offset.
    NearParallel,
    /// A run of anchors is confined to a disc, giving a dense tangle there.
    SpatialConstraint,
}

impl std::str::FromStr for SampleMethod {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "exclusion_radius" => Ok(SampleMethod::ExclusionRadius),
            "near_parallel" => Ok(SampleMethod::NearParallel),
            "spatial_constraint" => Ok(SampleMethod::SpatialConstraint),
            other => Err(format!("unknown sampling method {other}")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleParams {
    pub id: usize,
    pub anchors: usize,
    pub step_min: f64,
    pub step_max: f64,
    /// Largest heading change between consecutive anchors, degrees.
    pub max_turn_deg: f64,
    pub exclusion_radius: f64,
    pub parallel_offset: f64,
    /// Arc length of the duplicated subpath.
    pub parallel_length: f64,
    /// Disc for [`SampleMethod::SpatialConstraint`]; random when `None`.
    pub region_center: Option<Point>,
    pub region_radius: f64,
    pub region_anchors: usize,
    pub margin: f64,
    pub thickness: f64,
    /// Total rejection-sampling attempts before giving up.
    pub attempts: usize,
}

impl Default for SampleParams {
    fn default() -> Self {
        SampleParams {
            id: 0,
            anchors: 6,
            step_min: 50.0,
            step_max: 90.0,
            max_turn_deg: 100.0,
            exclusion_radius: 30.0,
            parallel_offset: 12.0,
            parallel_length: 96.0,
            region_center: None,
            region_radius: 70.0,
            region_anchors: 5,
            margin: 24.0,
            thickness: 6.0,
            attempts: 4000,
        }
    }
}

const STUCK_TRIES: usize = 200;

struct Walker<'a> {
    rng: ChaCha8Rng,
    canvas: Canvas,
    params: &'a SampleParams,
    budget: usize,
}

impl Walker<'_> {
    fn spend(&mut self) -> Result<(), SceneError> {
        if self.budget == 0 {
            return Err(SceneError::BudgetExhausted { attempts: self.params.attempts });
        }
        self.budget -= 1;
        Ok(())
    }

    fn inside(&self, p: Point) -> bool {
        let m = self.params.margin;
        p.x >= m && p.y >= m && p.x <= self.canvas.width as f64 - 1.0 - m && p.y <= self.canvas.height as f64 - 1.0 - m
    }

    fn start(&mut self) -> Result<Point, SceneError> {
        loop {
            self.spend()?;
            let p = Point::new(
                self.rng.gen_range(0.0..self.canvas.width as f64),
                self.rng.gen_range(0.0..self.canvas.height as f64),
            );
            if self.inside(p) {
                return Ok(p);
            }
        }
    }

    /// Extend `anchors` by `count` points, each outside `radius` of all
    /// points in `anchors` (and optionally inside a disc). Returns false when
    /// the walk is boxed in and should restart.
    fn walk(
        &mut self,
        anchors: &mut Vec<Point>,
        count: usize,
        radius: f64,
        disc: Option<(Point, f64)>,
    ) -> Result<bool, SceneError> {
        for _ in 0..count {
            let mut tries = 0;
            let last = *anchors.last().expect("walk needs a start anchor");
            let heading = if anchors.len() >= 2 { Some((last - anchors[anchors.len() - 2]).angle()) } else { None };
            loop {
                self.spend()?;
                tries += 1;
                if tries > STUCK_TRIES {
                    return Ok(false);
                }
                let cand = match disc {
                    Some((c, r)) => {
                        let a = self.rng.gen_range(0.0..2.0 * PI);
                        let rr = r * self.rng.gen_range(0.0f64..1.0).sqrt();
                        c + Point::from_angle(a) * rr
                    }
                    None => {
                        let turn = self.params.max_turn_deg.to_radians();
                        let angle = match heading {
                            Some(h) => h + self.rng.gen_range(-turn..=turn),
                            None => self.rng.gen_range(0.0..2.0 * PI),
                        };
                        let step = self.rng.gen_range(self.params.step_min..=self.params.step_max);
                        last + Point::from_angle(angle) * step
                    }
                };
                if self.inside(cand) && anchors.iter().all(|a| a.dist(cand) >= radius) {
                    anchors.push(cand);
                    break;
                }
            }
        }
        Ok(true)
    }
}

/// Sample one random cable as a dense polyline through a C¹ cubic Bezier
/// chain.
pub fn sample_cable(seed: u64, method: SampleMethod, canvas: Canvas, params: &SampleParams) -> Result<CablePath, SceneError> {
    let mut w = Walker { rng: ChaCha8Rng::seed_from_u64(seed), canvas, params, budget: params.attempts };
    loop {
        let anchors = match method {
            SampleMethod::ExclusionRadius => exclusion_anchors(&mut w)?,
            SampleMethod::NearParallel => near_parallel_anchors(&mut w)?,
            SampleMethod::SpatialConstraint => constrained_anchors(&mut w)?,
        };
        let Some(anchors) = anchors else { continue };
        let cable = CablePath::from_controls(params.id, anchors, params.thickness);
        if cable.fits(canvas) {
            return Ok(cable);
        }
        w.spend()?;
    }
}

fn exclusion_anchors(w: &mut Walker) -> Result<Option<Vec<Point>>, SceneError> {
    let mut anchors = vec![w.start()?];
    let n = w.params.anchors.max(2) - 1;
    let ok = w.walk(&mut anchors, n, w.params.exclusion_radius, None)?;
    Ok(ok.then_some(anchors))
}

fn near_parallel_anchors(w: &mut Walker) -> Result<Option<Vec<Point>>, SceneError> {
    let p = *w.params;
    let mut anchors = vec![w.start()?];
    if !w.walk(&mut anchors, p.anchors.max(4) - 1, p.exclusion_radius, None)? {
        return Ok(None);
    }
    let base = Polyline::new(crate::geometry::smooth_path(&anchors, 1.0));
    let total = base.length();
    let run = p.parallel_length.min(0.8 * total);
    let side = if w.rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    let spacing = 12.0;
    let steps = (run / spacing).floor() as usize;
    let offset_at = |s: f64, side: f64| base.point_at(s) + base.tangent_at(s).left_normal() * (p.parallel_offset * side);
    let mut chosen = None;
    for sd in [side, -side] {
        let leg: Vec<Point> = (0..=steps).map(|k| offset_at(total - k as f64 * spacing, sd)).collect();
        if leg.iter().all(|q| w.inside(*q)) {
            chosen = Some((sd, leg));
            break;
        }
    }
    let (sd, leg) = match chosen {
        Some(c) => c,
        None => return Ok(None),
    };
    // Hairpin at the far end, then run back alongside the path.
    let end = base.point_at(total);
    let t = base.tangent_at(total);
    let apex = end + t * (1.5 * p.parallel_offset) + t.left_normal() * (0.5 * p.parallel_offset * sd);
    anchors.push(apex);
    anchors.extend(leg.iter().copied());
    // Leave the parallel run and wander off; only anchors off the run count
    // toward the exclusion test.
    let mut tail = vec![leg[leg.len() - 2], *leg.last().unwrap()];
    let away = &anchors[..anchors.len() - leg.len() - 1];
    if !w.walk(&mut tail, 2, 0.0, None)? {
        return Ok(None);
    }
    if tail[2..].iter().any(|q| away.iter().chain(leg.iter()).any(|a| a.dist(*q) < p.exclusion_radius)) {
        return Ok(None);
    }
    anchors.extend_from_slice(&tail[2..]);
    Ok(Some(anchors))
}

fn constrained_anchors(w: &mut Walker) -> Result<Option<Vec<Point>>, SceneError> {
    let p = *w.params;
    let r = p.region_radius;
    let center = match p.region_center {
        Some(c) => c,
        None => {
            let lo = r + p.margin;
            let (wx, wy) = (w.canvas.width as f64 - 1.0 - lo, w.canvas.height as f64 - 1.0 - lo);
            if wx <= lo || wy <= lo {
                return Err(SceneError::BudgetExhausted { attempts: p.attempts });
            }
            Point::new(w.rng.gen_range(lo..wx), w.rng.gen_range(lo..wy))
        }
    };
    // lead-in from outside the disc
    let lead = loop {
        w.spend()?;
        let a = w.rng.gen_range(0.0..2.0 * PI);
        let q = center + Point::from_angle(a) * (r + w.rng.gen_range(40.0..120.0));
        if w.inside(q) {
            break q;
        }
    };
    let mut anchors = vec![lead];
    let ok = w.walk(&mut anchors, p.region_anchors, (0.5 * r).min(p.exclusion_radius), Some((center, r)))?
        && w.walk(&mut anchors, 2, p.exclusion_radius, None)?;
    Ok(ok.then_some(anchors))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exclusion_radius_keeps_anchors_apart() {
        let params = SampleParams { exclusion_radius: 30.0, ..Default::default() };
        let cable = sample_cable(1, SampleMethod::ExclusionRadius, Canvas::new(512, 512), &params).unwrap();
        let a = &cable.control_points;
        for i in 0..a.len() {
            for j in i + 1..a.len() {
                assert!(a[i].dist(a[j]) >= 30.0, "anchors {i} and {j} too close");
            }
        }
        assert!(cable.fits(Canvas::new(512, 512)));
        assert!(cable.points().windows(2).all(|w| w[0].dist(w[1]) <= 2.0));
    }

    #[test]
    fn degenerate_canvas_exhausts_budget() {
        for m in [SampleMethod::ExclusionRadius, SampleMethod::NearParallel, SampleMethod::SpatialConstraint] {
            let r = sample_cable(1, m, Canvas::new(1, 1), &SampleParams::default());
            assert!(matches!(r, Err(SceneError::BudgetExhausted { .. })), "{m:?}");
        }
    }

    #[test]
    fn spatial_constraint_puts_a_run_inside_the_region() {
        let center = Point::new(256.0, 256.0);
        let params = SampleParams { region_center: Some(center), region_radius: 60.0, ..Default::default() };
        let cable = sample_cable(4, SampleMethod::SpatialConstraint, Canvas::default(), &params).unwrap();
        let inside = cable.control_points.iter().filter(|a| a.dist(center) <= 60.0).count();
        assert!(inside >= params.region_anchors);
    }

    #[test]
    fn same_seed_same_cable() {
        let p = SampleParams::default();
        for m in [SampleMethod::ExclusionRadius, SampleMethod::NearParallel, SampleMethod::SpatialConstraint] {
            assert_eq!(
                sample_cable(9, m, Canvas::default(), &p).unwrap(),
                sample_cable(9, m, Canvas::default(), &p).unwrap()
            );
        }
    }
}
