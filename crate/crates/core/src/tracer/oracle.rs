use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::crop::{NormalizedCrop, CROP_SIZE};
use super::{Predictor, PredictorOutput, TraceError};
use crate::geometry::{Point, Polyline};
use crate::scene_gen::Scene;

/// Corruption applied by the oracle predictor.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OracleNoise {
    /// Perpendicular offset standard deviation, px.
    pub sigma: f64,
    /// Probability of emitting a random cable pixel instead.
    pub p_fail: f64,
}

impl std::str::FromStr for OracleNoise {
    type Err = String;
    /// Parses `"sigma,p_fail"`.
    fn from_str(s: &str) -> Result<Self, String> {
        let (a, b) = s.split_once(',').ok_or_else(|| format!("expected \"sigma,p\", got {s:?}"))?;
        let sigma: f64 = a.trim().parse().map_err(|e| format!("sigma: {e}"))?;
        let p_fail: f64 = b.trim().parse().map_err(|e| format!("p: {e}"))?;
        if sigma < 0.0 || !(0.0..=1.0).contains(&p_fail) {
            return Err(format!("noise out of range: {s}"));
        }
        Ok(OracleNoise { sigma, p_fail })
    }
}

/// Where the oracle placed the context on the ground truth.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Localization {
    pub cable: usize,
    pub arc: f64,
    /// +1 when tracing toward increasing arc length.
    pub direction: f64,
    /// Mean context distance to the matched stretch of path.
    pub cost: f64,
}

/// Next-point predictor that reads the ground-truth scene.
#[derive(Clone, Debug)]
pub struct OraclePredictor {
    cables: Vec<(usize, Polyline, f64)>,
    noise: OracleNoise,
    step: f64,
    rng: ChaCha8Rng,
    last: Option<Localization>,
    /// Largest mean context distance accepted when localizing.
    pub max_localization_error: f64,
}

impl OraclePredictor {
    pub fn new(scene: &Scene, noise: OracleNoise, seed: u64) -> Self {
        OraclePredictor {
            cables: scene.cables.iter().map(|c| (c.id, Polyline::new(c.points().to_vec()), c.thickness)).collect(),
            noise,
            step: 12.0,
            rng: ChaCha8Rng::seed_from_u64(seed),
            last: None,
            max_localization_error: 6.0,
        }
    }

    /// Find the cable, arc position and direction that best explain the
    /// context points.
    pub fn localize(&self, context: &[Point]) -> Result<Localization, TraceError> {
        let newest = *context.last().expect("non-empty context");
        let reach = self.step * context.len() as f64 + self.step;
        let mut best: Option<(f64, Localization)> = None;
        for (id, line, _) in &self.cables {
            for proj in line.projections(newest, self.max_localization_error) {
                for direction in [1.0, -1.0] {
                    let (lo, hi) = if direction > 0.0 { (proj.arc - reach, proj.arc) } else { (proj.arc, proj.arc + reach) };
                    let cost = context
                        .iter()
                        .map(|p| line.project_in_window(*p, lo, hi).map_or(f64::INFINITY, |q| q.distance))
                        .sum::<f64>()
                        / context.len() as f64;
                    // context points must run toward the newest one
                    let ordered = context.windows(2).all(|w| {
                        let a = line.project_in_window(w[0], lo, hi).map_or(0.0, |q| q.arc);
                        let b = line.project_in_window(w[1], lo, hi).map_or(0.0, |q| q.arc);
                        (b - a) * direction >= -1.0
                    });
                    if !ordered {
                        continue;
                    }
                    let mut key = cost;
                    if let Some(prev) = self.last {
                        if prev.cable != *id || prev.direction != direction {
                            key += 0.25;
                        }
                    }
                    if best.map_or(true, |b| key < b.0) {
                        best = Some((key, Localization { cable: *id, arc: proj.arc, direction, cost }));
                    }
                }
            }
        }
        match best {
            Some((_, b)) if b.cost <= self.max_localization_error => Ok(b),
            _ => Err(TraceError::Localization { x: newest.x, y: newest.y }),
        }
    }

    fn line(&self, cable: usize) -> &Polyline {
        &self.cables.iter().find(|c| c.0 == cable).expect("localized cable exists").1
    }

    /// The next point in source coordinates.
    pub fn next_point(&mut self, context: &[Point]) -> Result<Point, TraceError> {
        let loc = self.localize(context)?;
        self.last = Some(loc);
        let newest = *context.last().unwrap();
        if self.noise.p_fail > 0.0 && self.rng.gen_bool(self.noise.p_fail) {
            if let Some(p) = self.random_cable_pixel(newest) {
                return Ok(p);
            }
        }
        let line = self.line(loc.cable);
        let s = (loc.arc + loc.direction * self.step).clamp(0.0, line.length());
        let mut target = line.point_at(s);
        if self.noise.sigma > 0.0 {
            let n = line.tangent_at(s).left_normal();
            let off = Normal::new(0.0, self.noise.sigma).expect("finite sigma").sample(&mut self.rng);
            target += n * off;
        }
        Ok(target)
    }

    /// A uniformly drawn point on some cable stroke, one step away.
    fn random_cable_pixel(&mut self, around: Point) -> Option<Point> {
        for _ in 0..400 {
            let r = self.rng.gen_range(self.step - 3.0..=self.step + 3.0);
            let a = self.rng.gen_range(0.0..std::f64::consts::TAU);
            let p = around + Point::from_angle(a) * r;
            if self.cables.iter().any(|(_, line, t)| line.distance(p) <= 0.5 * t) {
                return Some(p);
            }
        }
        None
    }
}

/// Unit mass at `target`, split bilinearly over the four nearest crop pixels.
pub fn splat(crop: &NormalizedCrop, target: Point) -> PredictorOutput {
    let mut heatmap = vec![0f32; CROP_SIZE * CROP_SIZE];
    let q = crop.to_crop(target);
    let (x0, y0) = (q.x.floor(), q.y.floor());
    let (fx, fy) = (q.x - x0, q.y - y0);
    for (dx, dy, w) in [(0.0, 0.0, (1.0 - fx) * (1.0 - fy)), (1.0, 0.0, fx * (1.0 - fy)), (0.0, 1.0, (1.0 - fx) * fy), (1.0, 1.0, fx * fy)] {
        let (c, r) = (x0 + dx, y0 + dy);
        if c >= 0.0 && r >= 0.0 && c < CROP_SIZE as f64 && r < CROP_SIZE as f64 {
            heatmap[r as usize * CROP_SIZE + c as usize] += w as f32;
        }
    }
    PredictorOutput { heatmap }
}

impl Predictor for OraclePredictor {
    fn predict(&mut self, crop: &NormalizedCrop) -> Result<PredictorOutput, TraceError> {
        let target = self.next_point(&crop.context)?;
        Ok(splat(crop, target))
    }

    fn name(&self) -> &'static str {
        "oracle"
    }
}
