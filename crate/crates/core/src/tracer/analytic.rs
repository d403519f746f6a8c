use serde::{Deserialize, Serialize};

use super::crop::{NormalizedCrop, CROP_SIZE};
use super::{Predictor, PredictorOutput, TraceError};
use crate::geometry::Point;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalyticWeights {
    pub w_angle: f64,
    pub w_cov: f64,
    /// Subtracted from candidates whose own pixel is background.
    pub background_penalty: f64,
    pub background_threshold: f32,
    /// Small preference for the nominal step length.
    pub w_radius: f64,
    pub min_radius: f64,
    pub max_radius: f64,
    pub nominal_radius: f64,
    /// Candidate angles span ±`max_turn_deg` in `angle_step_deg` steps.
    pub max_turn_deg: f64,
    pub angle_step_deg: f64,
}

impl Default for AnalyticWeights {
    fn default() -> Self {
        AnalyticWeights {
            w_angle: 1.0,
            w_cov: 0.5,
            background_penalty: 2.0,
            background_threshold: 100.0,
            w_radius: 0.02,
            min_radius: 8.0,
            max_radius: 16.0,
            nominal_radius: 12.0,
            max_turn_deg: 90.0,
            angle_step_deg: 3.0,
        }
    }
}

/// One scored candidate, in crop coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Candidate {
    pub position: Point,
    pub angle_deg: f64,
    pub radius: f64,
    pub score: f64,
}

/// Score every candidate around the crop center: straightness, mean
/// intensity along the chord, a background penalty, and a mild pull toward
/// the nominal step length.
pub fn analytic_candidates(crop: &NormalizedCrop, w: &AnalyticWeights) -> Vec<Candidate> {
    let center = Point::new((CROP_SIZE / 2) as f64, (CROP_SIZE / 2) as f64);
    let mut out = Vec::new();
    let n_ang = (2.0 * w.max_turn_deg / w.angle_step_deg).round() as i64;
    let mut radius = w.min_radius;
    while radius <= w.max_radius + 1e-9 {
        for k in 0..=n_ang {
            let angle_deg = -w.max_turn_deg + k as f64 * w.angle_step_deg;
            let dir = Point::from_angle(angle_deg.to_radians());
            let position = center + dir * radius;
            let n = radius.round() as usize;
            let chord = (1..=n).map(|t| crop.sample(center + dir * (t as f64 * radius / n as f64))).sum::<f32>()
                / n as f32;
            let mut score = w.w_angle * angle_deg.to_radians().cos() + w.w_cov * (chord as f64 / 255.0)
                - w.w_radius * (radius - w.nominal_radius).abs() / 4.0;
            if crop.sample(position) < w.background_threshold {
                score -= w.background_penalty;
            }
            out.push(Candidate { position, angle_deg, radius, score });
        }
        radius += 2.0;
    }
    out
}

/// Hand-tuned baseline predictor standing in for a learned tracer.
#[derive(Clone, Debug, Default)]
pub struct AnalyticPredictor {
    pub weights: AnalyticWeights,
}

impl AnalyticPredictor {
    pub fn new(weights: AnalyticWeights) -> Self {
        AnalyticPredictor { weights }
    }
}

/// Heatmap from candidate scores; non-positive scores leave zeros.
pub fn analytic_predict(crop: &NormalizedCrop, w: &AnalyticWeights) -> PredictorOutput {
    let mut heatmap = vec![0f32; CROP_SIZE * CROP_SIZE];
    for c in analytic_candidates(crop, w) {
        let (col, row) = (c.position.x.round() as usize, c.position.y.round() as usize);
        let slot = &mut heatmap[row * CROP_SIZE + col];
        *slot = slot.max(c.score.max(0.0) as f32);
    }
    PredictorOutput { heatmap }
}

impl Predictor for AnalyticPredictor {
    fn predict(&mut self, crop: &NormalizedCrop) -> Result<PredictorOutput, TraceError> {
        Ok(analytic_predict(crop, &self.weights))
    }

    fn name(&self) -> &'static str {
        "analytic"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tracer::argmax;

    fn crop_with(f: impl Fn(Point) -> bool) -> NormalizedCrop {
        let mut crop = vec![0f32; CROP_SIZE * CROP_SIZE];
        for r in 0..CROP_SIZE {
            for c in 0..CROP_SIZE {
                if f(Point::new(c as f64, r as f64)) {
                    crop[r * CROP_SIZE + c] = 230.0;
                }
            }
        }
        NormalizedCrop {
            crop,
            rotation: 0.0,
            center: Point::new(32.0, 32.0),
            context_channel: vec![0.0; CROP_SIZE * CROP_SIZE],
            context: vec![Point::new(20.0, 32.0), Point::new(32.0, 32.0)],
        }
    }

    fn angle_of_argmax(out: &PredictorOutput) -> f64 {
        let (col, row) = argmax(&out.heatmap).unwrap();
        (row as f64 - 32.0).atan2(col as f64 - 32.0).to_degrees()
    }

    #[test]
    fn straight_ridge_keeps_heading() {
        let crop = crop_with(|p| (p.y - 32.0).abs() <= 3.0);
        let a = angle_of_argmax(&analytic_predict(&crop, &AnalyticWeights::default()));
        assert!(a.abs() <= 15.0, "{a}");
    }

    #[test]
    fn fork_prefers_the_straighter_branch() {
        // straight branch ahead and a branch turning 45° downward
        let crop = crop_with(|p| {
            let d = p - Point::new(32.0, 32.0);
            let straight = d.y.abs() <= 3.0;
            let branch = d.x >= 0.0 && (d.y - d.x).abs() <= 3.0 * std::f64::consts::SQRT_2;
            straight || branch
        });
        let a = angle_of_argmax(&analytic_predict(&crop, &AnalyticWeights::default()));
        assert!(a.abs() < 20.0, "{a}");
    }

    #[test]
    fn background_crop_scores_below_the_penalty_floor() {
        let crop = crop_with(|_| false);
        let w = AnalyticWeights::default();
        let floor = w.w_angle + w.w_cov - w.background_penalty;
        assert!(analytic_candidates(&crop, &w).iter().all(|c| c.score <= floor));
        assert!(analytic_predict(&crop, &w).heatmap.iter().all(|v| *v == 0.0));
    }
}
