use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::CrossingObservation;
use crate::geometry::{line_angle, Point, Polyline};
use crate::image_io::GrayImage;
use crate::scene_gen::Scene;

/// Side of the square classifier crop.
pub const CLASSIFIER_CROP: usize = 20;

/// Crossings closer than this to the image border cannot be cropped at an
/// arbitrary rotation.
pub const CLASSIFIER_MARGIN: f64 = 14.0;

/// Rotated crop around one encounter with its segment of interest.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassifierInput {
    /// Crossing position in source coordinates; crop pixel (10, 10).
    pub center: Point,
    /// Rotation that maps crop axes to source axes; the segment of interest
    /// runs along +x in the crop.
    pub rotation: f64,
    /// Trace points `i-1 ..= i+2` around the encounter, source coordinates.
    pub segment: Vec<Point>,
    pub crop: Vec<f32>,
    /// 1 on the rasterized segment of interest.
    pub segment_channel: Vec<f32>,
    /// Gaussian bump (sigma 2) at the crossing.
    pub position_channel: Vec<f32>,
}

impl ClassifierInput {
    pub fn to_source(&self, c: Point) -> Point {
        let half = (CLASSIFIER_CROP / 2) as f64;
        self.center + (c - Point::new(half, half)).rotated(self.rotation)
    }

    pub fn to_crop(&self, p: Point) -> Point {
        let half = (CLASSIFIER_CROP / 2) as f64;
        (p - self.center).rotated(-self.rotation) + Point::new(half, half)
    }

    pub fn at(&self, col: usize, row: usize) -> f32 {
        self.crop[row * CLASSIFIER_CROP + col]
    }

    /// Direction of the segment of interest in source coordinates.
    pub fn direction(&self) -> Point {
        Point::from_angle(self.rotation)
    }
}

/// Crop for the encounter on trace segment `trace_index`, or `None` when the
/// crossing is too close to the border.
pub fn build_classifier_input(
    image: &GrayImage,
    trace: &[Point],
    trace_index: usize,
    position: Point,
) -> Option<ClassifierInput> {
    let (w, h) = (image.width() as f64, image.height() as f64);
    if position.x < CLASSIFIER_MARGIN
        || position.y < CLASSIFIER_MARGIN
        || position.x > w - 1.0 - CLASSIFIER_MARGIN
        || position.y > h - 1.0 - CLASSIFIER_MARGIN
        || trace.len() < 2
    {
        return None;
    }
    let lo = trace_index.saturating_sub(1);
    let hi = (trace_index + 2).min(trace.len() - 1);
    let segment: Vec<Point> = trace[lo..=hi].to_vec();
    let mut dir = segment[segment.len() - 1] - segment[0];
    if dir.norm() < 1e-9 {
        let i = trace_index.min(trace.len() - 2);
        dir = trace[i + 1] - trace[i];
    }
    let rotation = dir.angle();
    let n = CLASSIFIER_CROP;
    let mut input = ClassifierInput {
        center: position,
        rotation,
        segment,
        crop: vec![0.0; n * n],
        segment_channel: vec![0.0; n * n],
        position_channel: vec![0.0; n * n],
    };
    let half = (n / 2) as f64;
    for r in 0..n {
        for c in 0..n {
            let q = Point::new(c as f64, r as f64);
            input.crop[r * n + c] = image.sample(input.to_source(q), 0.0);
            let d2 = (q - Point::new(half, half)).norm().powi(2);
            input.position_channel[r * n + c] = (-d2 / 8.0).exp() as f32;
        }
    }
    let local: Vec<Point> = input.segment.iter().map(|p| input.to_crop(*p)).collect();
    for pair in local.windows(2) {
        let steps = (pair[0].dist(pair[1]) * 2.0).ceil().max(1.0) as usize;
        for k in 0..=steps {
            let p = pair[0].lerp(pair[1], k as f64 / steps as f64);
            let (c, r) = (p.x.round(), p.y.round());
            if c >= 0.0 && r >= 0.0 && c < n as f64 && r < n as f64 {
                input.segment_channel[r as usize * n + c as usize] = 1.0;
            }
        }
    }
    Some(input)
}

/// Over/under scorer for one encounter. Scores at or above the threshold
/// mean the segment of interest is on top; `None` means unclassifiable.
pub trait Classifier {
    fn score(&mut self, input: &ClassifierInput) -> Option<f64>;
    fn name(&self) -> &'static str;
}

/// Score from the brightness profile along the segment of interest. An
/// under strand is darkened where it meets the edges of the strand above
/// it, so a dip in the profile near the crossing means "under".
pub fn photometric_score(input: &ClassifierInput) -> f64 {
    let n = CLASSIFIER_CROP;
    let mid = n / 2;
    let profile: Vec<f32> = (1..n)
        .map(|c| (mid - 1..=mid + 1).map(|r| input.at(c, r)).sum::<f32>() / 3.0)
        .collect();
    let smooth: Vec<f32> = (0..profile.len())
        .map(|i| {
            let a = i.saturating_sub(1);
            let b = (i + 1).min(profile.len() - 1);
            profile[a..=b].iter().sum::<f32>() / (b - a + 1) as f32
        })
        .collect();
    // profile index i sits at crop column i + 1
    let central: Vec<f32> = smooth.iter().enumerate().filter(|(i, _)| (*i as i64 + 1 - mid as i64).abs() <= 6).map(|(_, v)| *v).collect();
    let low = central.iter().cloned().fold(f32::INFINITY, f32::min);
    let high = smooth.iter().cloned().fold(f32::NEG_INFINITY, f32::max);
    let dip = (high - low) as f64;
    1.0 / (1.0 + ((dip - 16.0) / 4.0).exp())
}

/// Classifier reading only the image.
#[derive(Clone, Copy, Debug, Default)]
pub struct PhotometricClassifier;

impl Classifier for PhotometricClassifier {
    fn score(&mut self, input: &ClassifierInput) -> Option<f64> {
        Some(photometric_score(input))
    }

    fn name(&self) -> &'static str {
        "photometric"
    }
}

/// Classifier reading the ground truth, with each answer flipped
/// independently with probability `epsilon`. Correct answers draw scores
/// from the full range on their side of the threshold, flipped ones from
/// the half nearest the threshold, so confidence carries information.
#[derive(Clone, Debug)]
pub struct OracleClassifier {
    strands: Vec<(usize, Polyline)>,
    crossings: Vec<crate::scene_gen::CrossingGT>,
    epsilon: f64,
    rng: ChaCha8Rng,
    /// Largest distance from a ground-truth crossing still matched.
    pub match_radius: f64,
}

impl OracleClassifier {
    pub fn new(scene: &Scene, epsilon: f64, seed: u64) -> Self {
        OracleClassifier {
            strands: scene.cables.iter().map(|c| (c.id, Polyline::new(c.points().to_vec()))).collect(),
            crossings: scene.crossings_gt.clone(),
            epsilon: epsilon.clamp(0.0, 1.0),
            rng: ChaCha8Rng::seed_from_u64(seed),
            match_radius: 8.0,
        }
    }

    /// True label of the encounter: is the segment of interest on top?
    pub fn truth(&self, input: &ClassifierInput) -> Option<bool> {
        let c = self
            .crossings
            .iter()
            .map(|c| (c.position.dist(input.center), c))
            .filter(|(d, _)| *d <= self.match_radius)
            .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap())?
            .1;
        let dir = input.direction();
        let tangent = |s: crate::scene_gen::StrandRef| {
            let line = &self.strands.iter().find(|(id, _)| *id == s.cable)?.1;
            Some(line_angle(line.tangent_at(s.arc), dir))
        };
        let (over, under) = (tangent(c.over_strand())?, tangent(c.under_strand())?);
        Some(over <= under)
    }
}

impl Classifier for OracleClassifier {
    fn score(&mut self, input: &ClassifierInput) -> Option<f64> {
        let truth = self.truth(input)?;
        let flip = self.epsilon > 0.0 && self.rng.gen_bool(self.epsilon);
        let over = truth != flip;
        let m = if flip { 0.5 } else { 1.0 };
        let t = super::OVER_THRESHOLD;
        let u: f64 = self.rng.gen();
        Some(if over { t + (1.0 - t) * m * u } else { t - t * m * u })
    }

    fn name(&self) -> &'static str {
        "oracle"
    }
}

/// Score every encounter of every crossing in place, first encounters
/// before second ones within a crossing.
pub fn classify_encounters(
    classifier: &mut dyn Classifier,
    image: &GrayImage,
    trace: &[Point],
    crossings: &mut [CrossingObservation],
) {
    for c in crossings.iter_mut() {
        let position = c.position;
        let mut run = |e: &mut super::Encounter| {
            let s = build_classifier_input(image, trace, e.trace_index, position).and_then(|i| classifier.score(&i));
            e.set_score(s);
        };
        run(&mut c.first);
        if let Some(second) = c.second.as_mut() {
            run(second);
        }
    }
}
