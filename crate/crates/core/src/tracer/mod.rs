//! Autoregressive cable tracing.
//!
//! A trace starts with a short analytic prefix ([`init_trace`]), then
//! repeatedly crops a rotation-normalized window around the newest point
//! ([`normalize_crop`]), asks a [`Predictor`] for a heatmap, and steps to the
//! heatmap's argmax until an endpoint, the workspace edge, a retrace or the
//! step budget stops it.

mod analytic;
mod crop;
mod init;
mod oracle;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{line_angle, Point, Polyline, Rect};
use crate::image_io::GrayImage;

pub use analytic::{analytic_candidates, analytic_predict, AnalyticPredictor, AnalyticWeights, Candidate};
pub use crop::{normalize_crop, NormalizedCrop, CROP_BACKGROUND, CROP_SIZE};
pub use init::init_trace;
pub use oracle::{splat, Localization, OracleNoise, OraclePredictor};

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("no cable pixels within 12 px of start ({x:.1}, {y:.1})")]
    BadStart { x: f64, y: f64 },
    #[error("predictor returned an all-zero heatmap after {} points", partial.points.len())]
    PredictorFailure { partial: Box<Trace> },
    #[error("predictor stepped {step:.1} px, outside [8, 16]")]
    StepOutOfRange { step: f64, partial: Box<Trace> },
    #[error("context near ({x:.1}, {y:.1}) is not on any ground-truth cable")]
    Localization { x: f64, y: f64 },
}

impl TraceError {
    /// The trace built before the failure, when there is one.
    pub fn partial(&self) -> Option<&Trace> {
        match self {
            TraceError::PredictorFailure { partial } | TraceError::StepOutOfRange { partial, .. } => Some(partial),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    EndpointReached,
    WorkspaceExit,
    RetraceDetected,
    StepBudget,
}

/// Which stage produced a trace point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Init,
    Predictor,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub points: Vec<Point>,
    pub provenance: Vec<Provenance>,
    pub cable_hint: Option<usize>,
    pub termination: Termination,
}

impl Trace {
    pub fn polyline(&self) -> Polyline {
        Polyline::new(self.points.clone())
    }

    pub fn length(&self) -> f64 {
        crate::geometry::polyline_length(&self.points)
    }

    pub fn rotated_90(&self, height: usize) -> Trace {
        let h = height as f64;
        Trace { points: self.points.iter().map(|p| Point::new(h - 1.0 - p.y, p.x)).collect(), ..self.clone() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RetraceConfig {
    pub window: usize,
    pub radius: f64,
    pub angle_deg: f64,
}

impl Default for RetraceConfig {
    fn default() -> Self {
        RetraceConfig { window: 5, radius: 8.0, angle_deg: 30.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceConfig {
    pub step: f64,
    pub context: usize,
    pub max_steps: usize,
    pub endpoint_radius: f64,
    /// Known cable endpoints; reaching one ends the trace.
    pub endpoints: Vec<Point>,
    /// Defaults to the image bounds.
    pub workspace: Option<Rect>,
    pub retrace: RetraceConfig,
    pub background_threshold: f32,
    /// Refine the argmax cell to the centroid of its 3×3 neighborhood.
    pub subpixel: bool,
    /// For a start in the middle of a cable: the endpoint to move away from.
    pub endpoint_hint: Option<Point>,
    pub cable_hint: Option<usize>,
}

impl Default for TraceConfig {
    fn default() -> Self {
        TraceConfig {
            step: 12.0,
            context: 3,
            max_steps: 400,
            endpoint_radius: 10.0,
            endpoints: Vec::new(),
            workspace: None,
            retrace: RetraceConfig::default(),
            background_threshold: 100.0,
            subpixel: true,
            endpoint_hint: None,
            cable_hint: None,
        }
    }
}

/// A 64×64 heatmap in crop coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictorOutput {
    pub heatmap: Vec<f32>,
}

/// Next-point model. Implementations may keep state across calls within one
/// trace; use one instance per trace.
pub trait Predictor {
    fn predict(&mut self, crop: &NormalizedCrop) -> Result<PredictorOutput, TraceError>;
    fn name(&self) -> &'static str;
}

/// Largest heatmap cell as (column, row); ties go to the smallest row-major
/// index. `None` when no cell is positive.
pub fn argmax(heatmap: &[f32]) -> Option<(usize, usize)> {
    let mut best: Option<(usize, f32)> = None;
    for (i, v) in heatmap.iter().enumerate() {
        if *v > 0.0 && best.map_or(true, |b| *v > b.1) {
            best = Some((i, *v));
        }
    }
    best.map(|(i, _)| (i % CROP_SIZE, i / CROP_SIZE))
}

/// Centroid of the 3×3 neighborhood of a heatmap cell.
pub fn refine_peak(heatmap: &[f32], (col, row): (usize, usize)) -> Point {
    let (mut w, mut acc) = (0.0f64, Point::default());
    for r in row.saturating_sub(1)..=(row + 1).min(CROP_SIZE - 1) {
        for c in col.saturating_sub(1)..=(col + 1).min(CROP_SIZE - 1) {
            let v = heatmap[r * CROP_SIZE + c].max(0.0) as f64;
            w += v;
            acc += Point::new(c as f64, r as f64) * v;
        }
    }
    acc * (1.0 / w)
}

/// Whether the newest `window` points all run back over earlier points:
/// each lies within `radius` of a non-adjacent earlier point whose local
/// direction agrees (as an undirected line) within `angle_deg`.
pub fn detect_retrace(points: &[Point], cfg: &RetraceConfig) -> bool {
    let n = points.len();
    if cfg.window == 0 || n < cfg.window + 3 {
        return false;
    }
    let max_angle = cfg.angle_deg.to_radians();
    let dir_at = |i: usize| -> Point {
        if i == 0 {
            points[1] - points[0]
        } else {
            points[i] - points[i - 1]
        }
    };
    (n - cfg.window..n).all(|k| {
        (0..k.saturating_sub(1)).any(|m| {
            points[m].dist(points[k]) <= cfg.radius && line_angle(dir_at(k), dir_at(m.max(1))) <= max_angle
        })
    })
}

/// Trace a cable from `start`.
pub fn trace_cable(
    image: &GrayImage,
    start: Point,
    predictor: &mut dyn Predictor,
    cfg: &TraceConfig,
) -> Result<Trace, TraceError> {
    let prefix = init_trace(image, start, cfg.endpoint_hint, cfg)?;
    let workspace = cfg.workspace.unwrap_or(Rect {
        min: Point::new(0.0, 0.0),
        max: Point::new((image.width() - 1) as f64, (image.height() - 1) as f64),
    });
    let targets: Vec<Point> = cfg.endpoints.iter().copied().filter(|e| e.dist(start) > cfg.endpoint_radius).collect();
    let at_endpoint = |p: Point| targets.iter().any(|e| e.dist(p) <= cfg.endpoint_radius);

    let mut trace = Trace {
        provenance: vec![Provenance::Init; prefix.len()],
        points: prefix,
        cable_hint: cfg.cable_hint,
        termination: Termination::StepBudget,
    };
    if trace.points.iter().skip(1).any(|p| at_endpoint(*p)) {
        trace.termination = Termination::EndpointReached;
        return Ok(trace);
    }
    for _ in 0..cfg.max_steps {
        let k = cfg.context.min(trace.points.len());
        let crop = normalize_crop(image, &trace.points[trace.points.len() - k..]);
        let out = predictor.predict(&crop)?;
        let Some(cell) = argmax(&out.heatmap) else {
            return Err(TraceError::PredictorFailure { partial: Box::new(trace) });
        };
        let local = if cfg.subpixel { refine_peak(&out.heatmap, cell) } else { Point::new(cell.0 as f64, cell.1 as f64) };
        let next = crop.to_source(local);
        let last = *trace.points.last().unwrap();
        let step = next.dist(last);
        if !(8.0..=16.0).contains(&step) {
            return Err(TraceError::StepOutOfRange { step, partial: Box::new(trace) });
        }
        if !workspace.contains(next) {
            trace.termination = Termination::WorkspaceExit;
            return Ok(trace);
        }
        trace.points.push(next);
        trace.provenance.push(Provenance::Predictor);
        if at_endpoint(next) {
            trace.termination = Termination::EndpointReached;
            return Ok(trace);
        }
        if detect_retrace(&trace.points, &cfg.retrace) {
            trace.termination = Termination::RetraceDetected;
            return Ok(trace);
        }
    }
    trace.termination = Termination::StepBudget;
    Ok(trace)
}

/// Fraction of the ground-truth arc length lying within `tolerance` of the
/// trace polyline.
pub fn coverage(trace: &[Point], truth: &[Point], tolerance: f64) -> f64 {
    if truth.len() < 2 {
        return 0.0;
    }
    let line = Polyline::new(trace.to_vec());
    let (mut covered, mut total) = (0.0, 0.0);
    for w in truth.windows(2) {
        let len = w[0].dist(w[1]);
        total += len;
        if line.distance(w[0].lerp(w[1], 0.5)) <= tolerance {
            covered += len;
        }
    }
    if total > 0.0 {
        covered / total
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene_gen::{knot_template, render, CablePath, Canvas, Layer, Pose, Scene, TemplateName};

    fn oracle_trace(scene: &Scene, noise: OracleNoise, seed: u64) -> Trace {
        let img = render(scene, seed);
        let cable = &scene.cables[0];
        let cfg = TraceConfig {
            endpoints: scene.endpoints.iter().flat_map(|e| e.iter().copied()).collect(),
            ..Default::default()
        };
        let mut oracle = OraclePredictor::new(scene, noise, seed);
        trace_cable(&img, cable.endpoints()[0], &mut oracle, &cfg).unwrap()
    }

    #[test]
    fn straight_cable_is_covered() {
        let c = CablePath::from_controls(0, vec![Point::new(30.0, 200.0), Point::new(470.0, 260.0)], 6.0);
        let scene = Scene::from_cables(Canvas::default(), vec![c], |_| Layer::A).unwrap();
        let t = oracle_trace(&scene, OracleNoise::default(), 1);
        assert_eq!(t.termination, Termination::EndpointReached);
        assert!(coverage(&t.points, scene.cables[0].points(), 3.0) >= 0.95);
        for w in t.points.windows(2) {
            assert!((8.0..=16.0).contains(&w[0].dist(w[1])));
        }
        assert_eq!(&t.provenance[..4], &[Provenance::Init; 4]);
    }

    #[test]
    fn step_budget_of_one() {
        let scene = knot_template(TemplateName::Overhand, 40.0, Pose::centered(Canvas::default())).unwrap();
        let img = render(&scene, 0);
        let cfg = TraceConfig { max_steps: 1, ..Default::default() };
        let mut oracle = OraclePredictor::new(&scene, OracleNoise::default(), 0);
        let t = trace_cable(&img, scene.cables[0].endpoints()[0], &mut oracle, &cfg).unwrap();
        assert_eq!(t.points.len(), 5);
        assert_eq!(t.termination, Termination::StepBudget);
    }

    #[test]
    fn templates_are_fully_covered() {
        for name in TemplateName::ALL {
            let scene = knot_template(name, 40.0, Pose::centered(Canvas::default())).unwrap();
            let t = oracle_trace(&scene, OracleNoise::default(), 3);
            assert_eq!(t.termination, Termination::EndpointReached, "{name}");
            let cov = coverage(&t.points, scene.cables[0].points(), 3.0);
            assert!(cov >= 0.95, "{name}: {cov}");
        }
    }

    #[test]
    fn argmax_ties_break_row_major() {
        let mut h = vec![0f32; CROP_SIZE * CROP_SIZE];
        h[5 * CROP_SIZE + 9] = 1.0;
        h[5 * CROP_SIZE + 3] = 1.0;
        h[7 * CROP_SIZE + 1] = 1.0;
        assert_eq!(argmax(&h), Some((3, 5)));
        assert_eq!(argmax(&vec![0f32; CROP_SIZE * CROP_SIZE]), None);
    }

    #[test]
    fn all_zero_heatmap_is_a_predictor_failure() {
        struct Blank;
        impl Predictor for Blank {
            fn predict(&mut self, _: &NormalizedCrop) -> Result<PredictorOutput, TraceError> {
                Ok(PredictorOutput { heatmap: vec![0.0; CROP_SIZE * CROP_SIZE] })
            }
            fn name(&self) -> &'static str {
                "blank"
            }
        }
        let scene = knot_template(TemplateName::Straight, 40.0, Pose::centered(Canvas::default())).unwrap();
        let img = render(&scene, 0);
        let err = trace_cable(&img, scene.cables[0].endpoints()[0], &mut Blank, &TraceConfig::default()).unwrap_err();
        assert_eq!(err.partial().unwrap().points.len(), 4);
    }

    fn zigzag(n: usize) -> Vec<Point> {
        (0..n).map(|i| Point::new(20.0 + 12.0 * i as f64, 50.0)).collect()
    }

    #[test]
    fn retrace_detection() {
        let cfg = RetraceConfig::default();
        // straight
        assert!(!detect_retrace(&zigzag(12), &cfg));
        // doubles back along itself, reflected with a small lateral offset
        let mut back = zigzag(10);
        let tip = *back.last().unwrap();
        for k in 1..=5 {
            back.push(Point::new(tip.x - 12.0 * k as f64 + 6.0, 53.0));
        }
        assert!(detect_retrace(&back, &cfg));
        // crosses its own earlier path once at a right angle
        let mut cross = zigzag(6);
        cross.extend([
            Point::new(92.0, 62.0),
            Point::new(80.0, 74.0),
            Point::new(66.0, 74.0),
            Point::new(56.0, 62.0),
            Point::new(56.0, 50.0),
            Point::new(56.0, 38.0),
            Point::new(56.0, 26.0),
        ]);
        assert!(!detect_retrace(&cross, &cfg));
    }
}
