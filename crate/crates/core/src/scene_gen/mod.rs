//! Synthetic cable scenes with full ground truth.
//!
//! A [`Scene`] is the world model every other stage is checked against:
//! dense cable centerlines, every crossing with its z-order, and the cable
//! endpoints. Scenes come from random Bezier sampling ([`sample_cable`],
//! [`random_scene`]) or from knot templates ([`knot_template`]), and are
//! turned into images by [`render`] and [`augment`].

mod augment;
mod crossings;
mod random;
mod render;
mod sample;
mod templates;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{smooth_path, Point};

pub use augment::{augment, augment_with, gaussian_noise, AugmentConfig};
pub use crossings::{find_crossings, ground_truth_crossings, CROSSING_MERGE_RADIUS};
pub use random::{random_scene, CableRecipe, SceneQuality, SceneRecipe, TemplatePlacement};
pub use render::{render, render_with, RenderConfig, STROKE_INTENSITY};
pub use sample::{sample_cable, SampleMethod, SampleParams};
pub use templates::{knot_template, Pose, TemplateName};

/// Maximum spacing between consecutive dense centerline samples.
pub const DENSE_SPACING: f64 = 1.0;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("rejection sampling budget exhausted after {attempts} attempts")]
    BudgetExhausted { attempts: usize },
    #[error("three strands meet within the merge radius near ({x:.1}, {y:.1})")]
    ThreeStrandCrossing { x: f64, y: f64 },
    #[error("crossing at ({x:.1}, {y:.1}) has no z-order assignment in the scene")]
    MissingZOrder { x: f64, y: f64 },
    #[error("template scale {scale} too small for stroke thickness {thickness}: strokes would merge")]
    ScaleTooSmall { scale: f64, thickness: f64 },
    #[error("template {name} does not fit the canvas at this pose")]
    OutOfCanvas { name: String },
    #[error("template {name} geometry produced crossing order {found}, expected {expected}")]
    TemplateMismatch { name: String, found: String, expected: String },
    #[error("unknown template {0}")]
    UnknownTemplate(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Canvas {
    pub width: usize,
    pub height: usize,
}

impl Canvas {
    pub const fn new(width: usize, height: usize) -> Self {
        Canvas { width, height }
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= 0.0 && p.y >= 0.0 && p.x <= (self.width as f64 - 1.0) && p.y <= (self.height as f64 - 1.0)
    }
}

impl Default for Canvas {
    fn default() -> Self {
        Canvas::new(512, 512)
    }
}

/// One cable: the anchor points of its Bezier chain and the dense
/// centerline sampled from it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "CableRecord", into = "CableRecord")]
pub struct CablePath {
    pub id: usize,
    pub control_points: Vec<Point>,
    pub thickness: f64,
    points: Vec<Point>,
}

#[derive(Serialize, Deserialize)]
struct CableRecord {
    id: usize,
    thickness: f64,
    control_points: Vec<Point>,
}

impl From<CableRecord> for CablePath {
    fn from(r: CableRecord) -> Self {
        CablePath::from_controls(r.id, r.control_points, r.thickness)
    }
}

impl From<CablePath> for CableRecord {
    fn from(c: CablePath) -> Self {
        CableRecord { id: c.id, thickness: c.thickness, control_points: c.control_points }
    }
}

impl CablePath {
    pub fn from_controls(id: usize, control_points: Vec<Point>, thickness: f64) -> Self {
        let points = smooth_path(&control_points, DENSE_SPACING);
        CablePath { id, control_points, thickness, points }
    }

    /// Dense centerline, consecutive samples at most [`DENSE_SPACING`] apart.
    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn endpoints(&self) -> [Point; 2] {
        [self.points[0], *self.points.last().expect("cable has points")]
    }

    pub fn length(&self) -> f64 {
        crate::geometry::polyline_length(&self.points)
    }

    pub fn fits(&self, canvas: Canvas) -> bool {
        self.points.iter().all(|p| canvas.contains(*p))
    }

    /// The same cable under a rigid transform of the plane.
    pub fn transformed(&self, f: impl Fn(Point) -> Point) -> CablePath {
        CablePath::from_controls(self.id, self.control_points.iter().map(|p| f(*p)).collect(), self.thickness)
    }
}

/// Reference to a point on one strand: cable id, dense segment index, and
/// arc length from the cable's first endpoint.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrandRef {
    pub cable: usize,
    pub segment: usize,
    pub arc: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layer {
    A,
    B,
}

/// Ground-truth crossing. `strand_a` precedes `strand_b` in
/// (cable id, arc length) order, so for a self-crossing `strand_a` is the
/// first time the cable passes through it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossingGT {
    pub position: Point,
    pub strand_a: StrandRef,
    pub strand_b: StrandRef,
    pub over: Layer,
}

impl CrossingGT {
    pub fn over_strand(&self) -> StrandRef {
        match self.over {
            Layer::A => self.strand_a,
            Layer::B => self.strand_b,
        }
    }

    pub fn under_strand(&self) -> StrandRef {
        match self.over {
            Layer::A => self.strand_b,
            Layer::B => self.strand_a,
        }
    }
}

/// Template metadata carried by a scene built from a knot template.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TemplateInfo {
    pub name: String,
    /// Canonical crossing code, e.g. `U1 O2 U3 O1 U2 O3`.
    pub code: String,
    pub knotted: bool,
    /// 1-based code id of the first knot's first undercrossing.
    pub first_knot_crossing: Option<usize>,
    /// Cable the template occupies.
    pub cable: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub canvas: Canvas,
    pub cables: Vec<CablePath>,
    pub crossings_gt: Vec<CrossingGT>,
    pub endpoints: Vec<[Point; 2]>,
    #[serde(default)]
    pub templates: Vec<TemplateInfo>,
}

impl Scene {
    pub fn empty(canvas: Canvas) -> Self {
        Scene { canvas, cables: Vec::new(), crossings_gt: Vec::new(), endpoints: Vec::new(), templates: Vec::new() }
    }

    /// Assemble a scene from finished cables, deciding each crossing's
    /// z-order with `over`.
    pub fn from_cables(
        canvas: Canvas,
        cables: Vec<CablePath>,
        mut over: impl FnMut(&CrossingGT) -> Layer,
    ) -> Result<Scene, SceneError> {
        let mut crossings = find_crossings(&cables, CROSSING_MERGE_RADIUS)?;
        for c in &mut crossings {
            c.over = over(c);
        }
        let endpoints = cables.iter().map(|c| c.endpoints()).collect();
        Ok(Scene { canvas, cables, crossings_gt: crossings, endpoints, templates: Vec::new() })
    }

    pub fn cable(&self, id: usize) -> Option<&CablePath> {
        self.cables.iter().find(|c| c.id == id)
    }

    /// Crossings of one cable with itself, in order of first passage.
    pub fn self_crossings(&self, cable: usize) -> Vec<CrossingGT> {
        let mut v: Vec<CrossingGT> = self
            .crossings_gt
            .iter()
            .filter(|c| c.strand_a.cable == cable && c.strand_b.cable == cable)
            .copied()
            .collect();
        v.sort_by(|a, b| a.strand_a.arc.partial_cmp(&b.strand_a.arc).unwrap());
        v
    }

    /// Over/under code of one cable's self-crossings read along the cable,
    /// ids numbered by first passage (e.g. `U1 O2 U3 O1 U2 O3`).
    pub fn crossing_code(&self, cable: usize) -> String {
        let crossings = self.self_crossings(cable);
        let mut events: Vec<(f64, usize, bool)> = Vec::new();
        for (i, c) in crossings.iter().enumerate() {
            events.push((c.strand_a.arc, i + 1, c.over == Layer::A));
            events.push((c.strand_b.arc, i + 1, c.over == Layer::B));
        }
        events.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        events
            .iter()
            .map(|(_, id, over)| format!("{}{}", if *over { 'O' } else { 'U' }, id))
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Rotate the whole scene by 90° to match [`crate::GrayImage::rotated_90`].
    pub fn rotated_90(&self) -> Scene {
        let h = self.canvas.height as f64;
        let f = |p: Point| Point::new(h - 1.0 - p.y, p.x);
        let rot_strand = |s: StrandRef| s;
        Scene {
            canvas: Canvas::new(self.canvas.height, self.canvas.width),
            cables: self.cables.iter().map(|c| c.transformed(f)).collect(),
            crossings_gt: self
                .crossings_gt
                .iter()
                .map(|c| CrossingGT {
                    position: f(c.position),
                    strand_a: rot_strand(c.strand_a),
                    strand_b: rot_strand(c.strand_b),
                    over: c.over,
                })
                .collect(),
            endpoints: self.endpoints.iter().map(|e| [f(e[0]), f(e[1])]).collect(),
            templates: self.templates.clone(),
        }
    }

    pub fn to_json(&self) -> Result<String, SceneError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Scene, SceneError> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), SceneError> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Scene, SceneError> {
        Scene::from_json(&std::fs::read_to_string(path)?)
    }
}
