use std::collections::HashMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{find_crossings, CablePath, Canvas, CrossingGT, Layer, Scene, SceneError, TemplateInfo, CROSSING_MERGE_RADIUS};
use crate::geometry::{cumulative_lengths, Point, Rect};

/// Named cable configurations with a known crossing code.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateName {
    Overhand,
    FigureEight,
    TrefoilClosedAnalogue,
    /// A trivial curl on the lead tail followed by an overhand knot.
    OverhandWithLoop,
    FakeLoop,
    /// Two coils with the exit strand laid over both.
    FakeDoubleLoop,
    /// Overhand geometry with one crossing flipped, which unties it.
    FakeOverhand,
    Straight,
    SCurve,
}

impl TemplateName {
    pub const ALL: [TemplateName; 9] = [
        TemplateName::Overhand,
        TemplateName::FigureEight,
        TemplateName::TrefoilClosedAnalogue,
        TemplateName::OverhandWithLoop,
        TemplateName::FakeLoop,
        TemplateName::FakeDoubleLoop,
        TemplateName::FakeOverhand,
        TemplateName::Straight,
        TemplateName::SCurve,
    ];

    pub const KNOTTED: [TemplateName; 4] = [
        TemplateName::Overhand,
        TemplateName::FigureEight,
        TemplateName::TrefoilClosedAnalogue,
        TemplateName::OverhandWithLoop,
    ];

    pub const TRIVIAL: [TemplateName; 5] = [
        TemplateName::Straight,
        TemplateName::SCurve,
        TemplateName::FakeLoop,
        TemplateName::FakeDoubleLoop,
        TemplateName::FakeOverhand,
    ];

    /// Trivial configurations arranged to look knotted.
    pub const FAKE_KNOTS: [TemplateName; 2] = [TemplateName::FakeDoubleLoop, TemplateName::FakeOverhand];

    pub fn as_str(self) -> &'static str {
        match self {
            TemplateName::Overhand => "overhand",
            TemplateName::FigureEight => "figure_eight",
            TemplateName::TrefoilClosedAnalogue => "trefoil_closed_analogue",
            TemplateName::OverhandWithLoop => "overhand_with_loop",
            TemplateName::FakeLoop => "fake_loop",
            TemplateName::FakeDoubleLoop => "fake_double_loop",
            TemplateName::FakeOverhand => "fake_overhand",
            TemplateName::Straight => "straight",
            TemplateName::SCurve => "s_curve",
        }
    }

    /// Canonical code read from the designated start endpoint.
    pub fn code(self) -> &'static str {
        match self {
            TemplateName::Overhand => "U1 O2 U3 O1 U2 O3",
            TemplateName::FigureEight => "O1 U2 O3 U1 O4 U3 O2 U4",
            TemplateName::TrefoilClosedAnalogue => "O1 U2 O3 U1 O2 U3",
            TemplateName::OverhandWithLoop => "O1 U1 U2 O3 U4 O2 U3 O4",
            TemplateName::FakeLoop => "O1 U1",
            TemplateName::FakeDoubleLoop => "U1 U2 O2 O1",
            TemplateName::FakeOverhand => "U1 O2 O3 O1 U2 U3",
            TemplateName::Straight | TemplateName::SCurve => "",
        }
    }

    pub fn knotted(self) -> bool {
        Self::KNOTTED.contains(&self)
    }

    /// Code id of the undercrossing that opens the first knot. Overcrossings
    /// met before any undercrossing can be slid off the end, so a knot opens
    /// at the first undercrossing whose partner comes back over.
    pub fn first_knot_crossing(self) -> Option<usize> {
        match self {
            TemplateName::Overhand => Some(1),
            TemplateName::FigureEight | TemplateName::TrefoilClosedAnalogue | TemplateName::OverhandWithLoop => Some(2),
            _ => None,
        }
    }

    /// Anchors in template units (a few units across).
    fn unit_anchors(self) -> Vec<Point> {
        match self {
            TemplateName::Overhand | TemplateName::FakeOverhand => cut_closed_curve(trefoil, PI / 3.0, 0.3, 36, 5, 0.7),
            TemplateName::TrefoilClosedAnalogue => cut_closed_curve(trefoil, PI / 3.0, 0.3, 36, 2, 0.6),
            TemplateName::FigureEight => cut_closed_curve(figure_eight, 0.0, 0.25, 60, 5, 0.7),
            TemplateName::OverhandWithLoop => {
                let knot = cut_closed_curve(trefoil, PI / 3.0, 0.3, 36, 5, 0.7);
                let dir = (knot[1] - knot[0]).normalized();
                let curl = curl_anchors(0.3);
                let end = *curl.last().unwrap();
                let attach = knot[0] - dir * 0.6;
                let mut out: Vec<Point> = curl.iter().map(|p| attach + (*p - end).rotated(dir.angle())).collect();
                out.extend(knot);
                out
            }
            TemplateName::FakeLoop => {
                let mut out: Vec<Point> = (1..=4).rev().map(|k| Point::new(-PI * 0.5 - 0.5 * k as f64, 0.0)).collect();
                out.extend(curl_anchors(0.5));
                out.extend((1..5).map(|k| Point::new(PI * 0.5 + 0.5 * k as f64, 0.0)));
                out
            }
            TemplateName::FakeDoubleLoop => coil_anchors(),
            TemplateName::Straight => vec![Point::new(-3.0, 0.0), Point::new(3.0, 0.0)],
            TemplateName::SCurve => {
                (0..=12).map(|k| -3.0 + 0.5 * k as f64).map(|x| Point::new(x, 0.9 * (PI * x / 3.0).sin())).collect()
            }
        }
    }
}

impl std::fmt::Display for TemplateName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for TemplateName {
    type Err = SceneError;
    fn from_str(s: &str) -> Result<Self, SceneError> {
        TemplateName::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| SceneError::UnknownTemplate(s.to_string()))
    }
}

fn trefoil(t: f64) -> Point {
    Point::new(t.sin() + 2.0 * (2.0 * t).sin(), t.cos() - 2.0 * (2.0 * t).cos())
}

fn figure_eight(t: f64) -> Point {
    let r = 2.0 + 1.4 * (2.0 * t).cos();
    Point::new(r * (3.0 * t).cos(), r * (3.0 * t).sin())
}

/// Open a closed parametric curve at the lobe tip `tip_t`, leaving a gap of
/// `gap` radians, and bend both ends outward into tails.
fn cut_closed_curve(f: fn(f64) -> Point, tip_t: f64, gap: f64, n: usize, tail: usize, step: f64) -> Vec<Point> {
    let tip = f(tip_t);
    let radial = tip.normalized();
    let body: Vec<Point> =
        (0..n).map(|k| f(tip_t + gap + (2.0 * PI - 2.0 * gap) * k as f64 / (n - 1) as f64)).collect();
    let tail_from = |p: Point, outward: Point| -> Vec<Point> {
        let mut q = p;
        (1..=tail)
            .map(|k| {
                let w = (k as f64 / 3.0).min(1.0);
                let d = (outward * (1.0 - w) + radial * w).normalized();
                q += d * step;
                q
            })
            .collect()
    };
    let h = 1e-4;
    let head_dir = (f(tip_t + gap) - f(tip_t + gap + h)).normalized();
    let back_dir = (f(tip_t - gap) - f(tip_t - gap - h)).normalized();
    let mut out: Vec<Point> = tail_from(body[0], head_dir).into_iter().rev().collect();
    out.extend(body.iter().copied());
    out.extend(tail_from(*body.last().unwrap(), back_dir));
    out
}

/// One loop of a prolate cycloid traveling +x from `(-pi, 0)` to `(pi, 0)`
/// (times `size`), tangent horizontal at both ends.
fn curl_anchors(size: f64) -> Vec<Point> {
    let k = 2.0;
    (0..=18)
        .map(|i| -PI + 2.0 * PI * i as f64 / 18.0)
        .map(|t| Point::new(t - k * t.sin(), k * t.cos() + k) * size)
        .collect()
}

/// Two inward coils, then a straight exit across both.
fn coil_anchors() -> Vec<Point> {
    let start_angle = -0.75 * PI;
    let turns = 4.0 * PI * 1.06;
    let spiral = |t: f64| {
        let r = 2.2 - 0.09 * t;
        Point::new(r * (t + start_angle).cos(), r * (t + start_angle).sin())
    };
    let h = 1e-4;
    let lead_dir = (spiral(0.0) - spiral(h)).normalized();
    let mut out: Vec<Point> = (1..=3).rev().map(|k| spiral(0.0) + lead_dir * (0.7 * k as f64)).collect();
    out.extend((0..34).map(|k| spiral(turns * k as f64 / 33.0)));
    let last = *out.last().unwrap();
    let d = last.normalized();
    out.extend((1..=5).map(|k| last + d * (0.7 * k as f64)));
    out
}

/// Placement of a template on the canvas.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub center: Point,
    /// Rotation in radians.
    pub angle: f64,
}

impl Pose {
    pub fn centered(canvas: Canvas) -> Pose {
        Pose { center: Point::new(canvas.width as f64 / 2.0, canvas.height as f64 / 2.0), angle: 0.0 }
    }
}

/// Template anchors transformed to the canvas; `scale` is pixels per unit.
pub(crate) fn template_cable(
    name: TemplateName,
    scale: f64,
    pose: Pose,
    thickness: f64,
    id: usize,
) -> Result<(CablePath, TemplateInfo), SceneError> {
    let unit = name.unit_anchors();
    let bb = Rect::bounding(&unit).expect("templates have anchors");
    let mid = bb.min.lerp(bb.max, 0.5);
    let anchors = unit.iter().map(|p| pose.center + ((*p - mid) * scale).rotated(pose.angle)).collect();
    let cable = CablePath::from_controls(id, anchors, thickness);
    let info = TemplateInfo {
        name: name.as_str().to_string(),
        code: name.code().to_string(),
        knotted: name.knotted(),
        first_knot_crossing: name.first_knot_crossing(),
        cable: id,
    };
    Ok((cable, info))
}

/// Parse a code such as `U1 O2` into (id, is_over) tokens.
pub(crate) fn parse_code(code: &str) -> Vec<(usize, bool)> {
    code.split_whitespace()
        .filter_map(|tok| {
            let (sign, id) = tok.split_at(1);
            Some((id.parse().ok()?, sign == "O"))
        })
        .collect()
}

/// Z-order of one self-crossing of a template cable, given all of that
/// cable's self-crossings sorted by first passage.
pub(crate) fn template_layers(info: &TemplateInfo, self_crossings: &[CrossingGT]) -> Result<Vec<Layer>, SceneError> {
    let code = parse_code(&info.code);
    let ids_expected: Vec<usize> = code.iter().map(|t| t.0).collect();
    let mut events: Vec<(f64, usize)> = Vec::new();
    for (i, c) in self_crossings.iter().enumerate() {
        events.push((c.strand_a.arc, i + 1));
        events.push((c.strand_b.arc, i + 1));
    }
    events.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let ids_found: Vec<usize> = events.iter().map(|e| e.1).collect();
    if ids_found != ids_expected {
        let show = |v: &[usize]| v.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(" ");
        return Err(SceneError::TemplateMismatch {
            name: info.name.clone(),
            found: show(&ids_found),
            expected: show(&ids_expected),
        });
    }
    let mut first_sign: HashMap<usize, bool> = HashMap::new();
    for (id, over) in code {
        first_sign.entry(id).or_insert(over);
    }
    Ok((1..=self_crossings.len()).map(|id| if first_sign[&id] { Layer::A } else { Layer::B }).collect())
}

/// Smallest gap between strokes away from crossings, in pixels.
pub(crate) fn stroke_clearance(cable: &CablePath, crossings: &[CrossingGT]) -> f64 {
    let pts = cable.points();
    let cum = cumulative_lengths(pts);
    let t = cable.thickness;
    let keep: Vec<usize> = (0..pts.len())
        .step_by(2)
        .filter(|&i| crossings.iter().all(|c| c.position.dist(pts[i]) > 3.0 * t))
        .collect();
    let mut best = f64::INFINITY;
    for (k, &i) in keep.iter().enumerate() {
        for &j in &keep[k + 1..] {
            if cum[j] - cum[i] > 4.0 * t {
                best = best.min(pts[i].dist(pts[j]));
            }
        }
    }
    best
}

/// Build a single-cable scene from a named template.
pub fn knot_template(name: TemplateName, scale: f64, pose: Pose) -> Result<Scene, SceneError> {
    knot_template_on(name, scale, pose, Canvas::default(), 6.0)
}

pub fn knot_template_on(
    name: TemplateName,
    scale: f64,
    pose: Pose,
    canvas: Canvas,
    thickness: f64,
) -> Result<Scene, SceneError> {
    let (cable, info) = template_cable(name, scale, pose, thickness, 0)?;
    if !cable.fits(canvas) {
        return Err(SceneError::OutOfCanvas { name: info.name });
    }
    let crossings = find_crossings(std::slice::from_ref(&cable), CROSSING_MERGE_RADIUS)?;
    let layers = template_layers(&info, &crossings)?;
    let min_sep = crossings
        .iter()
        .enumerate()
        .flat_map(|(i, a)| crossings[i + 1..].iter().map(move |b| a.position.dist(b.position)))
        .fold(f64::INFINITY, f64::min);
    if min_sep < 2.0 * thickness || stroke_clearance(&cable, &crossings) < 1.5 * thickness {
        return Err(SceneError::ScaleTooSmall { scale, thickness });
    }
    let mut scene = Scene::from_cables(canvas, vec![cable], |_| Layer::A)?;
    for (c, layer) in scene.crossings_gt.iter_mut().zip(layers) {
        c.over = layer;
    }
    scene.templates.push(info);
    Ok(scene)
}
