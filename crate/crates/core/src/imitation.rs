//! Pick/place demonstrations stored relative to a cable trace and replayed
//! on other traces of the same cable.
//!
//! Displacements live in the trace-aligned frame at the anchor: +x along the
//! local trace tangent, +y to its left as drawn on screen.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Point, Polyline};

/// Raw points farther than this from the trace are rejected.
pub const MAX_ASSOCIATION_DISTANCE: f64 = 50.0;

#[derive(Debug, Error)]
pub enum DemoError {
    #[error("point ({x:.1}, {y:.1}) is {distance:.1} px from the trace")]
    TooFar { x: f64, y: f64, distance: f64 },
    #[error("trace needs at least two points")]
    EmptyTrace,
    #[error("trace is {length:.1} px long but the action needs arc length {needed:.1}")]
    TraceTooShort { length: f64, needed: f64 },
    #[error("action refers to crossing encounter {needed} but the trace has {available}")]
    InsufficientCrossings { needed: i64, available: usize },
    #[error("demonstration actions must alternate pick and place")]
    NotAlternating,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    Pick,
    Place,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplayMode {
    AbsoluteArcLength,
    CrossingRelative,
}

impl std::str::FromStr for ReplayMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "absolute_arc_length" | "absolute" => Ok(ReplayMode::AbsoluteArcLength),
            "crossing_relative" | "relative" => Ok(ReplayMode::CrossingRelative),
            _ => Err(format!("unknown replay mode {s:?}")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemoAction {
    pub kind: ActionKind,
    /// Offset from the anchor in the trace-aligned frame.
    pub displacement: Point,
    /// Arc length of the anchor from the trace start.
    pub arc_length: f64,
    /// Index of the last crossing encounter at or before the anchor, -1 if
    /// none.
    pub crossing_index: i64,
    /// Where the anchor sits between encounter `crossing_index` and the
    /// next one (trace start and end stand in for missing encounters).
    pub crossing_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Demonstration {
    pub mode: ReplayMode,
    pub actions: Vec<DemoAction>,
}

impl Demonstration {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("demonstration serializes")
    }

    pub fn from_json(s: &str) -> Result<Demonstration, serde_json::Error> {
        serde_json::from_str(s)
    }
}

/// Unit tangent at arc length `s`: central differences at the trace points,
/// one-sided at the ends, blended linearly along each segment.
pub fn tangent_at(line: &Polyline, s: f64) -> Point {
    let pts = line.points();
    let n = pts.len();
    let at = |i: usize| -> Point {
        let (a, b) = (i.saturating_sub(1), (i + 1).min(n - 1));
        (pts[b] - pts[a]).normalized()
    };
    let (seg, t) = line.locate(s);
    let v = at(seg) * (1.0 - t) + at(seg + 1) * t;
    if v.norm() < 1e-9 {
        (pts[seg + 1] - pts[seg]).normalized()
    } else {
        v.normalized()
    }
}

fn frame(line: &Polyline, s: f64) -> (Point, Point, Point) {
    let t = tangent_at(line, s);
    (line.point_at(s), t, t.left_normal())
}

/// Arc-length bounds of the interval after encounter `k` (`k = -1` is the
/// trace start).
fn interval(line: &Polyline, encounters: &[f64], k: i64) -> Result<(f64, f64), DemoError> {
    if k >= encounters.len() as i64 {
        return Err(DemoError::InsufficientCrossings { needed: k, available: encounters.len() });
    }
    let lo = if k < 0 { 0.0 } else { line.arc_at_param(encounters[k as usize]) };
    let hi = encounters.get((k + 1) as usize).map_or(line.length(), |p| line.arc_at_param(*p));
    Ok((lo, hi))
}

/// Express raw points relative to `trace`. `encounters` are the trace
/// parameters (`segment + t`) of crossing encounters, ascending; actions
/// alternate pick and place starting with pick.
pub fn record(
    trace: &[Point],
    encounters: &[f64],
    raw_points: &[Point],
    mode: ReplayMode,
) -> Result<Demonstration, DemoError> {
    if trace.len() < 2 {
        return Err(DemoError::EmptyTrace);
    }
    let line = Polyline::new(trace.to_vec());
    let mut actions = Vec::with_capacity(raw_points.len());
    for (i, p) in raw_points.iter().enumerate() {
        let proj = line.project(*p).expect("non-empty trace");
        if proj.distance > MAX_ASSOCIATION_DISTANCE {
            return Err(DemoError::TooFar { x: p.x, y: p.y, distance: proj.distance });
        }
        let s = proj.arc;
        let (origin, tx, ty) = frame(&line, s);
        let d = *p - origin;
        let crossing_index = encounters.iter().filter(|e| line.arc_at_param(**e) <= s).count() as i64 - 1;
        let (lo, hi) = interval(&line, encounters, crossing_index)?;
        let crossing_fraction = if hi > lo { (s - lo) / (hi - lo) } else { 0.0 };
        actions.push(DemoAction {
            kind: if i % 2 == 0 { ActionKind::Pick } else { ActionKind::Place },
            displacement: Point::new(d.dot(tx), d.dot(ty)),
            arc_length: s,
            crossing_index,
            crossing_fraction,
        });
    }
    Ok(Demonstration { mode, actions })
}

/// Place each action on `trace` and return the image points.
pub fn replay(demo: &Demonstration, trace: &[Point], encounters: &[f64]) -> Result<Vec<Point>, DemoError> {
    if trace.len() < 2 {
        return Err(DemoError::EmptyTrace);
    }
    let alternating = demo.actions.iter().enumerate().all(|(i, a)| {
        a.kind == if i % 2 == 0 { ActionKind::Pick } else { ActionKind::Place }
    });
    if !alternating {
        return Err(DemoError::NotAlternating);
    }
    let line = Polyline::new(trace.to_vec());
    demo.actions
        .iter()
        .map(|a| {
            let s = match demo.mode {
                ReplayMode::AbsoluteArcLength => {
                    if a.arc_length > line.length() + 1e-6 {
                        return Err(DemoError::TraceTooShort { length: line.length(), needed: a.arc_length });
                    }
                    a.arc_length
                }
                ReplayMode::CrossingRelative => {
                    let (lo, hi) = interval(&line, encounters, a.crossing_index)?;
                    lo + a.crossing_fraction * (hi - lo)
                }
            };
            let (origin, tx, ty) = frame(&line, s);
            Ok(origin + tx * a.displacement.x + ty * a.displacement.y)
        })
        .collect()
}
