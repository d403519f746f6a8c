//! Planar geometry shared by every stage: points, segment intersection,
//! polylines with arc-length queries, and C¹ cubic Bezier chains.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

/// A position in pixel coordinates. `x` grows rightward, `y` grows downward,
/// and the center of pixel `(i, j)` sits at `(i, j)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl From<[f64; 2]> for Point {
    fn from(v: [f64; 2]) -> Self {
        Point::new(v[0], v[1])
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn dot(self, o: Point) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3-D cross product.
    pub fn cross(self, o: Point) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, o: Point) -> f64 {
        (self - o).norm()
    }

    pub fn normalized(self) -> Point {
        let n = self.norm();
        if n > 0.0 {
            self * (1.0 / n)
        } else {
            self
        }
    }

    /// Rotate counterclockwise by `angle` radians in the (x right, y down)
    /// frame, i.e. the same sense as `atan2(y, x)`.
    pub fn rotated(self, angle: f64) -> Point {
        let (s, c) = angle.sin_cos();
        Point::new(self.x * c - self.y * s, self.x * s + self.y * c)
    }

    /// Unit vector at `angle` radians (same convention as [`Point::rotated`]).
    pub fn from_angle(angle: f64) -> Point {
        let (s, c) = angle.sin_cos();
        Point::new(c, s)
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn lerp(self, o: Point, t: f64) -> Point {
        self + (o - self) * t
    }

    /// Normal pointing to the left of `self` as drawn on screen (y down):
    /// for a rightward tangent this is the upward direction.
    pub fn left_normal(self) -> Point {
        Point::new(self.y, -self.x)
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Point {
    fn add_assign(&mut self, o: Point) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, k: f64) -> Point {
        Point::new(self.x * k, self.y * k)
    }
}

impl Neg for Point {
    type Output = Point;
    fn neg(self) -> Point {
        Point::new(-self.x, -self.y)
    }
}

/// Proper intersection of segments `a0-a1` and `b0-b1`.
///
/// Returns the parameters along each segment and the intersection point.
/// Parallel and collinear segments never intersect here; a crossing of two
/// cable strands is always transversal.
pub fn segment_intersection(a0: Point, a1: Point, b0: Point, b1: Point) -> Option<(f64, f64, Point)> {
    let r = a1 - a0;
    let s = b1 - b0;
    let denom = r.cross(s);
    if denom.abs() < 1e-12 {
        return None;
    }
    let q = b0 - a0;
    let t = q.cross(s) / denom;
    let u = q.cross(r) / denom;
    if (0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&u) {
        Some((t, u, a0 + r * t))
    } else {
        None
    }
}

/// Closest point on segment `a-b` to `p`, as (parameter, point).
pub fn project_on_segment(p: Point, a: Point, b: Point) -> (f64, Point) {
    let d = b - a;
    let len2 = d.dot(d);
    if len2 <= 0.0 {
        return (0.0, a);
    }
    let t = ((p - a).dot(d) / len2).clamp(0.0, 1.0);
    (t, a + d * t)
}

pub fn dist_to_segment(p: Point, a: Point, b: Point) -> f64 {
    project_on_segment(p, a, b).1.dist(p)
}

/// Cumulative arc length at every vertex; `out[0] == 0`.
pub fn cumulative_lengths(points: &[Point]) -> Vec<f64> {
    let mut out = Vec::with_capacity(points.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in points.windows(2) {
        acc += w[0].dist(w[1]);
        out.push(acc);
    }
    if points.is_empty() {
        out.clear();
    }
    out
}

pub fn polyline_length(points: &[Point]) -> f64 {
    points.windows(2).map(|w| w[0].dist(w[1])).sum()
}

/// Result of projecting a point onto a polyline.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Projection {
    pub segment: usize,
    pub t: f64,
    pub point: Point,
    pub distance: f64,
    pub arc: f64,
}

/// A polyline with precomputed arc lengths.
#[derive(Clone, Debug, PartialEq)]
pub struct Polyline {
    points: Vec<Point>,
    cum: Vec<f64>,
}

impl Polyline {
    pub fn new(points: Vec<Point>) -> Self {
        let cum = cumulative_lengths(&points);
        Polyline { points, cum }
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn length(&self) -> f64 {
        self.cum.last().copied().unwrap_or(0.0)
    }

    pub fn cumulative(&self) -> &[f64] {
        &self.cum
    }

    /// Arc length at a fractional segment parameter `segment + t`.
    pub fn arc_at_param(&self, param: f64) -> f64 {
        if self.points.len() < 2 {
            return 0.0;
        }
        let last = (self.points.len() - 2) as f64;
        let param = param.clamp(0.0, last + 1.0);
        let seg = (param.floor() as usize).min(self.points.len() - 2);
        let t = param - seg as f64;
        self.cum[seg] + t * (self.cum[seg + 1] - self.cum[seg])
    }

    /// Segment index and local parameter at arc length `s` (clamped).
    pub fn locate(&self, s: f64) -> (usize, f64) {
        let n = self.points.len();
        if n < 2 {
            return (0, 0.0);
        }
        let s = s.clamp(0.0, self.length());
        let seg = match self.cum.binary_search_by(|c| c.partial_cmp(&s).unwrap()) {
            Ok(i) => i.min(n - 2),
            Err(i) => i.saturating_sub(1).min(n - 2),
        };
        let l = self.cum[seg + 1] - self.cum[seg];
        let t = if l > 0.0 { (s - self.cum[seg]) / l } else { 0.0 };
        (seg, t.clamp(0.0, 1.0))
    }

    pub fn point_at(&self, s: f64) -> Point {
        match self.points.len() {
            0 => Point::default(),
            1 => self.points[0],
            _ => {
                let (seg, t) = self.locate(s);
                self.points[seg].lerp(self.points[seg + 1], t)
            }
        }
    }

    /// Unit tangent of the segment containing arc length `s`.
    pub fn tangent_at(&self, s: f64) -> Point {
        if self.points.len() < 2 {
            return Point::new(1.0, 0.0);
        }
        let (seg, _) = self.locate(s);
        (self.points[seg + 1] - self.points[seg]).normalized()
    }

    /// Global closest point.
    pub fn project(&self, p: Point) -> Option<Projection> {
        self.projections(p, f64::INFINITY)
            .into_iter()
            .min_by(|a, b| a.distance.partial_cmp(&b.distance).unwrap())
    }

    /// Closest point restricted to the arc-length window `[lo, hi]`.
    pub fn project_in_window(&self, p: Point, lo: f64, hi: f64) -> Option<Projection> {
        let mut best: Option<Projection> = None;
        for seg in 0..self.points.len().saturating_sub(1) {
            if self.cum[seg + 1] < lo || self.cum[seg] > hi {
                continue;
            }
            let (t, q) = project_on_segment(p, self.points[seg], self.points[seg + 1]);
            let arc = self.cum[seg] + t * (self.cum[seg + 1] - self.cum[seg]);
            let (arc, q) = if arc < lo {
                (lo, self.point_at(lo))
            } else if arc > hi {
                (hi, self.point_at(hi))
            } else {
                (arc, q)
            };
            let d = q.dist(p);
            if best.map_or(true, |b| d < b.distance) {
                let (seg, t) = self.locate(arc);
                best = Some(Projection { segment: seg, t, point: q, distance: d, arc });
            }
        }
        best
    }

    /// All local minima of the distance from `p` to the polyline that lie
    /// within `radius`, one per contiguous run of nearby segments.
    pub fn projections(&self, p: Point, radius: f64) -> Vec<Projection> {
        let mut out: Vec<Projection> = Vec::new();
        let mut run: Option<Projection> = None;
        for seg in 0..self.points.len().saturating_sub(1) {
            let (t, q) = project_on_segment(p, self.points[seg], self.points[seg + 1]);
            let d = q.dist(p);
            if d <= radius {
                let arc = self.cum[seg] + t * (self.cum[seg + 1] - self.cum[seg]);
                let cand = Projection { segment: seg, t, point: q, distance: d, arc };
                run = match run {
                    Some(r) if r.distance <= d => Some(r),
                    _ => Some(cand),
                };
            } else if let Some(r) = run.take() {
                out.push(r);
            }
        }
        if let Some(r) = run {
            out.push(r);
        }
        out
    }

    /// Distance from `p` to the polyline.
    pub fn distance(&self, p: Point) -> f64 {
        match self.points.len() {
            0 => f64::INFINITY,
            1 => self.points[0].dist(p),
            _ => self
                .points
                .windows(2)
                .map(|w| dist_to_segment(p, w[0], w[1]))
                .fold(f64::INFINITY, f64::min),
        }
    }
}

/// One cubic Bezier piece.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CubicBezier {
    pub p0: Point,
    pub c1: Point,
    pub c2: Point,
    pub p1: Point,
}

impl CubicBezier {
    pub fn eval(&self, t: f64) -> Point {
        let u = 1.0 - t;
        self.p0 * (u * u * u) + self.c1 * (3.0 * u * u * t) + self.c2 * (3.0 * u * t * t) + self.p1 * (t * t * t)
    }

    fn hull_length(&self) -> f64 {
        self.p0.dist(self.c1) + self.c1.dist(self.c2) + self.c2.dist(self.p1)
    }
}

/// Chain of cubic Bezier pieces through `anchors`, C¹ at every interior
/// anchor (Catmull-Rom handles, ends extrapolated linearly).
pub fn bezier_chain(anchors: &[Point]) -> Vec<CubicBezier> {
    let n = anchors.len();
    if n < 2 {
        return Vec::new();
    }
    let at = |i: isize| -> Point {
        if i < 0 {
            anchors[0] * 2.0 - anchors[1]
        } else if i as usize >= n {
            anchors[n - 1] * 2.0 - anchors[n - 2]
        } else {
            anchors[i as usize]
        }
    };
    (0..n - 1)
        .map(|i| {
            let i = i as isize;
            let (p_prev, p0, p1, p_next) = (at(i - 1), at(i), at(i + 1), at(i + 2));
            CubicBezier {
                p0,
                c1: p0 + (p1 - p_prev) * (1.0 / 6.0),
                c2: p1 - (p_next - p0) * (1.0 / 6.0),
                p1,
            }
        })
        .collect()
}

/// Densely sample a Bezier chain so consecutive points are at most
/// `max_spacing` apart.
pub fn sample_chain(chain: &[CubicBezier], max_spacing: f64) -> Vec<Point> {
    let mut out: Vec<Point> = Vec::new();
    for piece in chain {
        // The control polygon bounds the arc length from above.
        let steps = ((piece.hull_length() / (0.5 * max_spacing)).ceil() as usize).max(1);
        let start = if out.is_empty() { 0 } else { 1 };
        for k in start..=steps {
            out.push(piece.eval(k as f64 / steps as f64));
        }
    }
    out
}

/// Dense polyline through `anchors` via a C¹ cubic Bezier chain.
pub fn smooth_path(anchors: &[Point], max_spacing: f64) -> Vec<Point> {
    match anchors.len() {
        0 => Vec::new(),
        1 => vec![anchors[0]],
        _ => sample_chain(&bezier_chain(anchors), max_spacing),
    }
}

/// Axis-aligned rectangle `[min, max]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: Point,
    pub max: Point,
}

impl Rect {
    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn bounding(points: &[Point]) -> Option<Rect> {
        let first = *points.first()?;
        let mut r = Rect { min: first, max: first };
        for p in points {
            r.min.x = r.min.x.min(p.x);
            r.min.y = r.min.y.min(p.y);
            r.max.x = r.max.x.max(p.x);
            r.max.y = r.max.y.max(p.y);
        }
        Some(r)
    }
}

/// Smallest absolute angle between two undirected lines, in radians.
pub fn line_angle(a: Point, b: Point) -> f64 {
    let c = (a.dot(b) / (a.norm() * b.norm())).abs().min(1.0);
    c.acos()
}
