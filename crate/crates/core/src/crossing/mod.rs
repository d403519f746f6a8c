//! Crossings along a trace: where the trace intersects itself, an
//! over/under score for each of the two encounters, and the correction that
//! makes each pair consistent.

mod classify;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{segment_intersection, Point};

pub use classify::{
    build_classifier_input, classify_encounters, photometric_score, Classifier, ClassifierInput, OracleClassifier,
    PhotometricClassifier, CLASSIFIER_CROP, CLASSIFIER_MARGIN,
};

/// Scores at or above this are overcrossings.
pub const OVER_THRESHOLD: f64 = 0.275;

/// Default distance within which raw intersections are one crossing.
pub const DEFAULT_MERGE_RADIUS: f64 = 6.0;

#[derive(Debug, Error)]
pub enum CrossingError {
    #[error("more than two strands pass within the merge radius near ({x:.1}, {y:.1}): visits at {visits:?}")]
    SemiPlanarity { x: f64, y: f64, visits: Vec<f64> },
    #[error("trace needs at least two segments")]
    TooShort,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Over,
    Under,
}

impl Label {
    pub fn from_score(s: f64) -> Label {
        if s >= OVER_THRESHOLD {
            Label::Over
        } else {
            Label::Under
        }
    }

    pub fn opposite(self) -> Label {
        match self {
            Label::Over => Label::Under,
            Label::Under => Label::Over,
        }
    }
}

/// Confidence in `[0.5, 1]` from the distance between a score and the
/// threshold.
pub fn confidence(score: f64) -> f64 {
    0.5 + 0.5 * (score - OVER_THRESHOLD).abs() / OVER_THRESHOLD.max(1.0 - OVER_THRESHOLD)
}

/// One pass of the trace through a crossing.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Encounter {
    /// Index of the trace segment (from point `trace_index` to the next).
    pub trace_index: usize,
    /// Fractional position along the trace, `segment + t`.
    pub param: f64,
    /// Classifier output before correction.
    pub raw_score: Option<f64>,
    /// Score after correction.
    pub score: Option<f64>,
    pub label: Option<Label>,
    pub confidence: f64,
    pub unclassifiable: bool,
}

impl Encounter {
    fn at(param: f64) -> Encounter {
        Encounter {
            trace_index: param.floor() as usize,
            param,
            raw_score: None,
            score: None,
            label: None,
            confidence: 0.5,
            unclassifiable: false,
        }
    }

    /// Record a classifier score; `None` marks the encounter unclassifiable.
    pub fn set_score(&mut self, s: Option<f64>) {
        match s {
            Some(s) => {
                let s = s.clamp(0.0, 1.0);
                self.raw_score = Some(s);
                self.score = Some(s);
                self.label = Some(Label::from_score(s));
                self.confidence = confidence(s);
                self.unclassifiable = false;
            }
            None => {
                self.raw_score = Some(0.5);
                self.score = Some(0.5);
                self.label = Some(Label::from_score(0.5));
                self.confidence = 0.5;
                self.unclassifiable = true;
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrossingFlags {
    /// The pair disagreed with itself and the weaker encounter was flipped.
    pub corrected: bool,
    /// Only one encounter: the trace ended before returning.
    pub incomplete: bool,
    /// Neither encounter could be classified; labels follow trace order.
    pub both_unclassifiable: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossingObservation {
    pub id: usize,
    pub position: Point,
    pub first: Encounter,
    pub second: Option<Encounter>,
    pub confidence: f64,
    #[serde(default)]
    pub flags: CrossingFlags,
}

impl CrossingObservation {
    pub fn encounters(&self) -> impl Iterator<Item = &Encounter> {
        std::iter::once(&self.first).chain(self.second.iter())
    }
}

/// Every proper intersection of non-adjacent trace segments, as
/// (param on the earlier segment, param on the later one, point).
pub fn raw_intersections(points: &[Point]) -> Vec<(f64, f64, Point)> {
    const CELL: f64 = 24.0;
    let n_seg = points.len().saturating_sub(1);
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for i in 0..n_seg {
        let (a, b) = (points[i], points[i + 1]);
        for gx in (a.x.min(b.x) / CELL).floor() as i64..=(a.x.max(b.x) / CELL).floor() as i64 {
            for gy in (a.y.min(b.y) / CELL).floor() as i64..=(a.y.max(b.y) / CELL).floor() as i64 {
                grid.entry((gx, gy)).or_default().push(i);
            }
        }
    }
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for segs in grid.values() {
        for (k, &i) in segs.iter().enumerate() {
            for &j in &segs[k + 1..] {
                let (i, j) = (i.min(j), i.max(j));
                if j >= i + 2 {
                    pairs.push((i, j));
                }
            }
        }
    }
    pairs.sort_unstable();
    pairs.dedup();
    pairs
        .into_iter()
        .filter_map(|(i, j)| {
            segment_intersection(points[i], points[i + 1], points[j], points[j + 1])
                .map(|(t, u, p)| (i as f64 + t, j as f64 + u, p))
        })
        .collect()
}

/// Self-crossings of a trace. Intersections within `merge_radius` of each
/// other are grouped; each group must contain exactly two passes of the
/// trace, which become the crossing's two encounters in trace order.
pub fn detect_crossings(points: &[Point], merge_radius: f64) -> Result<Vec<CrossingObservation>, CrossingError> {
    if points.len() < 3 {
        return Err(CrossingError::TooShort);
    }
    let hits = raw_intersections(points);
    let n = hits.len();
    // single linkage by position
    let mut group: Vec<usize> = (0..n).collect();
    fn root(g: &mut [usize], mut i: usize) -> usize {
        while g[i] != i {
            g[i] = g[g[i]];
            i = g[i];
        }
        i
    }
    for i in 0..n {
        for j in i + 1..n {
            if hits[i].2.dist(hits[j].2) <= merge_radius {
                let (a, b) = (root(&mut group, i), root(&mut group, j));
                if a != b {
                    group[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    let mut slot: HashMap<usize, usize> = HashMap::new();
    for i in 0..n {
        let r = root(&mut group, i);
        let k = *slot.entry(r).or_insert_with(|| {
            clusters.push(Vec::new());
            clusters.len() - 1
        });
        clusters[k].push(i);
    }

    let mut out = Vec::new();
    for members in clusters {
        let mut params: Vec<f64> = members.iter().flat_map(|&i| [hits[i].0, hits[i].1]).collect();
        params.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut runs: Vec<Vec<f64>> = vec![vec![params[0]]];
        for w in params.windows(2) {
            if w[1] - w[0] > 2.0 {
                runs.push(Vec::new());
            }
            runs.last_mut().unwrap().push(w[1]);
        }
        let position = members.iter().fold(Point::default(), |acc, &i| acc + hits[i].2) * (1.0 / members.len() as f64);
        match runs.len() {
            1 => continue,
            2 => {}
            _ => {
                return Err(CrossingError::SemiPlanarity {
                    x: position.x,
                    y: position.y,
                    visits: runs.iter().map(|r| r[0]).collect(),
                })
            }
        }
        let mean = |r: &[f64]| r.iter().sum::<f64>() / r.len() as f64;
        out.push(CrossingObservation {
            id: 0,
            position,
            first: Encounter::at(mean(&runs[0])),
            second: Some(Encounter::at(mean(&runs[1]))),
            confidence: 0.5,
            flags: CrossingFlags::default(),
        });
    }
    out.sort_by(|a, b| a.first.param.partial_cmp(&b.first.param).unwrap());
    for (i, c) in out.iter_mut().enumerate() {
        c.id = i;
    }
    Ok(out)
}

/// Make every complete crossing's two labels opposite. When both encounters
/// carry the same label, the less confident one has its score replaced by
/// `1 - score` and takes the opposite label; on equal confidence the first
/// encounter wins. The crossing keeps the winning encounter's confidence.
pub fn correct_crossings(observations: &[CrossingObservation]) -> Vec<CrossingObservation> {
    observations.iter().cloned().map(correct_one).collect()
}

fn correct_one(mut c: CrossingObservation) -> CrossingObservation {
    let Some(mut second) = c.second else {
        c.flags.incomplete = true;
        c.confidence = c.first.confidence;
        return c;
    };
    let mut first = c.first;
    if first.unclassifiable && second.unclassifiable {
        first.label = Some(Label::Over);
        second.label = Some(Label::Under);
        c.flags.both_unclassifiable = true;
        c.first = first;
        c.second = Some(second);
        c.confidence = 0.5;
        return c;
    }
    let l1 = first.label.unwrap_or(Label::from_score(first.score.unwrap_or(0.5)));
    let l2 = second.label.unwrap_or(Label::from_score(second.score.unwrap_or(0.5)));
    let first_wins = first.confidence >= second.confidence;
    if l1 == l2 {
        let (winner, loser) = if first_wins { (&first, &mut second) } else { (&second, &mut first) };
        let flipped = 1.0 - loser.score.unwrap_or(0.5);
        let forced = winner.label.unwrap_or(l1).opposite();
        loser.score = Some(flipped);
        loser.label = Some(forced);
        c.flags.corrected = true;
    } else {
        first.label = Some(l1);
        second.label = Some(l2);
    }
    c.confidence = if first_wins { first.confidence } else { second.confidence };
    c.first = first;
    c.second = Some(second);
    c
}
