//! Crossing sequences along a trace: Reidemeister I/II cancellation, knot
//! spans, and cage/pinch grasp selection.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crossing::{CrossingObservation, Label};
use crate::geometry::Point;
use crate::image_io::GrayImage;

/// Grasp points closer than this to a crossing are not graspable.
pub const CROSSING_EXCLUSION: f64 = 15.0;
/// Side of the square window graspability counts pixels in.
pub const GRASP_WINDOW: usize = 20;
pub const DEFAULT_GRASP_THRESHOLD: u32 = 40;

#[derive(Debug, Error)]
pub enum TopologyError {
    #[error("knot span {start}..{end} is not a U..O pair of one crossing in a sequence of {len}")]
    InvalidSpan { start: usize, end: usize, len: usize },
    #[error("cannot parse crossing code token {0:?}")]
    BadCode(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    O,
    U,
}

impl From<Label> for Sign {
    fn from(l: Label) -> Sign {
        match l {
            Label::Over => Sign::O,
            Label::Under => Sign::U,
        }
    }
}

/// One encounter of the trace with a crossing.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeqEntry {
    pub id: usize,
    pub sign: Sign,
    pub position: Point,
    pub trace_index: usize,
    /// Fractional trace position, `segment + t`.
    pub param: f64,
    /// The crossing has only this one encounter.
    #[serde(default)]
    pub incomplete: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StateProvenance {
    /// Crossing ids whose labels were changed by pair correction.
    pub corrected: Vec<usize>,
    pub incomplete: Vec<usize>,
    pub both_unclassifiable: Vec<usize>,
    /// Whether cancellation has been applied.
    pub simplified: bool,
}

/// Crossing encounters in trace order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TopologyState {
    pub sequence: Vec<SeqEntry>,
    pub provenance: StateProvenance,
}

impl TopologyState {
    pub fn len(&self) -> usize {
        self.sequence.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequence.is_empty()
    }

    /// Violations of the sequence invariants: each id occurs once (flagged
    /// incomplete) or twice with opposite signs, and entries follow the trace.
    pub fn check_invariants(&self) -> Vec<String> {
        let mut errs = Vec::new();
        let mut ids: Vec<usize> = self.sequence.iter().map(|e| e.id).collect();
        ids.sort_unstable();
        ids.dedup();
        for id in ids {
            let v: Vec<&SeqEntry> = self.sequence.iter().filter(|e| e.id == id).collect();
            match v.len() {
                1 if v[0].incomplete => {}
                2 if v[0].sign != v[1].sign => {}
                n => errs.push(format!("crossing {id}: {n} encounters with signs {:?}", v.iter().map(|e| e.sign).collect::<Vec<_>>())),
            }
        }
        if self.sequence.windows(2).any(|w| w[1].param < w[0].param) {
            errs.push("encounters out of trace order".to_string());
        }
        errs
    }

    /// Index of the other encounter with the same crossing id.
    pub fn partner(&self, idx: usize) -> Option<usize> {
        let id = self.sequence.get(idx)?.id;
        self.sequence.iter().enumerate().position(|(k, e)| k != idx && e.id == id)
    }

    /// Readable code with ids renumbered by first appearance, e.g.
    /// `U1 O2 U3 O1 U2 O3`.
    pub fn code(&self) -> String {
        let mut order: Vec<usize> = Vec::new();
        self.sequence
            .iter()
            .map(|e| {
                let n = order.iter().position(|id| *id == e.id).unwrap_or_else(|| {
                    order.push(e.id);
                    order.len() - 1
                });
                format!("{:?}{}", e.sign, n + 1)
            })
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Sequence from a code such as `U1 O2 O1 U2`; code ids become
    /// crossing ids minus one and entries get consecutive trace indices.
    pub fn from_code(code: &str) -> Result<TopologyState, TopologyError> {
        let mut sequence = Vec::new();
        for (k, tok) in code.split_whitespace().enumerate() {
            let bad = || TopologyError::BadCode(tok.to_string());
            let sign = match tok.chars().next() {
                Some('O') => Sign::O,
                Some('U') => Sign::U,
                _ => return Err(bad()),
            };
            let id: usize = tok[1..].parse().map_err(|_| bad())?;
            if id == 0 {
                return Err(bad());
            }
            sequence.push(SeqEntry {
                id: id - 1,
                sign,
                position: Point::default(),
                trace_index: k,
                param: k as f64,
                incomplete: false,
            });
        }
        for i in 0..sequence.len() {
            let id = sequence[i].id;
            sequence[i].incomplete = sequence.iter().filter(|e| e.id == id).count() == 1;
        }
        Ok(TopologyState { sequence, provenance: StateProvenance::default() })
    }
}

/// Flatten corrected crossings into encounters ordered along the trace.
pub fn build_sequence(corrected: &[CrossingObservation]) -> TopologyState {
    let mut sequence = Vec::new();
    let mut provenance = StateProvenance::default();
    for c in corrected {
        if c.flags.corrected {
            provenance.corrected.push(c.id);
        }
        if c.flags.both_unclassifiable {
            provenance.both_unclassifiable.push(c.id);
        }
        let incomplete = c.second.is_none();
        if incomplete {
            provenance.incomplete.push(c.id);
        }
        for e in c.encounters() {
            let label = e.label.unwrap_or(Label::from_score(e.score.unwrap_or(0.5)));
            sequence.push(SeqEntry {
                id: c.id,
                sign: label.into(),
                position: c.position,
                trace_index: e.trace_index,
                param: e.param,
                incomplete,
            });
        }
    }
    sequence.sort_by(|a, b| a.param.partial_cmp(&b.param).unwrap());
    TopologyState { sequence, provenance }
}

fn reid_one(seq: &[SeqEntry]) -> Option<usize> {
    seq.windows(2).position(|w| w[0].id == w[1].id)
}

fn reid_two(seq: &[SeqEntry]) -> Option<(usize, usize)> {
    let n = seq.len();
    for i in 0..n.saturating_sub(1) {
        let (a, b) = (seq[i], seq[i + 1]);
        if a.id == b.id || a.sign != b.sign {
            continue;
        }
        for j in i + 2..n - 1 {
            let (c, d) = (seq[j], seq[j + 1]);
            if (c.id == a.id && d.id == b.id) || (c.id == b.id && d.id == a.id) {
                return Some((i, j));
            }
        }
    }
    None
}

/// Remove Reidemeister I pairs until none remain, then one Reidemeister II
/// double pair, and repeat until neither applies.
pub fn cancel_crossings(state: &TopologyState) -> TopologyState {
    let mut seq = state.sequence.clone();
    loop {
        while let Some(i) = reid_one(&seq) {
            seq.drain(i..i + 2);
        }
        match reid_two(&seq) {
            Some((i, j)) => {
                seq.drain(j..j + 2);
                seq.drain(i..i + 2);
            }
            None => break,
        }
    }
    let mut provenance = state.provenance.clone();
    provenance.simplified = true;
    TopologyState { sequence: seq, provenance }
}

/// A candidate knot: an undercrossing, the overcrossing at the same
/// crossing later on, and at least one overcrossing between them.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnotSpan {
    pub start_idx: usize,
    pub end_idx: usize,
    pub first_undercrossing: SeqEntry,
}

/// Knot spans in trace order. Each undercrossing opens at most one span
/// (closed by its own partner); spans starting inside an earlier span are
/// skipped.
pub fn detect_knots(state: &TopologyState) -> Vec<KnotSpan> {
    let seq = &state.sequence;
    let mut out: Vec<KnotSpan> = Vec::new();
    for i in 0..seq.len() {
        if seq[i].sign != Sign::U || out.last().is_some_and(|k| i <= k.end_idx) {
            continue;
        }
        let Some(j) = (i + 1..seq.len()).find(|&j| seq[j].id == seq[i].id) else { continue };
        if seq[j].sign == Sign::O && seq[i + 1..j].iter().any(|e| e.sign == Sign::O) {
            out.push(KnotSpan { start_idx: i, end_idx: j, first_undercrossing: seq[i] });
        }
    }
    out
}

/// Cable pixels in the window around `p`, or `None` when `p` is too close
/// to a crossing.
pub fn graspability(image: &GrayImage, p: Point, crossings: &[Point], background_threshold: f32) -> Option<u32> {
    if crossings.iter().any(|c| c.dist(p) < CROSSING_EXCLUSION) {
        return None;
    }
    let half = (GRASP_WINDOW / 2) as i64;
    let (cx, cy) = (p.x.round() as i64, p.y.round() as i64);
    let mut n = 0;
    for y in cy - half..cy + half {
        for x in cx - half..cx + half {
            if image.get_or(x, y, 0.0) > background_threshold {
                n += 1;
            }
        }
    }
    Some(n)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraspConfig {
    /// Required graspability; 0 disables the extended search.
    pub threshold: u32,
    pub background_threshold: f32,
}

impl Default for GraspConfig {
    fn default() -> Self {
        GraspConfig { threshold: DEFAULT_GRASP_THRESHOLD, background_threshold: 100.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraspPoint {
    pub point: Point,
    pub trace_index: usize,
    /// `None` means within the crossing exclusion.
    pub score: Option<u32>,
    /// The point lies past the end of its search range.
    pub extended: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraspPlan {
    pub cage: GraspPoint,
    pub pinch: GraspPoint,
    /// Both scores reach the threshold.
    pub feasible: bool,
}

fn search(
    image: &GrayImage,
    trace: &[Point],
    crossings: &[Point],
    lo: f64,
    hi: f64,
    cfg: &GraspConfig,
) -> Option<GraspPoint> {
    let first = lo.ceil().max(0.0) as usize;
    let last = (hi.floor().max(0.0) as usize).min(trace.len().saturating_sub(1));
    let score = |i: usize| graspability(image, trace[i], crossings, cfg.background_threshold);
    let mut best: Option<GraspPoint> = None;
    for i in first..=last {
        if (i as f64) < lo || (i as f64) > hi {
            continue;
        }
        let s = score(i);
        if best.map_or(true, |b| s > b.score) {
            best = Some(GraspPoint { point: trace[i], trace_index: i, score: s, extended: false });
        }
    }
    if cfg.threshold == 0 || best.is_some_and(|b| b.score.is_some_and(|s| s >= cfg.threshold)) {
        return best;
    }
    for i in last + 1..trace.len() {
        if (i as f64) <= hi {
            continue;
        }
        let s = score(i);
        if s.is_some_and(|s| s >= cfg.threshold) {
            return Some(GraspPoint { point: trace[i], trace_index: i, score: s, extended: true });
        }
    }
    best
}

/// Pinch point between the last undercrossing inside the knot and the
/// first undercrossing after it; cage point between the knot's first
/// undercrossing and the next undercrossing inside the knot. Each search
/// continues past its range along the trace when nothing in range reaches
/// the threshold.
pub fn select_cage_pinch(
    knot: &KnotSpan,
    state: &TopologyState,
    trace: &[Point],
    image: &GrayImage,
    cfg: &GraspConfig,
) -> Result<GraspPlan, TopologyError> {
    let seq = &state.sequence;
    let (i, j) = (knot.start_idx, knot.end_idx);
    let valid = i < j
        && j < seq.len()
        && seq[i].sign == Sign::U
        && seq[j].sign == Sign::O
        && seq[i].id == seq[j].id
        && !trace.is_empty();
    if !valid {
        return Err(TopologyError::InvalidSpan { start: i, end: j, len: seq.len() });
    }
    let crossings: Vec<Point> = seq.iter().map(|e| e.position).collect();
    let end_of_trace = (trace.len() - 1) as f64;

    let u1 = (i..j).rev().find(|&k| seq[k].sign == Sign::U).expect("start is an undercrossing");
    let u2 = (j + 1..seq.len()).find(|&k| seq[k].sign == Sign::U);
    let pinch_hi = u2.map_or(end_of_trace, |k| seq[k].param);
    let ck = (i + 1..j).find(|&k| seq[k].sign == Sign::U).unwrap_or(j);

    let pinch = search(image, trace, &crossings, seq[u1].param, pinch_hi, cfg);
    let cage = search(image, trace, &crossings, seq[i].param, seq[ck].param, cfg);
    let fallback = |p: f64| {
        let k = (p.round().max(0.0) as usize).min(trace.len() - 1);
        GraspPoint { point: trace[k], trace_index: k, score: None, extended: false }
    };
    let pinch = pinch.unwrap_or_else(|| fallback(seq[j].param));
    let cage = cage.unwrap_or_else(|| fallback(seq[i].param));
    let ok = |g: &GraspPoint| cfg.threshold == 0 || g.score.is_some_and(|s| s >= cfg.threshold);
    Ok(GraspPlan { feasible: ok(&cage) && ok(&pinch), cage, pinch })
}

/// Everything derived from one set of corrected crossings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopologyReport {
    pub raw_code: String,
    pub raw: TopologyState,
    pub simplified_code: String,
    pub simplified: TopologyState,
    pub cancelled: bool,
    pub knots: Vec<KnotSpan>,
    pub grasp_plans: Vec<GraspPlan>,
}

impl TopologyReport {
    pub fn knotted(&self) -> bool {
        !self.knots.is_empty()
    }

    /// Sequence and knot-span invariant violations.
    pub fn check_invariants(&self) -> Vec<String> {
        let mut errs = self.raw.check_invariants();
        errs.extend(self.simplified.check_invariants());
        if self.simplified.len() > self.raw.len() {
            errs.push("simplification lengthened the sequence".to_string());
        }
        let seq = &self.simplified.sequence;
        for k in &self.knots {
            let ok = k.start_idx < k.end_idx
                && k.end_idx < seq.len()
                && seq[k.start_idx].sign == Sign::U
                && seq[k.end_idx].sign == Sign::O
                && seq[k.start_idx].id == seq[k.end_idx].id;
            if !ok {
                errs.push(format!("invalid knot span {}..{}", k.start_idx, k.end_idx));
            }
        }
        errs
    }
}

/// Sequence, optional cancellation, knots, and a grasp plan per knot.
pub fn analyze_topology(
    corrected: &[CrossingObservation],
    trace: &[Point],
    image: &GrayImage,
    cancel: bool,
    grasp: &GraspConfig,
) -> TopologyReport {
    let raw = build_sequence(corrected);
    let simplified = if cancel { cancel_crossings(&raw) } else { raw.clone() };
    let knots = detect_knots(&simplified);
    let grasp_plans = knots
        .iter()
        .filter_map(|k| select_cage_pinch(k, &simplified, trace, image, grasp).ok())
        .collect();
    TopologyReport {
        raw_code: raw.code(),
        simplified_code: simplified.code(),
        raw,
        simplified,
        cancelled: cancel,
        knots,
        grasp_plans,
    }
}

impl fmt::Display for TopologyState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.code())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simplify(code: &str) -> String {
        cancel_crossings(&TopologyState::from_code(code).unwrap()).code()
    }

    fn knot_starts(code: &str) -> Vec<usize> {
        detect_knots(&TopologyState::from_code(code).unwrap()).iter().map(|k| k.start_idx).collect()
    }

    #[test]
    fn code_round_trip() {
        for code in ["", "U1 O2 U3 O1 U2 O3", "O1 U1"] {
            assert_eq!(TopologyState::from_code(code).unwrap().code(), code);
        }
        assert!(TopologyState::from_code("X1").is_err());
    }

    #[test]
    fn reidemeister_examples() {
        assert_eq!(simplify("O1 U1"), "");
        assert_eq!(simplify("O1 O2 U1 U2"), "");
        assert_eq!(simplify("U1 O2 U3 O1 U2 O3"), "U1 O2 U3 O1 U2 O3");
        // the partner pair may come in either order
        assert_eq!(simplify("U1 U2 O2 O1"), "");
        // mixed signs are not a Reidemeister II pair
        assert_eq!(simplify("O1 U2 U1 O2"), "O1 U2 U1 O2");
    }

    #[test]
    fn fake_knot_codes_vanish() {
        assert_eq!(simplify("U1 O2 O3 O1 U2 U3"), "");
        assert_eq!(simplify("O1 U1 U2 O3 U4 O2 U3 O4"), "U1 O2 U3 O1 U2 O3");
    }

    #[test]
    fn knot_examples() {
        assert!(knot_starts("").is_empty());
        assert_eq!(knot_starts("U1 O2 U3 O1 U2 O3"), vec![0]);
        let k = detect_knots(&TopologyState::from_code("U1 O2 U3 O1 U2 O3").unwrap());
        assert_eq!(k[0].end_idx, 3);
        assert_eq!(knot_starts("U1 U2 O1 O2"), vec![1]);
        assert!(knot_starts("U1 O1").is_empty());
        assert!(knot_starts("O1 U2 U1 O2").is_empty());
        // uncancelled fake knots look knotted
        assert!(!knot_starts("U1 O2 O3 O1 U2 U3").is_empty());
        assert!(!knot_starts("U1 U2 O2 O1").is_empty());
    }

    #[test]
    fn incomplete_crossings_are_kept() {
        let s = TopologyState::from_code("U1 O2 U3 O1").unwrap();
        assert!(s.sequence[1].incomplete && s.sequence[2].incomplete);
        assert_eq!(cancel_crossings(&s).len(), 4);
    }

    fn straight_image() -> (GrayImage, Vec<Point>) {
        let mut img = GrayImage::new(300, 100);
        for x in 0..300 {
            for y in 47..=53 {
                img.set(x, y, 230);
            }
        }
        let trace = (0..25).map(|i| Point::new(6.0 + 12.0 * i as f64, 50.0)).collect();
        (img, trace)
    }

    fn state_at(code: &str, params: &[f64], trace: &[Point]) -> TopologyState {
        let mut s = TopologyState::from_code(code).unwrap();
        for (e, p) in s.sequence.iter_mut().zip(params) {
            e.param = *p;
            e.trace_index = p.floor() as usize;
            e.position = trace[e.trace_index];
        }
        s
    }

    #[test]
    fn grasp_points_avoid_crossings() {
        let (img, trace) = straight_image();
        let s = state_at("U1 O2 U3 O1 U2 O3", &[2.5, 6.5, 10.5, 14.5, 18.5, 22.5], &trace);
        let k = detect_knots(&s)[0];
        let plan = select_cage_pinch(&k, &s, &trace, &img, &GraspConfig::default()).unwrap();
        assert!(plan.feasible);
        for g in [plan.cage, plan.pinch] {
            assert!(!g.extended);
            assert!(s.sequence.iter().all(|e| e.position.dist(g.point) >= CROSSING_EXCLUSION));
            assert_eq!(g.score, Some(20 * 7));
        }
        assert!((10.5..=18.5).contains(&(plan.pinch.trace_index as f64)));
        assert!((2.5..=10.5).contains(&(plan.cage.trace_index as f64)));
    }

    #[test]
    fn dense_crossings_extend_the_search() {
        let (img, trace) = straight_image();
        let s = state_at("U1 O2 U3 O1 U2 O3", &[1.5, 2.5, 3.5, 4.5, 5.5, 6.5], &trace);
        let k = detect_knots(&s)[0];
        let plan = select_cage_pinch(&k, &s, &trace, &img, &GraspConfig::default()).unwrap();
        assert!(plan.pinch.extended && plan.cage.extended);
        assert!(plan.feasible);
        let off = GraspConfig { threshold: 0, ..Default::default() };
        let plan = select_cage_pinch(&k, &s, &trace, &img, &off).unwrap();
        assert!(!plan.pinch.extended && !plan.cage.extended);
    }

    #[test]
    fn bad_span_is_rejected() {
        let (img, trace) = straight_image();
        let s = TopologyState::from_code("U1 O1").unwrap();
        let k = KnotSpan { start_idx: 1, end_idx: 0, first_undercrossing: s.sequence[0] };
        assert!(select_cage_pinch(&k, &s, &trace, &img, &GraspConfig::default()).is_err());
    }
}
