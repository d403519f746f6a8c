//! End-to-end pipeline, tiered evaluation, reports and dataset generation.

mod dataset;
mod report;

use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::crossing::{
    classify_encounters, correct_crossings, detect_crossings, Classifier, CrossingError, CrossingObservation,
    OracleClassifier, PhotometricClassifier, DEFAULT_MERGE_RADIUS,
};
use crate::geometry::Point;
use crate::image_io::GrayImage;
use crate::scene_gen::{
    augment, random_scene, render, CableRecipe, SampleMethod, SampleParams, Scene, SceneError, SceneRecipe,
    TemplateName, TemplatePlacement,
};
use crate::topology::{analyze_topology, GraspConfig, TopologyReport};
use crate::tracer::{
    coverage, trace_cable, AnalyticPredictor, OracleNoise, OraclePredictor, Predictor, Termination, Trace,
    TraceConfig, TraceError,
};

pub use dataset::{generate_dataset, DatasetConfig, DatasetEntry, DatasetError, DatasetSource, Manifest};
pub use report::{emit_report, emit_reports, ReportError, ReportFormat};

/// Distance within which a detected undercrossing matches the true one.
pub const CROSSING_MATCH_RADIUS: f64 = 8.0;
/// Ground-truth arc fraction a trace must cover to count as complete.
pub const MIN_TRACE_COVERAGE: f64 = 0.8;
pub const COVERAGE_TOLERANCE: f64 = 4.0;
pub const DEFAULT_TRIALS: usize = 30;
pub const VOTES: usize = 3;

/// Deterministic child seed: splitmix64 over the parent and a path.
pub fn derive_seed(parent: u64, path: &[u64]) -> u64 {
    let mut z = parent;
    for p in path {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(*p);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
    }
    z
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictorKind {
    Analytic,
    Oracle,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    Photometric,
    Oracle,
}

impl std::str::FromStr for PredictorKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "analytic" => Ok(PredictorKind::Analytic),
            "oracle" => Ok(PredictorKind::Oracle),
            _ => Err(format!("unknown predictor {s:?}")),
        }
    }
}

impl std::str::FromStr for ClassifierKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "photometric" => Ok(ClassifierKind::Photometric),
            "oracle" => Ok(ClassifierKind::Oracle),
            _ => Err(format!("unknown classifier {s:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub predictor: PredictorKind,
    pub oracle_noise: OracleNoise,
    pub classifier: ClassifierKind,
    /// Flip probability of the oracle classifier.
    pub epsilon: f64,
    pub cancel: bool,
    pub merge_radius: f64,
    pub grasp: GraspConfig,
    pub trace: TraceConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            predictor: PredictorKind::Oracle,
            oracle_noise: OracleNoise::default(),
            classifier: ClassifierKind::Oracle,
            epsilon: 0.0,
            cancel: true,
            merge_radius: DEFAULT_MERGE_RADIUS,
            grasp: GraspConfig::default(),
            trace: TraceConfig::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("no cable {0} in scene")]
    NoSuchCable(usize),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Crossing(#[from] CrossingError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineOutput {
    pub trace: Trace,
    /// Set when tracing stopped on an error; the partial trace is analyzed.
    pub trace_error: Option<String>,
    pub crossings: Vec<CrossingObservation>,
    pub topology: TopologyReport,
}

pub fn make_predictor(scene: &Scene, cfg: &PipelineConfig, seed: u64) -> Box<dyn Predictor> {
    match cfg.predictor {
        PredictorKind::Analytic => Box::new(AnalyticPredictor::default()),
        PredictorKind::Oracle => Box::new(OraclePredictor::new(scene, cfg.oracle_noise, seed)),
    }
}

pub fn make_classifier(scene: &Scene, cfg: &PipelineConfig, seed: u64) -> Box<dyn Classifier> {
    match cfg.classifier {
        ClassifierKind::Photometric => Box::new(PhotometricClassifier),
        ClassifierKind::Oracle => Box::new(OracleClassifier::new(scene, cfg.epsilon, seed)),
    }
}

/// Trace configuration for one cable of a scene: every cable endpoint is a
/// terminal.
pub fn scene_trace_config(scene: &Scene, cable: usize, base: &TraceConfig) -> TraceConfig {
    TraceConfig {
        endpoints: scene.endpoints.iter().flat_map(|e| e.iter().copied()).collect(),
        cable_hint: Some(cable),
        ..base.clone()
    }
}

/// Crossings and topology of an existing trace.
pub fn analyze_trace(
    trace: &[Point],
    image: &GrayImage,
    classifier: &mut dyn Classifier,
    cfg: &PipelineConfig,
) -> Result<(Vec<CrossingObservation>, TopologyReport), CrossingError> {
    let mut crossings = if trace.len() >= 3 { detect_crossings(trace, cfg.merge_radius)? } else { Vec::new() };
    classify_encounters(classifier, image, trace, &mut crossings);
    let corrected = correct_crossings(&crossings);
    let topology = analyze_topology(&corrected, trace, image, cfg.cancel, &cfg.grasp);
    Ok((corrected, topology))
}

/// Trace `cable` from its first endpoint, then detect, classify and correct
/// crossings and analyze the topology.
pub fn run_pipeline(
    scene: &Scene,
    image: &GrayImage,
    cable: usize,
    cfg: &PipelineConfig,
    seed: u64,
) -> Result<PipelineOutput, PipelineError> {
    let path = scene.cable(cable).ok_or(PipelineError::NoSuchCable(cable))?;
    let start = path.endpoints()[0];
    let tcfg = scene_trace_config(scene, cable, &cfg.trace);
    let mut predictor = make_predictor(scene, cfg, derive_seed(seed, &[1]));
    let (trace, trace_error) = match trace_cable(image, start, predictor.as_mut(), &tcfg) {
        Ok(t) => (t, None),
        Err(e) => match e.partial() {
            Some(p) => (p.clone(), Some(e.to_string())),
            None => return Err(e.into()),
        },
    };
    let mut classifier = make_classifier(scene, cfg, derive_seed(seed, &[2]));
    let (crossings, topology) = analyze_trace(&trace.points, image, classifier.as_mut(), cfg)?;
    Ok(PipelineOutput { trace, trace_error, crossings, topology })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Tier {
    A1,
    A2,
    A3,
    C1,
    C2,
    C3,
}

impl Tier {
    pub const ALL: [Tier; 6] = [Tier::A1, Tier::A2, Tier::A3, Tier::C1, Tier::C2, Tier::C3];

    pub fn rule(self) -> SuccessRule {
        match self {
            Tier::A1 | Tier::A2 | Tier::A3 => SuccessRule::TraceReachesCorrectTerminal,
            Tier::C1 | Tier::C2 => SuccessRule::FirstKnotUndercrossingCorrect,
            Tier::C3 => SuccessRule::NoKnotVerdict,
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Tier::A1 => "three unknotted random cables",
            Tier::A2 => "knotted cable among two random cables",
            Tier::A3 => "two knotted cables and one random cable",
            Tier::C1 => "loose single knot",
            Tier::C2 => "dense single knot",
            Tier::C3 => "fake knots",
        }
    }

    /// Scene recipe for one trial; template choice and scale come from `rng`.
    pub fn recipe(self, rng: &mut impl Rng) -> SceneRecipe {
        let knotted = |rng: &mut dyn rand::RngCore, lo: f64, hi: f64| TemplatePlacement {
            name: TemplateName::KNOTTED[rng.gen_range(0..TemplateName::KNOTTED.len())],
            scale: rng.gen_range(lo..=hi),
            pose: None,
        };
        let cable = CableRecipe { method: SampleMethod::ExclusionRadius, params: SampleParams::default() };
        match self {
            Tier::A1 => SceneRecipe::random_cables(3, SampleMethod::ExclusionRadius),
            Tier::A2 => SceneRecipe {
                templates: vec![knotted(rng, 30.0, 36.0)],
                cables: vec![cable; 2],
                ..Default::default()
            },
            Tier::A3 => SceneRecipe {
                templates: vec![knotted(rng, 24.0, 28.0), knotted(rng, 24.0, 28.0)],
                cables: vec![cable],
                ..Default::default()
            },
            Tier::C1 => SceneRecipe { templates: vec![knotted(rng, 38.0, 44.0)], ..Default::default() },
            Tier::C2 => SceneRecipe { templates: vec![knotted(rng, 24.0, 28.0)], ..Default::default() },
            Tier::C3 => SceneRecipe {
                templates: vec![TemplatePlacement {
                    name: TemplateName::FAKE_KNOTS[rng.gen_range(0..TemplateName::FAKE_KNOTS.len())],
                    scale: rng.gen_range(30.0..=40.0),
                    pose: None,
                }],
                ..Default::default()
            },
        }
    }

    /// The scene of trial `trial` under master seed `seed`.
    pub fn scene(self, seed: u64, trial: usize) -> Result<Scene, SceneError> {
        let s = derive_seed(seed, &[self as u64, trial as u64]);
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let recipe = self.recipe(&mut rng);
        random_scene(rng.gen(), &recipe)
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl std::str::FromStr for Tier {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Tier::ALL.into_iter().find(|t| t.to_string().eq_ignore_ascii_case(s)).ok_or_else(|| format!("unknown tier {s:?}"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuccessRule {
    TraceReachesCorrectTerminal,
    FirstKnotUndercrossingCorrect,
    NoKnotVerdict,
}

/// Why a run failed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureTag {
    /// The trace left its cable and stopped somewhere other than a terminal.
    Misstep,
    /// The trace ended at another cable's terminal.
    WrongTerminal,
    /// Correct terminal, but part of the cable was skipped.
    Skip,
    /// A knot was reported where there is none.
    FalsePositive,
    /// No knot was reported on a knotted cable.
    FalseNegative,
    /// A knot was reported at the wrong undercrossing.
    WrongCrossing,
    /// The scene could not be generated or the pipeline raised an error.
    PipelineError,
}

impl fmt::Display for FailureTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("tag serializes");
        f.write_str(s.as_str().expect("string tag"))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VoteOutcome {
    pub success: bool,
    pub failure: Option<FailureTag>,
    pub coverage: f64,
    pub termination: Option<Termination>,
    pub knots: usize,
    pub code: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub trial: usize,
    pub seed: u64,
    pub template: Option<String>,
    pub success: bool,
    pub failure: Option<FailureTag>,
    pub votes: Vec<VoteOutcome>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ablations {
    /// Skip crossing cancellation.
    pub no_cancel: bool,
    /// Trace with the analytic predictor instead of the oracle.
    pub analytic_tracer: bool,
}

impl Ablations {
    pub fn label(&self) -> String {
        match (self.analytic_tracer, self.no_cancel) {
            (false, false) => "full".into(),
            (true, false) => "-LT".into(),
            (false, true) => "-CC".into(),
            (true, true) => "-LT -CC".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub pipeline: PipelineConfig,
    pub ablations: Ablations,
    pub votes: usize,
    pub augment: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { pipeline: PipelineConfig::default(), ablations: Ablations::default(), votes: VOTES, augment: true }
    }
}

impl EvalConfig {
    /// Pipeline settings with the ablations applied.
    pub fn effective_pipeline(&self) -> PipelineConfig {
        let mut p = self.pipeline.clone();
        if self.ablations.no_cancel {
            p.cancel = false;
        }
        if self.ablations.analytic_tracer {
            p.predictor = PredictorKind::Analytic;
        }
        p
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub tier: Tier,
    pub rule: SuccessRule,
    pub seed: u64,
    pub config: EvalConfig,
    pub trials: Vec<TrialOutcome>,
    pub successes: usize,
    /// `None` when there are no trials.
    pub success_rate: Option<f64>,
    pub failure_counts: BTreeMap<FailureTag, usize>,
}

/// Score one pipeline run against the scene by the tier's rule.
pub fn score_run(scene: &Scene, cable: usize, rule: SuccessRule, out: &PipelineOutput, cfg: &PipelineConfig) -> VoteOutcome {
    let path = scene.cable(cable).expect("scored cable exists");
    let cov = coverage(&out.trace.points, path.points(), COVERAGE_TOLERANCE);
    let knots = out.topology.knots.len();
    let failure = match rule {
        SuccessRule::TraceReachesCorrectTerminal => {
            let last = *out.trace.points.last().expect("trace has points");
            let target = path.endpoints()[1];
            let at_target = out.trace.termination == Termination::EndpointReached
                && out.trace_error.is_none()
                && last.dist(target) <= cfg.trace.endpoint_radius;
            if at_target {
                (cov < MIN_TRACE_COVERAGE).then_some(FailureTag::Skip)
            } else if out.trace_error.is_none() && out.trace.termination == Termination::EndpointReached {
                Some(FailureTag::WrongTerminal)
            } else {
                Some(FailureTag::Misstep)
            }
        }
        SuccessRule::FirstKnotUndercrossingCorrect => {
            let truth = first_knot_position(scene, cable);
            match (out.topology.knots.first(), truth) {
                (None, _) => Some(FailureTag::FalseNegative),
                (Some(_), None) => Some(FailureTag::FalsePositive),
                (Some(k), Some(t)) => {
                    (k.first_undercrossing.position.dist(t) > CROSSING_MATCH_RADIUS).then_some(FailureTag::WrongCrossing)
                }
            }
        }
        SuccessRule::NoKnotVerdict => (knots > 0).then_some(FailureTag::FalsePositive),
    };
    VoteOutcome {
        success: failure.is_none(),
        failure,
        coverage: cov,
        termination: Some(out.trace.termination),
        knots,
        code: out.topology.simplified_code.clone(),
    }
}

/// Position of the template's annotated first knot undercrossing.
pub fn first_knot_position(scene: &Scene, cable: usize) -> Option<Point> {
    let info = scene.templates.iter().find(|t| t.cable == cable)?;
    let id = info.first_knot_crossing?;
    scene.self_crossings(cable).get(id - 1).map(|c| c.position)
}

/// The image of one vote: a fresh rendering, augmented unless disabled.
pub fn vote_image(scene: &Scene, seed: u64, augmented: bool) -> GrayImage {
    let img = render(scene, derive_seed(seed, &[10]));
    if augmented {
        augment(&img, derive_seed(seed, &[11]))
    } else {
        img
    }
}

fn pipeline_failure() -> VoteOutcome {
    VoteOutcome {
        success: false,
        failure: Some(FailureTag::PipelineError),
        coverage: 0.0,
        termination: None,
        knots: 0,
        code: String::new(),
    }
}

/// One trial: build the scene, run the pipeline on each vote image and
/// take the majority.
pub fn run_trial(tier: Tier, seed: u64, trial: usize, cfg: &EvalConfig) -> TrialOutcome {
    let trial_seed = derive_seed(seed, &[tier as u64, trial as u64, 7]);
    let pipeline = cfg.effective_pipeline();
    let scene = tier.scene(seed, trial);
    let template = scene.as_ref().ok().and_then(|s| s.templates.first().map(|t| t.name.clone()));
    let votes: Vec<VoteOutcome> = (0..cfg.votes.max(1))
        .map(|v| {
            let Ok(scene) = &scene else { return pipeline_failure() };
            let vseed = derive_seed(trial_seed, &[v as u64]);
            let image = vote_image(scene, vseed, cfg.augment);
            match run_pipeline(scene, &image, 0, &pipeline, vseed) {
                Ok(out) => score_run(scene, 0, tier.rule(), &out, &pipeline),
                Err(_) => pipeline_failure(),
            }
        })
        .collect();
    let wins = votes.iter().filter(|v| v.success).count();
    let success = 2 * wins > votes.len();
    let failure = if success {
        None
    } else {
        let mut counts: BTreeMap<FailureTag, usize> = BTreeMap::new();
        for tag in votes.iter().filter_map(|v| v.failure) {
            *counts.entry(tag).or_default() += 1;
        }
        counts.into_iter().max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0))).map(|(t, _)| t)
    };
    TrialOutcome { trial, seed: trial_seed, template, success, failure, votes }
}

/// Run `trials` trials of a tier in parallel; results do not depend on
/// scheduling.
pub fn run_tier(tier: Tier, trials: usize, seed: u64, cfg: &EvalConfig) -> EvalReport {
    let outcomes: Vec<TrialOutcome> = (0..trials).into_par_iter().map(|t| run_trial(tier, seed, t, cfg)).collect();
    let successes = outcomes.iter().filter(|t| t.success).count();
    let mut failure_counts = BTreeMap::new();
    for tag in outcomes.iter().filter_map(|t| t.failure) {
        *failure_counts.entry(tag).or_default() += 1;
    }
    EvalReport {
        tier,
        rule: tier.rule(),
        seed,
        config: cfg.clone(),
        success_rate: (trials > 0).then(|| successes as f64 / trials as f64),
        successes,
        trials: outcomes,
        failure_counts,
    }
}

/// Internal consistency of a report: tallies, rates and vote majorities.
pub fn report_invariants(r: &EvalReport) -> Vec<String> {
    let mut errs = Vec::new();
    if r.rule != r.tier.rule() {
        errs.push(format!("{}: rule {:?} does not belong to the tier", r.tier, r.rule));
    }
    let wins = r.trials.iter().filter(|t| t.success).count();
    if wins != r.successes {
        errs.push(format!("{}: {} successes recorded, {} counted", r.tier, r.successes, wins));
    }
    let expected_rate = (!r.trials.is_empty()).then(|| wins as f64 / r.trials.len() as f64);
    if r.success_rate != expected_rate {
        errs.push(format!("{}: success rate {:?} does not match {:?}", r.tier, r.success_rate, expected_rate));
    }
    let tagged: usize = r.failure_counts.values().sum();
    if tagged != r.trials.len() - wins {
        errs.push(format!("{}: {} failures tagged, {} failed", r.tier, tagged, r.trials.len() - wins));
    }
    for t in &r.trials {
        let won = t.votes.iter().filter(|v| v.success).count();
        if t.success != (2 * won > t.votes.len()) || t.success == t.failure.is_some() {
            errs.push(format!("{} trial {}: verdict disagrees with its votes", r.tier, t.trial));
        }
        if t.votes.iter().any(|v| v.success == v.failure.is_some()) {
            errs.push(format!("{} trial {}: vote verdict disagrees with its tag", r.tier, t.trial));
        }
    }
    errs
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_split_deterministically() {
        assert_eq!(derive_seed(5, &[1, 2]), derive_seed(5, &[1, 2]));
        assert_ne!(derive_seed(5, &[1, 2]), derive_seed(5, &[2, 1]));
        assert_ne!(derive_seed(5, &[1]), derive_seed(6, &[1]));
    }

    #[test]
    fn tier_names_parse() {
        for t in Tier::ALL {
            assert_eq!(t.to_string().parse::<Tier>().unwrap(), t);
        }
        assert_eq!("c3".parse::<Tier>().unwrap(), Tier::C3);
    }

    #[test]
    fn zero_trials_leave_the_rate_undefined() {
        let r = run_tier(Tier::C3, 0, 1, &EvalConfig::default());
        assert!(r.trials.is_empty());
        assert_eq!(r.success_rate, None);
    }

    #[test]
    fn every_tier_builds_scenes() {
        for t in Tier::ALL {
            for trial in 0..3 {
                let s = t.scene(11, trial).unwrap_or_else(|e| panic!("{t} {trial}: {e}"));
                match t {
                    Tier::A1 => assert!(s.templates.is_empty() && s.cables.len() == 3),
                    Tier::C3 => assert!(!s.templates[0].knotted),
                    _ => assert!(s.templates[0].knotted),
                }
            }
        }
    }

    #[test]
    fn oracle_pipeline_on_a_loose_knot() {
        let r = run_tier(Tier::C1, 4, 3, &EvalConfig::default());
        assert_eq!(r.successes, 4, "{:?}", r.failure_counts);
        assert_eq!(r, run_tier(Tier::C1, 4, 3, &EvalConfig::default()));
    }

    #[test]
    fn fake_knots_need_cancellation() {
        let full = run_tier(Tier::C3, 4, 9, &EvalConfig::default());
        assert_eq!(full.successes, 4, "{:?}", full.trials);
        let no_cc = EvalConfig { ablations: Ablations { no_cancel: true, ..Default::default() }, ..Default::default() };
        let r = run_tier(Tier::C3, 4, 9, &no_cc);
        assert_eq!(r.successes, 0);
        assert_eq!(r.failure_counts.get(&FailureTag::FalsePositive), Some(&4));
        assert!(report_invariants(&r).is_empty());
        let mut broken = r.clone();
        broken.successes = 1;
        assert_eq!(report_invariants(&broken).len(), 1);
    }
}
