use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

use dlo_trace::crossing::{classify_encounters, correct_crossings, detect_crossings, CrossingObservation};
use dlo_trace::harness::{
    emit_reports, generate_dataset, make_classifier, make_predictor, report_invariants, run_tier, scene_trace_config,
    Ablations, ClassifierKind, DatasetConfig, DatasetSource, EvalConfig, EvalReport, PipelineConfig, PredictorKind,
    ReportFormat, Tier, DEFAULT_TRIALS,
};
use dlo_trace::imitation::{record, replay, Demonstration, ReplayMode};
use dlo_trace::scene_gen::{SampleMethod, Scene, TemplateName};
use dlo_trace::topology::{analyze_topology, GraspConfig};
use dlo_trace::tracer::{trace_cable, OracleNoise, Trace};
use dlo_trace::{GrayImage, Point};

type Res<T> = Result<T, Box<dyn std::error::Error>>;

#[derive(Parser)]
#[command(name = "dlo-trace", version, about = "Cable tracing and knot topology from grayscale images")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write synthetic scenes, images and a manifest.
    Generate(GenerateArgs),
    /// Trace one cable from a start pixel.
    Trace(TraceArgs),
    #[command(subcommand)]
    Analyze(AnalyzeCmd),
    #[command(subcommand)]
    Demo(DemoCmd),
    /// Run one evaluation tier.
    Evaluate(EvaluateArgs),
    /// Summarize the reports in a directory.
    Report(ReportArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, conflicts_with = "random")]
    template: Option<TemplateName>,
    /// Sampling method for random cables.
    #[arg(long)]
    random: Option<SampleMethod>,
    /// Cables per random scene.
    #[arg(long, default_value_t = 1)]
    cables: usize,
    #[arg(long, default_value_t = 300)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    no_augment: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TraceArgs {
    #[arg(long)]
    image: PathBuf,
    #[arg(long)]
    scene: PathBuf,
    /// Start pixel as "x,y".
    #[arg(long, value_parser = parse_point)]
    start: Point,
    #[arg(long, default_value = "oracle")]
    predictor: PredictorKind,
    /// Oracle noise as "sigma,p_fail".
    #[arg(long, default_value = "0,0")]
    noise: OracleNoise,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum AnalyzeCmd {
    /// Detect, classify and correct the crossings of a trace.
    Crossings(CrossingsArgs),
    /// Sequence, cancellation, knots and grasp points.
    Topology(TopologyArgs),
}

#[derive(Args)]
struct CrossingsArgs {
    #[arg(long)]
    trace: PathBuf,
    #[arg(long)]
    image: PathBuf,
    #[arg(long, default_value = "photometric")]
    classifier: ClassifierKind,
    /// Flip probability of the oracle classifier.
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,
    /// Ground truth, required by the oracle classifier.
    #[arg(long)]
    scene: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Written to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TopologyArgs {
    #[arg(long)]
    crossings: PathBuf,
    #[arg(long)]
    trace: PathBuf,
    #[arg(long)]
    image: PathBuf,
    #[arg(long)]
    no_cancel: bool,
    #[arg(long, default_value_t = dlo_trace::topology::DEFAULT_GRASP_THRESHOLD)]
    threshold: u32,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum DemoCmd {
    /// Store pick/place points relative to a trace.
    Record {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        crossings: PathBuf,
        /// Points as "x,y;x,y;..." alternating pick and place.
        #[arg(long)]
        points: String,
        #[arg(long, default_value = "absolute_arc_length")]
        mode: ReplayMode,
        #[arg(long)]
        out: PathBuf,
    },
    /// Place a recorded demonstration on another trace.
    Replay {
        #[arg(long)]
        demo: PathBuf,
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        crossings: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    tier: Tier,
    #[arg(long, default_value_t = DEFAULT_TRIALS)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    no_cancel: bool,
    #[arg(long)]
    analytic_tracer: bool,
    #[arg(long, default_value = "oracle")]
    classifier: ClassifierKind,
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,
    #[arg(long, default_value = "0,0")]
    noise: OracleNoise,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value = "md")]
    format: ReportFormat,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_point(s: &str) -> Result<Point, String> {
    let (x, y) = s.split_once(',').ok_or_else(|| format!("expected \"x,y\", got {s:?}"))?;
    let x: f64 = x.trim().parse().map_err(|e| format!("{e}"))?;
    let y: f64 = y.trim().parse().map_err(|e| format!("{e}"))?;
    Ok(Point::new(x, y))
}

fn parse_points(s: &str) -> Result<Vec<Point>, String> {
    s.split(';').filter(|p| !p.trim().is_empty()).map(parse_point).collect()
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Res<T> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?)
}

fn write_out(out: Option<&Path>, text: &str) -> Res<()> {
    match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            fs::write(p, text).map_err(|e| format!("{}: {e}", p.display()))?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("output serializes") + "\n"
}

/// Encounter parameters of the crossings, ascending.
fn encounter_params(crossings: &[CrossingObservation]) -> Vec<f64> {
    let mut v: Vec<f64> = crossings.iter().flat_map(|c| c.encounters().map(|e| e.param).collect::<Vec<_>>()).collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v
}

/// Outcome of a command: invariant violations found along the way.
type Violations = Vec<String>;

fn run(cli: Cli) -> Res<Violations> {
    match cli.cmd {
        Cmd::Generate(a) => {
            let source = match (a.template, a.random) {
                (Some(name), _) => DatasetSource::Template { name },
                (None, Some(method)) => DatasetSource::Random { method, cables: a.cables },
                (None, None) => DatasetSource::Mix { knotted_fraction: 0.5 },
            };
            let cfg = DatasetConfig { count: a.count, seed: a.seed, source, augment: !a.no_augment };
            let m = generate_dataset(&cfg, &a.out)?;
            eprintln!("wrote {} scenes to {}", m.entries.len(), a.out.display());
            Ok(Vec::new())
        }
        Cmd::Trace(a) => {
            let image = GrayImage::load(&a.image)?;
            let scene = Scene::load(&a.scene)?;
            let cable = scene
                .cables
                .iter()
                .min_by(|x, y| {
                    let d = |c: &dlo_trace::scene_gen::CablePath| {
                        dlo_trace::geometry::Polyline::new(c.points().to_vec()).distance(a.start)
                    };
                    d(x).partial_cmp(&d(y)).unwrap()
                })
                .map_or(0, |c| c.id);
            let cfg = PipelineConfig { predictor: a.predictor, oracle_noise: a.noise, ..Default::default() };
            let tcfg = scene_trace_config(&scene, cable, &cfg.trace);
            let mut predictor = make_predictor(&scene, &cfg, a.seed);
            let trace = match trace_cable(&image, a.start, predictor.as_mut(), &tcfg) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("trace stopped: {e}");
                    e.partial().cloned().ok_or(e)?
                }
            };
            write_out(Some(&a.out), &json(&trace))?;
            Ok(Vec::new())
        }
        Cmd::Analyze(AnalyzeCmd::Crossings(a)) => {
            let trace: Trace = read_json(&a.trace)?;
            let image = GrayImage::load(&a.image)?;
            let scene = match &a.scene {
                Some(p) => Scene::load(p)?,
                None if a.classifier == ClassifierKind::Oracle => return Err("--classifier oracle needs --scene".into()),
                None => Scene::empty(dlo_trace::scene_gen::Canvas::new(image.width(), image.height())),
            };
            let cfg = PipelineConfig { classifier: a.classifier, epsilon: a.epsilon, ..Default::default() };
            let mut classifier = make_classifier(&scene, &cfg, a.seed);
            let mut crossings =
                if trace.points.len() >= 3 { detect_crossings(&trace.points, cfg.merge_radius)? } else { Vec::new() };
            classify_encounters(classifier.as_mut(), &image, &trace.points, &mut crossings);
            let corrected = correct_crossings(&crossings);
            let mut errs = Vec::new();
            for c in &corrected {
                if let Some(s) = c.second {
                    if s.label == c.first.label {
                        errs.push(format!("crossing {} keeps equal labels after correction", c.id));
                    }
                }
            }
            write_out(a.out.as_deref(), &json(&corrected))?;
            Ok(errs)
        }
        Cmd::Analyze(AnalyzeCmd::Topology(a)) => {
            let crossings: Vec<CrossingObservation> = read_json(&a.crossings)?;
            let trace: Trace = read_json(&a.trace)?;
            let image = GrayImage::load(&a.image)?;
            let grasp = GraspConfig { threshold: a.threshold, ..Default::default() };
            let report = analyze_topology(&crossings, &trace.points, &image, !a.no_cancel, &grasp);
            write_out(a.out.as_deref(), &json(&report))?;
            eprintln!("{} -> {} : {} knot(s)", report.raw_code, report.simplified_code, report.knots.len());
            Ok(report.check_invariants())
        }
        Cmd::Demo(DemoCmd::Record { trace, crossings, points, mode, out }) => {
            let trace: Trace = read_json(&trace)?;
            let crossings: Vec<CrossingObservation> = read_json(&crossings)?;
            let points = parse_points(&points)?;
            let demo = record(&trace.points, &encounter_params(&crossings), &points, mode)?;
            write_out(Some(&out), &demo.to_json())?;
            let back = replay(&demo, &trace.points, &encounter_params(&crossings))?;
            Ok(back
                .iter()
                .zip(&points)
                .filter(|(b, p)| b.dist(**p) > 1.0)
                .map(|(b, p)| format!("replay of ({:.1}, {:.1}) lands at ({:.1}, {:.1})", p.x, p.y, b.x, b.y))
                .collect())
        }
        Cmd::Demo(DemoCmd::Replay { demo, trace, crossings, out }) => {
            let demo: Demonstration = read_json(&demo)?;
            let trace: Trace = read_json(&trace)?;
            let crossings: Vec<CrossingObservation> = read_json(&crossings)?;
            let points = replay(&demo, &trace.points, &encounter_params(&crossings))?;
            write_out(out.as_deref(), &json(&points))?;
            Ok(Vec::new())
        }
        Cmd::Evaluate(a) => {
            let cfg = EvalConfig {
                pipeline: PipelineConfig {
                    classifier: a.classifier,
                    epsilon: a.epsilon,
                    oracle_noise: a.noise,
                    ..Default::default()
                },
                ablations: Ablations { no_cancel: a.no_cancel, analytic_tracer: a.analytic_tracer },
                ..Default::default()
            };
            let t0 = std::time::Instant::now();
            let report = run_tier(a.tier, a.trials, a.seed, &cfg);
            let suffix = match (a.analytic_tracer, a.no_cancel) {
                (false, false) => "",
                (true, false) => "_no_lt",
                (false, true) => "_no_cc",
                (true, true) => "_no_lt_no_cc",
            };
            fs::create_dir_all(&a.out)?;
            let path = a.out.join(format!("{}{suffix}.json", a.tier));
            write_out(Some(&path), &json(&report))?;
            eprintln!(
                "{} {}: {}/{} in {:.1} s -> {}",
                a.tier,
                cfg.ablations.label(),
                report.successes,
                report.trials.len(),
                t0.elapsed().as_secs_f64(),
                path.display()
            );
            Ok(report_invariants(&report))
        }
        Cmd::Report(a) => {
            let mut paths: Vec<PathBuf> = fs::read_dir(&a.input)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "json"))
                .collect();
            paths.sort();
            let mut reports: Vec<EvalReport> = Vec::new();
            for p in &paths {
                match read_json::<EvalReport>(p) {
                    Ok(r) => reports.push(r),
                    Err(e) => eprintln!("skipping {e}"),
                }
            }
            reports.sort_by_key(|r| (r.tier, r.config.ablations.label()));
            write_out(a.out.as_deref(), &emit_reports(&reports, a.format)?)?;
            Ok(reports.iter().flat_map(report_invariants).collect())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(v) if v.is_empty() => ExitCode::SUCCESS,
        Ok(v) => {
            for e in v {
                eprintln!("invariant violated: {e}");
            }
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
