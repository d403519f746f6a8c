//! Trace the same overhand knot with the oracle and the analytic predictor
//! and compare coverage of the true cable.

use dlo_trace::harness::scene_trace_config;
use dlo_trace::scene_gen::{knot_template, render, Canvas, Pose, TemplateName};
use dlo_trace::tracer::{coverage, trace_cable, AnalyticPredictor, OracleNoise, OraclePredictor, Predictor, TraceConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scene = knot_template(TemplateName::Overhand, 40.0, Pose::centered(Canvas::default()))?;
    let image = render(&scene, 0);
    let start = scene.cables[0].endpoints()[0];
    let cfg = scene_trace_config(&scene, 0, &TraceConfig::default());

    let predictors: Vec<Box<dyn Predictor>> = vec![
        Box::new(OraclePredictor::new(&scene, OracleNoise::default(), 0)),
        Box::new(OraclePredictor::new(&scene, OracleNoise { sigma: 2.0, p_fail: 0.0 }, 0)),
        Box::new(AnalyticPredictor::default()),
    ];
    for mut p in predictors {
        let name = p.name();
        match trace_cable(&image, start, p.as_mut(), &cfg) {
            Ok(t) => println!(
                "{name:9} {:3} points, {:?}, coverage {:.2}",
                t.points.len(),
                t.termination,
                coverage(&t.points, scene.cables[0].points(), 4.0)
            ),
            Err(e) => println!("{name:9} failed: {e}"),
        }
    }
    Ok(())
}
