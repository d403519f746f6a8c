//! Record a pick/place pair on one overhand knot and replay it on the same
//! knot at another size and pose, in both replay modes.

use dlo_trace::harness::{run_pipeline, PipelineConfig, PipelineOutput};
use dlo_trace::imitation::{record, replay, ReplayMode};
use dlo_trace::scene_gen::{knot_template, render, Canvas, Pose, TemplateName};
use dlo_trace::Point;

fn pipeline(scale: f64, pose: Pose) -> Result<PipelineOutput, Box<dyn std::error::Error>> {
    let scene = knot_template(TemplateName::Overhand, scale, pose)?;
    Ok(run_pipeline(&scene, &render(&scene, 0), 0, &PipelineConfig::default(), 0)?)
}

fn encounters(out: &PipelineOutput) -> Vec<f64> {
    let mut v: Vec<f64> = out.topology.raw.sequence.iter().map(|e| e.param).collect();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    v
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let center = Pose::centered(Canvas::default());
    let a = pipeline(36.0, center)?;
    let b = pipeline(44.0, Pose { angle: 2.1, center: center.center + Point::new(10.0, -15.0) })?;

    // pick just beside the trace in the middle, place a little further on
    let mid = a.trace.points[a.trace.points.len() / 2];
    let late = a.trace.points[a.trace.points.len() * 3 / 4];
    let raw = [mid + Point::new(4.0, 3.0), late + Point::new(3.0, -6.0)];
    for mode in [ReplayMode::AbsoluteArcLength, ReplayMode::CrossingRelative] {
        let demo = record(&a.trace.points, &encounters(&a), &raw, mode)?;
        let same = replay(&demo, &a.trace.points, &encounters(&a))?;
        let moved = replay(&demo, &b.trace.points, &encounters(&b))?;
        println!("{mode:?}");
        for (i, act) in demo.actions.iter().enumerate() {
            println!(
                "  {:?}: arc {:6.1} after encounter {:2} offset ({:5.1}, {:5.1}) -> same {:?}, other knot ({:.1}, {:.1})",
                act.kind,
                act.arc_length,
                act.crossing_index,
                act.displacement.x,
                act.displacement.y,
                same[i].dist(raw[i]) < 1e-6,
                moved[i].x,
                moved[i].y
            );
        }
    }
    Ok(())
}
