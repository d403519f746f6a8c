//! Full pipeline on an overhand knot, then cage and pinch grasp points for
//! the first knot found.

use dlo_trace::harness::{run_pipeline, PipelineConfig};
use dlo_trace::scene_gen::{knot_template, render, Canvas, Pose, TemplateName};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scene = knot_template(TemplateName::Overhand, 40.0, Pose { angle: 1.0, ..Pose::centered(Canvas::default()) })?;
    let image = render(&scene, 0);
    let out = run_pipeline(&scene, &image, 0, &PipelineConfig::default(), 0)?;
    println!("sequence {}", out.topology.simplified_code);
    for (k, plan) in out.topology.knots.iter().zip(&out.topology.grasp_plans) {
        let u = k.first_undercrossing.position;
        println!("knot from index {} to {}, first undercrossing at ({:.1}, {:.1})", k.start_idx, k.end_idx, u.x, u.y);
        for (name, g) in [("cage", plan.cage), ("pinch", plan.pinch)] {
            println!(
                "  {name:5} ({:5.1}, {:5.1}) trace index {:3} graspability {:?}{}",
                g.point.x,
                g.point.y,
                g.trace_index,
                g.score,
                if g.extended { " (beyond range)" } else { "" }
            );
        }
    }
    Ok(())
}
