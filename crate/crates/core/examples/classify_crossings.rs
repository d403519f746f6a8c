//! Detect the crossings of a traced figure-eight, score each encounter
//! photometrically and show what pair correction changes.

use dlo_trace::crossing::{classify_encounters, correct_crossings, detect_crossings, PhotometricClassifier};
use dlo_trace::harness::scene_trace_config;
use dlo_trace::scene_gen::{augment, knot_template, render, Canvas, Pose, TemplateName};
use dlo_trace::tracer::{trace_cable, OracleNoise, OraclePredictor, TraceConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scene = knot_template(TemplateName::FigureEight, 34.0, Pose::centered(Canvas::default()))?;
    let image = augment(&render(&scene, 0), 1);
    let mut oracle = OraclePredictor::new(&scene, OracleNoise::default(), 0);
    let trace = trace_cable(&image, scene.cables[0].endpoints()[0], &mut oracle, &scene_trace_config(&scene, 0, &TraceConfig::default()))?;

    let mut crossings = detect_crossings(&trace.points, 6.0)?;
    classify_encounters(&mut PhotometricClassifier, &image, &trace.points, &mut crossings);
    for (raw, fixed) in crossings.iter().zip(correct_crossings(&crossings)) {
        let second = fixed.second.unwrap();
        println!(
            "crossing {} at ({:5.1}, {:5.1}): raw {:.2}/{:.2} -> {:?}/{:?}, confidence {:.2}{}",
            raw.id,
            raw.position.x,
            raw.position.y,
            raw.first.raw_score.unwrap(),
            raw.second.unwrap().raw_score.unwrap(),
            fixed.first.label.unwrap(),
            second.label.unwrap(),
            fixed.confidence,
            if fixed.flags.corrected { " (corrected)" } else { "" }
        );
    }
    println!("ground truth: {}", scene.crossing_code(0));
    Ok(())
}
