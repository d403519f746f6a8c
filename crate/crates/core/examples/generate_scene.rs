//! Build a template scene and a random three-cable scene, render both and
//! save them next to their ground truth.
//!
//!     cargo run --example generate_scene -- /tmp/scenes

use std::path::PathBuf;

use dlo_trace::scene_gen::{
    augment, knot_template, random_scene, render, Canvas, Pose, SampleMethod, SceneRecipe, TemplateName,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "generated".into()));
    std::fs::create_dir_all(&out)?;

    let knot = knot_template(TemplateName::FigureEight, 36.0, Pose { angle: 0.4, ..Pose::centered(Canvas::default()) })?;
    println!("figure_eight: code {}", knot.crossing_code(0));
    knot.save(out.join("figure_eight.json"))?;
    render(&knot, 1).save(out.join("figure_eight.png"))?;

    let tangle = random_scene(5, &SceneRecipe::random_cables(3, SampleMethod::ExclusionRadius))?;
    println!("random: {} cables, {} crossings", tangle.cables.len(), tangle.crossings_gt.len());
    tangle.save(out.join("random.json"))?;
    augment(&render(&tangle, 2), 3).save(out.join("random.png"))?;
    println!("wrote {}", out.display());
    Ok(())
}
