use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::templates::{template_cable, template_layers};
use super::{
    find_crossings, sample_cable, CablePath, Canvas, CrossingGT, Layer, Pose, SampleMethod, SampleParams, Scene,
    SceneError, TemplateName, CROSSING_MERGE_RADIUS,
};
use crate::geometry::{cumulative_lengths, dist_to_segment, line_angle, Point};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CableRecipe {
    pub method: SampleMethod,
    pub params: SampleParams,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TemplatePlacement {
    pub name: TemplateName,
    /// Pixels per template unit.
    pub scale: f64,
    /// Random pose when `None`.
    pub pose: Option<Pose>,
}

/// Conditions a generated scene must meet; scenes that fail are redrawn.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneQuality {
    pub min_crossing_separation: f64,
    pub min_crossing_angle_deg: f64,
    /// Arc length every crossing keeps from both ends of its cables.
    pub endpoint_clearance: f64,
    /// Smallest gap between strokes away from crossings, in thicknesses.
    pub min_stroke_gap: f64,
    /// Smallest distance from a cable endpoint to any other cable.
    pub endpoint_separation: f64,
}

impl Default for SceneQuality {
    fn default() -> Self {
        SceneQuality {
            min_crossing_separation: 14.0,
            min_crossing_angle_deg: 30.0,
            endpoint_clearance: 24.0,
            min_stroke_gap: 1.25,
            endpoint_separation: 16.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneRecipe {
    pub canvas: Canvas,
    pub thickness: f64,
    /// Template cables take the first ids, sampled cables follow.
    pub templates: Vec<TemplatePlacement>,
    pub cables: Vec<CableRecipe>,
    pub quality: SceneQuality,
    pub attempts: usize,
}

impl Default for SceneRecipe {
    fn default() -> Self {
        SceneRecipe {
            canvas: Canvas::default(),
            thickness: 6.0,
            templates: Vec::new(),
            cables: Vec::new(),
            quality: SceneQuality::default(),
            attempts: 1000,
        }
    }
}

impl SceneRecipe {
    pub fn random_cables(n: usize, method: SampleMethod) -> SceneRecipe {
        let cables = (0..n).map(|_| CableRecipe { method, params: SampleParams::default() }).collect();
        SceneRecipe { cables, ..Default::default() }
    }
}

/// Build a scene from a recipe. Template cables carry the z-order of their
/// canonical code; every other crossing gets a random z-order. Draws that
/// violate semi-planarity or the quality bounds are discarded and redrawn.
pub fn random_scene(seed: u64, recipe: &SceneRecipe) -> Result<Scene, SceneError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..recipe.attempts.max(1) {
        match try_scene(&mut rng, recipe) {
            Ok(Some(scene)) => return Ok(scene),
            Ok(None) | Err(SceneError::ThreeStrandCrossing { .. }) | Err(SceneError::OutOfCanvas { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    Err(SceneError::BudgetExhausted { attempts: recipe.attempts })
}

fn try_scene(rng: &mut ChaCha8Rng, recipe: &SceneRecipe) -> Result<Option<Scene>, SceneError> {
    let canvas = recipe.canvas;
    let mut cables = Vec::new();
    let mut infos = Vec::new();
    for (id, t) in recipe.templates.iter().enumerate() {
        let placed = match t.pose {
            Some(pose) => {
                let (c, info) = template_cable(t.name, t.scale, pose, recipe.thickness, id)?;
                c.fits(canvas).then_some((c, info))
            }
            None => (0..50).find_map(|_| {
                let pose = Pose {
                    center: Point::new(
                        rng.gen_range(0.0..canvas.width as f64),
                        rng.gen_range(0.0..canvas.height as f64),
                    ),
                    angle: rng.gen_range(0.0..std::f64::consts::TAU),
                };
                let (c, info) = template_cable(t.name, t.scale, pose, recipe.thickness, id).ok()?;
                c.fits(canvas).then_some((c, info))
            }),
        };
        let Some((cable, info)) = placed else {
            return Err(SceneError::OutOfCanvas { name: t.name.to_string() });
        };
        cables.push(cable);
        infos.push(info);
    }
    for (k, c) in recipe.cables.iter().enumerate() {
        let params = SampleParams { id: recipe.templates.len() + k, thickness: recipe.thickness, ..c.params };
        cables.push(sample_cable(rng.gen(), c.method, canvas, &params)?);
    }

    let mut crossings = find_crossings(&cables, CROSSING_MERGE_RADIUS)?;
    if !meets_quality(&cables, &crossings, &recipe.quality) {
        return Ok(None);
    }
    let mut fixed: HashMap<usize, Layer> = HashMap::new();
    for info in &infos {
        let own: Vec<(usize, CrossingGT)> = crossings
            .iter()
            .copied()
            .enumerate()
            .filter(|(_, c)| c.strand_a.cable == info.cable && c.strand_b.cable == info.cable)
            .collect();
        let just: Vec<CrossingGT> = own.iter().map(|x| x.1).collect();
        let layers = match template_layers(info, &just) {
            Ok(l) => l,
            // another cable cut through the template and split a crossing
            Err(SceneError::TemplateMismatch { .. }) => return Ok(None),
            Err(e) => return Err(e),
        };
        for ((i, _), l) in own.iter().zip(layers) {
            fixed.insert(*i, l);
        }
    }
    for (i, c) in crossings.iter_mut().enumerate() {
        c.over = match fixed.get(&i) {
            Some(l) => *l,
            None if rng.gen_bool(0.5) => Layer::A,
            None => Layer::B,
        };
    }
    let endpoints = cables.iter().map(|c| c.endpoints()).collect();
    Ok(Some(Scene { canvas, cables, crossings_gt: crossings, endpoints, templates: infos }))
}

fn meets_quality(cables: &[CablePath], crossings: &[CrossingGT], q: &SceneQuality) -> bool {
    let by_id: HashMap<usize, &CablePath> = cables.iter().map(|c| (c.id, c)).collect();
    let lengths: HashMap<usize, f64> = cables.iter().map(|c| (c.id, c.length())).collect();
    let tangent = |s: &super::StrandRef| {
        let p = by_id[&s.cable].points();
        p[s.segment + 1] - p[s.segment]
    };
    for (i, c) in crossings.iter().enumerate() {
        if line_angle(tangent(&c.strand_a), tangent(&c.strand_b)) < q.min_crossing_angle_deg.to_radians() {
            return false;
        }
        for s in [c.strand_a, c.strand_b] {
            if s.arc < q.endpoint_clearance || lengths[&s.cable] - s.arc < q.endpoint_clearance {
                return false;
            }
        }
        if crossings[i + 1..].iter().any(|d| d.position.dist(c.position) < q.min_crossing_separation) {
            return false;
        }
    }
    for a in cables {
        for e in a.endpoints() {
            let near = cables.iter().filter(|b| b.id != a.id).any(|b| {
                b.points().windows(2).any(|w| dist_to_segment(e, w[0], w[1]) < q.endpoint_separation)
            });
            if near {
                return false;
            }
        }
    }
    let thickness = cables.iter().map(|c| c.thickness).fold(0.0, f64::max);
    stroke_gap(cables, crossings, thickness) >= q.min_stroke_gap * thickness
}

/// Smallest distance between two stroke samples that are neither near a
/// crossing nor close along the same cable.
pub(crate) fn stroke_gap(cables: &[CablePath], crossings: &[CrossingGT], thickness: f64) -> f64 {
    let limit = 2.0 * thickness;
    let near_crossing = 3.0 * thickness;
    let same_cable_arc = 4.0 * thickness;
    let mut grid: HashMap<(i64, i64), Vec<(usize, f64, Point)>> = HashMap::new();
    let cell = limit.max(1.0);
    for c in cables {
        let cum = cumulative_lengths(c.points());
        for (i, p) in c.points().iter().enumerate().step_by(2) {
            if crossings.iter().any(|x| x.position.dist(*p) <= near_crossing) {
                continue;
            }
            grid.entry(((p.x / cell).floor() as i64, (p.y / cell).floor() as i64)).or_default().push((c.id, cum[i], *p));
        }
    }
    let mut best = f64::INFINITY;
    for (&(gx, gy), items) in &grid {
        for (dx, dy) in [(0, 0), (1, 0), (0, 1), (1, 1), (1, -1)] {
            let Some(other) = grid.get(&(gx + dx, gy + dy)) else { continue };
            for (k, a) in items.iter().enumerate() {
                let rest = if (dx, dy) == (0, 0) { &items[k + 1..] } else { &other[..] };
                for b in rest {
                    if a.0 == b.0 && (a.1 - b.1).abs() <= same_cable_arc {
                        continue;
                    }
                    best = best.min(a.2.dist(b.2));
                }
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene_gen::ground_truth_crossings;

    #[test]
    fn random_scenes_are_reproducible() {
        let recipe = SceneRecipe::random_cables(3, SampleMethod::ExclusionRadius);
        let a = random_scene(5, &recipe).unwrap();
        let b = random_scene(5, &recipe).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        assert_eq!(a.cables.len(), 3);
    }

    #[test]
    fn templates_keep_their_code_among_distractors() {
        let recipe = SceneRecipe {
            templates: vec![TemplatePlacement { name: TemplateName::Overhand, scale: 36.0, pose: None }],
            cables: vec![CableRecipe { method: SampleMethod::ExclusionRadius, params: SampleParams::default() }; 2],
            ..Default::default()
        };
        for seed in 0..5 {
            let scene = random_scene(seed, &recipe).unwrap();
            assert_eq!(scene.crossing_code(0), TemplateName::Overhand.code());
            assert_eq!(ground_truth_crossings(&scene).unwrap(), scene.crossings_gt);
        }
    }

    #[test]
    fn quality_bounds_hold() {
        let recipe = SceneRecipe::random_cables(3, SampleMethod::SpatialConstraint);
        for seed in 0..5 {
            let scene = random_scene(seed, &recipe).unwrap();
            let c = &scene.crossings_gt;
            for i in 0..c.len() {
                for j in i + 1..c.len() {
                    assert!(c[i].position.dist(c[j].position) >= 14.0);
                }
            }
        }
    }
}
