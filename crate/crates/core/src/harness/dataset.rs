use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::derive_seed;
use crate::scene_gen::{
    augment, random_scene, render, CableRecipe, SampleMethod, SampleParams, Scene, SceneError, SceneRecipe,
    TemplateName, TemplatePlacement,
};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("scene {index}: {source}")]
    Scene { index: usize, source: SceneError },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Image { path: PathBuf, message: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetSource {
    /// Knotted templates (with an optional distractor) for the given
    /// fraction of scenes; trivial templates and random cables otherwise.
    Mix { knotted_fraction: f64 },
    Template { name: TemplateName },
    Random { method: SampleMethod, cables: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub count: usize,
    pub seed: u64,
    pub source: DatasetSource,
    pub augment: bool,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig { count: 300, seed: 0, source: DatasetSource::Mix { knotted_fraction: 0.5 }, augment: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub index: usize,
    pub seed: u64,
    pub scene: String,
    pub image: String,
    pub knotted: bool,
    pub template: Option<String>,
    pub code: Option<String>,
    pub cables: usize,
    pub crossings: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: DatasetConfig,
    pub knotted_fraction: f64,
    pub entries: Vec<DatasetEntry>,
}

/// Scene `index` of a dataset, with its knot label.
pub fn dataset_scene(cfg: &DatasetConfig, index: usize) -> Result<(Scene, bool), SceneError> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[index as u64]));
    let distractor = CableRecipe { method: SampleMethod::ExclusionRadius, params: SampleParams::default() };
    let template = |name: TemplateName, rng: &mut ChaCha8Rng| TemplatePlacement { name, scale: rng.gen_range(28.0..=40.0), pose: None };
    let recipe = match &cfg.source {
        DatasetSource::Template { name } => SceneRecipe { templates: vec![template(*name, &mut rng)], ..Default::default() },
        DatasetSource::Random { method, cables } => SceneRecipe::random_cables(*cables, *method),
        DatasetSource::Mix { knotted_fraction } => {
            // spreads exactly floor(count * fraction) knotted scenes over the indices
            let f = knotted_fraction.clamp(0.0, 1.0);
            let knotted = ((index + 1) as f64 * f).floor() > (index as f64 * f).floor();
            if knotted {
                let name = TemplateName::KNOTTED[rng.gen_range(0..TemplateName::KNOTTED.len())];
                let extra = rng.gen_range(0..=1);
                SceneRecipe { templates: vec![template(name, &mut rng)], cables: vec![distractor; extra], ..Default::default() }
            } else if rng.gen_bool(0.5) {
                let name = TemplateName::TRIVIAL[rng.gen_range(0..TemplateName::TRIVIAL.len())];
                SceneRecipe { templates: vec![template(name, &mut rng)], ..Default::default() }
            } else {
                SceneRecipe::random_cables(rng.gen_range(1..=2), SampleMethod::ExclusionRadius)
            }
        }
    };
    let scene = random_scene(rng.gen(), &recipe)?;
    let knotted = scene.templates.iter().any(|t| t.knotted);
    Ok((scene, knotted))
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io { path: path.to_path_buf(), source }
}

fn write_entry(cfg: &DatasetConfig, index: usize, out: &Path) -> Result<DatasetEntry, DatasetError> {
    let (scene, knotted) = dataset_scene(cfg, index).map_err(|source| DatasetError::Scene { index, source })?;
    let seed = derive_seed(cfg.seed, &[index as u64, 1]);
    let mut image = render(&scene, seed);
    if cfg.augment {
        image = augment(&image, derive_seed(seed, &[2]));
    }
    let scene_name = format!("scenes/{index:05}.json");
    let image_name = format!("images/{index:05}.png");
    let scene_path = out.join(&scene_name);
    fs::write(&scene_path, scene.to_json().map_err(|source| DatasetError::Scene { index, source })?)
        .map_err(io_err(&scene_path))?;
    let image_path = out.join(&image_name);
    image.save(&image_path).map_err(|e| DatasetError::Image { path: image_path.clone(), message: e.to_string() })?;
    let template = scene.templates.first();
    Ok(DatasetEntry {
        index,
        seed,
        scene: scene_name,
        image: image_name,
        knotted,
        template: template.map(|t| t.name.clone()),
        code: template.map(|t| t.code.clone()),
        cables: scene.cables.len(),
        crossings: scene.crossings_gt.len(),
    })
}

/// Write `count` scenes, their images and `manifest.json` under `out`.
/// On any failure the files written so far are removed.
pub fn generate_dataset(cfg: &DatasetConfig, out: &Path) -> Result<Manifest, DatasetError> {
    for sub in ["scenes", "images"] {
        let d = out.join(sub);
        fs::create_dir_all(&d).map_err(io_err(&d))?;
    }
    let results: Vec<Result<DatasetEntry, DatasetError>> =
        (0..cfg.count).into_par_iter().map(|i| write_entry(cfg, i, out)).collect();
    let cleanup = || {
        for i in 0..cfg.count {
            let _ = fs::remove_file(out.join(format!("scenes/{i:05}.json")));
            let _ = fs::remove_file(out.join(format!("images/{i:05}.png")));
        }
        let _ = fs::remove_file(out.join("manifest.json"));
        let _ = fs::remove_dir(out.join("scenes"));
        let _ = fs::remove_dir(out.join("images"));
    };
    let mut entries = Vec::with_capacity(cfg.count);
    for r in results {
        match r {
            Ok(e) => entries.push(e),
            Err(e) => {
                cleanup();
                return Err(e);
            }
        }
    }
    let knotted = entries.iter().filter(|e| e.knotted).count();
    let manifest = Manifest {
        config: cfg.clone(),
        knotted_fraction: if entries.is_empty() { 0.0 } else { knotted as f64 / entries.len() as f64 },
        entries,
    };
    let path = out.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    if let Err(e) = fs::write(&path, text) {
        cleanup();
        return Err(io_err(&path)(e));
    }
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn repeated_generation_is_identical() {
        let cfg = DatasetConfig { count: 10, seed: 7, ..Default::default() };
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        generate_dataset(&cfg, a.path()).unwrap();
        generate_dataset(&cfg, b.path()).unwrap();
        for f in ["manifest.json", "scenes/00003.json", "images/00009.png"] {
            assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
        }
    }

    #[test]
    fn knotted_fraction_is_exact() {
        let cfg = DatasetConfig { count: 12, seed: 1, augment: false, ..Default::default() };
        let d = tempfile::tempdir().unwrap();
        let m = generate_dataset(&cfg, d.path()).unwrap();
        assert_eq!(m.knotted_fraction, 0.5);
        assert_eq!(m.entries.len(), 12);
    }

    #[test]
    fn failure_removes_partial_output() {
        let d = tempfile::tempdir().unwrap();
        // a file where the images directory should be makes every image write fail
        fs::write(d.path().join("images"), b"x").unwrap();
        let cfg = DatasetConfig { count: 3, seed: 1, ..Default::default() };
        assert!(generate_dataset(&cfg, d.path()).is_err());
        assert!(!d.path().join("manifest.json").exists());
        assert!(fs::read_dir(d.path().join("scenes")).map_or(true, |mut r| r.next().is_none()));
    }
}
