use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::image_io::GrayImage;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    pub enabled: bool,
    pub noise_sigma: f64,
    pub brightness_sigma: f64,
    /// Unsharp-mask gain; 0 disables sharpening.
    pub sharpen_amount: f32,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig { enabled: true, noise_sigma: 6.0, brightness_sigma: 5.0, sharpen_amount: 0.5 }
    }
}

pub fn augment(image: &GrayImage, seed: u64) -> GrayImage {
    augment_with(image, seed, &AugmentConfig::default())
}

/// `n` draws of zero-mean Gaussian noise.
pub fn gaussian_noise(n: usize, sigma: f64, seed: u64) -> Vec<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dist = Normal::new(0.0, sigma.max(0.0)).expect("finite sigma");
    (0..n).map(|_| dist.sample(&mut rng) as f32).collect()
}

/// Brightness shift, per-pixel noise, then a 3×3 unsharp mask; clamped.
pub fn augment_with(image: &GrayImage, seed: u64, cfg: &AugmentConfig) -> GrayImage {
    if !cfg.enabled {
        return image.clone();
    }
    let (w, h) = (image.width(), image.height());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift = Normal::new(0.0, cfg.brightness_sigma.max(0.0)).expect("finite sigma").sample(&mut rng) as f32;
    let noise = gaussian_noise(w * h, cfg.noise_sigma, rand::Rng::gen(&mut rng));
    let base: Vec<f32> = image.to_f32().iter().zip(&noise).map(|(v, n)| v + shift + n).collect();
    if cfg.sharpen_amount == 0.0 {
        return GrayImage::from_f32(w, h, &base);
    }
    let mut out = vec![0f32; w * h];
    for y in 0..h {
        for x in 0..w {
            let (mut sum, mut cnt) = (0f32, 0f32);
            for yy in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                for xx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                    sum += base[yy * w + xx];
                    cnt += 1.0;
                }
            }
            let v = base[y * w + x];
            out[y * w + x] = v + cfg.sharpen_amount * (v - sum / cnt);
        }
    }
    GrayImage::from_f32(w, h, &out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noise_statistics() {
        let n = 20_000;
        let v = gaussian_noise(n, 6.0, 42);
        let mean = v.iter().map(|x| *x as f64).sum::<f64>() / n as f64;
        let var = v.iter().map(|x| (*x as f64 - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() <= 3.0 * 6.0 / (n as f64).sqrt(), "mean {mean}");
        assert!((5.0..=7.0).contains(&var.sqrt()), "std {}", var.sqrt());
    }

    #[test]
    fn deterministic_and_disableable() {
        let mut img = GrayImage::new(40, 30);
        img.set(10, 10, 200);
        assert_eq!(augment(&img, 9), augment(&img, 9));
        assert_ne!(augment(&img, 9), augment(&img, 10));
        let off = AugmentConfig { enabled: false, ..Default::default() };
        assert_eq!(augment_with(&img, 9, &off), img);
    }

}
