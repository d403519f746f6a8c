//! 8-bit grayscale images: storage, sampling, and file formats
//! (binary portable graymap and PNG).

use std::io::{self, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::geometry::Point;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("malformed graymap: {0}")]
    Pgm(String),
    #[error("png: {0}")]
    Png(#[from] image::ImageError),
    #[error("pixel buffer of {len} bytes does not match {width}x{height}")]
    Size { width: usize, height: usize, len: usize },
}

/// Row-major 8-bit grayscale image.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize) -> Self {
        GrayImage { width, height, pixels: vec![0; width * height] }
    }

    pub fn from_pixels(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self, ImageError> {
        if pixels.len() != width * height {
            return Err(ImageError::Size { width, height, len: pixels.len() });
        }
        Ok(GrayImage { width, height, pixels })
    }

    /// Quantize a float buffer (clamped to `[0, 255]`, rounded).
    pub fn from_f32(width: usize, height: usize, data: &[f32]) -> Self {
        let pixels = data.iter().map(|v| v.round().clamp(0.0, 255.0) as u8).collect();
        GrayImage { width, height, pixels }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.pixels[y * self.width + x] = v;
    }

    pub fn to_f32(&self) -> Vec<f32> {
        self.pixels.iter().map(|&v| v as f32).collect()
    }

    pub fn in_bounds(&self, p: Point) -> bool {
        p.x >= 0.0 && p.y >= 0.0 && p.x <= (self.width - 1) as f64 && p.y <= (self.height - 1) as f64
    }

    /// Intensity at integer coordinates, `background` outside the image.
    pub fn get_or(&self, x: i64, y: i64, background: f32) -> f32 {
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            background
        } else {
            self.pixels[y as usize * self.width + x as usize] as f32
        }
    }

    /// Bilinear sample; neighbors outside the image read as `background`.
    pub fn sample(&self, p: Point, background: f32) -> f32 {
        let x0 = p.x.floor();
        let y0 = p.y.floor();
        let fx = (p.x - x0) as f32;
        let fy = (p.y - y0) as f32;
        let (x0, y0) = (x0 as i64, y0 as i64);
        let v00 = self.get_or(x0, y0, background);
        let v10 = self.get_or(x0 + 1, y0, background);
        let v01 = self.get_or(x0, y0 + 1, background);
        let v11 = self.get_or(x0 + 1, y0 + 1, background);
        let top = v00 + (v10 - v00) * fx;
        let bottom = v01 + (v11 - v01) * fx;
        top + (bottom - top) * fy
    }

    /// Rotate the image content by 90° so that source pixel `(x, y)` lands
    /// at `(height - 1 - y, x)`.
    pub fn rotated_90(&self) -> GrayImage {
        let (w, h) = (self.width, self.height);
        let mut out = GrayImage::new(h, w);
        for y in 0..h {
            for x in 0..w {
                out.set(h - 1 - y, x, self.get(x, y));
            }
        }
        out
    }

    pub fn write_pgm<W: Write>(&self, mut w: W) -> Result<(), ImageError> {
        write!(w, "P5\n{} {}\n255\n", self.width, self.height)?;
        w.write_all(&self.pixels)?;
        Ok(())
    }

    pub fn to_pgm_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(self.pixels.len() + 20);
        self.write_pgm(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn read_pgm<R: Read>(mut r: R) -> Result<GrayImage, ImageError> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        Self::parse_pgm(&bytes)
    }

    fn parse_pgm(bytes: &[u8]) -> Result<GrayImage, ImageError> {
        let mut pos = 0usize;
        let mut fields: Vec<usize> = Vec::new();
        let magic = bytes.get(0..2).ok_or_else(|| ImageError::Pgm("truncated header".into()))?;
        if magic != b"P5" {
            return Err(ImageError::Pgm("expected P5 magic".into()));
        }
        pos += 2;
        while fields.len() < 3 {
            // whitespace and comments
            while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
                if bytes[pos] == b'#' {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                } else {
                    pos += 1;
                }
            }
            let start = pos;
            while pos < bytes.len() && bytes[pos].is_ascii_digit() {
                pos += 1;
            }
            if start == pos {
                return Err(ImageError::Pgm("expected a number in header".into()));
            }
            let s = std::str::from_utf8(&bytes[start..pos]).map_err(|e| ImageError::Pgm(e.to_string()))?;
            fields.push(s.parse().map_err(|e: std::num::ParseIntError| ImageError::Pgm(e.to_string()))?);
        }
        if fields[2] != 255 {
            return Err(ImageError::Pgm(format!("unsupported maxval {}", fields[2])));
        }
        // exactly one whitespace byte separates the header from the raster
        pos += 1;
        let (w, h) = (fields[0], fields[1]);
        let data = bytes.get(pos..pos + w * h).ok_or_else(|| ImageError::Pgm("truncated raster".into()))?;
        GrayImage::from_pixels(w, h, data.to_vec())
    }

    pub fn save_pgm(&self, path: impl AsRef<Path>) -> Result<(), ImageError> {
        std::fs::write(path, self.to_pgm_bytes())?;
        Ok(())
    }

    pub fn load_pgm(path: impl AsRef<Path>) -> Result<GrayImage, ImageError> {
        Self::parse_pgm(&std::fs::read(path)?)
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<(), ImageError> {
        let buf = image::GrayImage::from_raw(self.width as u32, self.height as u32, self.pixels.clone())
            .expect("buffer length matches dimensions");
        buf.save_with_format(path, image::ImageFormat::Png)?;
        Ok(())
    }

    pub fn load_png(path: impl AsRef<Path>) -> Result<GrayImage, ImageError> {
        let img = image::open(path)?.into_luma8();
        let (w, h) = img.dimensions();
        GrayImage::from_pixels(w as usize, h as usize, img.into_raw())
    }

    /// Load by extension: `.png` or anything else as a graymap.
    pub fn load(path: impl AsRef<Path>) -> Result<GrayImage, ImageError> {
        let path = path.as_ref();
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("png") => Self::load_png(path),
            _ => Self::load_pgm(path),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ImageError> {
        let path = path.as_ref();
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("png") => self.save_png(path),
            _ => self.save_pgm(path),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn pgm_round_trip_is_byte_exact(w in 1usize..24, h in 1usize..24, seed in any::<u64>()) {
            let pixels: Vec<u8> = (0..w * h).map(|i| (seed.wrapping_mul(i as u64 + 7) >> 13) as u8).collect();
            let img = GrayImage::from_pixels(w, h, pixels).unwrap();
            let bytes = img.to_pgm_bytes();
            let back = GrayImage::read_pgm(&bytes[..]).unwrap();
            prop_assert_eq!(&back, &img);
            prop_assert_eq!(back.to_pgm_bytes(), bytes);
        }
    }

    #[test]
    fn png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut img = GrayImage::new(7, 5);
        img.set(3, 2, 200);
        img.set(6, 4, 17);
        let path = dir.path().join("a.png");
        img.save(&path).unwrap();
        assert_eq!(GrayImage::load(&path).unwrap(), img);
    }

    #[test]
    fn bilinear_sampling_interpolates_and_pads() {
        let img = GrayImage::from_pixels(2, 1, vec![0, 100]).unwrap();
        assert_eq!(img.sample(Point::new(0.5, 0.0), 0.0), 50.0);
        assert_eq!(img.sample(Point::new(-1.0, 0.0), 7.0), 7.0);
    }

    #[test]
    fn rejects_non_p5() {
        assert!(GrayImage::read_pgm(&b"P2\n1 1\n255\n0"[..]).is_err());
    }
}
