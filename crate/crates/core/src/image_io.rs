//! Grayscale image loading, saving, and resampling.
//!
//! Everything downstream works on `GrayImage`: row-major f64 intensities in
//! [0, 1]. Inputs are 8/16-bit gray PNG/TIFF/PGM; multi-channel images are
//! collapsed by unweighted channel average.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Row-major grid of real-valued pixel intensities.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage(format!(
                "dimensions must be >= 1, got {width}x{height}"
            )));
        }
        if pixels.len() != width * height {
            return Err(Error::InvalidImage(format!(
                "pixel buffer length {} != {}x{}",
                pixels.len(),
                width,
                height
            )));
        }
        if let Some(bad) = pixels.iter().find(|p| !p.is_finite()) {
            return Err(Error::InvalidImage(format!("non-finite pixel value {bad}")));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn constant(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        debug_assert!(x < self.width && y < self.height);
        self.pixels[y * self.width + x]
    }
}

/// Load a grayscale image, mapping intensities to [0, 1] by the format's max
/// value. Multi-channel inputs are averaged across channels.
pub fn load_image(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::FileNotFound {
            path: path.to_path_buf(),
        });
    }
    let dynimg = image::open(path).map_err(|e| match e {
        image::ImageError::Unsupported(u) => Error::UnsupportedFormat {
            path: path.to_path_buf(),
            reason: u.to_string(),
        },
        other => Error::CorruptImage {
            path: path.to_path_buf(),
            reason: other.to_string(),
        },
    })?;
    decode_dynamic(path, dynimg)
}

/// Decode already-read image bytes (format sniffed from content).
pub fn decode_image_bytes(bytes: &[u8]) -> Result<GrayImage> {
    let dynimg = image::load_from_memory(bytes).map_err(|e| Error::CorruptImage {
        path: "<bytes>".into(),
        reason: e.to_string(),
    })?;
    decode_dynamic(Path::new("<bytes>"), dynimg)
}

fn decode_dynamic(path: &Path, dynimg: image::DynamicImage) -> Result<GrayImage> {
    use image::DynamicImage::*;
    let (w, h) = (dynimg.width() as usize, dynimg.height() as usize);
    let pixels: Vec<f64> = match dynimg {
        ImageLuma8(buf) => buf.into_raw().iter().map(|&v| v as f64 / 255.0).collect(),
        ImageLuma16(buf) => buf
            .into_raw()
            .iter()
            .map(|&v| v as f64 / 65535.0)
            .collect(),
        ImageLumaA8(buf) => buf
            .into_raw()
            .chunks_exact(2)
            .map(|c| c[0] as f64 / 255.0)
            .collect(),
        ImageLumaA16(buf) => buf
            .into_raw()
            .chunks_exact(2)
            .map(|c| c[0] as f64 / 65535.0)
            .collect(),
        ImageRgb8(buf) => buf
            .into_raw()
            .chunks_exact(3)
            .map(|c| (c[0] as f64 + c[1] as f64 + c[2] as f64) / (3.0 * 255.0))
            .collect(),
        ImageRgba8(buf) => buf
            .into_raw()
            .chunks_exact(4)
            .map(|c| (c[0] as f64 + c[1] as f64 + c[2] as f64) / (3.0 * 255.0))
            .collect(),
        ImageRgb16(buf) => buf
            .into_raw()
            .chunks_exact(3)
            .map(|c| (c[0] as f64 + c[1] as f64 + c[2] as f64) / (3.0 * 65535.0))
            .collect(),
        ImageRgba16(buf) => buf
            .into_raw()
            .chunks_exact(4)
            .map(|c| (c[0] as f64 + c[1] as f64 + c[2] as f64) / (3.0 * 65535.0))
            .collect(),
        other => {
            return Err(Error::UnsupportedFormat {
                path: path.to_path_buf(),
                reason: format!("unhandled pixel layout {:?}", other.color()),
            })
        }
    };
    GrayImage::new(w, h, pixels)
}

/// Write a 16-bit binary PGM (P5, maxval 65535, big-endian samples).
/// Values are clamped to [0, 1] and rounded to the nearest 16-bit code, so
/// load -> save -> load round-trips bit-exactly for 16-bit PGM sources.
pub fn save_pgm16(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    let mut out = Vec::with_capacity(32 + img.pixels.len() * 2);
    write!(out, "P5\n{} {}\n65535\n", img.width, img.height)?;
    for &p in &img.pixels {
        let v = (p.clamp(0.0, 1.0) * 65535.0).round() as u16;
        out.extend_from_slice(&v.to_be_bytes());
    }
    fs::write(path, out)?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct RawSidecar {
    width: usize,
    height: usize,
}

/// Dump the raw pixel grid as little-endian f64 plus a `<path>.json` sidecar
/// holding the dimensions.
pub fn save_raw(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut bytes = Vec::with_capacity(img.pixels.len() * 8);
    for &p in &img.pixels {
        bytes.extend_from_slice(&p.to_le_bytes());
    }
    fs::write(path, bytes)?;
    let sidecar = RawSidecar {
        width: img.width,
        height: img.height,
    };
    let mut sidecar_path = path.as_os_str().to_owned();
    sidecar_path.push(".json");
    fs::write(sidecar_path, serde_json::to_vec(&sidecar)?)?;
    Ok(())
}

pub fn load_raw(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let mut sidecar_path = path.as_os_str().to_owned();
    sidecar_path.push(".json");
    let sidecar: RawSidecar = serde_json::from_slice(&fs::read(sidecar_path)?)?;
    let bytes = fs::read(path)?;
    if bytes.len() != sidecar.width * sidecar.height * 8 {
        return Err(Error::CorruptImage {
            path: path.to_path_buf(),
            reason: format!(
                "raw payload is {} bytes, sidecar says {}x{}",
                bytes.len(),
                sidecar.width,
                sidecar.height
            ),
        });
    }
    let pixels = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    GrayImage::new(sidecar.width, sidecar.height, pixels)
}

/// Shrink by an integer factor with bilinear interpolation at half-pixel
/// centers. `factor == 1` returns an identical copy.
pub fn downsample(img: &GrayImage, factor: usize) -> Result<GrayImage> {
    if factor == 0 || factor > img.width.min(img.height) {
        return Err(Error::InvalidFactor {
            factor,
            width: img.width,
            height: img.height,
        });
    }
    if factor == 1 {
        return Ok(img.clone());
    }
    let ow = img.width.div_ceil(factor);
    let oh = img.height.div_ceil(factor);
    let f = factor as f64;
    GrayImage::from_fn(ow, oh, |ox, oy| {
        let sx = ((ox as f64 + 0.5) * f - 0.5).clamp(0.0, (img.width - 1) as f64);
        let sy = ((oy as f64 + 0.5) * f - 0.5).clamp(0.0, (img.height - 1) as f64);
        bilinear(img, sx, sy)
    })
}

fn bilinear(img: &GrayImage, x: f64, y: f64) -> f64 {
    let x0 = x.floor() as usize;
    let y0 = y.floor() as usize;
    let x1 = (x0 + 1).min(img.width - 1);
    let y1 = (y0 + 1).min(img.height - 1);
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    let top = img.get(x0, y0) * (1.0 - fx) + img.get(x1, y0) * fx;
    let bot = img.get(x0, y1) * (1.0 - fx) + img.get(x1, y1) * fx;
    top * (1.0 - fy) + bot * fy
}
