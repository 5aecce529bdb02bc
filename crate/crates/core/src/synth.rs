//! Seeded synthetic test images: dark Gaussian blobs on a mid-gray
//! background. Blobs are dark so they produce positive DoG responses, the
//! polarity the detector counts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, GrayImage, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Placement {
    /// Uniform random centers; blobs may overlap.
    Random,
    /// One blob per cell of a near-square grid, jittered, so every blob is
    /// isolated and ground-truth centers are trustworthy.
    WellSeparated,
}

/// Ground-truth blob parameters, for tests that check detection accuracy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Blob {
    pub x: f64,
    pub y: f64,
    /// Gaussian standard deviation in pixels.
    pub scale: f64,
    pub amplitude: f64,
}

pub fn gen_synthetic(
    width: usize,
    height: usize,
    blob_count: usize,
    scale_range: (f64, f64),
    seed: u64,
    placement: Placement,
) -> Result<GrayImage> {
    Ok(gen_synthetic_with_truth(width, height, blob_count, scale_range, seed, placement)?.0)
}

pub fn gen_synthetic_with_truth(
    width: usize,
    height: usize,
    blob_count: usize,
    scale_range: (f64, f64),
    seed: u64,
    placement: Placement,
) -> Result<(GrayImage, Vec<Blob>)> {
    let (s_min, s_max) = scale_range;
    let limit = width.min(height) as f64 / 4.0;
    if !(s_min > 0.0 && s_max >= s_min && s_max < limit) {
        return Err(Error::InvalidRange(s_min, s_max));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut blobs = Vec::with_capacity(blob_count);
    match placement {
        Placement::Random => {
            for _ in 0..blob_count {
                blobs.push(Blob {
                    x: rng.gen_range(0.0..width as f64),
                    y: rng.gen_range(0.0..height as f64),
                    scale: rng.gen_range(s_min..=s_max),
                    amplitude: rng.gen_range(0.2..0.45),
                });
            }
        }
        Placement::WellSeparated => {
            let grid = (blob_count as f64).sqrt().ceil() as usize;
            let cell_w = width as f64 / grid.max(1) as f64;
            let cell_h = height as f64 / grid.max(1) as f64;
            for k in 0..blob_count {
                let (cx, cy) = (k % grid, k / grid);
                let jitter_x = rng.gen_range(-cell_w / 8.0..cell_w / 8.0);
                let jitter_y = rng.gen_range(-cell_h / 8.0..cell_h / 8.0);
                blobs.push(Blob {
                    x: (cx as f64 + 0.5) * cell_w + jitter_x,
                    y: (cy as f64 + 0.5) * cell_h + jitter_y,
                    scale: rng.gen_range(s_min..=s_max),
                    amplitude: rng.gen_range(0.2..0.45),
                });
            }
        }
    }

    let mut pixels = vec![0.5f64; width * height];
    for blob in &blobs {
        // only touch pixels within 5 sigma of the center
        let r = (5.0 * blob.scale).ceil() as i64;
        let inv_two_s2 = 1.0 / (2.0 * blob.scale * blob.scale);
        let bx = blob.x.round() as i64;
        let by = blob.y.round() as i64;
        for y in (by - r).max(0)..=(by + r).min(height as i64 - 1) {
            for x in (bx - r).max(0)..=(bx + r).min(width as i64 - 1) {
                let dx = x as f64 - blob.x;
                let dy = y as f64 - blob.y;
                pixels[y as usize * width + x as usize] -=
                    blob.amplitude * (-(dx * dx + dy * dy) * inv_two_s2).exp();
            }
        }
    }
    for p in &mut pixels {
        *p = p.clamp(0.0, 1.0);
    }
    Ok((GrayImage::new(width, height, pixels)?, blobs))
}
