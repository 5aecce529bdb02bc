//! Gaussian scale space and the Difference-of-Gaussians stack.
//!
//! Each level `L(x,y,t_i)` is the circular convolution of the stretched image
//! with a unit-sum Gaussian of standard deviation `t_i`, computed in the
//! Fourier domain. The forward spectrum of the image is computed once and
//! shared across levels, so each level is an independent pure task.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::fft;
use crate::{Error, GrayImage, Result};

pub const DEFAULT_NUM_SCALES: usize = 16;
pub const DEFAULT_MIN_SCALE: f64 = 1.0;
pub const DEFAULT_MAX_SCALE: f64 = 17.0;

/// Discretization of the scale axis: `n` DoG levels spanning
/// [`min_t`, `max_t`] with step `delta_t = (max_t - min_t) / n` and pyramid
/// scales `t_i = min_t + (i-1) * delta_t` for `i = 1..n+1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScaleGridRepr")]
pub struct ScaleGrid {
    pub n: usize,
    pub min_t: f64,
    pub max_t: f64,
}

#[derive(Deserialize)]
struct ScaleGridRepr {
    n: usize,
    min_t: f64,
    max_t: f64,
}

impl TryFrom<ScaleGridRepr> for ScaleGrid {
    type Error = Error;
    fn try_from(r: ScaleGridRepr) -> Result<Self> {
        ScaleGrid::new(r.n, r.min_t, r.max_t)
    }
}

impl Default for ScaleGrid {
    fn default() -> Self {
        Self {
            n: DEFAULT_NUM_SCALES,
            min_t: DEFAULT_MIN_SCALE,
            max_t: DEFAULT_MAX_SCALE,
        }
    }
}

impl ScaleGrid {
    pub fn new(n: usize, min_t: f64, max_t: f64) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidGrid("n must be >= 1".into()));
        }
        if !(min_t > 0.0 && max_t > min_t && min_t.is_finite() && max_t.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "need 0 < min_t < max_t, got min_t={min_t}, max_t={max_t}"
            )));
        }
        Ok(Self { n, min_t, max_t })
    }

    pub fn delta_t(&self) -> f64 {
        (self.max_t - self.min_t) / self.n as f64
    }

    /// The n+1 pyramid scales, strictly increasing, starting at `min_t`.
    pub fn scales(&self) -> Vec<f64> {
        let dt = self.delta_t();
        (0..=self.n).map(|i| self.min_t + i as f64 * dt).collect()
    }

    pub fn num_levels(&self) -> usize {
        self.n + 1
    }
}

/// Stack of smoothed planes, one per scale, all at source-image size.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPyramid {
    pub grid: ScaleGrid,
    pub width: usize,
    pub height: usize,
    pub levels: Vec<Vec<f64>>,
}

/// The n DoG response planes `t_i * (L(t_{i+1}) - L(t_i))`.
#[derive(Debug, Clone, PartialEq)]
pub struct DoGStack {
    pub grid: ScaleGrid,
    pub width: usize,
    pub height: usize,
    pub planes: Vec<Vec<f64>>,
}

/// Forward FFT of the (stretched) input, shared read-only across level tasks.
#[derive(Debug, Clone)]
pub struct ImageSpectrum {
    pub width: usize,
    pub height: usize,
    spectrum: Vec<Complex<f64>>,
}

/// Sample a 2-D Gaussian of standard deviation `t` at full image size, peak at
/// the array origin under periodic indexing, renormalized to sum exactly 1.
pub fn gaussian_kernel(t: f64, width: usize, height: usize) -> Result<Vec<f64>> {
    if !(t > 0.0) {
        return Err(Error::NonPositiveScale(t));
    }
    let inv_two_t2 = 1.0 / (2.0 * t * t);
    let norm = 1.0 / (2.0 * std::f64::consts::PI * t * t);
    let mut kernel = Vec::with_capacity(width * height);
    let mut sum = 0.0;
    for y in 0..height {
        let dy = periodic_offset(y, height);
        for x in 0..width {
            let dx = periodic_offset(x, width);
            let v = norm * (-(dx * dx + dy * dy) * inv_two_t2).exp();
            sum += v;
            kernel.push(v);
        }
    }
    let inv_sum = 1.0 / sum;
    for v in &mut kernel {
        *v *= inv_sum;
    }
    Ok(kernel)
}

#[inline]
fn periodic_offset(i: usize, len: usize) -> f64 {
    if 2 * i <= len {
        i as f64
    } else {
        i as f64 - len as f64
    }
}

/// Circular convolution via the Fourier domain. Output has input dimensions.
pub fn fft_convolve(
    img: &[f64],
    img_w: usize,
    img_h: usize,
    kernel: &[f64],
    ker_w: usize,
    ker_h: usize,
) -> Result<Vec<f64>> {
    if (img_w, img_h) != (ker_w, ker_h) || img.len() != kernel.len() {
        return Err(Error::ShapeMismatch(img_w, img_h, ker_w, ker_h));
    }
    let spectrum = image_spectrum_raw(img, img_w, img_h);
    Ok(convolve_spectrum(&spectrum, kernel))
}

fn image_spectrum_raw(img: &[f64], w: usize, h: usize) -> ImageSpectrum {
    ImageSpectrum {
        width: w,
        height: h,
        spectrum: fft::forward(img, w, h),
    }
}

/// Compute the shared forward spectrum `F{I'}` once.
pub fn image_spectrum(img: &GrayImage) -> ImageSpectrum {
    image_spectrum_raw(img.pixels(), img.width(), img.height())
}

fn convolve_spectrum(spec: &ImageSpectrum, kernel: &[f64]) -> Vec<f64> {
    let mut k_spec = fft::forward(kernel, spec.width, spec.height);
    for (k, s) in k_spec.iter_mut().zip(&spec.spectrum) {
        *k *= s;
    }
    fft::inverse_real(k_spec, spec.width, spec.height)
}

/// One pyramid level: smooth the shared spectrum with a Gaussian of scale `t`.
/// Pure and deterministic, so levels can be scheduled on any worker.
pub fn smooth_level(spec: &ImageSpectrum, t: f64) -> Result<Vec<f64>> {
    let kernel = gaussian_kernel(t, spec.width, spec.height)?;
    Ok(convolve_spectrum(spec, &kernel))
}

/// Build all n+1 levels serially. The parallel path in `pipeline` produces
/// bitwise-identical levels by calling `smooth_level` per scale.
pub fn build_pyramid(img: &GrayImage, grid: &ScaleGrid) -> Result<GaussianPyramid> {
    let spec = image_spectrum(img);
    let mut levels = Vec::with_capacity(grid.num_levels());
    for t in grid.scales() {
        levels.push(smooth_level(&spec, t)?);
    }
    Ok(GaussianPyramid {
        grid: *grid,
        width: img.width(),
        height: img.height(),
        levels,
    })
}

/// DoG plane i (1-based, i = 1..n): `t_i * (levels[i+1] - levels[i])`.
pub fn build_dog(pyr: &GaussianPyramid) -> Result<DoGStack> {
    if pyr.levels.len() < 2 {
        return Err(Error::InsufficientLevels(pyr.levels.len()));
    }
    let scales = pyr.grid.scales();
    let planes = pyr
        .levels
        .windows(2)
        .zip(&scales)
        .map(|(pair, &t)| {
            pair[1]
                .iter()
                .zip(&pair[0])
                .map(|(b, a)| t * (b - a))
                .collect()
        })
        .collect();
    Ok(DoGStack {
        grid: pyr.grid,
        width: pyr.width,
        height: pyr.height,
        planes,
    })
}
