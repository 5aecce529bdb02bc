//! Global contrast normalization: saturate fixed fractions of the darkest and
//! lightest pixels and map the remaining range to [0, 1].

use serde::{Deserialize, Serialize};

use crate::{Error, GrayImage, Result};

pub const DEFAULT_SATURATION: f64 = 0.00175;

/// Fractions of pixels saturated at each end of the histogram.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StretchParamsRepr")]
pub struct StretchParams {
    pub lower_fraction: f64,
    pub upper_fraction: f64,
}

#[derive(Deserialize)]
struct StretchParamsRepr {
    lower_fraction: f64,
    upper_fraction: f64,
}

impl TryFrom<StretchParamsRepr> for StretchParams {
    type Error = Error;
    fn try_from(r: StretchParamsRepr) -> Result<Self> {
        StretchParams::new(r.lower_fraction, r.upper_fraction)
    }
}

impl Default for StretchParams {
    fn default() -> Self {
        Self {
            lower_fraction: DEFAULT_SATURATION,
            upper_fraction: DEFAULT_SATURATION,
        }
    }
}

impl StretchParams {
    pub fn new(lower_fraction: f64, upper_fraction: f64) -> Result<Self> {
        if !(lower_fraction >= 0.0 && upper_fraction >= 0.0)
            || !(lower_fraction + upper_fraction < 1.0)
        {
            return Err(Error::InvalidStretch(format!(
                "lower={lower_fraction}, upper={upper_fraction}"
            )));
        }
        Ok(Self {
            lower_fraction,
            upper_fraction,
        })
    }
}

/// Nearest-rank quantile cut points for the stretch: index `floor(f * N)` from
/// the bottom and `(N-1) - floor(f * N)` from the top of the sorted pixels.
fn cut_points(pixels: &[f64], params: &StretchParams) -> (f64, f64) {
    let n = pixels.len();
    let lo_idx = ((params.lower_fraction * n as f64).floor() as usize).min(n - 1);
    let hi_off = ((params.upper_fraction * n as f64).floor() as usize).min(n - 1);
    let hi_idx = n - 1 - hi_off;

    // Partial selection; must agree exactly with a full sort at these ranks.
    let mut work: Vec<f64> = pixels.to_vec();
    let (_, lo, _) = work.select_nth_unstable_by(lo_idx, f64::total_cmp);
    let lo = *lo;
    let (_, hi, _) = work.select_nth_unstable_by(hi_idx, f64::total_cmp);
    (lo, *hi)
}

/// Saturate the darkest `lower_fraction` and lightest `upper_fraction` of
/// pixels and affinely map the rest to [0, 1]. A constant image maps to all
/// zeros, which drives the downstream feature count to zero.
pub fn histogram_stretch(img: &GrayImage, params: &StretchParams) -> GrayImage {
    let (lo, hi) = cut_points(img.pixels(), params);
    let pixels = if hi > lo {
        // divide rather than multiply by a reciprocal so pixels at the cut
        // points map to exactly 0 and 1
        let span = hi - lo;
        img.pixels()
            .iter()
            .map(|&p| ((p - lo) / span).clamp(0.0, 1.0))
            .collect()
    } else {
        vec![0.0; img.pixels().len()]
    };
    GrayImage::new(img.width(), img.height(), pixels).expect("same shape, finite values")
}
