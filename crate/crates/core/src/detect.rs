//! Feature extraction from the DoG stack: global argmax across scale, strict
//! local maxima across space (3x3 non-maximum suppression). The feature count
//! is the degree-of-focus score.

use serde::{Deserialize, Serialize};

use crate::scale_space::DoGStack;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feature {
    pub x: usize,
    pub y: usize,
    /// 1-based index into the DoG stack.
    pub scale_index: usize,
    /// The scale t at `scale_index`.
    pub t: f64,
    pub response: f64,
    /// True when the feature lies within ceil(max_t) of an image edge, where
    /// circular boundary handling can distort the response.
    pub border_affected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSet {
    pub count: usize,
    pub features: Vec<Feature>,
}

impl FeatureSet {
    pub fn new(features: Vec<Feature>) -> Self {
        Self {
            count: features.len(),
            features,
        }
    }
}

/// Per-pixel max over scales and the (1-based) maximizing index; ties go to
/// the smallest index.
pub fn scale_argmax(stack: &DoGStack) -> Result<(Vec<f64>, Vec<usize>)> {
    if stack.planes.is_empty() {
        return Err(Error::EmptyStack);
    }
    let npix = stack.width * stack.height;
    let mut values = stack.planes[0].clone();
    let mut indices = vec![1usize; npix];
    for (i, plane) in stack.planes.iter().enumerate().skip(1) {
        for (p, (v, idx)) in plane.iter().zip(values.iter_mut().zip(indices.iter_mut())) {
            if *p > *v {
                *v = *p;
                *idx = i + 1;
            }
        }
    }
    Ok((values, indices))
}

/// Pixels strictly greater than every other pixel in their neighborhood
/// window. Border pixels use the truncated window. Plateaus yield nothing.
pub fn local_maxima(
    plane: &[f64],
    width: usize,
    height: usize,
    neighborhood: usize,
) -> Result<Vec<(usize, usize)>> {
    if neighborhood < 3 || neighborhood % 2 == 0 {
        return Err(Error::InvalidNeighborhood(neighborhood));
    }
    let r = neighborhood / 2;
    let mut out = Vec::new();
    for y in 0..height {
        let y0 = y.saturating_sub(r);
        let y1 = (y + r).min(height - 1);
        'pixel: for x in 0..width {
            let v = plane[y * width + x];
            let x0 = x.saturating_sub(r);
            let x1 = (x + r).min(width - 1);
            for ny in y0..=y1 {
                for nx in x0..=x1 {
                    if (nx, ny) != (x, y) && plane[ny * width + nx] >= v {
                        continue 'pixel;
                    }
                }
            }
            out.push((x, y));
        }
    }
    Ok(out)
}

/// Compose scale argmax and spatial non-maximum suppression; features with
/// response below `min_response` are discarded. `FeatureSet::count` is the
/// degree-of-focus value.
pub fn detect_features(stack: &DoGStack, min_response: f64) -> Result<FeatureSet> {
    let (values, indices) = scale_argmax(stack)?;
    let maxima = local_maxima(&values, stack.width, stack.height, 3)?;
    let scales = stack.grid.scales();
    let border = stack.grid.max_t.ceil() as usize;
    let features = maxima
        .into_iter()
        .filter_map(|(x, y)| {
            let response = values[y * stack.width + x];
            if response < min_response {
                return None;
            }
            let scale_index = indices[y * stack.width + x];
            Some(Feature {
                x,
                y,
                scale_index,
                t: scales[scale_index - 1],
                response,
                border_affected: x < border
                    || y < border
                    || x + border >= stack.width
                    || y + border >= stack.height,
            })
        })
        .collect();
    Ok(FeatureSet::new(features))
}
