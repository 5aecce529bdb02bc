//! Calibration of the count-vs-defocus relationship.
//!
//! Feature counts fall off log-linearly with focal deviation, so an ordinary
//! least-squares fit of ln(count) against deviation gives a usable model. A
//! classification threshold is derived by evaluating the fit at the largest
//! acceptable deviation.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::pipeline::PipelineParams;
use crate::{Error, Result};

/// One calibration observation: focal deviation (instrument units, or blur
/// sigma in pixels for synthetic series) and the measured feature count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlurSeriesPoint {
    pub deviation: f64,
    pub count: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogLinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Pearson correlation of ln(count) against deviation.
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FocusThreshold {
    pub min_count: u64,
    pub source_fit: LogLinearFit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    InFocus,
    OutOfFocus,
}

/// OLS fit of ln(count) on deviation. Zero-count points are excluded; they
/// are unambiguous out-of-focus signals regardless of any fit.
pub fn fit_log_linear(series: &[BlurSeriesPoint]) -> Result<LogLinearFit> {
    if series.iter().all(|p| p.count == 0.0) && !series.is_empty() {
        return Err(Error::AllCountsZero);
    }
    let points: Vec<(f64, f64)> = series
        .iter()
        .filter(|p| p.count > 0.0)
        .map(|p| (p.deviation, p.count.ln()))
        .collect();
    if points.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "{} nonzero points, need at least 3",
            points.len()
        )));
    }
    let mut distinct: Vec<f64> = points.iter().map(|p| p.0).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::InsufficientData(
            "need at least 2 distinct deviations".into(),
        ));
    }

    let n = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for &(x, y) in &points {
        cov += (x - mean_x) * (y - mean_y);
        var_x += (x - mean_x) * (x - mean_x);
        var_y += (y - mean_y) * (y - mean_y);
    }
    let slope = cov / var_x;
    let intercept = mean_y - slope * mean_x;
    let r = if var_y == 0.0 {
        0.0
    } else {
        cov / (var_x * var_y).sqrt()
    };
    Ok(LogLinearFit {
        slope,
        intercept,
        r,
    })
}

/// Cutoff count at the largest acceptable focal deviation:
/// `ceil(exp(intercept + slope * max_acceptable_deviation))`.
pub fn threshold_from_fit(fit: &LogLinearFit, max_acceptable_deviation: f64) -> Result<FocusThreshold> {
    if fit.slope >= 0.0 {
        return Err(Error::NonDecreasingFit(fit.slope));
    }
    let min_count = (fit.intercept + fit.slope * max_acceptable_deviation).exp().ceil() as u64;
    Ok(FocusThreshold {
        min_count,
        source_fit: *fit,
    })
}

pub fn classify(count: u64, threshold: &FocusThreshold) -> Classification {
    if count >= threshold.min_count {
        Classification::InFocus
    } else {
        Classification::OutOfFocus
    }
}

/// Persisted calibration: the fit, the derived cutoff, and a hash binding it
/// to the pipeline parameters it was produced with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub slope: f64,
    pub intercept: f64,
    pub r: f64,
    pub min_count: u64,
    pub created_at: DateTime<Utc>,
    pub params_hash: String,
}

impl Calibration {
    pub fn new(fit: &LogLinearFit, threshold: &FocusThreshold, params_hash: String) -> Self {
        Self {
            slope: fit.slope,
            intercept: fit.intercept,
            r: fit.r,
            min_count: threshold.min_count,
            created_at: Utc::now(),
            params_hash,
        }
    }

    pub fn threshold(&self) -> FocusThreshold {
        FocusThreshold {
            min_count: self.min_count,
            source_fit: LogLinearFit {
                slope: self.slope,
                intercept: self.intercept,
                r: self.r,
            },
        }
    }

    /// Error if this calibration was produced under different parameters.
    pub fn check_params(&self, params: &PipelineParams, downsample: usize) -> Result<()> {
        let actual = params_hash(params, downsample);
        if actual != self.params_hash {
            return Err(Error::CalibrationMismatch {
                expected: self.params_hash.clone(),
                actual,
            });
        }
        Ok(())
    }
}

/// Hash over everything that changes the feature count for a given input.
/// Worker count is excluded: the pipeline output is worker-invariant.
pub fn params_hash(params: &PipelineParams, downsample: usize) -> String {
    let mut hasher = Sha256::new();
    hasher.update(params.grid.n.to_le_bytes());
    hasher.update(params.grid.min_t.to_bits().to_le_bytes());
    hasher.update(params.grid.max_t.to_bits().to_le_bytes());
    hasher.update(params.stretch.lower_fraction.to_bits().to_le_bytes());
    hasher.update(params.stretch.upper_fraction.to_bits().to_le_bytes());
    hasher.update(params.min_response.to_bits().to_le_bytes());
    hasher.update(downsample.to_le_bytes());
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
