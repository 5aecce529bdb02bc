//! Benchmark harness: repeated pipeline runs per configuration, first run
//! discarded as warm-up, median statistics per phase, CSV/JSON output.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::image_io::load_image;
use crate::pipeline::{run_pipeline, PhaseTimings, PipelineParams};
use crate::scale_space::ScaleGrid;
use crate::synth::{gen_synthetic, Placement};
use crate::{Error, GrayImage, Result};

pub const DEFAULT_REPETITIONS: usize = 21;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ImageSource {
    /// Seeded blob image generated at each requested resolution.
    Synthetic { seed: u64, blob_density: f64 },
    /// Fixed image from disk, benchmarked at its native resolution.
    Path(PathBuf),
}

impl ImageSource {
    pub fn synthetic(seed: u64) -> Self {
        // one blob per ~1500 px keeps counts realistic across resolutions
        ImageSource::Synthetic {
            seed,
            blob_density: 1.0 / 1500.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSpec {
    pub resolutions: Vec<(usize, usize)>,
    pub scale_counts: Vec<usize>,
    pub worker_counts: Vec<usize>,
    /// k runs per configuration; the first is always discarded.
    pub repetitions: usize,
    pub image_source: ImageSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub width: usize,
    pub height: usize,
    pub n: usize,
    pub workers: usize,
    /// Samples the medians were computed over (k - 1).
    pub samples: usize,
    pub feature_count: usize,
    pub median: PhaseTimings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub rows: Vec<BenchRow>,
    /// All retained samples per row, in row order.
    pub raw: Vec<Vec<PhaseTimings>>,
}

/// Median by sorting; an even sample count averages the two middle values.
pub fn median(samples: &[f64]) -> f64 {
    assert!(!samples.is_empty());
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        (sorted[mid - 1] + sorted[mid]) / 2.0
    }
}

fn median_timings(samples: &[PhaseTimings]) -> PhaseTimings {
    let pick = |f: fn(&PhaseTimings) -> f64| median(&samples.iter().map(f).collect::<Vec<_>>());
    PhaseTimings {
        stretch_ms: pick(|t| t.stretch_ms),
        pyramid_ms: pick(|t| t.pyramid_ms),
        gather_ms: pick(|t| t.gather_ms),
        detect_ms: pick(|t| t.detect_ms),
        total_ms: pick(|t| t.total_ms),
    }
}

fn source_image(source: &ImageSource, width: usize, height: usize) -> Result<GrayImage> {
    match source {
        ImageSource::Synthetic { seed, blob_density } => {
            let blobs = ((width * height) as f64 * blob_density).round() as usize;
            gen_synthetic(width, height, blobs.max(1), (1.5, 4.0), *seed, Placement::Random)
        }
        ImageSource::Path(path) => load_image(path),
    }
}

/// Run every (resolution, scale count, worker count) configuration serially.
/// Configurations with M > n+1 are rejected up front.
pub fn run_bench(spec: &BenchSpec) -> Result<BenchResult> {
    if spec.repetitions < 2 {
        return Err(Error::InvalidBenchSpec(format!(
            "repetitions must be >= 2 (first run is discarded), got {}",
            spec.repetitions
        )));
    }
    if spec.resolutions.is_empty() || spec.scale_counts.is_empty() || spec.worker_counts.is_empty()
    {
        return Err(Error::InvalidBenchSpec("empty sweep axis".into()));
    }
    for &n in &spec.scale_counts {
        for &m in &spec.worker_counts {
            if m == 0 || m > n + 1 {
                return Err(Error::InvalidBenchSpec(format!(
                    "workers={m} exceeds n+1={} levels",
                    n + 1
                )));
            }
        }
    }

    let resolutions: Vec<(usize, usize)> = match &spec.image_source {
        ImageSource::Path(path) => {
            let img = load_image(path)?;
            vec![(img.width(), img.height())]
        }
        ImageSource::Synthetic { .. } => spec.resolutions.clone(),
    };

    let mut rows = Vec::new();
    let mut raw = Vec::new();
    for &(width, height) in &resolutions {
        let img = source_image(&spec.image_source, width, height)?;
        for &n in &spec.scale_counts {
            for &workers in &spec.worker_counts {
                let params = PipelineParams {
                    grid: ScaleGrid::new(n, 1.0, 1.0 + n as f64)?,
                    workers,
                    ..Default::default()
                };
                let mut samples = Vec::with_capacity(spec.repetitions - 1);
                let mut feature_count = 0;
                for rep in 0..spec.repetitions {
                    let (set, timings) = run_pipeline(&img, &params).map_err(|e| {
                        Error::InvalidBenchSpec(format!(
                            "configuration {width}x{height} n={n} M={workers} failed: {e}"
                        ))
                    })?;
                    feature_count = set.count;
                    if rep > 0 {
                        samples.push(timings);
                    }
                }
                rows.push(BenchRow {
                    width,
                    height,
                    n,
                    workers,
                    samples: samples.len(),
                    feature_count,
                    median: median_timings(&samples),
                });
                raw.push(samples);
            }
        }
    }
    Ok(BenchResult { rows, raw })
}

pub const CSV_HEADER: &str =
    "width,height,n,workers,samples,feature_count,stretch_ms,pyramid_ms,gather_ms,detect_ms,total_ms";

pub fn to_csv(result: &BenchResult) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in &result.rows {
        let m = &row.median;
        out.push_str(&format!(
            "{},{},{},{},{},{},{:.4},{:.4},{:.4},{:.4},{:.4}\n",
            row.width,
            row.height,
            row.n,
            row.workers,
            row.samples,
            row.feature_count,
            m.stretch_ms,
            m.pyramid_ms,
            m.gather_ms,
            m.detect_ms,
            m.total_ms
        ));
    }
    out
}
