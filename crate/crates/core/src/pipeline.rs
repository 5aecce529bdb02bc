//! End-to-end pipeline with scale-partitioned parallel execution.
//!
//! The scale set is split into contiguous balanced index sets, one per worker
//! thread. Every worker smooths its levels against the shared forward
//! spectrum, the results are gathered into the ordered pyramid, then DoG and
//! detection run on the assembled stack. Per-level work is pure and
//! deterministic, so the output is bitwise identical for any worker count.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::detect::{detect_features, FeatureSet};
use crate::preprocess::{histogram_stretch, StretchParams};
use crate::scale_space::{build_dog, image_spectrum, smooth_level, GaussianPyramid, ScaleGrid};
use crate::{Error, GrayImage, Result};

/// Disjoint, contiguous, balanced split of the 1-based scale indices
/// `{1..n_levels}` across M workers.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    pub index_sets: Vec<Vec<usize>>,
}

impl Partition {
    pub fn workers(&self) -> usize {
        self.index_sets.len()
    }
}

pub fn make_partition(n_levels: usize, workers: usize) -> Result<Partition> {
    if workers == 0 || workers > n_levels {
        return Err(Error::TooManyWorkers {
            levels: n_levels,
            workers,
        });
    }
    let base = n_levels / workers;
    let rem = n_levels % workers;
    let mut index_sets = Vec::with_capacity(workers);
    let mut next = 1;
    for m in 0..workers {
        let size = base + usize::from(m < rem);
        index_sets.push((next..next + size).collect());
        next += size;
    }
    Ok(Partition { index_sets })
}

/// Wall-clock durations of the four pipeline phases, in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseTimings {
    pub stretch_ms: f64,
    pub pyramid_ms: f64,
    pub gather_ms: f64,
    pub detect_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineParams {
    pub grid: ScaleGrid,
    pub stretch: StretchParams,
    pub min_response: f64,
    pub workers: usize,
}

impl Default for PipelineParams {
    fn default() -> Self {
        Self {
            grid: ScaleGrid::default(),
            stretch: StretchParams::default(),
            min_response: 0.0,
            workers: 1,
        }
    }
}

/// Stretch, build the pyramid across workers, gather, detect. Returns the
/// feature set (whose count is the DOF score) and per-phase timings.
pub fn run_pipeline(img: &GrayImage, params: &PipelineParams) -> Result<(FeatureSet, PhaseTimings)> {
    let t_start = Instant::now();

    let stretched = histogram_stretch(img, &params.stretch);
    let spectrum = image_spectrum(&stretched);
    let stretch_ms = ms_since(t_start);

    let partition = make_partition(params.grid.num_levels(), params.workers)?;
    let scales = params.grid.scales();

    let t_pyramid = Instant::now();
    let per_worker: Vec<Result<Vec<(usize, Vec<f64>)>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = partition
            .index_sets
            .iter()
            .map(|indices| {
                let spectrum = &spectrum;
                let scales = &scales;
                let indices = indices.clone();
                scope.spawn(move || -> Result<Vec<(usize, Vec<f64>)>> {
                    indices
                        .iter()
                        .map(|&i| Ok((i, smooth_level(spectrum, scales[i - 1])?)))
                        .collect()
                })
            })
            .collect();
        handles
            .into_iter()
            .zip(&partition.index_sets)
            .map(|(h, indices)| {
                h.join().unwrap_or_else(|_| {
                    Err(Error::WorkerFailure {
                        indices: indices.clone(),
                    })
                })
            })
            .collect()
    });
    let pyramid_ms = ms_since(t_pyramid);

    // Gather: assemble per-worker levels into the ordered pyramid.
    let t_gather = Instant::now();
    let n_levels = params.grid.num_levels();
    let mut slots: Vec<Option<Vec<f64>>> = (0..n_levels).map(|_| None).collect();
    for worker_result in per_worker {
        for (i, plane) in worker_result? {
            slots[i - 1] = Some(plane);
        }
    }
    let levels: Vec<Vec<f64>> = slots
        .into_iter()
        .map(|s| s.expect("partition covers every level"))
        .collect();
    let pyramid = GaussianPyramid {
        grid: params.grid,
        width: img.width(),
        height: img.height(),
        levels,
    };
    let gather_ms = ms_since(t_gather);

    let t_detect = Instant::now();
    let dog = build_dog(&pyramid)?;
    let features = detect_features(&dog, params.min_response)?;
    let detect_ms = ms_since(t_detect);

    let total_ms = ms_since(t_start);
    Ok((
        features,
        PhaseTimings {
            stretch_ms,
            pyramid_ms,
            gather_ms,
            detect_ms,
            total_ms,
        },
    ))
}

fn ms_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}
