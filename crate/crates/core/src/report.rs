//! The analysis result document returned by the CLI and the service.

use serde::{Deserialize, Serialize};

use crate::calibrate::Classification;
use crate::pipeline::{PhaseTimings, PipelineParams};
use crate::preprocess::StretchParams;
use crate::scale_space::ScaleGrid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DofReport {
    pub image_id: String,
    /// The degree-of-focus score: the feature count.
    pub count: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classification: Option<Classification>,
    pub grid: ScaleGrid,
    pub stretch: StretchParams,
    pub min_response: f64,
    pub workers: usize,
    pub timings: PhaseTimings,
    /// Request receipt to pipeline start plus pipeline end to response
    /// serialization; set only by the service.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub service_overhead_ms: Option<f64>,
}

impl DofReport {
    pub fn new(
        image_id: impl Into<String>,
        count: usize,
        params: &PipelineParams,
        timings: PhaseTimings,
    ) -> Self {
        Self {
            image_id: image_id.into(),
            count,
            classification: None,
            grid: params.grid,
            stretch: params.stretch,
            min_response: params.min_response,
            workers: params.workers,
            timings,
            service_overhead_ms: None,
        }
    }
}
