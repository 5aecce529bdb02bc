//! HTTP analysis service: synchronous /detect plus submit-and-poll /jobs.

use std::collections::HashMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use axum::extract::{FromRequest, Multipart, Path as UrlPath, Request, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;
use tokio::sync::Semaphore;
use uuid::Uuid;

use dof_core::calibrate::{classify, Calibration};
use dof_core::image_io::{decode_image_bytes, downsample, load_image};
use dof_core::pipeline::{run_pipeline, PipelineParams};
use dof_core::report::DofReport;
use dof_core::Error as CoreError;

use crate::ServeArgs;

pub struct ServeState {
    root: PathBuf,
    params: PipelineParams,
    calibration: Option<Calibration>,
    semaphore: Semaphore,
    max_pixels: usize,
    downsample: usize,
    jobs: Mutex<HashMap<Uuid, JobStatus>>,
}

#[derive(Clone)]
enum JobStatus {
    Pending,
    Done(Box<DofReport>),
    Failed(String),
}

struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "error": { "message": self.message } });
        (self.status, Json(body)).into_response()
    }
}

fn map_core_error(err: CoreError) -> ApiError {
    match err {
        CoreError::FileNotFound { .. } => ApiError::new(StatusCode::NOT_FOUND, err.to_string()),
        CoreError::CorruptImage { .. } | CoreError::UnsupportedFormat { .. } => {
            ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, err.to_string())
        }
        other => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, other.to_string()),
    }
}

enum DetectInput {
    Path(String),
    Bytes { name: String, data: Vec<u8> },
}

#[derive(Deserialize)]
struct DetectRequest {
    path: String,
}

async fn parse_detect_request(req: Request) -> Result<DetectInput, ApiError> {
    let content_type = req
        .headers()
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .unwrap_or("")
        .to_owned();
    if content_type.starts_with("multipart/form-data") {
        let mut multipart = Multipart::from_request(req, &())
            .await
            .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e.to_string()))?;
        while let Some(field) = multipart
            .next_field()
            .await
            .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e.to_string()))?
        {
            if field.name() == Some("image") {
                let name = field.file_name().unwrap_or("<bytes>").to_owned();
                let data = field
                    .bytes()
                    .await
                    .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e.to_string()))?
                    .to_vec();
                return Ok(DetectInput::Bytes { name, data });
            }
        }
        Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            "multipart request is missing an `image` field",
        ))
    } else {
        let bytes = axum::body::to_bytes(req.into_body(), 1024 * 1024)
            .await
            .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, e.to_string()))?;
        let parsed: DetectRequest = serde_json::from_slice(&bytes).map_err(|e| {
            ApiError::new(
                StatusCode::BAD_REQUEST,
                format!("expected JSON {{\"path\": ...}}: {e}"),
            )
        })?;
        Ok(DetectInput::Path(parsed.path))
    }
}

/// Resolve a path-mode request against the configured root, rejecting
/// anything that escapes it.
fn resolve_path(state: &ServeState, rel: &str) -> Result<PathBuf, ApiError> {
    let joined = state.root.join(rel);
    let resolved = joined
        .canonicalize()
        .map_err(|_| ApiError::new(StatusCode::NOT_FOUND, format!("no such image: {rel}")))?;
    if !resolved.starts_with(&state.root) {
        return Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            "path escapes the configured root directory",
        ));
    }
    Ok(resolved)
}

async fn analyze(state: &ServeState, input: DetectInput, received: Instant) -> Result<DofReport, ApiError> {
    let _permit = state
        .semaphore
        .try_acquire()
        .map_err(|_| ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "service at capacity"))?;

    let (image_id, img) = match input {
        DetectInput::Path(rel) => {
            let path = resolve_path(state, &rel)?;
            let img = load_image(&path).map_err(map_core_error)?;
            (rel, img)
        }
        DetectInput::Bytes { name, data } => {
            let img = decode_image_bytes(&data).map_err(map_core_error)?;
            (name, img)
        }
    };
    if img.width() * img.height() > state.max_pixels {
        return Err(ApiError::new(
            StatusCode::PAYLOAD_TOO_LARGE,
            format!(
                "image has {} pixels, limit is {}",
                img.width() * img.height(),
                state.max_pixels
            ),
        ));
    }

    let params = state.params.clone();
    let calibration = state.calibration.clone();
    let factor = state.downsample;
    let pre_ms = received.elapsed().as_secs_f64() * 1e3;
    let result = tokio::task::spawn_blocking(move || {
        let img = downsample(&img, factor)?;
        let (features, timings) = run_pipeline(&img, &params)?;
        let mut report = DofReport::new(image_id, features.count, &params, timings);
        if let Some(cal) = &calibration {
            report.classification = Some(classify(features.count as u64, &cal.threshold()));
        }
        Ok::<_, CoreError>(report)
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;

    let mut report = result.map_err(map_core_error)?;
    let post_ms = received.elapsed().as_secs_f64() * 1e3 - pre_ms - report.timings.total_ms;
    report.service_overhead_ms = Some(pre_ms + post_ms.max(0.0));
    Ok(report)
}

async fn health() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok" }))
}

async fn detect(State(state): State<Arc<ServeState>>, req: Request) -> Response {
    let received = Instant::now();
    let input = match parse_detect_request(req).await {
        Ok(input) => input,
        Err(err) => return err.into_response(),
    };
    match analyze(&state, input, received).await {
        Ok(report) => Json(report).into_response(),
        Err(err) => err.into_response(),
    }
}

async fn submit_job(State(state): State<Arc<ServeState>>, req: Request) -> Response {
    let input = match parse_detect_request(req).await {
        Ok(input) => input,
        Err(err) => return err.into_response(),
    };
    let id = Uuid::new_v4();
    state.jobs.lock().unwrap().insert(id, JobStatus::Pending);
    let task_state = state.clone();
    tokio::spawn(async move {
        let received = Instant::now();
        // jobs queue behind the capacity limit instead of failing fast
        let status = loop {
            match analyze(&task_state, recheck(&input), received).await {
                Ok(report) => break JobStatus::Done(Box::new(report)),
                Err(err) if err.status == StatusCode::SERVICE_UNAVAILABLE => {
                    tokio::time::sleep(std::time::Duration::from_millis(20)).await;
                }
                Err(err) => break JobStatus::Failed(err.message),
            }
        };
        task_state.jobs.lock().unwrap().insert(id, status);
    });
    (StatusCode::ACCEPTED, Json(json!({ "job_id": id }))).into_response()
}

// DetectInput is consumed by analyze; clone it cheaply for retry loops.
fn recheck(input: &DetectInput) -> DetectInput {
    match input {
        DetectInput::Path(p) => DetectInput::Path(p.clone()),
        DetectInput::Bytes { name, data } => DetectInput::Bytes {
            name: name.clone(),
            data: data.clone(),
        },
    }
}

async fn job_status(
    State(state): State<Arc<ServeState>>,
    UrlPath(id): UrlPath<String>,
) -> Response {
    let Ok(id) = Uuid::parse_str(&id) else {
        return ApiError::new(StatusCode::BAD_REQUEST, "malformed job id").into_response();
    };
    let status = state.jobs.lock().unwrap().get(&id).cloned();
    match status {
        None => ApiError::new(StatusCode::NOT_FOUND, "unknown job id").into_response(),
        Some(JobStatus::Pending) => Json(json!({ "status": "pending" })).into_response(),
        Some(JobStatus::Done(report)) => {
            Json(json!({ "status": "done", "report": *report })).into_response()
        }
        Some(JobStatus::Failed(message)) => {
            Json(json!({ "status": "error", "error": { "message": message } })).into_response()
        }
    }
}

pub fn build_router(state: Arc<ServeState>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/detect", post(detect))
        .route("/jobs", post(submit_job))
        .route("/jobs/:id", get(job_status))
        .with_state(state)
}

pub fn cmd_serve(args: ServeArgs) -> anyhow::Result<ExitCode> {
    let params = args.params.to_params()?;
    let root = args
        .root
        .canonicalize()
        .map_err(|e| anyhow::anyhow!("root directory {}: {e}", args.root.display()))?;
    let calibration = match &args.calibration {
        Some(path) => {
            let cal: Calibration = serde_json::from_slice(&std::fs::read(path)?)?;
            cal.check_params(&params, args.params.downsample)?;
            Some(cal)
        }
        None => None,
    };
    let state = Arc::new(ServeState {
        root,
        params,
        calibration,
        semaphore: Semaphore::new(args.max_concurrent),
        max_pixels: args.max_pixels,
        downsample: args.params.downsample,
        jobs: Mutex::new(HashMap::new()),
    });

    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let listener =
            tokio::net::TcpListener::bind(("127.0.0.1", args.port)).await?;
        let addr = listener.local_addr()?;
        println!("listening on http://{addr}");
        axum::serve(listener, build_router(state))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok::<_, anyhow::Error>(())
    })?;
    Ok(ExitCode::SUCCESS)
}
