mod service;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use dof_core::bench::{run_bench, to_csv, BenchSpec, ImageSource};
use dof_core::calibrate::{
    fit_log_linear, params_hash, threshold_from_fit, BlurSeriesPoint, Calibration, Classification,
};
use dof_core::image_io::{downsample, load_image};
use dof_core::pipeline::{run_pipeline, PipelineParams};
use dof_core::preprocess::StretchParams;
use dof_core::report::DofReport;
use dof_core::scale_space::ScaleGrid;

#[derive(Parser)]
#[command(name = "dof", about = "Degree-of-focus scoring for grayscale microscopy images")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score a single image and print a DofReport as JSON.
    Analyze(AnalyzeArgs),
    /// Fit a log-linear count-vs-deviation model from a CSV series.
    Calibrate(CalibrateArgs),
    /// Run the long-lived HTTP analysis service.
    Serve(ServeArgs),
    /// Sweep resolutions/scales/workers and report median phase timings.
    Bench(BenchArgs),
}

#[derive(Args, Clone)]
struct ParamFlags {
    /// Number of DoG levels n.
    #[arg(long, default_value_t = 16)]
    num_scales: usize,
    /// Minimum scale in pixels.
    #[arg(long, default_value_t = 1.0)]
    min_scale: f64,
    /// Maximum scale in pixels.
    #[arg(long, default_value_t = 17.0)]
    max_scale: f64,
    /// Fraction of darkest pixels saturated by the histogram stretch.
    #[arg(long, default_value_t = 0.00175)]
    sat_low: f64,
    /// Fraction of lightest pixels saturated by the histogram stretch.
    #[arg(long, default_value_t = 0.00175)]
    sat_high: f64,
    /// Discard features with DoG response below this value.
    #[arg(long, default_value_t = 0.0)]
    min_response: f64,
    /// Worker threads for the pyramid phase.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Integer downsample factor applied before analysis.
    #[arg(long, default_value_t = 1)]
    downsample: usize,
}

impl ParamFlags {
    fn to_params(&self) -> anyhow::Result<PipelineParams> {
        Ok(PipelineParams {
            grid: ScaleGrid::new(self.num_scales, self.min_scale, self.max_scale)?,
            stretch: StretchParams::new(self.sat_low, self.sat_high)?,
            min_response: self.min_response,
            workers: self.workers,
        })
    }
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Image to score (PNG/TIFF/PGM, 8- or 16-bit grayscale).
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    params: ParamFlags,
    /// Calibration JSON; when given, the report carries a classification and
    /// an out-of-focus result exits with status 2.
    #[arg(long)]
    threshold_file: Option<PathBuf>,
    /// Write the full FeatureSet JSON here.
    #[arg(long)]
    dump_features: Option<PathBuf>,
}

#[derive(Args)]
struct CalibrateArgs {
    /// CSV with `deviation,count` rows (header optional).
    #[arg(long)]
    series: PathBuf,
    /// Where to write the calibration JSON.
    #[arg(long)]
    out: PathBuf,
    /// Largest focal deviation still considered in focus.
    #[arg(long)]
    max_deviation: f64,
    #[command(flatten)]
    params: ParamFlags,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    port: u16,
    /// Directory that path-mode requests are restricted to.
    #[arg(long)]
    root: PathBuf,
    #[arg(long)]
    calibration: Option<PathBuf>,
    /// Maximum simultaneously running analyses; more return 503.
    #[arg(long, default_value_t = 8)]
    max_concurrent: usize,
    /// Reject images with more pixels than this (413).
    #[arg(long, default_value_t = 64 * 1024 * 1024)]
    max_pixels: usize,
    #[command(flatten)]
    params: ParamFlags,
}

#[derive(Args)]
struct BenchArgs {
    /// Comma-separated square resolutions, e.g. 256,512,1024.
    #[arg(long, value_delimiter = ',', default_value = "256,512,1024")]
    resolutions: Vec<usize>,
    /// Comma-separated DoG level counts.
    #[arg(long, value_delimiter = ',', default_value = "8,16,32")]
    scales: Vec<usize>,
    /// Comma-separated worker counts.
    #[arg(long, value_delimiter = ',', default_value = "1,2,4")]
    workers: Vec<usize>,
    /// Runs per configuration; the first is discarded as warm-up.
    #[arg(long, default_value_t = 21)]
    reps: usize,
    /// Seed for the synthetic benchmark image.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Benchmark this image at its native resolution instead of synthetic
    /// images (the resolution sweep is then ignored).
    #[arg(long)]
    image: Option<PathBuf>,
    /// CSV output path.
    #[arg(long)]
    out: PathBuf,
    /// Optional JSON output with raw samples.
    #[arg(long)]
    json: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Analyze(args) => cmd_analyze(args),
        Command::Calibrate(args) => cmd_calibrate(args),
        Command::Serve(args) => service::cmd_serve(args),
        Command::Bench(args) => cmd_bench(args),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            let payload = json!({ "error": { "message": err.to_string() } });
            eprintln!("{payload}");
            ExitCode::from(1)
        }
    }
}

fn cmd_analyze(args: AnalyzeArgs) -> anyhow::Result<ExitCode> {
    let params = args.params.to_params()?;
    let img = load_image(&args.input)?;
    let img = downsample(&img, args.params.downsample)?;
    let (features, timings) = run_pipeline(&img, &params)?;

    let mut report = DofReport::new(
        args.input.to_string_lossy(),
        features.count,
        &params,
        timings,
    );
    if let Some(path) = &args.threshold_file {
        let calibration: Calibration = serde_json::from_slice(&fs::read(path)?)?;
        calibration.check_params(&params, args.params.downsample)?;
        report.classification = Some(dof_core::calibrate::classify(
            features.count as u64,
            &calibration.threshold(),
        ));
    }
    if let Some(path) = &args.dump_features {
        fs::write(path, serde_json::to_vec_pretty(&features)?)?;
    }
    println!("{}", serde_json::to_string(&report)?);
    if report.classification == Some(Classification::OutOfFocus) {
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_calibrate(args: CalibrateArgs) -> anyhow::Result<ExitCode> {
    let params = args.params.to_params()?;
    let text = fs::read_to_string(&args.series)?;
    let mut points = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (lineno == 0 && line.starts_with("deviation")) {
            continue;
        }
        let (dev, count) = line
            .split_once(',')
            .ok_or_else(|| anyhow::anyhow!("line {}: expected `deviation,count`", lineno + 1))?;
        points.push(BlurSeriesPoint {
            deviation: dev.trim().parse()?,
            count: count.trim().parse()?,
        });
    }
    let zero_count = points.iter().filter(|p| p.count == 0.0).count();
    if zero_count > 0 {
        eprintln!("warning: excluding {zero_count} zero-count points from the fit");
    }
    let fit = fit_log_linear(&points)?;
    let threshold = threshold_from_fit(&fit, args.max_deviation)?;
    let calibration = Calibration::new(
        &fit,
        &threshold,
        params_hash(&params, args.params.downsample),
    );
    fs::write(&args.out, serde_json::to_vec_pretty(&calibration)?)?;
    println!("{}", serde_json::to_string(&calibration)?);
    Ok(ExitCode::SUCCESS)
}

fn cmd_bench(args: BenchArgs) -> anyhow::Result<ExitCode> {
    let spec = BenchSpec {
        resolutions: args.resolutions.iter().map(|&r| (r, r)).collect(),
        scale_counts: args.scales.clone(),
        worker_counts: args.workers.clone(),
        repetitions: args.reps,
        image_source: match &args.image {
            Some(path) => ImageSource::Path(path.clone()),
            None => ImageSource::synthetic(args.seed),
        },
    };
    let result = run_bench(&spec)?;
    fs::write(&args.out, to_csv(&result))?;
    if let Some(path) = &args.json {
        fs::write(path, serde_json::to_vec_pretty(&result)?)?;
    }
    eprintln!("wrote {} configurations to {}", result.rows.len(), args.out.display());
    Ok(ExitCode::SUCCESS)
}
