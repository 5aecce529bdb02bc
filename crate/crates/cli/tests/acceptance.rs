//! End-to-end acceptance suite. Each test covers one numbered criterion and
//! prints a single PASS/FAIL line (visible with `--nocapture`; cargo shows
//! captured output for failing tests anyway).
//!
//! The tests share a global lock so the timing-sensitive criteria (7, 8, 9)
//! are not distorted by concurrently running siblings.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::sync::Mutex;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{write_blob_image, write_constant_image, Server, BIN};
use dof_core::bench::{run_bench, BenchSpec, ImageSource};
use dof_core::calibrate::{fit_log_linear, BlurSeriesPoint};
use dof_core::detect::{detect_features, Feature, FeatureSet};
use dof_core::pipeline::{run_pipeline, PipelineParams};
use dof_core::preprocess::{histogram_stretch, StretchParams};
use dof_core::scale_space::{fft_convolve, gaussian_kernel, DoGStack, ScaleGrid};
use dof_core::synth::{gen_synthetic, gen_synthetic_with_truth, Placement};
use dof_core::GrayImage;

static SEQUENTIAL: Mutex<()> = Mutex::new(());

/// Run `body` under the suite lock and print one PASS/FAIL line for the
/// criterion before propagating any panic.
fn criterion(number: u32, label: &str, body: impl FnOnce()) {
    let _guard = SEQUENTIAL.lock().unwrap_or_else(|e| e.into_inner());
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(()) => println!("PASS: criterion {number} - {label}"),
        Err(payload) => {
            println!("FAIL: criterion {number} - {label}");
            std::panic::resume_unwind(payload);
        }
    }
}

fn run_cli(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(BIN).args(args).output().expect("run dof");
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn random_image(rng: &mut ChaCha8Rng, w: usize, h: usize) -> GrayImage {
    GrayImage::from_fn(w, h, |_, _| rng.gen_range(0.0..=1.0)).unwrap()
}

// ---------------------------------------------------------------------------
// 1. FFT convolution vs direct spatial circular convolution

fn spatial_circular_convolve(img: &[f64], w: usize, h: usize, kernel: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for ky in 0..h {
                let sy = (y + h - ky) % h;
                for kx in 0..w {
                    let sx = (x + w - kx) % w;
                    acc += kernel[ky * w + kx] * img[sy * w + sx];
                }
            }
            out[y * w + x] = acc;
        }
    }
    out
}

#[test]
fn criterion_01_convolution_matches_spatial_oracle() {
    criterion(1, "fft_convolve matches spatial oracle within 1e-6", || {
        let start = Instant::now();
        let sizes = [(16usize, 16usize), (17, 23), (64, 64)];
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        let mut worst: f64 = 0.0;
        for k in 0..20 {
            let (w, h) = sizes[k % sizes.len()];
            let img = random_image(&mut rng, w, h);
            for t in [1.0, 2.0, 5.0] {
                let kernel = gaussian_kernel(t, w, h).unwrap();
                let fast = fft_convolve(img.pixels(), w, h, &kernel, w, h).unwrap();
                let slow = spatial_circular_convolve(img.pixels(), w, h, &kernel);
                for (a, b) in fast.iter().zip(&slow) {
                    worst = worst.max((a - b).abs());
                }
            }
        }
        assert!(worst < 1e-6, "max abs error {worst}");
        let elapsed = start.elapsed().as_secs_f64();
        assert!(elapsed < 30.0, "oracle check took {elapsed:.1}s");
    });
}

// ---------------------------------------------------------------------------
// 2. detect_features vs naive per-pixel scan

fn naive_detect(stack: &DoGStack) -> FeatureSet {
    let (w, h) = (stack.width, stack.height);
    let scales = stack.grid.scales();
    let border = stack.grid.max_t.ceil() as usize;
    // per-pixel max over scales, ties to the smallest (1-based) index
    let mut best = vec![(f64::NEG_INFINITY, 0usize); w * h];
    for (i, plane) in stack.planes.iter().enumerate() {
        for (p, slot) in plane.iter().zip(best.iter_mut()) {
            if *p > slot.0 {
                *slot = (*p, i + 1);
            }
        }
    }
    let mut features = Vec::new();
    for y in 0..h {
        'pixel: for x in 0..w {
            let (v, idx) = best[y * w + x];
            for ny in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                for nx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                    if (nx, ny) != (x, y) && best[ny * w + nx].0 >= v {
                        continue 'pixel;
                    }
                }
            }
            if v < 0.0 {
                continue;
            }
            features.push(Feature {
                x,
                y,
                scale_index: idx,
                t: scales[idx - 1],
                response: v,
                border_affected: x < border || y < border || x + border >= w || y + border >= h,
            });
        }
    }
    FeatureSet::new(features)
}

#[test]
fn criterion_02_detection_matches_naive_scan() {
    criterion(2, "detect_features equals the naive scan on 100 stacks", || {
        let mut rng = ChaCha8Rng::seed_from_u64(202);
        let grid = ScaleGrid::new(8, 1.0, 9.0).unwrap();
        for _ in 0..100 {
            let planes: Vec<Vec<f64>> = (0..8)
                .map(|_| (0..32 * 32).map(|_| rng.gen_range(-1.0..=1.0)).collect())
                .collect();
            let stack = DoGStack {
                grid: grid.clone(),
                width: 32,
                height: 32,
                planes,
            };
            let fast = detect_features(&stack, 0.0).unwrap();
            let slow = naive_detect(&stack);
            assert_eq!(fast, slow);
        }
    });
}

// ---------------------------------------------------------------------------
// 3. Constant image scores zero through CLI and service

#[test]
fn criterion_03_constant_image_scores_zero() {
    criterion(3, "constant image gives DOF 0 via CLI and service", || {
        let dir = tempfile::tempdir().unwrap();
        let img = dir.path().join("blank.pgm");
        write_constant_image(&img, 100, 73, 0.42);

        let (code, stdout, stderr) = run_cli(&["analyze", "--input", img.to_str().unwrap()]);
        assert_eq!(code, 0, "{stderr}");
        let report: serde_json::Value = serde_json::from_str(&stdout).unwrap();
        assert_eq!(report["count"], 0);

        let server = Server::spawn(dir.path(), &[]);
        let rt = tokio::runtime::Runtime::new().unwrap();
        let report: serde_json::Value = rt.block_on(async {
            reqwest::Client::new()
                .post(format!("{}/detect", server.base_url))
                .json(&serde_json::json!({ "path": "blank.pgm" }))
                .send()
                .await
                .unwrap()
                .json()
                .await
                .unwrap()
        });
        assert_eq!(report["count"], 0);
    });
}

// ---------------------------------------------------------------------------
// 4. Well-separated blobs are recovered at the right place and scale

#[test]
fn criterion_04_blob_ground_truth_recovered() {
    criterion(4, "25 strongest features match blob centers and scales", || {
        let (img, blobs) =
            gen_synthetic_with_truth(512, 512, 25, (2.0, 8.0), 7, Placement::WellSeparated)
                .unwrap();
        let params = PipelineParams::default();
        let (set, _) = run_pipeline(&img, &params).unwrap();
        assert!(set.count >= 25);

        let mut features = set.features.clone();
        features.sort_by(|a, b| b.response.total_cmp(&a.response));
        let delta_t = params.grid.delta_t();
        for f in &features[..25] {
            let nearest = blobs
                .iter()
                .min_by(|a, b| {
                    let da = (a.x - f.x as f64).hypot(a.y - f.y as f64);
                    let db = (b.x - f.x as f64).hypot(b.y - f.y as f64);
                    da.total_cmp(&db)
                })
                .unwrap();
            let dist = (nearest.x - f.x as f64).hypot(nearest.y - f.y as f64);
            assert!(dist <= 2.0, "feature at ({},{}) is {dist:.2} px off", f.x, f.y);
            assert!(
                (f.t - nearest.scale).abs() <= 2.0 * delta_t,
                "selected t {} vs blob scale {}",
                f.t,
                nearest.scale
            );
        }
    });
}

// ---------------------------------------------------------------------------
// 5 + 6. Counts fall monotonically under defocus and fit a log-linear law

fn blur(img: &GrayImage, sigma: f64) -> GrayImage {
    if sigma == 0.0 {
        return img.clone();
    }
    let (w, h) = (img.width(), img.height());
    let kernel = gaussian_kernel(sigma, w, h).unwrap();
    let pixels = fft_convolve(img.pixels(), w, h, &kernel, w, h).unwrap();
    GrayImage::new(w, h, pixels).unwrap()
}

fn defocus_series() -> Vec<(f64, usize)> {
    let img = gen_synthetic(512, 512, 300, (1.5, 4.0), 42, Placement::Random).unwrap();
    let params = PipelineParams::default();
    [0.0, 1.0, 2.0, 4.0, 8.0]
        .into_iter()
        .map(|sigma| {
            let (set, _) = run_pipeline(&blur(&img, sigma), &params).unwrap();
            (sigma, set.count)
        })
        .collect()
}

#[test]
fn criterion_05_counts_decrease_under_defocus() {
    criterion(5, "DOF counts fall monotonically with blur", || {
        let series = defocus_series();
        let counts: Vec<usize> = series.iter().map(|&(_, c)| c).collect();
        for pair in counts.windows(2) {
            assert!(pair[0] >= pair[1], "counts not non-increasing: {counts:?}");
        }
        // strict drops sigma 0 -> 4 and sigma 2 -> 8
        assert!(counts[0] > counts[3], "{counts:?}");
        assert!(counts[2] > counts[4], "{counts:?}");
    });
}

#[test]
fn criterion_06_log_linear_relationship() {
    criterion(6, "log(count) vs blur is linear with negative slope", || {
        let series: Vec<BlurSeriesPoint> = defocus_series()
            .into_iter()
            .filter(|&(_, c)| c > 0)
            .map(|(sigma, c)| BlurSeriesPoint {
                deviation: sigma,
                count: c as f64,
            })
            .collect();
        let fit = fit_log_linear(&series).unwrap();
        assert!(fit.slope < 0.0, "slope {}", fit.slope);
        assert!(fit.r <= -0.9, "r {}", fit.r);

        // exact exponential data recovers r = -1 to machine precision
        let exact: Vec<BlurSeriesPoint> = [(0.0, 6.0), (1.0, 4.0), (2.0, 2.0)]
            .into_iter()
            .map(|(d, ln_c)| BlurSeriesPoint {
                deviation: d,
                count: f64::exp(ln_c),
            })
            .collect();
        let fit = fit_log_linear(&exact).unwrap();
        assert!((fit.r + 1.0).abs() < 1e-12, "r {}", fit.r);
    });
}

// ---------------------------------------------------------------------------
// 7. Worker count never changes the result

#[test]
fn criterion_07_worker_invariance_at_1024() {
    criterion(7, "identical FeatureSets for 1, 2 and 4 workers", || {
        let img = gen_synthetic(1024, 1024, 700, (1.5, 4.0), 9, Placement::Random).unwrap();
        let mut params = PipelineParams::default();
        let (reference, _) = run_pipeline(&img, &params).unwrap();
        assert!(reference.count > 0);
        for workers in [2, 4] {
            params.workers = workers;
            let (set, _) = run_pipeline(&img, &params).unwrap();
            assert_eq!(set, reference, "workers={workers} diverged");
        }
    });
}

// ---------------------------------------------------------------------------
// 8. Runtime scales with scale count and resolution as expected

#[test]
fn criterion_08_scaling_shape() {
    criterion(8, "pyramid and total runtime scale as expected", || {
        let by_scales = run_bench(&BenchSpec {
            resolutions: vec![(512, 512)],
            scale_counts: vec![8, 32],
            worker_counts: vec![1],
            repetitions: 21,
            image_source: ImageSource::synthetic(5),
        })
        .unwrap();
        let t8 = by_scales.rows[0].median.pyramid_ms;
        let t32 = by_scales.rows[1].median.pyramid_ms;
        let ratio = t32 / t8;
        assert!(
            (2.0..=8.0).contains(&ratio),
            "pyramid_ms(n=32)/pyramid_ms(n=8) = {ratio:.2}"
        );

        let by_resolution = run_bench(&BenchSpec {
            resolutions: vec![(256, 256), (1024, 1024)],
            scale_counts: vec![16],
            worker_counts: vec![1],
            repetitions: 21,
            image_source: ImageSource::synthetic(5),
        })
        .unwrap();
        let t256 = by_resolution.rows[0].median.total_ms;
        let t1024 = by_resolution.rows[1].median.total_ms;
        assert!(
            t1024 / t256 >= 4.0,
            "total_ms(1024^2)/total_ms(256^2) = {:.2}",
            t1024 / t256
        );
        assert!(t1024 <= 5000.0, "total_ms at 1024^2 is {t1024:.0} ms");
    });
}

// ---------------------------------------------------------------------------
// 9. The service returns exactly what the CLI computes

#[test]
fn criterion_09_service_equivalence() {
    criterion(9, "service counts equal CLI counts, serial and concurrent", || {
        let dir = tempfile::tempdir().unwrap();
        let names: Vec<String> = (0..10).map(|i| format!("img{i}.pgm")).collect();
        for (i, name) in names.iter().enumerate() {
            write_blob_image(&dir.path().join(name), 128, 128, 15, 1000 + i as u64);
        }

        let cli_counts: Vec<u64> = names
            .iter()
            .map(|name| {
                let path = dir.path().join(name);
                let (code, stdout, stderr) =
                    run_cli(&["analyze", "--input", path.to_str().unwrap()]);
                assert_eq!(code, 0, "{stderr}");
                let report: serde_json::Value = serde_json::from_str(&stdout).unwrap();
                report["count"].as_u64().unwrap()
            })
            .collect();

        let server = Server::spawn(dir.path(), &[]);
        let rt = tokio::runtime::Runtime::new().unwrap();
        rt.block_on(async {
            let client = reqwest::Client::new();
            let health = client
                .get(format!("{}/health", server.base_url))
                .send()
                .await
                .unwrap();
            assert_eq!(health.status(), 200);

            let url = format!("{}/detect", server.base_url);
            let mut serial = Vec::new();
            for name in &names {
                let report: serde_json::Value = client
                    .post(&url)
                    .json(&serde_json::json!({ "path": name }))
                    .send()
                    .await
                    .unwrap()
                    .json()
                    .await
                    .unwrap();
                assert!(
                    report["service_overhead_ms"].as_f64().is_some(),
                    "missing overhead in {report}"
                );
                serial.push(report["count"].as_u64().unwrap());
            }
            assert_eq!(serial, cli_counts);

            // 8 concurrent requests must reproduce the serial results
            let tasks: Vec<_> = names[..8]
                .iter()
                .map(|name| {
                    let client = client.clone();
                    let url = url.clone();
                    let name = name.clone();
                    tokio::spawn(async move {
                        let report: serde_json::Value = client
                            .post(&url)
                            .json(&serde_json::json!({ "path": name }))
                            .send()
                            .await
                            .unwrap()
                            .json()
                            .await
                            .unwrap();
                        assert!(report["service_overhead_ms"].as_f64().is_some());
                        report["count"].as_u64().unwrap()
                    })
                })
                .collect();
            for (task, expected) in tasks.into_iter().zip(&serial) {
                assert_eq!(task.await.unwrap(), *expected);
            }
        });
    });
}

// ---------------------------------------------------------------------------
// 10. Histogram stretch: selection equals sorting, and is affine invariant

fn stretch_oracle(pixels: &[f64], lower: f64, upper: f64) -> Vec<f64> {
    let mut sorted = pixels.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let lo = sorted[((lower * n as f64).floor() as usize).min(n - 1)];
    let hi = sorted[n - 1 - ((upper * n as f64).floor() as usize).min(n - 1)];
    if hi > lo {
        let span = hi - lo;
        pixels.iter().map(|&p| ((p - lo) / span).clamp(0.0, 1.0)).collect()
    } else {
        vec![0.0; n]
    }
}

#[test]
fn criterion_10_histogram_stretch_properties() {
    criterion(10, "stretch matches sort oracle and is affine invariant", || {
        let mut rng = ChaCha8Rng::seed_from_u64(1010);
        for k in 0..50 {
            let w = rng.gen_range(5..120);
            let h = rng.gen_range(5..120);
            let img = random_image(&mut rng, w, h);
            let (lower, upper) = if k % 2 == 0 {
                (0.00175, 0.00175)
            } else {
                (rng.gen_range(0.0..0.1), rng.gen_range(0.0..0.1))
            };
            let params = StretchParams::new(lower, upper).unwrap();

            let fast = histogram_stretch(&img, &params);
            let slow = stretch_oracle(img.pixels(), lower, upper);
            assert_eq!(fast.pixels(), &slow[..], "selection diverged from sort");

            let a = rng.gen_range(0.1..5.0);
            let b = rng.gen_range(-0.5..0.5);
            let shifted = GrayImage::new(
                w,
                h,
                img.pixels().iter().map(|&p| a * p + b).collect(),
            )
            .unwrap();
            let again = histogram_stretch(&shifted, &params);
            for (p, q) in fast.pixels().iter().zip(again.pixels()) {
                assert!((p - q).abs() < 1e-9, "affine invariance violated");
            }
        }
    });
}
