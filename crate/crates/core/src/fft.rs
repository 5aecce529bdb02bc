//! Minimal 2-D complex FFT on row-major buffers, built on rustfft.

use num_complex::Complex;
use rustfft::{FftDirection, FftPlanner};

fn transpose(src: &[Complex<f64>], w: usize, h: usize) -> Vec<Complex<f64>> {
    let mut out = vec![Complex::default(); src.len()];
    for y in 0..h {
        for x in 0..w {
            out[x * h + y] = src[y * w + x];
        }
    }
    out
}

fn transform(data: &mut Vec<Complex<f64>>, w: usize, h: usize, dir: FftDirection) {
    let mut planner = FftPlanner::new();
    let row_fft = planner.plan_fft(w, dir);
    for row in data.chunks_exact_mut(w) {
        row_fft.process(row);
    }
    let col_fft = planner.plan_fft(h, dir);
    let mut cols = transpose(data, w, h);
    for col in cols.chunks_exact_mut(h) {
        col_fft.process(col);
    }
    *data = transpose(&cols, h, w);
}

/// Unnormalized forward 2-D FFT of a real buffer.
pub fn forward(real: &[f64], w: usize, h: usize) -> Vec<Complex<f64>> {
    let mut data: Vec<Complex<f64>> = real.iter().map(|&v| Complex::new(v, 0.0)).collect();
    transform(&mut data, w, h, FftDirection::Forward);
    data
}

/// Inverse 2-D FFT returning the real part, normalized by 1/(w*h).
pub fn inverse_real(mut spectrum: Vec<Complex<f64>>, w: usize, h: usize) -> Vec<f64> {
    transform(&mut spectrum, w, h, FftDirection::Inverse);
    let scale = 1.0 / (w * h) as f64;
    spectrum.iter().map(|c| c.re * scale).collect()
}
