//! Degree-of-focus (DOF) scoring for grayscale microscopy images.
//!
//! The score is the number of multi-scale blob features found in a
//! Difference-of-Gaussians scale space of the image. Sharp images resolve
//! structure across many scales and therefore yield many features; defocused
//! images yield few. The pipeline is: histogram stretch, Gaussian scale space
//! built by FFT-domain convolution, DoG stack, scale argmax + spatial
//! non-maximum suppression, feature count.

pub mod bench;
pub mod calibrate;
pub mod detect;
mod error;
mod fft;
pub mod image_io;
pub mod pipeline;
pub mod preprocess;
pub mod report;
pub mod scale_space;
pub mod synth;

pub use error::{Error, Result};
pub use image_io::GrayImage;
