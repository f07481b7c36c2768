//! Lossy colour image codec that keeps a sparse, quantised set of pixels on a
//! regular grid and reconstructs the rest with Shepard inpainting.
//!
//! Three colour modes are provided: scalar RGB, luma-preference YCbCr and
//! vector-quantised RGB. See [`codec`] for the pipelines and container format.

pub mod codec;
pub mod entropy;
pub mod error;
pub mod image;
pub mod inpaint;
pub mod mask;
pub mod quantize;
pub mod tonal;

pub use error::{Error, Result};
pub use image::{ColorSpace, PixelCoord, RasterImage};
