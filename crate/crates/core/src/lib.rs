//! Synthetic aperture imaging of direction and frequency dependent
//! reflectivities.
//!
//! The pipeline simulates down-ramped SAR data from point scatterers whose
//! reflectivity depends on the viewing direction and on frequency, splits
//! the aperture and band into sub-apertures and sub-bands, and reduces the
//! inversion to a multiple measurement vector (MMV) problem
//! `A X = D` with one reference matrix `A` shared by every data subset.
//! The row-sparse solution is found with the GeLMA iteration and the
//! reflectivity is recovered by demodulating `X`.
//!
//! Indices for sub-apertures (`alpha`) and sub-bands (`beta`) are zero
//! based; index 0 is the reference subset.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod config;
mod error;
pub mod geometry;
pub mod io;
pub mod model;
pub mod pipeline;
pub mod plot;
pub mod scene;
pub mod segmentation;
pub mod simulator;
pub mod solver;
pub mod waveform;

pub use error::{Error, Result};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
