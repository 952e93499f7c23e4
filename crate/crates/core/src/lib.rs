//! Grey-box thrust estimation for small-scale turbojets.
//!
//! The crate is organised along the estimation pipeline:
//!
//! - [`signals`]: time series, excitation signals, quantization, Savitzky-Golay
//!   and smoothing-spline differentiation.
//! - [`plant`]: the ω–u dynamic model, the static thrust map and an RK4 digital
//!   twin with failure injection.
//! - [`regress`]: power-law regression for the static maps.
//! - [`sindy`]: candidate libraries and sequentially thresholded least squares.
//! - [`ekf`]: a generic discrete EKF, the parameter refiner and the thrust
//!   observer with online idle-speed estimation.
//! - [`pipeline`]: configuration, file formats, metrics and the end-to-end
//!   commands used by the CLI.

// `!(x > 0.0)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ekf;
pub mod error;
pub mod pipeline;
pub mod plant;
pub mod regress;
pub mod signals;
pub mod sindy;

pub use error::{Error, Result};
