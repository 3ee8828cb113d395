//! Activity detection for massive MIMO with low-resolution ADCs.
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`); the
//! aliases below fix the precision for callers that do not care.

// `!(x > 0)` is used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod channel;
pub mod detector;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod linalg;
pub mod oracle;
pub mod quantizer;
pub mod scalar;
pub mod signal_model;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Matrix64 = linalg::Matrix<f64>;
pub type Matrix32 = linalg::Matrix<f32>;
pub type Preamble64 = signal_model::PreambleMatrix<f64>;
pub type Preamble32 = signal_model::PreambleMatrix<f32>;
pub type Codebook64 = quantizer::QuantizerCodebook<f64>;
pub type Codebook32 = quantizer::QuantizerCodebook<f32>;
pub type DetectionModel64 = detector::DetectionModel<f64>;
pub type DetectionModel32 = detector::DetectionModel<f32>;
pub type KModel64 = estimator::KModel<f64>;
pub type KModel32 = estimator::KModel<f32>;
