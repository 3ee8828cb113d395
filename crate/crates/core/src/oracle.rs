//! Brute-force reference values for tiny problems.
//!
//! The quantized likelihood `P(ȳ^Q | γ)` is the Gaussian mass of the product
//! of truncated cells selected by `ȳ^Q`. These routines integrate it on a
//! tensor grid and are only practical up to six real dimensions.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::detector::DetectionModel;
use crate::error::{invalid, Error, Result};
use crate::quantizer::{QuantizerCodebook, UniformQuantizer};
use crate::scalar::Real;

pub const MAX_ORACLE_DIMS: usize = 6;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureResult {
    /// `∫_J p(x | γ) dx`.
    pub probability: f64,
    /// `∫_J ∇_γ p(x | γ) dx`.
    pub gradient: Vec<f64>,
    /// Cell average of `∇_γ log p(x | γ)`, the quantity NSGD samples.
    pub mean_log_gradient: Vec<f64>,
}

fn uniform<T>(cb: &QuantizerCodebook<T>) -> Result<&UniformQuantizer<T>> {
    match cb {
        QuantizerCodebook::Uniform(q) => Ok(q),
        QuantizerCodebook::PassThrough => Err(invalid("codebook", "oracle needs a finite resolution")),
    }
}

/// Midpoint rule with `grid_points_per_dim` nodes per truncated cell.
pub fn brute_force_quantized_likelihood<T: Real>(
    y_q: &[T],
    cb: &QuantizerCodebook<T>,
    model: &DetectionModel<T>,
    gamma: &[T],
    grid_points_per_dim: usize,
) -> Result<QuadratureResult> {
    let q = uniform(cb)?;
    let dims = y_q.len();
    if dims != model.observation_dim() {
        return Err(Error::Dimension(format!(
            "quantized vector has {dims} entries, expected {}",
            model.observation_dim()
        )));
    }
    if dims > MAX_ORACLE_DIMS {
        return Err(invalid("dimension", format!("{dims} exceeds {MAX_ORACLE_DIMS}")));
    }
    if grid_points_per_dim == 0 {
        return Err(invalid("gridPointsPerDim", "must be at least 1"));
    }
    let g = grid_points_per_dim;
    let h = q.delta().f64() / g as f64;
    let lower: Vec<f64> = y_q.iter().map(|&y| q.truncated_cell(q.index(y)).0.f64()).collect();
    let weight = h.powi(dims as i32);

    let mut probability = 0.0;
    let mut gradient = vec![0.0; model.devices()];
    let mut mean_log_gradient = vec![0.0; model.devices()];
    let nodes = (g as f64).powi(dims as i32);
    let mut idx = vec![0usize; dims];
    let mut x = vec![T::zero(); dims];
    loop {
        for d in 0..dims {
            x[d] = T::of(lower[d] + (idx[d] as f64 + 0.5) * h);
        }
        let e = model.evaluate(&x, gamma, T::zero(), true)?;
        let p = e.value.f64().exp() * weight;
        probability += p;
        let grad = e.gradient.expect("gradient requested");
        for ((acc, mean), v) in gradient.iter_mut().zip(mean_log_gradient.iter_mut()).zip(grad) {
            *acc += p * v.f64();
            *mean += v.f64() / nodes;
        }
        let mut d = 0;
        while d < dims {
            idx[d] += 1;
            if idx[d] < g {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
        if d == dims {
            break;
        }
    }
    Ok(QuadratureResult {
        probability,
        gradient,
        mean_log_gradient,
    })
}

/// Closed form at `γ = 0`: `Σ = σ²/2 · I`, so the mass factorizes into
/// one-dimensional normal CDF differences.
pub fn zero_gamma_cell_probability<T: Real>(y_q: &[T], cb: &QuantizerCodebook<T>, sigma2: f64) -> Result<f64> {
    let q = uniform(cb)?;
    if !(sigma2 > 0.0) {
        return Err(invalid("sigma2", "must be positive"));
    }
    let normal = Normal::new(0.0, (sigma2 / 2.0).sqrt()).map_err(|e| invalid("sigma2", e.to_string()))?;
    Ok(y_q
        .iter()
        .map(|&y| {
            let (lo, hi) = q.truncated_cell(q.index(y));
            normal.cdf(hi.f64()) - normal.cdf(lo.f64())
        })
        .product())
}
