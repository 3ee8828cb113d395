//! Normalized stochastic gradient ascent on the log-integrand.
//!
//! Each iteration draws one cell-uniform sample `x`, evaluates `∇ḡ(x, γ)` and
//! moves `γ` by `θ_i` along the unit vector `∇ḡ/‖∇ḡ‖₂`, then projects onto
//! the feasible set. Since `∇g = exp(ḡ) ∇ḡ` with `exp(ḡ) > 0`, this is the
//! normalized step on `g` without ever evaluating `exp(ḡ)`.

use rand::Rng;

use crate::error::{invalid, Result};
use crate::linalg::{norm1, norm2};
use crate::quantizer::{sample_uniform_in_cells_into, QuantizerCodebook};
use crate::scalar::Real;

use super::likelihood::DetectionModel;

/// Gradients with smaller norm are treated as zero and resampled.
pub const ZERO_GRADIENT: f64 = 1e-300;

/// Step size `θ_i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSchedule {
    /// `θ_i = i^{-1/2}`
    InverseSqrt,
    /// `θ_i = scale · i^{-1/2}`
    ScaledInverseSqrt(f64),
    Constant(f64),
}

impl StepSchedule {
    #[inline]
    pub fn step(&self, i: usize) -> f64 {
        let i = i.max(1) as f64;
        match *self {
            Self::InverseSqrt => i.sqrt().recip(),
            Self::ScaledInverseSqrt(s) => s / i.sqrt(),
            Self::Constant(c) => c,
        }
    }
}

/// Termination and step control shared by every NSGD run.
#[derive(Debug, Clone, PartialEq)]
pub struct NsgdConfig {
    /// Stop once `‖γ^{(i)} - γ^{(i-1)}‖₁ / N < epsilon`.
    pub epsilon: f64,
    pub schedule: StepSchedule,
    pub max_iterations: usize,
    /// Keep every iterate, needed for `δ` traces.
    pub record_path: bool,
}

impl NsgdConfig {
    /// `θ_i = i^{-1/2}` and a cap of `10 ⌈1/ε⌉` iterations.
    pub fn with_epsilon(epsilon: f64) -> Self {
        Self {
            epsilon,
            schedule: StepSchedule::InverseSqrt,
            max_iterations: default_max_iterations(epsilon),
            record_path: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(invalid("epsilon", format!("must be positive, got {}", self.epsilon)));
        }
        if self.max_iterations == 0 {
            return Err(invalid("maxIterations", "must be at least 1"));
        }
        Ok(())
    }
}

pub fn default_max_iterations(epsilon: f64) -> usize {
    ((1.0 / epsilon).ceil() as usize).saturating_mul(10)
}

/// A stochastic ascent problem: sampled gradients and a feasible set.
pub trait StochasticAscent<T: Real> {
    /// One stochastic gradient of `ḡ` at `params`.
    fn sampled_gradient<R: Rng + ?Sized>(&mut self, params: &[T], rng: &mut R) -> Result<Vec<T>>;

    /// Euclidean projection onto the feasible set, in place.
    fn project(&self, params: &mut [T]);
}

#[derive(Debug, Clone, PartialEq)]
pub struct NsgdOutcome<T> {
    pub params: Vec<T>,
    /// Number of updates performed.
    pub iterations: usize,
    pub eta_trace: Vec<T>,
    pub converged: bool,
    /// `γ^{(1)}, …, γ^{(I)}` when recording was requested.
    pub path: Option<Vec<Vec<T>>>,
}

/// Runs NSGD from `init` until the η rule fires or the cap is reached.
pub fn run_nsgd<T: Real, P: StochasticAscent<T>, R: Rng + ?Sized>(
    problem: &mut P,
    init: Vec<T>,
    config: &NsgdConfig,
    rng: &mut R,
) -> Result<NsgdOutcome<T>> {
    config.validate()?;
    let dim = T::of_usize(init.len().max(1));
    let eps = T::of(config.epsilon);
    let mut params = init;
    let mut next = params.clone();
    let mut eta_trace = Vec::new();
    let mut path = config.record_path.then(Vec::new);
    let mut iterations = 0usize;
    let mut converged = false;
    let mut draws = 0usize;
    while draws < config.max_iterations {
        draws += 1;
        let grad = problem.sampled_gradient(&params, rng)?;
        let norm = norm2(&grad);
        if !(norm.f64() >= ZERO_GRADIENT) || !norm.is_finite() {
            continue;
        }
        iterations += 1;
        let theta = T::of(config.schedule.step(iterations));
        let scale = theta / norm;
        for ((n, &p), &g) in next.iter_mut().zip(&params).zip(&grad) {
            *n = p + scale * g;
        }
        problem.project(&mut next);
        let diff: Vec<T> = next.iter().zip(&params).map(|(&a, &b)| a - b).collect();
        let eta = norm1(&diff) / dim;
        std::mem::swap(&mut params, &mut next);
        eta_trace.push(eta);
        if let Some(p) = path.as_mut() {
            p.push(params.clone());
        }
        if eta < eps {
            converged = true;
            break;
        }
    }
    Ok(NsgdOutcome {
        params,
        iterations,
        eta_trace,
        converged,
        path,
    })
}

/// Output of either detector.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult<T> {
    pub gamma_hat: Vec<T>,
    pub iterations: usize,
    pub eta_trace: Vec<T>,
    pub converged: bool,
    pub path: Option<Vec<Vec<T>>>,
}

impl<T: Real> DetectionResult<T> {
    /// `δ_i = ‖γ^{(i)} - γ*‖₁ / N` against `reference`, or the final iterate
    /// when `reference` is `None`. Requires a recorded path.
    pub fn delta_trace(&self, reference: Option<&[T]>) -> Option<Vec<T>> {
        let path = self.path.as_ref()?;
        let target = reference.unwrap_or(&self.gamma_hat);
        let n = T::of_usize(target.len().max(1));
        Some(
            path.iter()
                .map(|g| {
                    g.iter()
                        .zip(target)
                        .map(|(&a, &b)| (a - b).abs())
                        .sum::<T>()
                        / n
                })
                .collect(),
        )
    }
}

impl<T> From<NsgdOutcome<T>> for DetectionResult<T> {
    fn from(o: NsgdOutcome<T>) -> Self {
        Self {
            gamma_hat: o.params,
            iterations: o.iterations,
            eta_trace: o.eta_trace,
            converged: o.converged,
            path: o.path,
        }
    }
}

/// The Phase II problem: maximize `E_x[g(x, γ)]` over `γ >= 0`.
pub struct ActivityProblem<'a, T> {
    model: &'a DetectionModel<T>,
    y_q: &'a [T],
    cb: &'a QuantizerCodebook<T>,
    sample: Vec<T>,
}

impl<'a, T: Real> ActivityProblem<'a, T> {
    pub fn new(model: &'a DetectionModel<T>, y_q: &'a [T], cb: &'a QuantizerCodebook<T>) -> Result<Self> {
        if y_q.len() != model.observation_dim() {
            return Err(crate::Error::Dimension(format!(
                "quantized vector has {} entries, expected {}",
                y_q.len(),
                model.observation_dim()
            )));
        }
        Ok(Self {
            model,
            y_q,
            cb,
            sample: vec![T::zero(); y_q.len()],
        })
    }
}

impl<T: Real> StochasticAscent<T> for ActivityProblem<'_, T> {
    fn sampled_gradient<R: Rng + ?Sized>(&mut self, params: &[T], rng: &mut R) -> Result<Vec<T>> {
        sample_uniform_in_cells_into(self.y_q, self.cb, rng, &mut self.sample);
        self.model.grad_log_g(&self.sample, params)
    }

    fn project(&self, params: &mut [T]) {
        for p in params {
            *p = p.max(T::zero());
        }
    }
}

/// Detects device activity from the quantized observation with NSGD,
/// starting at `γ = 0`.
pub fn nsgd_detect<T: Real, R: Rng + ?Sized>(
    y_q: &[T],
    cb: &QuantizerCodebook<T>,
    model: &DetectionModel<T>,
    config: &NsgdConfig,
    rng: &mut R,
) -> Result<DetectionResult<T>> {
    let mut problem = ActivityProblem::new(model, y_q, cb)?;
    let init = vec![T::zero(); model.devices()];
    Ok(run_nsgd(&mut problem, init, config, rng)?.into())
}
