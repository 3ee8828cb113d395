//! Infinite-resolution benchmark: projected gradient ascent on the exact
//! Gaussian log-likelihood `log p(ȳ | γ)` with a monotone Armijo line search.

use crate::error::{Error, Result};
use crate::linalg::{dot, norm1};
use crate::scalar::Real;

use super::likelihood::DetectionModel;
use super::nsgd::{DetectionResult, NsgdConfig};

pub const ARMIJO: f64 = 1e-4;
const MIN_STEP: f64 = 1e-14;
const MAX_STEP: f64 = 1e12;

/// Projected gradient ascent with Barzilai-Borwein trial steps and halving
/// backtracking. `init` defaults to `γ = 0`.
pub fn infinite_adc_detect<T: Real>(
    ybar: &[T],
    model: &DetectionModel<T>,
    config: &NsgdConfig,
    init: Option<&[T]>,
) -> Result<DetectionResult<T>> {
    config.validate()?;
    let n = model.devices();
    let mut gamma = match init {
        Some(g) if g.len() != n => {
            return Err(Error::Dimension(format!("initial gamma has {} entries", g.len())))
        }
        Some(g) => g.iter().map(|v| v.max(T::zero())).collect(),
        None => vec![T::zero(); n],
    };
    let eval = |g: &[T]| -> Result<(T, Vec<T>)> {
        let e = model.evaluate(ybar, g, T::zero(), true)?;
        Ok((e.value, e.gradient.expect("gradient requested")))
    };
    let eps = T::of(config.epsilon);
    let nf = T::of_usize(n);
    let (mut f, mut grad) = eval(&gamma)?;
    let gmax = grad.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    let mut step = if gmax > T::zero() { T::one() / gmax } else { T::one() };
    let mut eta_trace = Vec::new();
    let mut path = config.record_path.then(Vec::new);
    let mut converged = false;
    let mut iterations = 0;
    let mut objective = vec![f];

    while iterations < config.max_iterations {
        iterations += 1;
        let mut t = step;
        let (cand, f_new, g_new) = loop {
            let cand: Vec<T> = gamma
                .iter()
                .zip(&grad)
                .map(|(&g, &d)| (g + t * d).max(T::zero()))
                .collect();
            let moved: Vec<T> = cand.iter().zip(&gamma).map(|(&a, &b)| a - b).collect();
            let (f_new, g_new) = eval(&cand)?;
            if f_new >= f + T::of(ARMIJO) * dot(&grad, &moved) {
                break (cand, f_new, g_new);
            }
            t = t * T::half();
            if t.f64() < MIN_STEP {
                // No ascent available along the projected arc: stationary.
                break (gamma.clone(), f, grad.clone());
            }
        };
        let s: Vec<T> = cand.iter().zip(&gamma).map(|(&a, &b)| a - b).collect();
        let y: Vec<T> = g_new.iter().zip(&grad).map(|(&a, &b)| a - b).collect();
        let eta = norm1(&s) / nf;
        let sy = dot(&s, &y);
        step = if sy < T::zero() {
            (dot(&s, &s) / -sy).max(T::of(MIN_STEP)).min(T::of(MAX_STEP))
        } else {
            (t * T::of(2.0)).min(T::of(MAX_STEP))
        };
        gamma = cand;
        f = f_new;
        grad = g_new;
        objective.push(f);
        eta_trace.push(eta);
        if let Some(p) = path.as_mut() {
            p.push(gamma.clone());
        }
        if eta < eps {
            converged = true;
            break;
        }
    }
    Ok(DetectionResult {
        gamma_hat: gamma,
        iterations,
        eta_trace,
        converged,
        path,
    })
}

/// Same as [`infinite_adc_detect`] but also returns the objective after each
/// iteration (first entry is the starting value).
pub fn infinite_adc_detect_traced<T: Real>(
    ybar: &[T],
    model: &DetectionModel<T>,
    config: &NsgdConfig,
    init: Option<&[T]>,
) -> Result<(DetectionResult<T>, Vec<T>)> {
    let mut cfg = config.clone();
    cfg.record_path = true;
    let res = infinite_adc_detect(ybar, model, &cfg, init)?;
    let mut objective = Vec::with_capacity(res.iterations + 1);
    let start = match init {
        Some(g) => g.iter().map(|v| v.max(T::zero())).collect(),
        None => vec![T::zero(); model.devices()],
    };
    objective.push(model.log_density(ybar, &start)?);
    for g in res.path.as_ref().expect("recorded") {
        objective.push(model.log_density(ybar, g)?);
    }
    let res = if config.record_path {
        res
    } else {
        DetectionResult { path: None, ..res }
    };
    Ok((res, objective))
}
