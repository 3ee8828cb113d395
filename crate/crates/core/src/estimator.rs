//! Phase I estimation of the number of active devices.
//!
//! Every active device sends the same symbols, so per antenna the stacked
//! observation is Gaussian with `Σ_m(K) = ½Kβ(ŝ₁ŝ₁ᵀ + ŝ₂ŝ₂ᵀ) + ½σ²I` where
//! `ŝ₁ = [Re s; Im s]` and `ŝ₂ = [-Im s; Re s]`.

use num_complex::Complex;
use rand::Rng;

use crate::detector::{run_nsgd, NsgdConfig, StepSchedule, StochasticAscent};
use crate::error::{invalid, Error, Result};
use crate::linalg::{Cholesky, Matrix};
use crate::quantizer::{quantize, sample_uniform_in_cells_into, QuantizerCodebook};
use crate::scalar::Real;
use crate::signal_model::RealReceivedSignal;

/// Default Phase I symbol `(1 + i)/√2`.
pub fn default_symbol<T: Real>() -> Complex<T> {
    let a = T::of(std::f64::consts::FRAC_1_SQRT_2);
    Complex::new(a, a)
}

/// Scalar likelihood model over `K` for `L_N` symbols and `M` antennas.
#[derive(Debug, Clone)]
pub struct KModel<T> {
    s1: Vec<T>,
    s2: Vec<T>,
    antennas: usize,
    beta: T,
    sigma2: T,
}

impl<T: Real> KModel<T> {
    pub fn new(symbols: &[Complex<T>], antennas: usize, beta: T, sigma2: T) -> Result<Self> {
        if symbols.is_empty() {
            return Err(invalid("L_N", "at least one symbol is required"));
        }
        if antennas == 0 {
            return Err(invalid("M", "must be positive"));
        }
        if !(beta > T::zero()) || !(sigma2 > T::zero()) {
            return Err(invalid("beta/sigma2", "must be positive"));
        }
        let s1 = symbols.iter().map(|s| s.re).chain(symbols.iter().map(|s| s.im)).collect();
        let s2 = symbols.iter().map(|s| -s.im).chain(symbols.iter().map(|s| s.re)).collect();
        Ok(Self {
            s1,
            s2,
            antennas,
            beta,
            sigma2,
        })
    }

    pub fn symbols(&self) -> usize {
        self.s1.len() / 2
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    /// Length of the stacked observation, `2 L_N M`, antenna-major.
    pub fn observation_dim(&self) -> usize {
        self.s1.len() * self.antennas
    }

    /// `Σ_m(K)`, the same for every antenna.
    pub fn sigma_m(&self, k: T) -> Matrix<T> {
        let d = self.s1.len();
        let scale = T::half() * k * self.beta;
        let mut m = Matrix::from_fn(d, d, |r, c| scale * (self.s1[r] * self.s1[c] + self.s2[r] * self.s2[c]));
        m.add_diagonal(T::half() * self.sigma2);
        m
    }

    fn check(&self, x: &[T], k: T) -> Result<()> {
        if x.len() != self.observation_dim() {
            return Err(Error::Dimension(format!(
                "sample has {} entries, expected {}",
                x.len(),
                self.observation_dim()
            )));
        }
        if !(k >= T::zero()) {
            return Err(invalid("K", format!("must be nonnegative, got {k}")));
        }
        Ok(())
    }

    /// Value and derivative of `ḡ(K)`; `log_px_per_dim` as in the detector.
    pub fn evaluate(&self, x: &[T], k: T, log_px_per_dim: T) -> Result<(T, T)> {
        self.check(x, k)?;
        let d = self.s1.len();
        let chol = Cholesky::factor(&self.sigma_m(k))?;
        let mut a1 = self.s1.clone();
        let mut a2 = self.s2.clone();
        chol.forward_solve(&mut a1);
        chol.forward_solve(&mut a2);
        let tr: T = a1.iter().chain(&a2).map(|v| *v * *v).sum();
        let mut quad = T::zero();
        let mut proj = T::zero();
        let mut w = vec![T::zero(); d];
        for xm in x.chunks_exact(d) {
            w.copy_from_slice(xm);
            chol.forward_solve(&mut w);
            quad = quad + w.iter().map(|v| *v * *v).sum();
            let p1 = crate::linalg::dot(&a1, &w);
            let p2 = crate::linalg::dot(&a2, &w);
            proj = proj + p1 * p1 + p2 * p2;
        }
        let mt = T::of_usize(self.antennas);
        let dims = T::of_usize(x.len());
        let value = -T::half() * quad - T::half() * mt * chol.log_det()
            - T::of_usize(self.symbols() * self.antennas) * T::of(2.0 * std::f64::consts::PI).ln()
            - dims * log_px_per_dim;
        let hb = T::half() * self.beta;
        let grad = T::half() * hb * proj - T::half() * mt * hb * tr;
        Ok((value, grad))
    }

    pub fn log_g_k(&self, x: &[T], k: T, cb: &QuantizerCodebook<T>) -> Result<T> {
        Ok(self.evaluate(x, k, cb.log_density_per_dim())?.0)
    }

    pub fn grad_log_g_k(&self, x: &[T], k: T) -> Result<T> {
        Ok(self.evaluate(x, k, T::zero())?.1)
    }
}

/// `Σ_m(K)` for a single symbol `s`.
pub fn sigma_m_of_k<T: Real>(k: T, symbol: Complex<T>, beta: T, sigma2: T) -> Result<Matrix<T>> {
    Ok(KModel::new(&[symbol], 1, beta, sigma2)?.sigma_m(k))
}

/// Rearranges per-symbol Phase I signals (`[Re y_m, Im y_m]` per antenna)
/// into the antenna-major layout `[Re y_m(1..L_N); Im y_m(1..L_N)]`.
pub fn stack_symbols<T: Real>(signals: &[RealReceivedSignal<T>]) -> Result<Vec<T>> {
    let ln = signals.len();
    let m = signals.first().map(|s| s.antennas()).unwrap_or(0);
    if signals.iter().any(|s| s.antennas() != m || s.len() != 1) {
        return Err(Error::Dimension("phase I signals must be single-symbol with equal M".into()));
    }
    let mut out = vec![T::zero(); 2 * ln * m];
    for (i, sig) in signals.iter().enumerate() {
        for a in 0..m {
            let v = sig.antenna(a);
            out[a * 2 * ln + i] = v[0];
            out[a * 2 * ln + ln + i] = v[1];
        }
    }
    Ok(out)
}

/// Settings shared by OEA and PEA.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig {
    /// Total number of devices; `K̂` is kept in `[0, N]`.
    pub devices: usize,
    pub k0: f64,
    pub beta: f64,
    pub sigma2: f64,
    pub rho: f64,
    /// `None` is infinite resolution.
    pub bits: Option<u32>,
    pub inner: NsgdConfig,
    /// PEA: reuse all symbols received so far instead of only the newest.
    pub accumulate: bool,
}

impl EstimatorConfig {
    pub fn new(devices: usize, k0: f64, beta: f64, sigma2: f64, rho: f64, bits: Option<u32>) -> Self {
        Self {
            devices,
            k0,
            beta,
            sigma2,
            rho,
            bits,
            inner: NsgdConfig {
                epsilon: 1e-3,
                schedule: StepSchedule::InverseSqrt,
                max_iterations: 500,
                record_path: false,
            },
            accumulate: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.devices == 0 {
            return Err(invalid("N", "must be positive"));
        }
        if !(self.k0 >= 0.0 && self.k0 <= self.devices as f64) {
            return Err(invalid("K0", format!("must lie in [0, {}], got {}", self.devices, self.k0)));
        }
        if !(self.rho > 0.0) {
            return Err(invalid("rho", "must be positive"));
        }
        self.inner.validate()
    }

    fn codebook<T: Real>(&self, k_hat: f64) -> Result<QuantizerCodebook<T>> {
        QuantizerCodebook::design(T::of(k_hat), T::of(self.beta), T::of(self.sigma2), T::of(self.rho), self.bits)
    }
}

/// Scalar problem `max_K E[g(x, K)]` on `[0, N]`.
pub struct KProblem<'a, T> {
    model: &'a KModel<T>,
    y_q: &'a [T],
    cb: &'a QuantizerCodebook<T>,
    upper: T,
    sample: Vec<T>,
}

impl<'a, T: Real> KProblem<'a, T> {
    pub fn new(model: &'a KModel<T>, y_q: &'a [T], cb: &'a QuantizerCodebook<T>, upper: T) -> Result<Self> {
        if y_q.len() != model.observation_dim() {
            return Err(Error::Dimension(format!(
                "quantized vector has {} entries, expected {}",
                y_q.len(),
                model.observation_dim()
            )));
        }
        Ok(Self {
            model,
            y_q,
            cb,
            upper,
            sample: vec![T::zero(); y_q.len()],
        })
    }
}

impl<T: Real> StochasticAscent<T> for KProblem<'_, T> {
    fn sampled_gradient<R: Rng + ?Sized>(&mut self, params: &[T], rng: &mut R) -> Result<Vec<T>> {
        sample_uniform_in_cells_into(self.y_q, self.cb, rng, &mut self.sample);
        Ok(vec![self.model.grad_log_g_k(&self.sample, params[0])?])
    }

    fn project(&self, params: &mut [T]) {
        params[0] = params[0].max(T::zero()).min(self.upper);
    }
}

fn solve_k<T: Real, R: Rng + ?Sized>(
    model: &KModel<T>,
    y_q: &[T],
    cb: &QuantizerCodebook<T>,
    start: f64,
    cfg: &EstimatorConfig,
    rng: &mut R,
) -> Result<(f64, usize)> {
    let mut problem = KProblem::new(model, y_q, cb, T::of_usize(cfg.devices))?;
    let out = run_nsgd(&mut problem, vec![T::of(start)], &cfg.inner, rng)?;
    Ok((out.params[0].f64(), out.iterations))
}

/// One-shot estimate: a single codebook from `K̂⁽⁰⁾` for all symbols.
pub fn oea_estimate<T: Real, R: Rng + ?Sized>(
    signals: &[RealReceivedSignal<T>],
    symbols: &[Complex<T>],
    cfg: &EstimatorConfig,
    rng: &mut R,
) -> Result<f64> {
    cfg.validate()?;
    if signals.len() != symbols.len() {
        return Err(Error::Dimension(format!("{} signals for {} symbols", signals.len(), symbols.len())));
    }
    let x = stack_symbols(signals)?;
    let model = KModel::new(symbols, signals[0].antennas(), T::of(cfg.beta), T::of(cfg.sigma2))?;
    let cb = cfg.codebook::<T>(cfg.k0)?;
    let y_q = quantize(&x, &cb);
    Ok(solve_k(&model, &y_q, &cb, cfg.k0, cfg, rng)?.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimationTrace {
    /// `K̂⁽⁰⁾, …, K̂⁽ᴸᴺ⁾`.
    pub k_hats: Vec<f64>,
    /// Quantizer step used at each step.
    pub deltas: Vec<f64>,
    pub per_step_iterations: Vec<usize>,
}

impl EstimationTrace {
    pub fn final_estimate(&self) -> f64 {
        *self.k_hats.last().expect("trace starts with K0")
    }
}

/// Progressive estimate. `next_symbol(i, rng)` returns the analog signal
/// of symbol `i` (zero-based) and is called once per step.
pub fn pea_estimate<T: Real, R: Rng + ?Sized>(
    steps: usize,
    symbol: Complex<T>,
    antennas: usize,
    cfg: &EstimatorConfig,
    mut next_symbol: impl FnMut(usize, &mut R) -> RealReceivedSignal<T>,
    rng: &mut R,
) -> Result<EstimationTrace> {
    cfg.validate()?;
    let mut trace = EstimationTrace {
        k_hats: vec![cfg.k0],
        deltas: Vec::with_capacity(steps),
        per_step_iterations: Vec::with_capacity(steps),
    };
    let beta = T::of(cfg.beta);
    let sigma2 = T::of(cfg.sigma2);
    let single = KModel::new(&[symbol], antennas, beta, sigma2)?;
    let mut history: Vec<(Vec<T>, QuantizerCodebook<T>)> = Vec::new();
    let mut k_hat = cfg.k0;
    for i in 0..steps {
        let cb = cfg.codebook::<T>(k_hat)?;
        let sig = next_symbol(i, rng);
        if sig.antennas() != antennas || sig.len() != 1 {
            return Err(Error::Dimension("phase I symbol has the wrong shape".into()));
        }
        trace.deltas.push(match &cb {
            QuantizerCodebook::Uniform(q) => q.delta().f64(),
            QuantizerCodebook::PassThrough => 0.0,
        });
        let y_q = quantize(sig.as_slice(), &cb);
        let (next, iters) = if cfg.accumulate {
            history.push((y_q, cb));
            let symbols = vec![symbol; history.len()];
            let model = KModel::new(&symbols, antennas, beta, sigma2)?;
            let mut problem = AccumulatedKProblem::new(&model, &history, T::of_usize(cfg.devices));
            let out = run_nsgd(&mut problem, vec![T::of(k_hat)], &cfg.inner, rng)?;
            (out.params[0].f64(), out.iterations)
        } else {
            solve_k(&single, &y_q, &cb, k_hat, cfg, rng)?
        };
        k_hat = next;
        trace.k_hats.push(k_hat);
        trace.per_step_iterations.push(iters);
    }
    Ok(trace)
}

/// All symbols received so far, each sampled from the cells of the codebook
/// it was quantized with.
struct AccumulatedKProblem<'a, T> {
    model: &'a KModel<T>,
    history: &'a [(Vec<T>, QuantizerCodebook<T>)],
    upper: T,
    sample: Vec<T>,
    scratch: Vec<T>,
}

impl<'a, T: Real> AccumulatedKProblem<'a, T> {
    fn new(model: &'a KModel<T>, history: &'a [(Vec<T>, QuantizerCodebook<T>)], upper: T) -> Self {
        let len = history.first().map_or(0, |h| h.0.len());
        Self {
            model,
            history,
            upper,
            sample: vec![T::zero(); model.observation_dim()],
            scratch: vec![T::zero(); len],
        }
    }
}

impl<T: Real> StochasticAscent<T> for AccumulatedKProblem<'_, T> {
    fn sampled_gradient<R: Rng + ?Sized>(&mut self, params: &[T], rng: &mut R) -> Result<Vec<T>> {
        let ln = self.history.len();
        for (i, (y_q, cb)) in self.history.iter().enumerate() {
            sample_uniform_in_cells_into(y_q, cb, rng, &mut self.scratch);
            for (a, pair) in self.scratch.chunks_exact(2).enumerate() {
                self.sample[a * 2 * ln + i] = pair[0];
                self.sample[a * 2 * ln + ln + i] = pair[1];
            }
        }
        Ok(vec![self.model.grad_log_g_k(&self.sample, params[0])?])
    }

    fn project(&self, params: &mut [T]) {
        params[0] = params[0].max(T::zero()).min(self.upper);
    }
}

/// Deterministic maximizer of `ḡ(K)` at the cell midpoints (the quantized
/// values themselves), by golden-section search on `[0, upper]`. Used for
/// regression checks only.
pub fn golden_section_k<T: Real>(model: &KModel<T>, y_q: &[T], upper: f64, tol: f64) -> Result<f64> {
    let f = |k: f64| -> Result<f64> { Ok(model.evaluate(y_q, T::of(k), T::zero())?.0.f64()) };
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (0.0, upper);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while b - a > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d)?;
        }
    }
    Ok((a + b) / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sigma_m_examples() {
        let s = default_symbol::<f64>();
        let z = sigma_m_of_k(0.0, s, 0.3, 1.7).unwrap();
        assert_eq!(z.as_slice(), &[0.85, 0.0, 0.0, 0.85]);
        let m = sigma_m_of_k(12.0, s, 0.5, 1.0).unwrap();
        let want = (12.0 * 0.5 + 1.0) / 2.0;
        assert!((m[(0, 0)] - want).abs() < 1e-14 && (m[(1, 1)] - want).abs() < 1e-14);
        assert!(m[(0, 1)].abs() < 1e-14 && m[(1, 0)].abs() < 1e-14);
    }

    #[test]
    fn single_symbol_closed_form() {
        let (beta, sigma2, m) = (0.4, 1.3, 3);
        let model = KModel::new(&[default_symbol::<f64>()], m, beta, sigma2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x: Vec<f64> = (0..2 * m).map(|_| rng.random_range(-3.0..3.0)).collect();
        let nx: f64 = x.iter().map(|v| v * v).sum();
        for k in [0.0, 0.5, 7.0, 90.0] {
            let p = k * beta + sigma2;
            let (v, g) = model.evaluate(&x, k, 0.0).unwrap();
            let want = -nx / p - m as f64 * (std::f64::consts::PI * p).ln();
            let dwant = beta * nx / (p * p) - m as f64 * beta / p;
            assert!((v - want).abs() < 1e-12, "{v} {want}");
            assert!((g - dwant).abs() < 1e-12, "{g} {dwant}");
        }
    }

    #[test]
    fn derivative_negative_for_large_k() {
        let model = KModel::new(&[default_symbol::<f64>()], 4, 1.0, 1.0).unwrap();
        assert!(model.grad_log_g_k(&[1.0; 8], 1e6).unwrap() < 0.0);
    }

    #[test]
    fn stack_layout() {
        let a = RealReceivedSignal::from_vec(1, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let b = RealReceivedSignal::from_vec(1, 2, vec![5.0, 6.0, 7.0, 8.0]).unwrap();
        assert_eq!(stack_symbols(&[a, b]).unwrap(), vec![1.0, 5.0, 2.0, 6.0, 3.0, 7.0, 4.0, 8.0]);
    }

    #[test]
    fn projection_keeps_k_in_range() {
        let mut cfg = EstimatorConfig::new(10, 10.0, 1.0, 1.0, 2.0, Some(3));
        cfg.inner.max_iterations = 50;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let trace = pea_estimate(
            4,
            default_symbol(),
            2,
            &cfg,
            |_, r: &mut ChaCha8Rng| crate::channel::synthesize_phase1_received(default_symbol(), 10, 1.0, 2, 1.0, r),
            &mut rng,
        )
        .unwrap();
        assert_eq!(trace.k_hats.len(), 5);
        assert!(trace.k_hats.iter().all(|k| (0.0..=10.0).contains(k)));
    }

    #[test]
    fn golden_section_matches_closed_form_optimum() {
        // Single symbol: the maximizer is K = (‖x‖²/M - σ²)/β.
        let (beta, sigma2, m) = (0.5, 1.0, 4);
        let model = KModel::new(&[default_symbol::<f64>()], m, beta, sigma2).unwrap();
        let x = [2.0, -1.5, 0.5, 3.0, -2.5, 1.0, 0.0, 2.0];
        let nx: f64 = x.iter().map(|v| v * v).sum();
        let want = (nx / m as f64 - sigma2) / beta;
        let got = golden_section_k(&model, &x, 100.0, 1e-9).unwrap();
        assert!((got - want).abs() < 1e-6, "{got} {want}");
    }
}
