//! Numerical validation suites run by the `gradcheck`, `power-check` and
//! `oracle-check` subcommands.

use std::fmt;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::channel::{draw_activity, synthesize_received, ChannelGenerator, ChannelModel};
use crate::detector::DetectionModel;
use crate::error::Result;
use crate::estimator::KModel;
use crate::oracle::{brute_force_quantized_likelihood, zero_gamma_cell_probability};
use crate::quantizer::{quantize, sample_uniform_in_cells, QuantizerCodebook, UniformQuantizer};
use crate::signal_model::{theoretical_power, PreambleMatrix, StackedCovariance};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckLine {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    /// `value < bound` when true, `value > bound` otherwise.
    pub upper: bool,
}

impl CheckLine {
    fn below(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self { name: name.into(), value, bound, upper: true }
    }

    fn above(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self { name: name.into(), value, bound, upper: false }
    }

    pub fn passed(&self) -> bool {
        if self.upper {
            self.value < self.bound
        } else {
            self.value > self.bound
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CheckReport {
    pub lines: Vec<CheckLine>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.lines.iter().all(CheckLine::passed)
    }
}

impl fmt::Display for CheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for l in &self.lines {
            writeln!(
                f,
                "{} {}: {:.3e} ({} {:.3e})",
                if l.passed() { "PASS" } else { "FAIL" },
                l.name,
                l.value,
                if l.upper { "<" } else { ">" },
                l.bound
            )?;
        }
        Ok(())
    }
}

fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let norm = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    diff / norm.max(1e-300)
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

fn normal_vec(len: usize, scale: f64, rng: &mut impl Rng) -> Vec<f64> {
    (0..len).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Worst relative error of the analytic gradients against central
/// differences over random small instances.
pub fn gradcheck(instances: usize, seed: u64) -> Result<CheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_gamma = 0.0f64;
    let mut worst_k = 0.0f64;
    for i in 0..instances {
        let n = rng.random_range(2..=6);
        let l = rng.random_range(1..=4);
        let m = rng.random_range(1..=3);
        let s = PreambleMatrix::<f64>::generate(l, n, &mut rng)?.real_expansion();
        let cov = if i % 2 == 0 {
            StackedCovariance::iid(m, n)
        } else {
            let c = crate::channel::ExponentialCovarianceSpec::new(Complex64::new(0.5, 0.2), m)?.matrix();
            StackedCovariance::from_device_covariances(&vec![c; n])?
        };
        let model = DetectionModel::new(s, cov, 1.0)?;
        let gamma: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.5)).collect();
        let x = normal_vec(model.observation_dim(), 1.2, &mut rng);
        let grad = model.grad_log_g(&x, &gamma)?;
        let mut fd = vec![0.0; n];
        for j in 0..n {
            let h = 1e-5 * gamma[j].max(1.0);
            let mut gp = gamma.clone();
            let mut gm = gamma.clone();
            gp[j] += h;
            gm[j] -= h;
            fd[j] = (model.log_density(&x, &gp)? - model.log_density(&x, &gm)?) / (2.0 * h);
        }
        worst_gamma = worst_gamma.max(relative_error(&grad, &fd));

        let symbols: Vec<Complex64> = (0..rng.random_range(1..=3))
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let km = KModel::new(&symbols, rng.random_range(1..=4), 0.25, 1.0)?;
        let k = rng.random_range(0.5..20.0);
        let xk = normal_vec(km.observation_dim(), 1.0, &mut rng);
        let g = km.grad_log_g_k(&xk, k)?;
        let h = 1e-5 * k;
        let fd = (km.evaluate(&xk, k + h, 0.0)?.0 - km.evaluate(&xk, k - h, 0.0)?.0) / (2.0 * h);
        worst_k = worst_k.max((g - fd).abs() / fd.abs().max(1e-300));
    }
    Ok(CheckReport {
        lines: vec![
            CheckLine::below("grad_log_g vs central differences, max relative error", worst_gamma, 1e-5),
            CheckLine::below("grad_log_g_K vs central differences, max relative error", worst_k, 1e-6),
        ],
    })
}

/// Empirical per-dimension power `E[ȳ_ℓ²]` over `draws` independent draws.
#[allow(clippy::too_many_arguments)]
pub fn empirical_power(
    n: usize,
    k: usize,
    beta: f64,
    sigma2: f64,
    l: usize,
    m: usize,
    channel: ChannelModel,
    draws: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let generator = ChannelGenerator::<f64>::new(channel, m)?;
    let mut acc = vec![0.0; 2 * l * m];
    for _ in 0..draws {
        let s = PreambleMatrix::generate(l, n, &mut rng)?;
        let pattern = draw_activity(n, k, &mut rng)?;
        let h = generator.draw(n, &mut rng);
        let (_, ybar) = synthesize_received(&s, &pattern, beta, &h, sigma2, &mut rng)?;
        for (a, v) in acc.iter_mut().zip(ybar.as_slice()) {
            *a += v * v;
        }
    }
    acc.iter_mut().for_each(|a| *a /= draws as f64);
    Ok(acc)
}

/// Per-dimension power against `(Kβ + σ²)/2` for i.i.d. and correlated
/// channels.
pub fn power_check(draws: usize, seed: u64) -> Result<CheckReport> {
    let (n, k, beta, sigma2, l, m) = (100, 10, 1.0, 1.0, 4, 4);
    let want = theoretical_power(k as f64, beta, sigma2);
    let mut lines = Vec::new();
    for (name, channel) in [
        ("iid", ChannelModel::Iid),
        ("exponential c=0.5", ChannelModel::Exponential { c: Complex64::new(0.5, 0.0) }),
    ] {
        let p = empirical_power(n, k, beta, sigma2, l, m, channel, draws, seed)?;
        let worst = p.iter().map(|v| (v - want).abs() / want).fold(0.0, f64::max);
        lines.push(CheckLine::below(
            format!("{name}: max relative deviation of E[y^2] from {want}"),
            worst,
            0.03,
        ));
    }
    Ok(CheckReport { lines })
}

/// Tiny-dimension comparison of sampled gradients with quadrature, plus the
/// closed-form cell probability at `γ = 0`.
pub fn oracle_check(samples: usize, seed: u64) -> Result<CheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lines = Vec::new();
    for (l, m, grid) in [(1usize, 1usize, 400usize), (1, 2, 40), (2, 1, 40)] {
        let n = 3;
        let s = PreambleMatrix::<f64>::generate(l, n, &mut rng)?.real_expansion();
        let model = DetectionModel::new(s, StackedCovariance::iid(m, n), 1.0)?;
        let gamma: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..1.5)).collect();
        let cb = QuantizerCodebook::Uniform(UniformQuantizer::design(1.0, 1.0, 1.0, 3.0, 2)?);
        let ybar = normal_vec(model.observation_dim(), 1.0, &mut rng);
        let y_q = quantize(&ybar, &cb);
        let mut mean = vec![0.0; n];
        for _ in 0..samples {
            let x = sample_uniform_in_cells(&y_q, &cb, &mut rng);
            for (a, v) in mean.iter_mut().zip(model.grad_log_g(&x, &gamma)?) {
                *a += v / samples as f64;
            }
        }
        let quad = brute_force_quantized_likelihood(&y_q, &cb, &model, &gamma, grid)?;
        lines.push(CheckLine::above(
            format!("2LM={}: cosine(sampled gradient, quadrature gradient)", 2 * l * m),
            cosine(&mean, &quad.mean_log_gradient),
            0.99,
        ));
    }
    let s = PreambleMatrix::<f64>::generate(1, 2, &mut rng)?.real_expansion();
    let model = DetectionModel::new(s, StackedCovariance::iid(1, 2), 1.0)?;
    let cb = QuantizerCodebook::Uniform(UniformQuantizer::new(2, 0.6)?);
    let y_q = quantize(&[0.1, -0.9], &cb);
    let quad = brute_force_quantized_likelihood(&y_q, &cb, &model, &[0.0, 0.0], 800)?;
    let exact = zero_gamma_cell_probability(&y_q, &cb, 1.0)?;
    lines.push(CheckLine::below(
        "quadrature cell probability at gamma=0 vs CDF product, abs error",
        (quad.probability - exact).abs(),
        1e-6,
    ));
    Ok(CheckReport { lines })
}
