#![allow(clippy::needless_range_loop)]

mod common;

use common::*;
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use qadc_activity::channel::{
    draw_activity, synthesize_received, ChannelGenerator, ChannelModel, ExponentialCovarianceSpec,
};
use qadc_activity::detector::*;
use qadc_activity::quantizer::{quantize, QuantizerCodebook, UniformQuantizer};
use qadc_activity::signal_model::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn build(
    l: usize,
    n: usize,
    m: usize,
    c: Option<Complex64>,
    sigma2: f64,
    rng: &mut ChaCha8Rng,
) -> (PreambleMatrix<f64>, DetectionModel<f64>, Vec<DMatrix<Complex64>>) {
    let s = PreambleMatrix::generate(l, n, rng).unwrap();
    let (cov, dense) = match c {
        None => (StackedCovariance::iid(m, n), vec![DMatrix::identity(m, m); n]),
        Some(c) => (
            StackedCovariance::from_device_covariances(&vec![ExponentialCovarianceSpec::new(c, m).unwrap().matrix(); n])
                .unwrap(),
            vec![exponential_covariance(c, m); n],
        ),
    };
    let model = DetectionModel::new(s.real_expansion(), cov, sigma2).unwrap();
    (s, model, dense)
}

fn random_vec(len: usize, scale: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(-scale..scale)).collect()
}

#[test]
fn log_density_matches_dense_gaussian() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for i in 0..40 {
        let (l, n, m) = (rng.random_range(1..5), rng.random_range(1..7), rng.random_range(1..5));
        let c = (i % 2 == 1).then(|| Complex64::new(0.5, 0.2));
        let sigma2 = rng.random_range(0.5..2.0);
        let (s, model, dense) = build(l, n, m, c, sigma2, &mut rng);
        let gamma: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..2.0)).collect();
        let x = random_vec(model.observation_dim(), 3.0, &mut rng);
        let want = gaussian_log_density(&dense_covariance(&s, &gamma, &dense, sigma2), &x);
        let got = model.log_density(&x, &gamma).unwrap();
        assert!((got - want).abs() < 1e-10 * want.abs().max(1.0), "instance {i}: {got} vs {want}");

        // ḡ adds -log p(x) = dim · log Δ for the cell-uniform density.
        let delta = 0.3;
        let cb = QuantizerCodebook::Uniform(UniformQuantizer::new(3, delta).unwrap());
        let g = model.log_g(&x, &gamma, &cb).unwrap();
        let dim = model.observation_dim() as f64;
        assert!((g.exp() * delta.powf(-dim) - want.exp()).abs() <= 1e-9 * want.exp());
    }
}

#[test]
fn gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0f64;
    for i in 0..100 {
        let (l, n, m) = (rng.random_range(1..5), rng.random_range(1..8), rng.random_range(1..5));
        let c = (i % 3 == 0).then(|| Complex64::new(0.6, -0.3));
        let (_, model, _) = build(l, n, m, c, 1.0, &mut rng);
        let gamma: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..2.0)).collect();
        let x = random_vec(model.observation_dim(), 2.0, &mut rng);
        let grad = model.grad_log_g(&x, &gamma).unwrap();
        let mut fd = vec![0.0; n];
        for j in 0..n {
            let h = 1e-5 * gamma[j].max(1.0);
            let (mut up, mut down) = (gamma.clone(), gamma.clone());
            up[j] += h;
            down[j] -= h;
            fd[j] = (model.log_density(&x, &up).unwrap() - model.log_density(&x, &down).unwrap()) / (2.0 * h);
        }
        let num: f64 = grad.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let den: f64 = fd.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
        worst = worst.max(num / den);
    }
    assert!(worst < 1e-5, "{worst}");
}

#[test]
fn zero_gamma_gradient_has_closed_form() {
    // Σ = (σ²/2) I, so ∂ḡ/∂γ_n = ¼ Σ_m (|s_nᴴ y_m|² (2/σ²)² - 2L (2/σ²)) for |s_l| = 1.
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (l, n, m, sigma2) = (4, 5, 3, 2.0);
    let (s, model, _) = build(l, n, m, None, sigma2, &mut rng);
    let x = random_vec(model.observation_dim(), 2.0, &mut rng);
    let grad = model.grad_log_g(&x, &vec![0.0; n]).unwrap();
    for dev in 0..n {
        let mut want = 0.0;
        for ant in 0..m {
            let y: Complex64 = (0..l)
                .map(|r| s.entry(r, dev).conj() * Complex64::new(x[2 * l * ant + r], x[2 * l * ant + l + r]))
                .sum();
            want += 0.25 * (y.norm_sqr() * (2.0 / sigma2).powi(2) - 2.0 * l as f64 * 2.0 / sigma2);
        }
        assert!((grad[dev] - want).abs() < 1e-10, "{} vs {want}", grad[dev]);
    }
}

struct Instance {
    model: DetectionModel<f64>,
    y_q: Vec<f64>,
    ybar: Vec<f64>,
    cb: QuantizerCodebook<f64>,
    truth: Vec<bool>,
}

fn instance(n: usize, k: usize, l: usize, m: usize, beta: f64, bits: u32, rng: &mut ChaCha8Rng) -> Instance {
    let sigma2 = 1.0;
    let (s, model, _) = build(l, n, m, None, sigma2, rng);
    let pattern = draw_activity(n, k, rng).unwrap();
    let h = ChannelGenerator::<f64>::new(ChannelModel::Iid, m).unwrap().draw(n, rng);
    let (_, ybar) = synthesize_received(&s, &pattern, beta, &h, sigma2, rng).unwrap();
    let ybar = ybar.into_vec();
    let cb = QuantizerCodebook::design(k as f64, beta, sigma2, 2.0, Some(bits)).unwrap();
    Instance {
        y_q: quantize(&ybar, &cb),
        model,
        ybar,
        cb,
        truth: pattern.as_slice().to_vec(),
    }
}

fn argmax(v: &[f64]) -> usize {
    (0..v.len()).fold(0, |best, i| if v[i] > v[best] { i } else { best })
}

#[test]
fn single_active_device_is_recovered() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let cfg = NsgdConfig::with_epsilon(1e-4);
    let beta = 10.0;
    let (mut nsgd_ok, mut base_ok) = (0, 0);
    let trials = 200;
    for _ in 0..trials {
        let inst = instance(4, 1, 4, 8, beta, 4, &mut rng);
        let q = nsgd_detect(&inst.y_q, &inst.cb, &inst.model, &cfg, &mut rng).unwrap();
        nsgd_ok += usize::from(inst.truth[argmax(&q.gamma_hat)]);
        let b = infinite_adc_detect(&inst.ybar, &inst.model, &cfg, None).unwrap();
        base_ok += usize::from(inst.truth[argmax(&b.gamma_hat)]);
    }
    assert!(nsgd_ok * 100 >= 95 * trials, "nsgd {nsgd_ok}/{trials}");
    assert!(base_ok >= nsgd_ok, "baseline {base_ok} vs nsgd {nsgd_ok}");
}

#[test]
fn baseline_objective_is_monotone() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..10 {
        let inst = instance(30, 5, 8, 8, 0.5, 4, &mut rng);
        let cfg = NsgdConfig::with_epsilon(1e-6);
        let (res, obj) = infinite_adc_detect_traced(&inst.ybar, &inst.model, &cfg, None).unwrap();
        assert!(res.converged);
        assert_eq!(obj.len(), res.iterations + 1);
        assert!(obj.windows(2).all(|w| w[1] >= w[0] - 1e-9 * w[0].abs()));
    }
}

#[test]
fn baseline_started_at_the_maximizer_stops_at_once() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let inst = instance(20, 3, 8, 8, 0.5, 4, &mut rng);
    let cfg = NsgdConfig::with_epsilon(1e-9);
    let opt = infinite_adc_detect(&inst.ybar, &inst.model, &cfg, None).unwrap();
    let again = infinite_adc_detect(&inst.ybar, &inst.model, &NsgdConfig::with_epsilon(1e-6), Some(&opt.gamma_hat))
        .unwrap();
    assert_eq!(again.iterations, 1);
    assert!(again.converged);
}

#[test]
fn tighter_tolerance_takes_longer() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let (mut loose, mut tight) = (0, 0);
    for _ in 0..5 {
        let inst = instance(40, 4, 8, 8, 0.5, 4, &mut rng);
        let mut seed = ChaCha8Rng::seed_from_u64(rng.random());
        let a = nsgd_detect(&inst.y_q, &inst.cb, &inst.model, &NsgdConfig::with_epsilon(1e-3), &mut seed.clone())
            .unwrap();
        let b = nsgd_detect(&inst.y_q, &inst.cb, &inst.model, &NsgdConfig::with_epsilon(1e-4), &mut seed).unwrap();
        loose += a.iterations;
        tight += b.iterations;
    }
    assert!(loose < tight, "{loose} vs {tight}");
}

#[test]
fn nsgd_terminates_at_moderate_scale() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let cfg = NsgdConfig::with_epsilon(1e-3);
    let beta = 10f64.powf(-0.61);
    let trials = 20;
    let mut converged = 0;
    for _ in 0..trials {
        let inst = instance(100, 10, 13, 32, beta, 4, &mut rng);
        let r = nsgd_detect(&inst.y_q, &inst.cb, &inst.model, &cfg, &mut rng).unwrap();
        converged += usize::from(r.converged);
        assert!(r.iterations <= cfg.max_iterations);
        assert_eq!(r.eta_trace.len(), r.iterations);
    }
    assert_eq!(converged, trials);
}

#[test]
fn recorded_path_ends_at_the_estimate() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let inst = instance(20, 2, 6, 4, 0.5, 3, &mut rng);
    let mut cfg = NsgdConfig::with_epsilon(1e-3);
    cfg.record_path = true;
    let r = nsgd_detect(&inst.y_q, &inst.cb, &inst.model, &cfg, &mut rng).unwrap();
    let delta = r.delta_trace(None).unwrap();
    assert_eq!(delta.len(), r.iterations);
    assert_eq!(*delta.last().unwrap(), 0.0);
}

#[test]
fn rejects_mismatched_input() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let inst = instance(6, 1, 3, 2, 0.5, 2, &mut rng);
    let cfg = NsgdConfig::with_epsilon(1e-3);
    assert!(nsgd_detect(&inst.y_q[1..], &inst.cb, &inst.model, &cfg, &mut rng).is_err());
    assert!(inst.model.log_density(&inst.ybar, &[0.1; 5]).is_err());
    assert!(inst.model.log_density(&inst.ybar, &[-0.1, 0.0, 0.0, 0.0, 0.0, 0.0]).is_err());
    assert!(NsgdConfig::with_epsilon(0.0).validate().is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn estimates_are_feasible(seed in any::<u64>(), bits in 1u32..5, k in 0usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = instance(8, k, 4, 2, 1.0, bits, &mut rng);
        let mut cfg = NsgdConfig::with_epsilon(1e-2);
        cfg.record_path = true;
        let r = nsgd_detect(&inst.y_q, &inst.cb, &inst.model, &cfg, &mut rng).unwrap();
        prop_assert!(r.path.unwrap().iter().flatten().all(|g| *g >= 0.0 && g.is_finite()));
        prop_assert!(r.eta_trace.iter().take(r.iterations.saturating_sub(1)).all(|e| *e >= 1e-2));
        let b = infinite_adc_detect(&inst.ybar, &inst.model, &cfg, None).unwrap();
        prop_assert!(b.gamma_hat.iter().all(|g| *g >= 0.0));
    }

    #[test]
    fn error_rates_match_counts(truth in proptest::collection::vec(any::<bool>(), 1..40), gamma in proptest::collection::vec(0.0f64..1.0, 40), t in 0.0f64..1.0) {
        let g = &gamma[..truth.len()];
        let r = error_rates(&decide_activity(g, t), &truth);
        let k = truth.iter().filter(|a| **a).count();
        let missed = truth.iter().zip(g).filter(|(a, v)| **a && **v <= t).count();
        let fa = truth.iter().zip(g).filter(|(a, v)| !**a && **v > t).count();
        let want_mdp = if k == 0 { 0.0 } else { missed as f64 / k as f64 };
        let want_fap = if k == truth.len() { 0.0 } else { fa as f64 / (truth.len() - k) as f64 };
        prop_assert_eq!(r.mdp, want_mdp);
        prop_assert_eq!(r.fap, want_fap);
    }
}
