mod common;

use proptest::prelude::*;
use qadc_activity::quantizer::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Cell index by scanning the thresholds `(q - 2^{B-1}) Δ`, left-closed.
fn scan_index(x: f64, bits: u32, delta: f64) -> usize {
    let cells = 1usize << bits;
    let half = (cells / 2) as f64;
    let mut q = 1;
    for t in 1..cells {
        if x >= (t as f64 - half) * delta {
            q = t + 1;
        }
    }
    q
}

#[test]
fn unbounded_cell_mass_matches_gaussian_tail() {
    // Δ from the design rule puts the extreme thresholds at ±ρ√λ (1 - 2^{1-B}),
    // and the truncated support ±ρ√λ.
    let (k, beta, sigma2, rho, bits) = (10.0, 0.25, 1.0, 2.0, 3);
    let lambda: f64 = (k * beta + sigma2) / 2.0;
    let q = UniformQuantizer::design(k, beta, sigma2, rho, bits).unwrap();
    assert!((q.support_half_width() - rho * lambda.sqrt()).abs() < 1e-12);
    let normal = Normal::new(0.0, lambda.sqrt()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let draws = 1_000_000;
    let (mut unbounded, mut outside) = (0usize, 0usize);
    for _ in 0..draws {
        let x: f64 = normal.sample(&mut rng);
        let idx = q.index(x);
        if idx == 1 || idx == q.cell_count() {
            unbounded += 1;
        }
        if x.abs() >= q.support_half_width() {
            outside += 1;
        }
    }
    let edge = rho * (1.0 - 2f64.powi(1 - bits as i32));
    let want_unbounded = 2.0 * common::normal_cdf(-edge);
    let want_outside = 2.0 * common::normal_cdf(-rho);
    assert!((want_outside - 0.0455).abs() < 1e-4);
    let f = |c: usize| c as f64 / draws as f64;
    assert!((f(unbounded) - want_unbounded).abs() < 0.005, "{} vs {want_unbounded}", f(unbounded));
    assert!((f(outside) - want_outside).abs() < 0.005, "{} vs {want_outside}", f(outside));
}

#[test]
fn single_precision_agrees_with_double() {
    let q64 = UniformQuantizer::<f64>::new(3, 0.5).unwrap();
    let q32 = UniformQuantizer::<f32>::new(3, 0.5).unwrap();
    for i in -40..40 {
        let x = i as f64 * 0.13;
        assert_eq!(q64.index(x), q32.index(x as f32));
        assert_eq!(q64.quantize_scalar(x) as f32, q32.quantize_scalar(x as f32));
    }
}

#[test]
fn cells_tile_the_support() {
    for bits in 1..8 {
        let q = UniformQuantizer::new(bits, 0.37).unwrap();
        let w = q.support_half_width();
        assert_eq!(q.truncated_cell(1).0, -w);
        assert_eq!(q.truncated_cell(q.cell_count()).1, w);
        for c in 1..q.cell_count() {
            assert_eq!(q.truncated_cell(c).1, q.truncated_cell(c + 1).0);
        }
    }
}

#[test]
fn boundary_values_follow_left_closed_rule() {
    let q = UniformQuantizer::new(3, 1.0).unwrap();
    assert_eq!(q.index(1.0 - 4.0), 2);
    assert_eq!(q.index(-1e-300), 4);
    assert_eq!(q.index(0.0), 5);
}

#[test]
fn sampling_is_seeded() {
    let cb = QuantizerCodebook::Uniform(UniformQuantizer::new(2, 1.0).unwrap());
    let y_q = quantize(&[0.3, -2.0, 1.2], &cb);
    let a = sample_uniform_in_cells(&y_q, &cb, &mut ChaCha8Rng::seed_from_u64(4));
    let b = sample_uniform_in_cells(&y_q, &cb, &mut ChaCha8Rng::seed_from_u64(4));
    assert_eq!(a, b);
}

#[test]
fn sample_means_sit_at_cell_midpoints() {
    let q = UniformQuantizer::new(3, 0.8).unwrap();
    let cb = QuantizerCodebook::Uniform(q);
    let y_q: Vec<f64> = (1..=8).map(|c| q.level(c)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let draws = 100_000;
    let mut sums = vec![0.0; y_q.len()];
    for _ in 0..draws {
        for (s, x) in sums.iter_mut().zip(sample_uniform_in_cells(&y_q, &cb, &mut rng)) {
            *s += x;
        }
    }
    for (s, level) in sums.iter().zip(&y_q) {
        assert!((s / draws as f64 - level).abs() < 0.8 / 100.0);
    }
}

proptest! {
    #[test]
    fn index_matches_threshold_scan(bits in 1u32..7, delta in 0.05f64..3.0, x in -200.0f64..200.0) {
        let q = UniformQuantizer::new(bits, delta).unwrap();
        prop_assert_eq!(q.index(x), scan_index(x, bits, delta));
        let (lo, hi) = q.truncated_cell(q.index(x));
        prop_assert!((hi - lo - delta).abs() < 1e-12 * delta.max(1.0) * (1u64 << bits) as f64);
        prop_assert!((q.quantize_scalar(x) - (lo + hi) / 2.0).abs() < 1e-9);
    }

    #[test]
    fn bounded_cells_have_small_error(bits in 1u32..7, delta in 0.05f64..3.0, u in -0.999f64..0.999) {
        let q = UniformQuantizer::new(bits, delta).unwrap();
        let x = u * q.support_half_width();
        prop_assert!((x - q.quantize_scalar(x)).abs() <= delta / 2.0 + 1e-12);
    }

    #[test]
    fn doubling_resolution_halves_step(k in 0.0f64..500.0, beta in 0.01f64..2.0, sigma2 in 0.1f64..3.0, bits in 1u32..12) {
        let a = design_step_size(k, beta, sigma2, 2.0, bits).unwrap();
        let b = design_step_size(k, beta, sigma2, 2.0, bits + 1).unwrap();
        prop_assert_eq!(a, 2.0 * b);
    }

    #[test]
    fn samples_stay_in_their_cells(bits in 1u32..6, delta in 0.1f64..2.0, xs in proptest::collection::vec(-20.0f64..20.0, 1..20), seed in any::<u64>()) {
        let cb = QuantizerCodebook::Uniform(UniformQuantizer::new(bits, delta).unwrap());
        let y_q = quantize(&xs, &cb);
        let s = sample_uniform_in_cells(&y_q, &cb, &mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(quantize(&s, &cb), y_q);
    }

    #[test]
    fn pass_through_is_identity(xs in proptest::collection::vec(-1e6f64..1e6, 0..20)) {
        prop_assert_eq!(quantize(&xs, &QuantizerCodebook::PassThrough), xs);
    }
}
