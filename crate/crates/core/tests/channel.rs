mod common;

use common::exponential_covariance;
use num_complex::Complex64;
use qadc_activity::channel::*;
use qadc_activity::signal_model::{real_expand_received, theoretical_power, ActivityPattern, PreambleMatrix};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn link_budget_gives_expected_snr() {
    let p = link_budget_to_params(&LinkBudget::default()).unwrap();
    assert_eq!(p.sigma2, 1.0);
    assert!((p.snr_db() + 6.1).abs() < 1e-9);
    assert!((p.beta - 10f64.powf(-0.61)).abs() < 1e-12);
}

#[test]
fn full_activity_power_matches_theory() {
    let (l, n, m, beta, sigma2) = (3, 6, 4, 0.8, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let s = PreambleMatrix::<f64>::generate(l, n, &mut rng).unwrap();
    let all = ActivityPattern::new(vec![true; n]);
    let generator = ChannelGenerator::<f64>::new(ChannelModel::Iid, m).unwrap();
    let draws = 50_000;
    let mut acc = vec![0.0; 2 * l * m];
    for _ in 0..draws {
        let h = generator.draw(n, &mut rng);
        let (_, ybar) = synthesize_received(&s, &all, beta, &h, sigma2, &mut rng).unwrap();
        for (a, v) in acc.iter_mut().zip(ybar.as_slice()) {
            *a += v * v / draws as f64;
        }
    }
    let want = theoretical_power(n as f64, beta, sigma2);
    for v in acc {
        assert!((v - want).abs() / want < 0.03, "{v} vs {want}");
    }
}

#[test]
fn phase1_power_matches_theory() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let draws = 2_000;
    let mut acc = vec![0.0; 256];
    for _ in 0..draws {
        let y = synthesize_phase1_received(Complex64::new(1.0, 1.0) / 2f64.sqrt(), 100, 1.0, 128, 1.0, &mut rng);
        for (a, v) in acc.iter_mut().zip(y.as_slice()) {
            *a += v * v;
        }
    }
    // Average over all 256 dimensions: 5.12e5 samples.
    let mean = acc.iter().sum::<f64>() / (256 * draws) as f64;
    assert!((mean - 50.5).abs() / 50.5 < 0.03, "{mean}");
}

#[test]
fn empirical_channel_covariance_matches_model() {
    let c = Complex64::new(0.6, 0.3);
    let m = 4;
    let generator = ChannelGenerator::<f64>::new(ChannelModel::Exponential { c }, m).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let draws = 100_000;
    let mut acc = vec![Complex64::new(0.0, 0.0); m * m];
    for _ in 0..draws {
        let h = generator.draw_vector(&mut rng);
        for i in 0..m {
            for j in 0..m {
                acc[i * m + j] += h[i] * h[j].conj();
            }
        }
    }
    let want = exponential_covariance(c, m);
    for i in 0..m {
        for j in 0..m {
            let got = acc[i * m + j] / draws as f64;
            assert!((got - want[(i, j)]).norm() < 0.02, "({i},{j}) {got} vs {}", want[(i, j)]);
        }
    }
}

fn ks_statistic(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            i += 1;
        } else {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

#[test]
fn identical_preambles_match_phase1_shortcut() {
    // N devices all sending the same symbol against the √K h shortcut.
    let (n, k, m, beta, sigma2) = (30, 7, 3, 0.5, 1.0);
    let symbol = Complex64::new(-1.0, 1.0) / 2f64.sqrt();
    let s = PreambleMatrix::from_entries(qadc_activity::signal_model::CMatrix::from_fn(1, n, |_, _| symbol)).unwrap();
    let generator = ChannelGenerator::<f64>::new(ChannelModel::Iid, m).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let samples = 10_000;
    let (mut full, mut short) = (Vec::with_capacity(samples), Vec::with_capacity(samples));
    for _ in 0..samples {
        let pattern = draw_activity(n, k, &mut rng).unwrap();
        let h = generator.draw(n, &mut rng);
        let (_, ybar) = synthesize_received(&s, &pattern, beta, &h, sigma2, &mut rng).unwrap();
        full.push(ybar.as_slice()[0]);
        let y = synthesize_phase1_received(symbol, k, beta, m, sigma2, &mut rng);
        short.push(y.as_slice()[0]);
    }
    // 1% critical value for equal sample sizes.
    let critical = 1.628 * (2.0 / samples as f64).sqrt();
    let d = ks_statistic(full, short);
    assert!(d < critical, "{d} >= {critical}");
}

#[test]
fn phase1_layout_matches_real_expansion() {
    let g = vec![Complex64::new(0.3, -1.0), Complex64::new(2.0, 0.5)];
    let symbol = Complex64::new(1.0, 1.0) / 2f64.sqrt();
    let mut a = ChaCha8Rng::seed_from_u64(1);
    let mut b = ChaCha8Rng::seed_from_u64(1);
    let y = phase1_symbol(symbol, &g, 0.5, 1.0, &mut a);
    let z = draw_noise::<f64, _>(1, 2, 1.0, &mut b);
    let direct = qadc_activity::signal_model::CMatrix::from_fn(1, 2, |_, c| symbol * g[c] * 0.5f64.sqrt() + z.get(0, c));
    assert_eq!(y.as_slice(), real_expand_received(&direct).as_slice());
}

#[test]
fn aggregate_sums_active_rows() {
    let h = qadc_activity::signal_model::CMatrix::from_fn(3, 2, |r, c| Complex64::new(r as f64, c as f64));
    let g = aggregate_channel(&ActivityPattern::new(vec![true, false, true]), &h);
    assert_eq!(g, vec![Complex64::new(2.0, 0.0), Complex64::new(2.0, 2.0)]);
}

#[test]
fn correlation_above_one_is_rejected() {
    assert!(ExponentialCovarianceSpec::new(Complex64::new(0.9, 0.9), 3).is_err());
    assert!(ChannelGenerator::<f64>::new(ChannelModel::Exponential { c: Complex64::new(1.01, 0.0) }, 2).is_err());
}
