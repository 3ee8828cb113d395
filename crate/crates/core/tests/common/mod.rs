//! Dense reference constructions shared by the integration tests. These
//! work from the complex model directly and never call the structured
//! code paths they check.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use qadc_activity::linalg::Matrix;
use qadc_activity::signal_model::{ActivityPattern, CMatrix, PreambleMatrix};

pub fn to_dense(m: &Matrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.rows(), m.cols(), |r, c| m.row(r)[c])
}

pub fn complex_dense(m: &CMatrix<f64>) -> DMatrix<Complex64> {
    DMatrix::from_fn(m.rows(), m.cols(), |r, c| m.get(r, c))
}

/// `[C]_{ij} = c^{i-j}` below the diagonal, Hermitian above.
pub fn exponential_covariance(c: Complex64, m: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(m, m, |i, j| {
        if i >= j {
            c.powu((i - j) as u32)
        } else {
            c.powu((j - i) as u32).conj()
        }
    })
}

/// Antenna-major stacking `[Re y_1; Im y_1; Re y_2; ...]` of the columns.
pub fn stack(y: &DMatrix<Complex64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * y.len());
    for col in y.column_iter() {
        out.extend(col.iter().map(|v| v.re));
        out.extend(col.iter().map(|v| v.im));
    }
    out
}

/// Dense `S̄ γ̄^{1/2} h̄ + z̄` with `S̄ = diag(Ŝ, ..., Ŝ)`.
pub fn dense_real_model(
    s: &PreambleMatrix<f64>,
    gamma: &[f64],
    h: &CMatrix<f64>,
    z: &CMatrix<f64>,
) -> Vec<f64> {
    let (l, n, m) = (s.len(), s.devices(), h.cols());
    let s_hat = DMatrix::from_fn(2 * l, 2 * n, |r, c| {
        let v = s.entry(r % l, c % n);
        match (r < l, c < n) {
            (true, true) | (false, false) => v.re,
            (true, false) => -v.im,
            (false, true) => v.im,
        }
    });
    let mut s_bar = DMatrix::zeros(2 * l * m, 2 * n * m);
    for a in 0..m {
        s_bar
            .view_mut((2 * l * a, 2 * n * a), (2 * l, 2 * n))
            .copy_from(&s_hat);
    }
    let root: Vec<f64> = (0..2 * n * m).map(|i| gamma[i % n].sqrt()).collect();
    let h_bar = DVector::from_vec(stack(&complex_dense(h)));
    let z_bar = DVector::from_vec(stack(&complex_dense(z)));
    let scaled = DVector::from_iterator(h_bar.len(), h_bar.iter().zip(&root).map(|(a, b)| a * b));
    (s_bar * scaled + z_bar).iter().copied().collect()
}

/// Covariance of the stacked observation from the complex second moments
/// `E[y_a y_bᴴ] = Σ_n γ_n [C_n]_{ab} s_n s_nᴴ + σ² δ_{ab} I`, using
/// `Cov([Re v; Im v]) = ½ [[Re R, -Im R], [Im R, Re R]]` for circular `v`.
pub fn dense_covariance(
    s: &PreambleMatrix<f64>,
    gamma: &[f64],
    covs: &[DMatrix<Complex64>],
    sigma2: f64,
) -> DMatrix<f64> {
    let (l, n) = (s.len(), s.devices());
    let m = covs[0].nrows();
    let sm = complex_dense(s.matrix());
    let mut out = DMatrix::zeros(2 * l * m, 2 * l * m);
    for a in 0..m {
        for b in 0..m {
            let mut r = DMatrix::<Complex64>::zeros(l, l);
            for dev in 0..n {
                let col = sm.column(dev);
                r += col * col.adjoint() * (covs[dev][(a, b)] * gamma[dev]);
            }
            if a == b {
                for i in 0..l {
                    r[(i, i)] += sigma2;
                }
            }
            for i in 0..l {
                for j in 0..l {
                    let v = r[(i, j)] * 0.5;
                    let (ro, co) = (2 * l * a, 2 * l * b);
                    out[(ro + i, co + j)] = v.re;
                    out[(ro + i, co + l + j)] = -v.im;
                    out[(ro + l + i, co + j)] = v.im;
                    out[(ro + l + i, co + l + j)] = v.re;
                }
            }
        }
    }
    out
}

pub fn gaussian_log_density(sigma: &DMatrix<f64>, x: &[f64]) -> f64 {
    let d = x.len() as f64;
    let chol = sigma.clone().cholesky().expect("positive definite");
    let xv = DVector::from_column_slice(x);
    let w = chol.solve(&xv);
    let log_det = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    -0.5 * xv.dot(&w) - 0.5 * log_det - 0.5 * d * (2.0 * std::f64::consts::PI).ln()
}

pub fn gamma_of(pattern: &ActivityPattern, beta: f64) -> Vec<f64> {
    pattern.as_slice().iter().map(|&a| if a { beta } else { 0.0 }).collect()
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb)
}

pub fn normal_cdf(x: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    Normal::new(0.0, 1.0).expect("unit normal").cdf(x)
}
