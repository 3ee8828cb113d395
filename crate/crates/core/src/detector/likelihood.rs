//! Log-integrand `ḡ(x, γ)` of the quantized likelihood and its gradient.
//!
//! `ḡ = -½ xᵀΣ⁻¹x - ½ log|Σ| - ML log 2π - log p(x)` where `Σ = Σ(γ)` and
//! `p(x)` is the cell-uniform sampling density. With `Σ = R Rᵀ`,
//! `∂ḡ/∂γ_n = ½ uᵀ(∂Σ/∂γ_n)u - ½ tr(Σ⁻¹ ∂Σ/∂γ_n)` with `u = Σ⁻¹x`, and both
//! terms reduce to inner products of the whitened columns `R⁻¹ŝ_j` and the
//! whitened sample `R⁻¹x`. No explicit inverse is formed.

use crate::error::{invalid, Error, Result};
use crate::linalg::{Cholesky, Matrix};
use crate::quantizer::QuantizerCodebook;
use crate::scalar::Real;
use crate::signal_model::{
    correlated_covariance, iid_covariance_block, RealPreamble, StackedCovariance,
};

/// Known quantities of the Phase II observation model.
#[derive(Debug, Clone)]
pub struct DetectionModel<T> {
    s_hat: RealPreamble<T>,
    /// `Ŝ` row-major, `2L x 2N`.
    s_dense: Matrix<T>,
    /// `Re S` and `Im S`, `L x N`.
    s_re: Matrix<T>,
    s_im: Matrix<T>,
    cov: StackedCovariance<T>,
    sigma2: T,
}

/// `ḡ` and, optionally, `∇ḡ`.
#[derive(Debug, Clone)]
pub struct LikelihoodEval<T> {
    pub value: T,
    pub gradient: Option<Vec<T>>,
}

impl<T: Real> DetectionModel<T> {
    pub fn new(s_hat: RealPreamble<T>, cov: StackedCovariance<T>, sigma2: T) -> Result<Self> {
        if !(sigma2 > T::zero()) {
            return Err(invalid("sigma2", format!("must be positive, got {sigma2}")));
        }
        if cov.devices() != s_hat.devices() {
            return Err(Error::Dimension(format!(
                "covariance has {} devices, preamble {}",
                cov.devices(),
                s_hat.devices()
            )));
        }
        let s_dense = s_hat.rows().clone();
        let (l, n) = (s_hat.len(), s_hat.devices());
        let s_re = Matrix::from_fn(l, n, |r, c| s_dense[(r, c)]);
        let s_im = Matrix::from_fn(l, n, |r, c| s_dense[(r + l, c)]);
        Ok(Self {
            s_hat,
            s_dense,
            s_re,
            s_im,
            cov,
            sigma2,
        })
    }

    pub fn devices(&self) -> usize {
        self.s_hat.devices()
    }

    pub fn antennas(&self) -> usize {
        self.cov.antennas()
    }

    pub fn preamble_len(&self) -> usize {
        self.s_hat.len()
    }

    /// Length `2LM` of `ȳ`.
    pub fn observation_dim(&self) -> usize {
        2 * self.s_hat.len() * self.cov.antennas()
    }

    pub fn sigma2(&self) -> T {
        self.sigma2
    }

    pub fn preamble(&self) -> &RealPreamble<T> {
        &self.s_hat
    }

    pub fn covariance(&self) -> &StackedCovariance<T> {
        &self.cov
    }

    fn check(&self, x: &[T], gamma: &[T]) -> Result<()> {
        if x.len() != self.observation_dim() {
            return Err(Error::Dimension(format!(
                "sample has {} entries, expected {}",
                x.len(),
                self.observation_dim()
            )));
        }
        if gamma.len() != self.devices() {
            return Err(Error::Dimension(format!(
                "gamma has {} entries, expected {}",
                gamma.len(),
                self.devices()
            )));
        }
        Ok(())
    }

    /// `ḡ(x, γ)` for samples drawn under `cb`.
    pub fn log_g(&self, x: &[T], gamma: &[T], cb: &QuantizerCodebook<T>) -> Result<T> {
        Ok(self
            .evaluate(x, gamma, cb.log_density_per_dim(), false)?
            .value)
    }

    /// `∇_γ ḡ(x, γ)`; independent of the sampling density.
    pub fn grad_log_g(&self, x: &[T], gamma: &[T]) -> Result<Vec<T>> {
        Ok(self
            .evaluate(x, gamma, T::zero(), true)?
            .gradient
            .expect("gradient requested"))
    }

    /// Exact Gaussian log-density `log p(x | γ)`.
    pub fn log_density(&self, x: &[T], gamma: &[T]) -> Result<T> {
        Ok(self.evaluate(x, gamma, T::zero(), false)?.value)
    }

    /// Shared factorization for value and gradient. `log_px_per_dim` is the
    /// per-dimension log sampling density subtracted from the Gaussian term.
    pub fn evaluate(
        &self,
        x: &[T],
        gamma: &[T],
        log_px_per_dim: T,
        with_gradient: bool,
    ) -> Result<LikelihoodEval<T>> {
        self.check(x, gamma)?;
        if let Some(i) = gamma.iter().position(|g| !(*g >= T::zero())) {
            return Err(invalid("gamma", format!("entry {i} is {}", gamma[i])));
        }
        let dims = T::of_usize(self.observation_dim());
        let ml = T::of_usize(self.preamble_len() * self.antennas());
        let constant = -ml * T::of(2.0 * std::f64::consts::PI).ln() - dims * log_px_per_dim;
        if self.cov.is_iid() {
            self.evaluate_iid(x, gamma, constant, with_gradient)
        } else {
            self.evaluate_correlated(x, gamma, constant, with_gradient)
        }
    }

    fn evaluate_iid(
        &self,
        x: &[T],
        gamma: &[T],
        constant: T,
        with_gradient: bool,
    ) -> Result<LikelihoodEval<T>> {
        let d = self.s_hat.real_rows();
        let n = self.devices();
        let m = self.antennas();
        let block = iid_covariance_block(&self.s_hat, gamma, self.sigma2);
        let chol = Cholesky::factor(&block)?;

        // W = R⁻¹ X, X is 2L x M with antenna m in column m.
        let mut w = Matrix::from_fn(d, m, |r, a| x[a * d + r]);
        chol.forward_solve_columns(&mut w);
        let quad: T = w.as_slice().iter().map(|v| *v * *v).sum();
        let value = -T::half() * quad - T::half() * T::of_usize(m) * chol.log_det() + constant;
        if !with_gradient {
            return Ok(LikelihoodEval {
                value,
                gradient: None,
            });
        }

        // ∂ḡ/∂γ_n = ¼ (ŝ_nᵀ G ŝ_n + ŝ_{n+N}ᵀ G ŝ_{n+N}) with
        // G = Σ⁻¹ X Xᵀ Σ⁻¹ - M Σ⁻¹ = R⁻ᵀ (W Wᵀ - M I) R⁻¹.
        let li = chol.inverse_lower();
        let mut v = Matrix::<T>::zeros(d, d);
        for r in 0..d {
            for c in 0..=r {
                let val = crate::linalg::dot(w.row(r), w.row(c));
                v[(r, c)] = val;
                v[(c, r)] = val;
            }
        }
        v.add_diagonal(-T::of_usize(m));
        let lit = li.transpose();
        let g = lit.matmul(&v)?.matmul(&li)?;

        // With ŝ_n = [a; b] and ŝ_{n+N} = [-b; a], the pair sum is
        // aᵀHa + bᵀHb + 2aᵀKb for H = G₁₁ + G₂₂ and K = G₁₂ - G₂₁.
        let l = d / 2;
        let h = Matrix::from_fn(l, l, |r, c| g[(r, c)] + g[(r + l, c + l)]);
        let k = Matrix::from_fn(l, l, |r, c| g[(r, c + l)] - g[(r + l, c)]);
        let ha = h.matmul(&self.s_re)?;
        let hb = h.matmul(&self.s_im)?;
        let kb = k.matmul(&self.s_im)?;
        let two = T::of(2.0);
        let mut total = vec![T::zero(); n];
        for r in 0..l {
            let (a, b) = (self.s_re.row(r), self.s_im.row(r));
            for (dev, t) in total.iter_mut().enumerate() {
                *t = *t + a[dev] * ha[(r, dev)] + b[dev] * hb[(r, dev)] + two * a[dev] * kb[(r, dev)];
            }
        }
        let quarter = T::of(0.25);
        let grad = total.into_iter().map(|t| quarter * t).collect();
        Ok(LikelihoodEval {
            value,
            gradient: Some(grad),
        })
    }

    fn evaluate_correlated(
        &self,
        x: &[T],
        gamma: &[T],
        constant: T,
        with_gradient: bool,
    ) -> Result<LikelihoodEval<T>> {
        let d = self.s_hat.real_rows();
        let n = self.devices();
        let m = self.antennas();
        let dim = d * m;
        let sigma = correlated_covariance(&self.s_hat, &self.cov, gamma, self.sigma2);
        let chol = Cholesky::factor(&sigma)?;
        let mut w = x.to_vec();
        chol.forward_solve(&mut w);
        let quad: T = w.iter().map(|v| *v * *v).sum();
        let value = -T::half() * quad - T::half() * chol.log_det() + constant;
        if !with_gradient {
            return Ok(LikelihoodEval {
                value,
                gradient: None,
            });
        }

        // A = R⁻¹ S̄, column (ant, j) at index ant * 2N + j.
        let p = 2 * n;
        let mut a = Matrix::zeros(dim, p * m);
        for ant in 0..m {
            for r in 0..d {
                let src = self.s_dense.row(r);
                let dst = &mut a.row_mut(ant * d + r)[ant * p..(ant + 1) * p];
                dst.copy_from_slice(src);
            }
        }
        chol.forward_solve_columns(&mut a);
        let at = a.transpose();
        let proj: Vec<T> = (0..p * m).map(|c| crate::linalg::dot(at.row(c), &w)).collect();

        let side = 2 * m;
        let half = T::half();
        let mut grad = vec![T::zero(); n];
        let mut cols: Vec<&[T]> = Vec::with_capacity(side);
        for (dev, g) in grad.iter_mut().enumerate() {
            cols.clear();
            for ant in 0..m {
                for part in 0..2 {
                    cols.push(at.row(ant * p + dev + part * n));
                }
            }
            let mut q = T::zero();
            let mut tr = T::zero();
            for u in 0..side {
                let (mu, pu) = (u / 2, u % 2);
                let ku = mu * p + dev + pu * n;
                for v in 0..side {
                    let (mv, pv) = (v / 2, v % 2);
                    let c = self.cov.entry(2 * mu + pu, 2 * mv + pv, dev);
                    if c == T::zero() {
                        continue;
                    }
                    let kv = mv * p + dev + pv * n;
                    q = q + c * proj[ku] * proj[kv];
                    tr = tr + c * crate::linalg::dot(cols[u], cols[v]);
                }
            }
            *g = half * q - half * tr;
        }
        Ok(LikelihoodEval {
            value,
            gradient: Some(grad),
        })
    }
}
