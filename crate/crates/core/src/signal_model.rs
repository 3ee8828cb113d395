//! Preambles, the complex-to-real expansion, the stacked channel covariance
//! and the covariance of the real received vector.
//!
//! Real layout contract: a complex `L x M` observation `Y` becomes the real
//! vector `ȳ = [ŷ_1; …; ŷ_M]` with `ŷ_m = [Re(y_m); Im(y_m)]`, so antenna `m`
//! occupies entries `2Lm .. 2L(m+1)`.

use num_complex::Complex;
use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;

/// Dense complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> CMatrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex::new(T::zero(), T::zero()); rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex<T>) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<Complex<T>>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} entries for a {rows}x{cols} complex matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |r, c| {
            if r == c {
                Complex::new(T::one(), T::zero())
            } else {
                Complex::new(T::zero(), T::zero())
            }
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Complex<T> {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: Complex<T>) {
        self.data[r * self.cols + c] = v;
    }

    pub fn as_slice(&self) -> &[Complex<T>] {
        &self.data
    }

    pub fn frobenius_norm(&self) -> T {
        self.data.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt()
    }
}

/// Complex `L x N` preamble matrix with entries `(±1 ± i)/√2`.
#[derive(Debug, Clone, PartialEq)]
pub struct PreambleMatrix<T> {
    entries: CMatrix<T>,
}

impl<T: Real> PreambleMatrix<T> {
    pub fn generate<R: Rng + ?Sized>(len: usize, devices: usize, rng: &mut R) -> Result<Self> {
        if len == 0 {
            return Err(invalid("L", "preamble length must be at least 1"));
        }
        if devices == 0 {
            return Err(invalid("N", "device count must be at least 1"));
        }
        let a = T::of(std::f64::consts::FRAC_1_SQRT_2);
        let entries = CMatrix::from_fn(len, devices, |_, _| {
            let re = if rng.random::<bool>() { a } else { -a };
            let im = if rng.random::<bool>() { a } else { -a };
            Complex::new(re, im)
        });
        Ok(Self { entries })
    }

    pub fn from_entries(entries: CMatrix<T>) -> Result<Self> {
        if entries.rows() == 0 || entries.cols() == 0 {
            return Err(Error::Dimension("empty preamble matrix".into()));
        }
        Ok(Self { entries })
    }

    /// Preamble length `L`.
    pub fn len(&self) -> usize {
        self.entries.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.rows() == 0
    }

    pub fn devices(&self) -> usize {
        self.entries.cols()
    }

    pub fn entry(&self, l: usize, n: usize) -> Complex<T> {
        self.entries.get(l, n)
    }

    pub fn matrix(&self) -> &CMatrix<T> {
        &self.entries
    }

    pub fn real_expansion(&self) -> RealPreamble<T> {
        RealPreamble::new(self)
    }
}

/// The real `2L x 2N` expansion `Ŝ = [[Re S, -Im S], [Im S, Re S]]`.
///
/// The block-diagonal `S̄` with `M` copies of `Ŝ` is never formed; the
/// columns of `Ŝ` are kept contiguous because every product in the detector
/// runs over them.
#[derive(Debug, Clone, PartialEq)]
pub struct RealPreamble<T> {
    len: usize,
    devices: usize,
    /// `Ŝᵀ`: row `j` is column `j` of `Ŝ`.
    columns: Matrix<T>,
    /// `Ŝ` itself, row-major.
    rows: Matrix<T>,
}

impl<T: Real> RealPreamble<T> {
    fn new(s: &PreambleMatrix<T>) -> Self {
        let (l, n) = (s.len(), s.devices());
        let columns = Matrix::from_fn(2 * n, 2 * l, |j, r| {
            let (dev, imag_col) = (j % n, j >= n);
            let (row, imag_row) = (r % l, r >= l);
            let z = s.entry(row, dev);
            match (imag_row, imag_col) {
                (false, false) => z.re,
                (false, true) => -z.im,
                (true, false) => z.im,
                (true, true) => z.re,
            }
        });
        let rows = columns.transpose();
        Self {
            len: l,
            devices: n,
            columns,
            rows,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn devices(&self) -> usize {
        self.devices
    }

    /// Rows of `Ŝ`, i.e. `2L`.
    pub fn real_rows(&self) -> usize {
        2 * self.len
    }

    /// Column `j` of `Ŝ`, `j < 2N`.
    #[inline]
    pub fn column(&self, j: usize) -> &[T] {
        self.columns.row(j)
    }

    /// `Ŝᵀ` as a `2N x 2L` matrix.
    pub fn transposed(&self) -> &Matrix<T> {
        &self.columns
    }

    pub fn to_matrix(&self) -> Matrix<T> {
        self.rows.clone()
    }

    /// `Ŝ` as a `2L x 2N` row-major matrix.
    pub fn rows(&self) -> &Matrix<T> {
        &self.rows
    }
}

/// Binary activity indicator `α`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActivityPattern {
    alpha: Vec<bool>,
}

impl ActivityPattern {
    pub fn new(alpha: Vec<bool>) -> Self {
        Self { alpha }
    }

    pub fn devices(&self) -> usize {
        self.alpha.len()
    }

    pub fn active_count(&self) -> usize {
        self.alpha.iter().filter(|&&a| a).count()
    }

    pub fn is_active(&self, n: usize) -> bool {
        self.alpha[n]
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.alpha
    }

    pub fn active_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.alpha
            .iter()
            .enumerate()
            .filter_map(|(i, &a)| a.then_some(i))
    }
}

/// Nonnegative per-device received power `γ_n = α_n β`.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaVector<T> {
    values: Vec<T>,
}

impl<T: Real> GammaVector<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !(*v >= T::zero()) || !v.is_finite()) {
            return Err(invalid("gamma", format!("entry {i} is {}", values[i])));
        }
        Ok(Self { values })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            values: vec![T::zero(); n],
        }
    }

    pub fn from_pattern(pattern: &ActivityPattern, beta: T) -> Self {
        Self {
            values: pattern
                .as_slice()
                .iter()
                .map(|&a| if a { beta } else { T::zero() })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<T> {
        self.values
    }

    /// Diagonal of `γ̂ = diag{γ, γ}`.
    pub fn block_expansion(&self) -> Vec<T> {
        self.values.iter().chain(self.values.iter()).copied().collect()
    }

    /// Diagonal of `γ̄`, `M` copies of `γ̂`.
    pub fn stacked_expansion(&self, antennas: usize) -> Vec<T> {
        let block = self.block_expansion();
        (0..antennas).flat_map(|_| block.iter().copied()).collect()
    }
}

/// Real received vector `ȳ` of length `2LM` in antenna-major layout.
#[derive(Debug, Clone, PartialEq)]
pub struct RealReceivedSignal<T> {
    len: usize,
    antennas: usize,
    data: Vec<T>,
}

impl<T: Real> RealReceivedSignal<T> {
    pub fn from_vec(len: usize, antennas: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != 2 * len * antennas {
            return Err(Error::Dimension(format!(
                "received vector of length {} for L={len}, M={antennas}",
                data.len()
            )));
        }
        Ok(Self {
            len,
            antennas,
            data,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    /// `ŷ_m`, the `2L` real entries of antenna `m`.
    pub fn antenna(&self, m: usize) -> &[T] {
        let d = 2 * self.len;
        &self.data[m * d..(m + 1) * d]
    }
}

/// Stacks a complex `L x M` matrix into `ȳ`.
pub fn real_expand_received<T: Real>(y: &CMatrix<T>) -> RealReceivedSignal<T> {
    let (l, m) = (y.rows(), y.cols());
    let mut data = Vec::with_capacity(2 * l * m);
    for a in 0..m {
        data.extend((0..l).map(|r| y.get(r, a).re));
        data.extend((0..l).map(|r| y.get(r, a).im));
    }
    RealReceivedSignal {
        len: l,
        antennas: m,
        data,
    }
}

/// Stacks the channel matrix `H` (`N x M`, row `n` is `h_nᵀ`) into
/// `h̄ = [ĥ_1; …; ĥ_M]` with `ĥ_m = [Re(h^col_m); Im(h^col_m)]`.
pub fn real_expand_channels<T: Real>(h: &CMatrix<T>) -> Vec<T> {
    real_expand_received(h).into_vec()
}

/// `S̄ γ̄^{1/2} h̄ + z̄`, evaluated block by block.
pub fn stacked_model_signal<T: Real>(
    s_hat: &RealPreamble<T>,
    gamma: &GammaVector<T>,
    h_bar: &[T],
    z_bar: &[T],
) -> Result<Vec<T>> {
    let (d, p) = (s_hat.real_rows(), 2 * s_hat.devices());
    if gamma.len() != s_hat.devices() {
        return Err(Error::Dimension("gamma length differs from N".into()));
    }
    if !h_bar.len().is_multiple_of(p) {
        return Err(Error::Dimension("h̄ length is not a multiple of 2N".into()));
    }
    let m = h_bar.len() / p;
    if z_bar.len() != d * m {
        return Err(Error::Dimension("z̄ length differs from 2LM".into()));
    }
    let root: Vec<T> = gamma.block_expansion().into_iter().map(|g| g.sqrt()).collect();
    let mut out = z_bar.to_vec();
    for a in 0..m {
        let hb = &h_bar[a * p..(a + 1) * p];
        let ob = &mut out[a * d..(a + 1) * d];
        for j in 0..p {
            let w = root[j] * hb[j];
            if w == T::zero() {
                continue;
            }
            for (o, &s) in ob.iter_mut().zip(s_hat.column(j)) {
                *o = *o + s * w;
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
enum CovarianceBlocks<T> {
    Identity,
    /// `(2M)^2` blocks, each holding `N` diagonal entries.
    Blocks(Vec<T>),
}

/// Real channel covariance `C = E[h̄ h̄ᵀ]`, a `2M x 2M` grid of diagonal
/// `N x N` blocks.
///
/// Block index `2k + 0` is the real part of antenna `k`, `2k + 1` the
/// imaginary part.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedCovariance<T> {
    antennas: usize,
    devices: usize,
    blocks: CovarianceBlocks<T>,
}

impl<T: Real> StackedCovariance<T> {
    /// i.i.d. Rayleigh fading, `C_n = I` for every device.
    pub fn iid(antennas: usize, devices: usize) -> Self {
        Self {
            antennas,
            devices,
            blocks: CovarianceBlocks::Identity,
        }
    }

    /// Builds `C` from the per-device complex covariances `C_n`.
    ///
    /// Entry `n` of block `(a, b)` is `½ C̄_n` at the matching position, where
    /// `C̄_n = [[Re C_n, -Im C_n], [Im C_n, Re C_n]]`.
    pub fn from_device_covariances(per_device: &[CMatrix<T>]) -> Result<Self> {
        let devices = per_device.len();
        if devices == 0 {
            return Err(invalid("perDeviceCov", "no devices"));
        }
        let m = per_device[0].rows();
        let tol = T::of(1e-9);
        for (n, c) in per_device.iter().enumerate() {
            if c.rows() != m || c.cols() != m {
                return Err(Error::Dimension(format!(
                    "device {n} covariance is {}x{}, expected {m}x{m}",
                    c.rows(),
                    c.cols()
                )));
            }
            for i in 0..m {
                let d = c.get(i, i);
                if (d.re - T::one()).abs() > tol || d.im.abs() > tol {
                    return Err(Error::InvalidCovariance {
                        device: n,
                        reason: format!("diagonal entry {i} is {d}, expected 1"),
                    });
                }
                for j in 0..i {
                    if (c.get(i, j) - c.get(j, i).conj()).norm() > tol {
                        return Err(Error::InvalidCovariance {
                            device: n,
                            reason: format!("not Hermitian at ({i}, {j})"),
                        });
                    }
                }
            }
        }
        let all_identity = per_device.iter().all(|c| {
            (0..m).all(|i| (0..m).all(|j| i == j || c.get(i, j).norm() <= tol))
        });
        if all_identity {
            return Ok(Self::iid(m, devices));
        }
        let half = T::half();
        let side = 2 * m;
        let mut blocks = vec![T::zero(); side * side * devices];
        for (n, c) in per_device.iter().enumerate() {
            for k in 0..m {
                for kb in 0..m {
                    let z = c.get(k, kb);
                    let vals = [
                        (2 * k, 2 * kb, half * z.re),
                        (2 * k, 2 * kb + 1, -half * z.im),
                        (2 * k + 1, 2 * kb, half * z.im),
                        (2 * k + 1, 2 * kb + 1, half * z.re),
                    ];
                    for (a, b, v) in vals {
                        blocks[(a * side + b) * devices + n] = v;
                    }
                }
            }
        }
        Ok(Self {
            antennas: m,
            devices,
            blocks: CovarianceBlocks::Blocks(blocks),
        })
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    pub fn devices(&self) -> usize {
        self.devices
    }

    pub fn is_iid(&self) -> bool {
        matches!(self.blocks, CovarianceBlocks::Identity)
    }

    /// Diagonal entry `n` of block `C_{a,b}` (0-based block indices).
    #[inline]
    pub fn entry(&self, a: usize, b: usize, n: usize) -> T {
        match &self.blocks {
            CovarianceBlocks::Identity => {
                if a == b {
                    T::half()
                } else {
                    T::zero()
                }
            }
            CovarianceBlocks::Blocks(v) => v[(a * 2 * self.antennas + b) * self.devices + n],
        }
    }

    /// Dense `2NM x 2NM` matrix; for oracles only.
    pub fn to_dense(&self) -> Matrix<T> {
        let n = self.devices;
        let side = 2 * self.antennas;
        let mut out = Matrix::zeros(side * n, side * n);
        for a in 0..side {
            for b in 0..side {
                for d in 0..n {
                    out[(a * n + d, b * n + d)] = self.entry(a, b, d);
                }
            }
        }
        out
    }
}

/// Covariance `Σ` of `ȳ`.
#[derive(Debug, Clone, PartialEq)]
pub enum ReceivedCovariance<T> {
    /// i.i.d. channels: `Σ = diag{B, …, B}` with `M` identical `2L x 2L` blocks.
    BlockDiagonal { block: Matrix<T>, antennas: usize },
    Dense(Matrix<T>),
}

impl<T: Real> ReceivedCovariance<T> {
    pub fn dim(&self) -> usize {
        match self {
            Self::BlockDiagonal { block, antennas } => block.rows() * antennas,
            Self::Dense(m) => m.rows(),
        }
    }

    pub fn is_block_diagonal(&self) -> bool {
        matches!(self, Self::BlockDiagonal { .. })
    }

    pub fn to_dense(&self) -> Matrix<T> {
        match self {
            Self::Dense(m) => m.clone(),
            Self::BlockDiagonal { block, antennas } => {
                let d = block.rows();
                let mut out = Matrix::zeros(d * antennas, d * antennas);
                for a in 0..*antennas {
                    for r in 0..d {
                        for c in 0..d {
                            out[(a * d + r, a * d + c)] = block[(r, c)];
                        }
                    }
                }
                out
            }
        }
    }

    pub fn diagonal(&self) -> Vec<T> {
        match self {
            Self::Dense(m) => m.diagonal(),
            Self::BlockDiagonal { block, antennas } => {
                let d = block.diagonal();
                (0..*antennas).flat_map(|_| d.iter().copied()).collect()
            }
        }
    }
}

/// The repeated `2L x 2L` block `½ Ŝ γ̂ Ŝᵀ + (σ²/2) I` of the i.i.d. case.
pub fn iid_covariance_block<T: Real>(s_hat: &RealPreamble<T>, gamma: &[T], sigma2: T) -> Matrix<T> {
    // The block is [[A, Bᵀ], [B, A]] with A + iB = ½ S diag(γ) Sᴴ.
    let l = s_hat.len();
    let n = s_hat.devices();
    let rows = s_hat.rows();
    let re = |r: usize| &rows.row(r)[..n];
    let im = |r: usize| &rows.row(r + l)[..n];
    let half: Vec<T> = gamma.iter().map(|&g| T::half() * g).collect();
    let scale = |v: &[T]| -> Vec<T> { v.iter().zip(&half).map(|(&a, &w)| a * w).collect() };
    let re_w: Vec<Vec<T>> = (0..l).map(|r| scale(re(r))).collect();
    let im_w: Vec<Vec<T>> = (0..l).map(|r| scale(im(r))).collect();
    let mut out = Matrix::zeros(2 * l, 2 * l);
    for r in 0..l {
        for c in 0..l {
            let b = crate::linalg::dot(&im_w[r], re(c)) - crate::linalg::dot(&re_w[r], im(c));
            out[(r + l, c)] = b;
            out[(c, r + l)] = b;
            if c <= r {
                let a = crate::linalg::dot(&re_w[r], re(c)) + crate::linalg::dot(&im_w[r], im(c));
                out[(r, c)] = a;
                out[(c, r)] = a;
                out[(r + l, c + l)] = a;
                out[(c + l, r + l)] = a;
            }
        }
    }
    out.add_diagonal(T::half() * sigma2);
    out
}

/// Dense `Σ` for a correlated stacked covariance.
///
/// Block `(m, m̄)` is `Σ_n γ_n Σ_{a,b} c^n_{(m,a),(m̄,b)} ŝ_{n+aN} ŝ_{n+bN}ᵀ`.
pub fn correlated_covariance<T: Real>(
    s_hat: &RealPreamble<T>,
    cov: &StackedCovariance<T>,
    gamma: &[T],
    sigma2: T,
) -> Matrix<T> {
    let d = s_hat.real_rows();
    let n = s_hat.devices();
    let m = cov.antennas();
    let mut out = Matrix::zeros(d * m, d * m);
    for (dev, &g) in gamma.iter().enumerate() {
        if g == T::zero() {
            continue;
        }
        for ma in 0..m {
            for mb in 0..m {
                for a in 0..2 {
                    for b in 0..2 {
                        let w = g * cov.entry(2 * ma + a, 2 * mb + b, dev);
                        if w == T::zero() {
                            continue;
                        }
                        let sa = s_hat.column(dev + a * n);
                        let sb = s_hat.column(dev + b * n);
                        for r in 0..d {
                            let wr = w * sa[r];
                            let row = out.row_mut(ma * d + r);
                            for c in 0..d {
                                row[mb * d + c] = row[mb * d + c] + wr * sb[c];
                            }
                        }
                    }
                }
            }
        }
    }
    out.add_diagonal(T::half() * sigma2);
    out
}

/// `Σ = S̄ C γ̄ S̄ᵀ + (σ²/2) I`, block structured.
pub fn received_covariance<T: Real>(
    s_hat: &RealPreamble<T>,
    cov: &StackedCovariance<T>,
    gamma: &GammaVector<T>,
    sigma2: T,
) -> Result<ReceivedCovariance<T>> {
    if !(sigma2 > T::zero()) {
        return Err(invalid("sigma2", format!("must be positive, got {sigma2}")));
    }
    if gamma.len() != s_hat.devices() || cov.devices() != s_hat.devices() {
        return Err(Error::Dimension(format!(
            "gamma has {} entries, preamble {} devices, covariance {} devices",
            gamma.len(),
            s_hat.devices(),
            cov.devices()
        )));
    }
    Ok(if cov.is_iid() {
        ReceivedCovariance::BlockDiagonal {
            block: iid_covariance_block(s_hat, gamma.as_slice(), sigma2),
            antennas: cov.antennas(),
        }
    } else {
        ReceivedCovariance::Dense(correlated_covariance(s_hat, cov, gamma.as_slice(), sigma2))
    })
}

/// Per-dimension received power `λ = Kβ/2 + σ²/2`.
pub fn theoretical_power<T: Real>(k: T, beta: T, sigma2: T) -> T {
    T::half() * (k * beta + sigma2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const H: f64 = std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn preamble_alphabet_and_unit_modulus() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = PreambleMatrix::<f64>::generate(2, 3, &mut rng).unwrap();
        for l in 0..2 {
            for n in 0..3 {
                let z = s.entry(l, n);
                assert!((z.re.abs() - H).abs() < 1e-15 && (z.im.abs() - H).abs() < 1e-15);
                assert!((z.norm_sqr() - 1.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn preamble_signs_are_balanced() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s = PreambleMatrix::<f64>::generate(13, 100, &mut rng).unwrap();
        let pos = s.matrix().as_slice().iter().filter(|z| z.re > 0.0).count();
        let frac = pos as f64 / 1300.0;
        assert!((0.45..=0.55).contains(&frac), "{frac}");
    }

    #[test]
    fn preamble_rejects_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(PreambleMatrix::<f64>::generate(0, 3, &mut rng).is_err());
        assert!(PreambleMatrix::<f64>::generate(3, 0, &mut rng).is_err());
    }

    #[test]
    fn real_expansion_single_entry() {
        let e = CMatrix::from_row_major(1, 1, vec![Complex::new(H, H)]).unwrap();
        let s = PreambleMatrix::from_entries(e).unwrap().real_expansion().to_matrix();
        assert_eq!(s.rows(), 2);
        assert_eq!(s.cols(), 2);
        assert_eq!(s.as_slice(), &[H, -H, H, H]);
    }

    #[test]
    fn real_expansion_column_norms() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = PreambleMatrix::<f64>::generate(7, 9, &mut rng).unwrap().real_expansion();
        for j in 0..18 {
            let c = s.column(j);
            let sq: f64 = c.iter().map(|v| v * v).sum();
            assert!((sq - 7.0).abs() < 1e-12);
        }
    }

    #[test]
    fn received_expansion_layout() {
        let y = CMatrix::from_row_major(1, 1, vec![Complex::new(1.5, -2.0)]).unwrap();
        assert_eq!(real_expand_received(&y).as_slice(), &[1.5, -2.0]);

        let y = CMatrix::from_fn(3, 2, |r, c| Complex::new((r + 10 * c) as f64, 0.0));
        let ybar = real_expand_received(&y);
        assert_eq!(ybar.antenna(0), &[0.0, 1.0, 2.0, 0.0, 0.0, 0.0]);
        assert_eq!(ybar.antenna(1), &[10.0, 11.0, 12.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn iid_stacked_covariance_structure() {
        let c = StackedCovariance::<f64>::from_device_covariances(&vec![CMatrix::identity(3); 4])
            .unwrap();
        assert!(c.is_iid());
        for a in 0..6 {
            for b in 0..6 {
                for n in 0..4 {
                    let want = if a == b { 0.5 } else { 0.0 };
                    assert_eq!(c.entry(a, b, n), want);
                }
            }
        }
    }

    #[test]
    fn rejects_bad_device_covariance() {
        let mut c = CMatrix::<f64>::identity(2);
        c.set(0, 0, Complex::new(2.0, 0.0));
        assert!(matches!(
            StackedCovariance::from_device_covariances(&[c]),
            Err(Error::InvalidCovariance { device: 0, .. })
        ));
        let mut c = CMatrix::<f64>::identity(2);
        c.set(0, 1, Complex::new(0.3, 0.1));
        c.set(1, 0, Complex::new(0.3, 0.1));
        assert!(matches!(
            StackedCovariance::from_device_covariances(&[c]),
            Err(Error::InvalidCovariance { .. })
        ));
    }

    #[test]
    fn zero_gamma_gives_noise_covariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = PreambleMatrix::<f64>::generate(3, 4, &mut rng).unwrap().real_expansion();
        let cov = StackedCovariance::iid(2, 4);
        let sig = received_covariance(&s, &cov, &GammaVector::zeros(4), 3.0).unwrap();
        let dense = sig.to_dense();
        let mut want = Matrix::identity(12);
        want.add_diagonal(0.5);
        assert!(dense.frobenius_distance(&want) < 1e-15);
    }

    #[test]
    fn received_covariance_rejects_bad_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = PreambleMatrix::<f64>::generate(3, 4, &mut rng).unwrap().real_expansion();
        let cov = StackedCovariance::iid(2, 4);
        assert!(received_covariance(&s, &cov, &GammaVector::zeros(4), 0.0).is_err());
        assert!(received_covariance(&s, &cov, &GammaVector::zeros(3), 1.0).is_err());
    }

    #[test]
    fn theoretical_power_values() {
        assert_eq!(theoretical_power(10.0, 1.0, 1.0), 5.5);
        assert_eq!(theoretical_power(0.0, 123.0, 1.0), 0.5);
        assert_eq!(theoretical_power(100.0, 1.0, 1.0), 50.5);
    }

    #[test]
    fn gamma_rejects_negative() {
        assert!(GammaVector::new(vec![0.0, -1e-3]).is_err());
        let g = GammaVector::new(vec![1.0, 0.0]).unwrap();
        assert_eq!(g.block_expansion(), vec![1.0, 0.0, 1.0, 0.0]);
        assert_eq!(g.stacked_expansion(2).len(), 8);
    }
}
