//! Ground-truth synthesis: link budget, activity patterns, correlated
//! Rayleigh channels and noisy received signals for both protocol phases.

use nalgebra::DMatrix;
use num_complex::{Complex, Complex64};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Error, Result};
use crate::scalar::Real;
use crate::signal_model::{
    real_expand_received, ActivityPattern, CMatrix, PreambleMatrix, RealReceivedSignal,
};

/// Uplink link budget in logarithmic units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    pub noise_psd_dbm_hz: f64,
    pub bandwidth_hz: f64,
    pub tx_power_dbm: f64,
    pub distance_km: f64,
    /// Rescale so that `σ² = 1`, keeping the SNR.
    pub normalize: bool,
}

impl Default for LinkBudget {
    fn default() -> Self {
        Self {
            noise_psd_dbm_hz: -169.0,
            bandwidth_hz: 10e6,
            tx_power_dbm: 23.0,
            distance_km: 1.0,
            normalize: true,
        }
    }
}

/// Received power per device and noise power, in mW unless normalized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkParams {
    pub beta: f64,
    pub sigma2: f64,
}

impl LinkParams {
    pub fn snr_db(&self) -> f64 {
        10.0 * (self.beta / self.sigma2).log10()
    }
}

/// Path loss `128.1 + 37.6 log10(d)` dB with `d` in km.
pub fn path_loss_db(distance_km: f64) -> f64 {
    128.1 + 37.6 * distance_km.log10()
}

fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

pub fn link_budget_to_params(lb: &LinkBudget) -> Result<LinkParams> {
    if !(lb.distance_km > 0.0) || !lb.distance_km.is_finite() {
        return Err(invalid("distanceKm", format!("must be positive, got {}", lb.distance_km)));
    }
    if !(lb.bandwidth_hz > 0.0) {
        return Err(invalid("bandwidth", format!("must be positive, got {}", lb.bandwidth_hz)));
    }
    let noise_dbm = lb.noise_psd_dbm_hz + 10.0 * lb.bandwidth_hz.log10();
    let beta_dbm = lb.tx_power_dbm - path_loss_db(lb.distance_km);
    Ok(if lb.normalize {
        LinkParams {
            beta: dbm_to_mw(beta_dbm - noise_dbm),
            sigma2: 1.0,
        }
    } else {
        LinkParams {
            beta: dbm_to_mw(beta_dbm),
            sigma2: dbm_to_mw(noise_dbm),
        }
    })
}

/// Exponential correlation model `[C]_{ij} = c^{i-j}` for `i >= j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentialCovarianceSpec {
    pub c: Complex64,
    pub antennas: usize,
}

impl ExponentialCovarianceSpec {
    pub fn new(c: Complex64, antennas: usize) -> Result<Self> {
        if c.norm() > 1.0 + 1e-12 {
            return Err(invalid("c", format!("|c| = {} exceeds 1", c.norm())));
        }
        if antennas == 0 {
            return Err(invalid("M", "at least one antenna"));
        }
        Ok(Self { c, antennas })
    }

    pub fn matrix<T: Real>(&self) -> CMatrix<T> {
        CMatrix::from_fn(self.antennas, self.antennas, |i, j| {
            let z = if i >= j {
                self.c.powu((i - j) as u32)
            } else {
                self.c.powu((j - i) as u32).conj()
            };
            Complex::new(T::of(z.re), T::of(z.im))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChannelModel {
    Iid,
    Exponential { c: Complex64 },
}

impl ChannelModel {
    pub fn is_iid(&self) -> bool {
        match self {
            Self::Iid => true,
            Self::Exponential { c } => *c == Complex64::new(0.0, 0.0),
        }
    }
}

/// Hermitian PSD square root by eigendecomposition, negative eigenvalues
/// clamped to zero.
pub fn hermitian_sqrt<T: Real>(c: &CMatrix<T>) -> CMatrix<T> {
    let n = c.rows();
    let a = DMatrix::<Complex64>::from_fn(n, n, |i, j| {
        let z = c.get(i, j);
        Complex64::new(z.re.f64(), z.im.f64())
    });
    let eig = a.symmetric_eigen();
    let v = &eig.eigenvectors;
    let roots: Vec<f64> = eig.eigenvalues.iter().map(|&l| l.max(0.0).sqrt()).collect();
    CMatrix::from_fn(n, n, |i, j| {
        let z: Complex64 = (0..n)
            .map(|k| v[(i, k)] * roots[k] * v[(j, k)].conj())
            .sum();
        Complex::new(T::of(z.re), T::of(z.im))
    })
}

/// Draws `CN(0, 1)`.
#[inline]
pub fn complex_normal<T: Real, R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex<T> {
    let s = (0.5 * variance).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex::new(T::of(s * re), T::of(s * im))
}

/// Draws channel matrices for a fixed antenna count and correlation model.
#[derive(Debug, Clone)]
pub struct ChannelGenerator<T> {
    antennas: usize,
    root: Option<CMatrix<T>>,
}

impl<T: Real> ChannelGenerator<T> {
    pub fn new(model: ChannelModel, antennas: usize) -> Result<Self> {
        if antennas == 0 {
            return Err(invalid("M", "at least one antenna"));
        }
        let root = match model {
            ChannelModel::Iid => None,
            ChannelModel::Exponential { c } => {
                let spec = ExponentialCovarianceSpec::new(c, antennas)?;
                if model.is_iid() {
                    None
                } else {
                    Some(hermitian_sqrt(&spec.matrix::<T>()))
                }
            }
        };
        Ok(Self { antennas, root })
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    /// One channel vector `h = C^{1/2} ḧ`.
    pub fn draw_vector<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Complex<T>> {
        let raw: Vec<Complex<T>> = (0..self.antennas).map(|_| complex_normal(rng, 1.0)).collect();
        match &self.root {
            None => raw,
            Some(r) => (0..self.antennas)
                .map(|i| {
                    raw.iter()
                        .enumerate()
                        .fold(Complex::new(T::zero(), T::zero()), |acc, (k, &z)| {
                            acc + r.get(i, k) * z
                        })
                })
                .collect(),
        }
    }

    /// `N x M` channel matrix `H`, row `n` holding `h_nᵀ`.
    pub fn draw<R: Rng + ?Sized>(&self, devices: usize, rng: &mut R) -> CMatrix<T> {
        let mut h = CMatrix::zeros(devices, self.antennas);
        for n in 0..devices {
            for (m, z) in self.draw_vector(rng).into_iter().enumerate() {
                h.set(n, m, z);
            }
        }
        h
    }
}

pub fn draw_channels<T: Real, R: Rng + ?Sized>(
    model: ChannelModel,
    devices: usize,
    antennas: usize,
    rng: &mut R,
) -> Result<CMatrix<T>> {
    Ok(ChannelGenerator::new(model, antennas)?.draw(devices, rng))
}

/// Exactly `k` of `n` devices active, chosen uniformly without replacement.
pub fn draw_activity<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Result<ActivityPattern> {
    if k > n {
        return Err(invalid("K", format!("{k} active devices out of {n}")));
    }
    let mut alpha = vec![false; n];
    for i in rand::seq::index::sample(rng, n, k).iter() {
        alpha[i] = true;
    }
    Ok(ActivityPattern::new(alpha))
}

/// Complex AWGN, `CN(0, σ²)` per entry.
pub fn draw_noise<T: Real, R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    sigma2: f64,
    rng: &mut R,
) -> CMatrix<T> {
    CMatrix::from_fn(rows, cols, |_, _| complex_normal(rng, sigma2))
}

/// `Y = Σ_n α_n s_n √β h_nᵀ + Z` for a given noise draw.
pub fn received_with_noise<T: Real>(
    s: &PreambleMatrix<T>,
    pattern: &ActivityPattern,
    beta: T,
    h: &CMatrix<T>,
    z: &CMatrix<T>,
) -> Result<CMatrix<T>> {
    let (l, n, m) = (s.len(), s.devices(), h.cols());
    if pattern.devices() != n || h.rows() != n {
        return Err(Error::Dimension(format!(
            "pattern has {} devices, preamble {n}, channels {}",
            pattern.devices(),
            h.rows()
        )));
    }
    if z.rows() != l || z.cols() != m {
        return Err(Error::Dimension("noise shape differs from L x M".into()));
    }
    let amp = beta.sqrt();
    let mut y = z.clone();
    for dev in pattern.active_indices() {
        for r in 0..l {
            let sv = s.entry(r, dev) * amp;
            for a in 0..m {
                y.set(r, a, y.get(r, a) + sv * h.get(dev, a));
            }
        }
    }
    Ok(y)
}

/// Phase II observation: complex `Y` and its real stacking `ȳ`.
pub fn synthesize_received<T: Real, R: Rng + ?Sized>(
    s: &PreambleMatrix<T>,
    pattern: &ActivityPattern,
    beta: T,
    h: &CMatrix<T>,
    sigma2: T,
    rng: &mut R,
) -> Result<(CMatrix<T>, RealReceivedSignal<T>)> {
    if !(sigma2 >= T::zero()) {
        return Err(invalid("sigma2", "must be nonnegative"));
    }
    let z = draw_noise(s.len(), h.cols(), sigma2.f64(), rng);
    let y = received_with_noise(s, pattern, beta, h, &z)?;
    let ybar = real_expand_received(&y);
    Ok((y, ybar))
}

/// Sum of the active devices' channels, `Σ_n α_n h_n`.
pub fn aggregate_channel<T: Real>(pattern: &ActivityPattern, h: &CMatrix<T>) -> Vec<Complex<T>> {
    let mut g = vec![Complex::new(T::zero(), T::zero()); h.cols()];
    for dev in pattern.active_indices() {
        for (a, v) in g.iter_mut().enumerate() {
            *v = *v + h.get(dev, a);
        }
    }
    g
}

/// One Phase I symbol received over an aggregate channel `g`:
/// `y = √β s g + z`, stacked as `[Re y_m, Im y_m]` per antenna.
pub fn phase1_symbol<T: Real, R: Rng + ?Sized>(
    symbol: Complex<T>,
    aggregate: &[Complex<T>],
    beta: T,
    sigma2: T,
    rng: &mut R,
) -> RealReceivedSignal<T> {
    let amp = beta.sqrt();
    let mut data = Vec::with_capacity(2 * aggregate.len());
    for g in aggregate {
        let y = symbol * *g * amp + complex_normal::<T, _>(rng, sigma2.f64());
        data.push(y.re);
        data.push(y.im);
    }
    RealReceivedSignal::from_vec(1, aggregate.len(), data).expect("2M entries")
}

/// Phase I symbol with identical preambles, using `Σ α_n h_n ~ √K h` for
/// i.i.d. channels.
pub fn synthesize_phase1_received<T: Real, R: Rng + ?Sized>(
    symbol: Complex<T>,
    k: usize,
    beta: T,
    antennas: usize,
    sigma2: T,
    rng: &mut R,
) -> RealReceivedSignal<T> {
    let scale = T::of_usize(k).sqrt();
    let g: Vec<Complex<T>> = (0..antennas)
        .map(|_| complex_normal::<T, _>(rng, 1.0) * scale)
        .collect();
    phase1_symbol(symbol, &g, beta, sigma2, rng)
}
