//! Uniform B-bit ADC quantizer.
//!
//! With `h = 2^{B-1}` the cells are `I_q = [(q-1-h)Δ, (q-h)Δ)` for
//! `q = 1..2^B`, the two outermost extended to ±∞, and cell `q` outputs its
//! midpoint `(q-h-½)Δ`. The truncated cells `J_q` clip the outer two to width
//! `Δ`, so every `J_q` is `[(q-1-h)Δ, (q-h)Δ)`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::scalar::Real;

/// Largest supported resolution; beyond this use the pass-through codebook.
pub const MAX_BITS: u32 = 24;

/// `Δ = ρ √(2 K̂ β + 2σ²) / 2^B`.
pub fn design_step_size<T: Real>(k_hat: T, beta: T, sigma2: T, rho: T, bits: u32) -> Result<T> {
    if !(rho > T::zero()) {
        return Err(invalid("rho", format!("must be positive, got {rho}")));
    }
    if !(sigma2 > T::zero()) {
        return Err(invalid("sigma2", format!("must be positive, got {sigma2}")));
    }
    if !(k_hat >= T::zero()) {
        return Err(invalid("K_hat", format!("must be nonnegative, got {k_hat}")));
    }
    if !(beta >= T::zero()) {
        return Err(invalid("beta", format!("must be nonnegative, got {beta}")));
    }
    check_bits(bits)?;
    let two = T::of(2.0);
    Ok(rho * (two * k_hat * beta + two * sigma2).sqrt() / T::of(2f64.powi(bits as i32)))
}

fn check_bits(bits: u32) -> Result<()> {
    if bits == 0 || bits > MAX_BITS {
        return Err(invalid("B", format!("bits must be in 1..={MAX_BITS}, got {bits}")));
    }
    Ok(())
}

/// Finite-resolution uniform codebook.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformQuantizer<T> {
    bits: u32,
    delta: T,
    rho: Option<T>,
    k_hat: Option<T>,
}

impl<T: Real> UniformQuantizer<T> {
    pub fn new(bits: u32, delta: T) -> Result<Self> {
        check_bits(bits)?;
        if !(delta > T::zero()) || !delta.is_finite() {
            return Err(invalid("delta", format!("must be positive, got {delta}")));
        }
        Ok(Self {
            bits,
            delta,
            rho: None,
            k_hat: None,
        })
    }

    /// Codebook matched to a prior `K̂` on the number of active devices.
    pub fn design(k_hat: T, beta: T, sigma2: T, rho: T, bits: u32) -> Result<Self> {
        let delta = design_step_size(k_hat, beta, sigma2, rho, bits)?;
        Ok(Self {
            bits,
            delta,
            rho: Some(rho),
            k_hat: Some(k_hat),
        })
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn delta(&self) -> T {
        self.delta
    }

    pub fn rho(&self) -> Option<T> {
        self.rho
    }

    pub fn k_hat(&self) -> Option<T> {
        self.k_hat
    }

    pub fn cell_count(&self) -> usize {
        1usize << self.bits
    }

    #[inline]
    fn half(&self) -> i64 {
        1i64 << (self.bits - 1)
    }

    /// Interval index `f(x)` in `1..=2^B`.
    #[inline]
    pub fn index(&self, x: T) -> usize {
        let h = self.half();
        let k = (x / self.delta).floor();
        let q = if k.is_nan() {
            h + 1
        } else {
            let k = k.max(T::of(-(h as f64) - 1.0)).min(T::of(h as f64));
            k.to_i64().unwrap_or(0) + h + 1
        };
        q.clamp(1, 2 * h) as usize
    }

    /// Output value of cell `q`.
    #[inline]
    pub fn level(&self, q: usize) -> T {
        T::of(q as f64 - self.half() as f64 - 0.5) * self.delta
    }

    pub fn levels(&self) -> Vec<T> {
        (1..=self.cell_count()).map(|q| self.level(q)).collect()
    }

    #[inline]
    pub fn quantize_scalar(&self, x: T) -> T {
        self.level(self.index(x))
    }

    /// `I_q` as `(lower, upper)`, `None` meaning unbounded.
    pub fn interval(&self, q: usize) -> (Option<T>, Option<T>) {
        let (lo, hi) = self.truncated_cell(q);
        let lower = (q > 1).then_some(lo);
        let upper = (q < self.cell_count()).then_some(hi);
        (lower, upper)
    }

    /// `J_q = [lo, hi)`.
    #[inline]
    pub fn truncated_cell(&self, q: usize) -> (T, T) {
        assert!(q >= 1 && q <= self.cell_count(), "cell {q} out of range");
        let h = self.half() as f64;
        (T::of(q as f64 - 1.0 - h) * self.delta, T::of(q as f64 - h) * self.delta)
    }

    /// Half-width `2^{B-1} Δ` of the truncated support.
    pub fn support_half_width(&self) -> T {
        T::of(self.half() as f64) * self.delta
    }
}

/// A quantizer or the infinite-resolution pass-through.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QuantizerCodebook<T> {
    Uniform(UniformQuantizer<T>),
    PassThrough,
}

impl<T: Real> QuantizerCodebook<T> {
    pub fn design(k_hat: T, beta: T, sigma2: T, rho: T, bits: Option<u32>) -> Result<Self> {
        match bits {
            None => Ok(Self::PassThrough),
            Some(b) => Ok(Self::Uniform(UniformQuantizer::design(k_hat, beta, sigma2, rho, b)?)),
        }
    }

    pub fn is_pass_through(&self) -> bool {
        matches!(self, Self::PassThrough)
    }

    pub fn bits(&self) -> Option<u32> {
        match self {
            Self::Uniform(q) => Some(q.bits()),
            Self::PassThrough => None,
        }
    }

    #[inline]
    pub fn quantize_scalar(&self, x: T) -> T {
        match self {
            Self::Uniform(q) => q.quantize_scalar(x),
            Self::PassThrough => x,
        }
    }

    /// `log p(x)` of the cell-uniform sampling density, per dimension
    /// (`-log Δ`; zero for pass-through, where no sampling happens).
    pub fn log_density_per_dim(&self) -> T {
        match self {
            Self::Uniform(q) => -q.delta().ln(),
            Self::PassThrough => T::zero(),
        }
    }
}

impl<T: Real> fmt::Display for QuantizerCodebook<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::PassThrough => write!(f, "B=inf"),
            Self::Uniform(q) => {
                write!(f, "B={} delta={:e}", q.bits, q.delta.f64())?;
                if let Some(r) = q.rho {
                    write!(f, " rho={}", r.f64())?;
                }
                if let Some(k) = q.k_hat {
                    write!(f, " k_hat={}", k.f64())?;
                }
                Ok(())
            }
        }
    }
}

impl<T: Real> FromStr for QuantizerCodebook<T> {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut bits = None;
        let mut delta = None;
        let mut rho = None;
        let mut k_hat = None;
        for tok in s.split_whitespace() {
            let (k, v) = tok
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("codebook token `{tok}` lacks `=`")))?;
            let num = |name: &str| {
                v.parse::<f64>()
                    .map_err(|_| Error::Config(format!("codebook field `{name}`: bad number `{v}`")))
            };
            match k {
                "B" if v == "inf" => return Ok(Self::PassThrough),
                "B" => {
                    bits = Some(v.parse::<u32>().map_err(|_| {
                        Error::Config(format!("codebook field `B`: bad integer `{v}`"))
                    })?)
                }
                "delta" => delta = Some(num("delta")?),
                "rho" => rho = Some(T::of(num("rho")?)),
                "k_hat" => k_hat = Some(T::of(num("k_hat")?)),
                other => return Err(Error::Config(format!("unknown codebook field `{other}`"))),
            }
        }
        let bits = bits.ok_or_else(|| Error::Config("codebook record lacks `B`".into()))?;
        let delta = delta.ok_or_else(|| Error::Config("codebook record lacks `delta`".into()))?;
        let mut q = UniformQuantizer::new(bits, T::of(delta))?;
        q.rho = rho;
        q.k_hat = k_hat;
        Ok(Self::Uniform(q))
    }
}

pub fn interval_index<T: Real>(x: T, cb: &UniformQuantizer<T>) -> usize {
    cb.index(x)
}

pub fn truncated_cell<T: Real>(q: usize, cb: &UniformQuantizer<T>) -> (T, T) {
    cb.truncated_cell(q)
}

/// Elementwise quantization of `ȳ`.
pub fn quantize<T: Real>(ybar: &[T], cb: &QuantizerCodebook<T>) -> Vec<T> {
    ybar.iter().map(|&x| cb.quantize_scalar(x)).collect()
}

/// Draws `x` uniformly from the product of truncated cells `J_{f(yQ_l)}`.
/// For the pass-through codebook `yQ` itself is returned.
pub fn sample_uniform_in_cells<T: Real, R: Rng + ?Sized>(
    y_q: &[T],
    cb: &QuantizerCodebook<T>,
    rng: &mut R,
) -> Vec<T> {
    let mut out = vec![T::zero(); y_q.len()];
    sample_uniform_in_cells_into(y_q, cb, rng, &mut out);
    out
}

pub fn sample_uniform_in_cells_into<T: Real, R: Rng + ?Sized>(
    y_q: &[T],
    cb: &QuantizerCodebook<T>,
    rng: &mut R,
    out: &mut [T],
) {
    match cb {
        QuantizerCodebook::PassThrough => out.copy_from_slice(y_q),
        QuantizerCodebook::Uniform(q) => {
            for (o, &y) in out.iter_mut().zip(y_q) {
                let (lo, _) = q.truncated_cell(q.index(y));
                let u: f64 = rng.random();
                *o = lo + T::of(u) * q.delta();
            }
        }
    }
}
