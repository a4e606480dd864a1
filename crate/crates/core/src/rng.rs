//! Seedable random streams and the sampling primitives used by the data
//! generator and the Gibbs sampler.
//!
//! A stream is a ChaCha8 generator whose 256-bit key is expanded from a
//! 64-bit base seed and a string label:
//!
//! ```text
//! h     = fnv1a64(label)
//! s_0   = base_seed ^ splitmix64(h)
//! key_k = splitmix64(s_0 + k * 0x9E3779B97F4A7C15),  k = 0..4
//! ```
//!
//! ChaCha is counter based, so the state transition is the block counter
//! increment and every draw is a pure function of `(base_seed, label, index)`.

use rand::seq::index;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma, StandardNormal};
use thiserror::Error;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistError {
    #[error("variance must be positive and finite, got {0}")]
    NonPositiveVariance(f64),
    #[error("inverse-gamma shape and rate must be positive, got shape={shape}, rate={rate}")]
    InvalidInverseGamma { shape: f64, rate: f64 },
    #[error("permutation needs 0 < n_t < n, got n={n}, n_t={n_t}")]
    PermutationBounds { n: usize, n_t: usize },
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(GOLDEN_GAMMA);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// A labeled, deterministic random stream. Single owner; never shared.
#[derive(Debug, Clone)]
pub struct RngStream {
    rng: ChaCha8Rng,
    base_seed: u64,
    label: String,
}

impl RngStream {
    pub fn base_seed(&self) -> u64 {
        self.base_seed
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Child stream keyed on `"{self.label}/{sub}"`. Does not consume draws
    /// from `self`.
    pub fn fork(&self, sub: &str) -> RngStream {
        derive_stream(self.base_seed, &format!("{}/{}", self.label, sub))
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    fn exp1(&mut self) -> f64 {
        Exp1.sample(&mut self.rng)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

pub fn derive_stream(base_seed: u64, label: &str) -> RngStream {
    let s0 = base_seed ^ splitmix64(fnv1a64(label.as_bytes()));
    let mut key = [0u8; 32];
    for (k, chunk) in key.chunks_exact_mut(8).enumerate() {
        let word = splitmix64(s0.wrapping_add((k as u64).wrapping_mul(GOLDEN_GAMMA)));
        chunk.copy_from_slice(&word.to_le_bytes());
    }
    RngStream { rng: ChaCha8Rng::from_seed(key), base_seed, label: label.to_owned() }
}

fn check_variance(variance: f64) -> Result<(), DistError> {
    if variance > 0.0 && variance.is_finite() {
        Ok(())
    } else {
        Err(DistError::NonPositiveVariance(variance))
    }
}

pub fn sample_normal(stream: &mut RngStream, mean: f64, variance: f64) -> Result<f64, DistError> {
    check_variance(variance)?;
    Ok(mean + variance.sqrt() * stream.standard_normal())
}

/// Inverse gamma with density proportional to `v^{-shape-1} exp(-rate / v)`.
pub fn sample_inverse_gamma(stream: &mut RngStream, shape: f64, rate: f64) -> Result<f64, DistError> {
    let gamma = match Gamma::new(shape, 1.0) {
        Ok(g) if rate > 0.0 && rate.is_finite() => g,
        _ => return Err(DistError::InvalidInverseGamma { shape, rate }),
    };
    let g: f64 = gamma.sample(&mut stream.rng);
    // g can round to zero for tiny shapes; keep the draw finite.
    Ok((rate / g.max(f64::MIN_POSITIVE)).min(f64::MAX))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TruncationSide {
    Above0,
    Below0,
}

/// Standard normal truncated to `[lower, inf)`.
///
/// Plain rejection when `lower <= 0` (acceptance >= 1/2), otherwise Robert's
/// translated-exponential proposal with rate `(lower + sqrt(lower^2 + 4)) / 2`,
/// whose acceptance stays above ~0.76 however far out the bound sits.
fn standard_normal_lower_tail(stream: &mut RngStream, lower: f64) -> f64 {
    if lower <= 0.0 {
        loop {
            let x = stream.standard_normal();
            if x >= lower {
                return x;
            }
        }
    }
    let rate = 0.5 * (lower + (lower * lower + 4.0).sqrt());
    loop {
        let x = lower + stream.exp1() / rate;
        let d = x - rate;
        if stream.uniform() <= (-0.5 * d * d).exp() {
            return x;
        }
    }
}

/// Normal draw conditioned on the sign given by `side`.
pub fn sample_truncated_normal(
    stream: &mut RngStream,
    mean: f64,
    variance: f64,
    side: TruncationSide,
) -> Result<f64, DistError> {
    check_variance(variance)?;
    let sd = variance.sqrt();
    let draw = match side {
        TruncationSide::Above0 => mean + sd * standard_normal_lower_tail(stream, -mean / sd),
        TruncationSide::Below0 => mean - sd * standard_normal_lower_tail(stream, mean / sd),
    };
    // Guard the boundary against rounding in `mean + sd * x`.
    Ok(match side {
        TruncationSide::Above0 if draw <= 0.0 => f64::MIN_POSITIVE,
        TruncationSide::Below0 if draw > 0.0 => -0.0,
        _ => draw,
    })
}

/// Uniformly random complete-randomization assignment with exactly `n_t`
/// treated units.
pub fn sample_permutation(stream: &mut RngStream, n: usize, n_t: usize) -> Result<Vec<u8>, DistError> {
    let mut z = vec![0u8; n];
    sample_permutation_into(stream, n_t, &mut z)?;
    Ok(z)
}

/// In-place form of [`sample_permutation`] for hot loops.
pub fn sample_permutation_into(stream: &mut RngStream, n_t: usize, z: &mut [u8]) -> Result<(), DistError> {
    let n = z.len();
    if n_t == 0 || n_t >= n {
        return Err(DistError::PermutationBounds { n, n_t });
    }
    z.fill(0);
    for i in index::sample(stream, n, n_t) {
        z[i] = 1;
    }
    Ok(())
}

pub fn normal_cdf(u: f64) -> f64 {
    0.5 * libm::erfc(-u / std::f64::consts::SQRT_2)
}

/// `ln Phi(u)`, accurate in the far lower tail where `Phi` underflows.
pub fn log_normal_cdf(u: f64) -> f64 {
    if u > -30.0 {
        return normal_cdf(u).ln();
    }
    // Asymptotic Mills-ratio expansion.
    let u2 = u * u;
    let series = 1.0 - 1.0 / u2 + 3.0 / (u2 * u2) - 15.0 / (u2 * u2 * u2);
    -0.5 * u2 - (-u).ln() - LN_SQRT_2PI + series.ln()
}

pub fn normal_pdf(y: f64, mean: f64, variance: f64) -> f64 {
    log_normal_pdf(y, mean, variance).exp()
}

pub fn log_normal_pdf(y: f64, mean: f64, variance: f64) -> f64 {
    let d = y - mean;
    -LN_SQRT_2PI - 0.5 * variance.ln() - 0.5 * d * d / variance
}
