//! Sparse signals, Gaussian measurement ensembles, and noisy measurements.
//!
//! Signals live in C^M with L nonzero coefficients. Measurement matrices have
//! i.i.d. circularly-symmetric unit-variance complex Gaussian entries; noise
//! is complex Gaussian with total per-coordinate variance nu^2. Everything is
//! a pure function of its parameters and a seed, so instances can be
//! regenerated bit-for-bit from their seed record.

use crate::linalg::{CMatrix, CVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("sparsity {l} must satisfy 1 <= L <= M = {m}")]
    BadSparsity { l: usize, m: usize },
    #[error("linear regime requires beta > 2, got {beta}")]
    BadBeta { beta: f64 },
    #[error("linear regime requires m = floor(beta * l); got m = {m}, floor(beta*l) = {expected}")]
    AmbientDimensionMismatch { m: usize, expected: usize },
    #[error("signal power must be positive, got {power}")]
    NonPositivePower { power: f64 },
    #[error("noise level must be positive, got {nu}")]
    NonPositiveNoise { nu: f64 },
    #[error("support indices must be strictly increasing and within [0, m)")]
    BadSupport,
    #[error("all signal values on the support must be nonzero")]
    ZeroValue,
    #[error("support and value counts differ: {support} vs {values}")]
    SupportValueMismatch { support: usize, values: usize },
    #[error("bad magnitude profile: {reason}")]
    BadProfile { reason: String },
    #[error("dimension mismatch: {context}")]
    DimensionMismatch { context: String },
}

/// How the nonzero magnitudes are distributed across the support.
#[derive(Debug, Clone, PartialEq)]
pub enum MagnitudeProfile {
    /// All nonzero entries share the same magnitude sqrt(P/L).
    Flat,
    /// `heavy_count` entries share `heavy_energy_fraction` of the power, the
    /// rest split the remainder evenly.
    TwoLevel {
        heavy_count: usize,
        heavy_energy_fraction: f64,
    },
    /// Explicit per-entry energy weights, normalized to total power P.
    Custom(Vec<f64>),
}

impl MagnitudeProfile {
    /// Smallest squared magnitude the profile produces at sparsity `l` and
    /// power `p`. Deterministic and support-independent.
    pub fn min_mag_sq(&self, l: usize, p: f64) -> Result<f64, SignalError> {
        let energies = self.energies(l, p)?;
        Ok(energies.iter().cloned().fold(f64::INFINITY, f64::min))
    }

    /// Per-entry energies |x_i|^2 in support order.
    pub fn energies(&self, l: usize, p: f64) -> Result<Vec<f64>, SignalError> {
        match self {
            MagnitudeProfile::Flat => Ok(vec![p / l as f64; l]),
            MagnitudeProfile::TwoLevel {
                heavy_count,
                heavy_energy_fraction,
            } => {
                let k = *heavy_count;
                let f = *heavy_energy_fraction;
                if k == 0 || k >= l {
                    return Err(SignalError::BadProfile {
                        reason: format!("two-level heavy count {k} must lie in [1, L-1], L = {l}"),
                    });
                }
                if !(0.0 < f && f < 1.0) {
                    return Err(SignalError::BadProfile {
                        reason: format!("two-level energy fraction {f} must lie in (0, 1)"),
                    });
                }
                let heavy = f * p / k as f64;
                let light = (1.0 - f) * p / (l - k) as f64;
                let mut out = vec![heavy; k];
                out.extend(std::iter::repeat_n(light, l - k));
                Ok(out)
            }
            MagnitudeProfile::Custom(weights) => {
                if weights.len() != l {
                    return Err(SignalError::BadProfile {
                        reason: format!(
                            "custom profile has {} weights, sparsity is {l}",
                            weights.len()
                        ),
                    });
                }
                if weights.iter().any(|&w| !(w > 0.0)) {
                    return Err(SignalError::BadProfile {
                        reason: "custom profile weights must all be positive".into(),
                    });
                }
                let total: f64 = weights.iter().sum();
                Ok(weights.iter().map(|w| p * w / total).collect())
            }
        }
    }
}

/// Scaling of sparsity with ambient dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scaling {
    /// L = floor(M / beta) with beta > 2.
    Linear { beta: f64 },
    /// L = o(M); no ratio constraint enforced.
    Sublinear,
}

/// Which growth assumption the signal sequence is built for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegimeKind {
    /// Minimum magnitude grows so that L*mu^4 outpaces log L.
    Metric1Growth,
    /// L*mu^2 and P held constant as L grows.
    ConstantPower,
    Custom,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignalRegime {
    pub kind: RegimeKind,
    pub scaling: Scaling,
    pub profile: MagnitudeProfile,
}

impl SignalRegime {
    pub fn constant_power_linear(beta: f64, profile: MagnitudeProfile) -> Self {
        Self {
            kind: RegimeKind::ConstantPower,
            scaling: Scaling::Linear { beta },
            profile,
        }
    }

    pub fn sublinear(profile: MagnitudeProfile) -> Self {
        Self {
            kind: RegimeKind::ConstantPower,
            scaling: Scaling::Sublinear,
            profile,
        }
    }
}

/// Total power for the growing-magnitude regime at sparsity `l`:
/// P(L) = L * mu^2(L) with mu^2(L) = c (ln L)^{3/4} / sqrt(L), so that
/// L mu^4 / ln L = c^2 sqrt(ln L) diverges. Needs l >= 2.
pub fn metric1_growth_power(l: usize, c: f64) -> f64 {
    assert!(l >= 2, "growth regime needs L >= 2");
    let lf = l as f64;
    c * lf.sqrt() * lf.ln().powf(0.75)
}

/// A sparse vector in C^M given by its support and the values on it.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSignal {
    m: usize,
    support: Vec<usize>,
    values: Vec<Complex64>,
}

impl SparseSignal {
    pub fn new(m: usize, support: Vec<usize>, values: Vec<Complex64>) -> Result<Self, SignalError> {
        if support.is_empty() || support.len() > m {
            return Err(SignalError::BadSparsity {
                l: support.len(),
                m,
            });
        }
        if support.len() != values.len() {
            return Err(SignalError::SupportValueMismatch {
                support: support.len(),
                values: values.len(),
            });
        }
        let increasing = support.windows(2).all(|w| w[0] < w[1]);
        if !increasing || *support.last().unwrap() >= m {
            return Err(SignalError::BadSupport);
        }
        if values.iter().any(|v| v.norm_sqr() == 0.0) {
            return Err(SignalError::ZeroValue);
        }
        Ok(Self { m, support, values })
    }

    pub fn ambient_dim(&self) -> usize {
        self.m
    }

    pub fn sparsity(&self) -> usize {
        self.support.len()
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// Smallest nonzero magnitude, min_i |x_i|.
    pub fn min_magnitude(&self) -> f64 {
        self.values
            .iter()
            .map(|v| v.norm())
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest nonzero magnitude, max_i |x_i|.
    pub fn max_magnitude(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Total power, sum |x_i|^2.
    pub fn power(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum()
    }

    /// Energy carried by the support indices that also appear in `indices`
    /// (which must be sorted ascending).
    pub fn energy_on(&self, indices: &[usize]) -> f64 {
        debug_assert!(indices.windows(2).all(|w| w[0] < w[1]));
        let mut acc = 0.0;
        let mut i = 0usize;
        let mut j = 0usize;
        while i < self.support.len() && j < indices.len() {
            match self.support[i].cmp(&indices[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += self.values[i].norm_sqr();
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }
}

/// Stable seed derivation: mixes a master seed, a role tag, and an index so
/// that every random component of a trial gets an independent stream no
/// matter what order things run in.
pub fn derive_seed(master: u64, role: &str, index: u64) -> u64 {
    // FNV-1a over the role tag, then a splitmix64-style finalizer.
    let mut h = 0xcbf29ce484222325u64;
    for b in role.as_bytes() {
        h = (h ^ u64::from(*b)).wrapping_mul(0x100000001b3);
    }
    let mut z = master
        .wrapping_add(h.rotate_left(17))
        .wrapping_add(index.wrapping_mul(0x9e3779b97f4a7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Seeds that fully determine one measurement instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedRecord {
    pub matrix_seed: u64,
    pub noise_seed: u64,
    pub signal_seed: u64,
}

fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Draw a sparse signal: support uniform without replacement, magnitudes from
/// the regime's profile, phases uniform.
pub fn make_signal(
    m: usize,
    l: usize,
    regime: &SignalRegime,
    power: f64,
    seed: u64,
) -> Result<SparseSignal, SignalError> {
    if l == 0 || l > m {
        return Err(SignalError::BadSparsity { l, m });
    }
    if !(power > 0.0) {
        return Err(SignalError::NonPositivePower { power });
    }
    if let Scaling::Linear { beta } = regime.scaling {
        if !(beta > 2.0) {
            return Err(SignalError::BadBeta { beta });
        }
        let expected = (beta * l as f64).floor() as usize;
        if expected != m {
            return Err(SignalError::AmbientDimensionMismatch { m, expected });
        }
    }
    let energies = regime.profile.energies(l, power)?;

    let mut rng = rng_from(seed);
    let mut support = rand::seq::index::sample(&mut rng, m, l).into_vec();
    support.sort_unstable();

    let values: Vec<Complex64> = energies
        .iter()
        .map(|&e| {
            let phase = rng.random::<f64>() * std::f64::consts::TAU;
            Complex64::from_polar(e.sqrt(), phase)
        })
        .collect();
    SparseSignal::new(m, support, values)
}

/// N x M matrix of i.i.d. unit-variance circularly-symmetric complex
/// Gaussians (real and imaginary parts each have variance 1/2).
pub fn sample_measurement_matrix(n: usize, m: usize, seed: u64) -> CMatrix {
    let mut rng = rng_from(seed);
    let dist = StandardNormal;
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    CMatrix::from_fn(n, m, |_, _| {
        let re: f64 = dist.sample(&mut rng);
        let im: f64 = dist.sample(&mut rng);
        Complex64::new(re * scale, im * scale)
    })
    .expect("n, m >= 1")
}

/// Length-N complex Gaussian noise with E|n_k|^2 = nu^2.
pub fn sample_noise(n: usize, nu: f64, seed: u64) -> Result<CVector, SignalError> {
    if !(nu > 0.0) {
        return Err(SignalError::NonPositiveNoise { nu });
    }
    let mut rng = rng_from(seed);
    let dist = StandardNormal;
    let scale = nu * std::f64::consts::FRAC_1_SQRT_2;
    CVector::from_fn(n, |_| {
        let re: f64 = dist.sample(&mut rng);
        let im: f64 = dist.sample(&mut rng);
        Complex64::new(re * scale, im * scale)
    })
    .map_err(|_| SignalError::DimensionMismatch {
        context: "noise length must be >= 1".into(),
    })
}

/// Form y = A x + n using only the support columns of A.
pub fn measure(a: &CMatrix, signal: &SparseSignal, noise: &CVector) -> Result<CVector, SignalError> {
    if a.cols() != signal.ambient_dim() {
        return Err(SignalError::DimensionMismatch {
            context: format!(
                "matrix has {} columns, signal dimension is {}",
                a.cols(),
                signal.ambient_dim()
            ),
        });
    }
    if noise.len() != a.rows() {
        return Err(SignalError::DimensionMismatch {
            context: format!(
                "noise length {} vs {} measurement rows",
                noise.len(),
                a.rows()
            ),
        });
    }
    let mut y: Vec<Complex64> = noise.entries().to_vec();
    for (idx, value) in signal.support().iter().zip(signal.values()) {
        for (k, slot) in y.iter_mut().enumerate() {
            *slot += value * a.entry(k, *idx);
        }
    }
    Ok(CVector::new(y).expect("rows >= 1"))
}

/// One realization (A, x, n, y) together with the seeds that produced it.
#[derive(Debug, Clone)]
pub struct MeasurementInstance {
    pub a: CMatrix,
    pub signal: SparseSignal,
    pub noise: CVector,
    pub y: CVector,
    pub seeds: SeedRecord,
}

impl MeasurementInstance {
    /// Draw a full instance from its seed record. Calling this twice with the
    /// same arguments reproduces `y` bit for bit.
    pub fn draw(
        m: usize,
        l: usize,
        n: usize,
        regime: &SignalRegime,
        power: f64,
        nu: f64,
        seeds: SeedRecord,
    ) -> Result<Self, SignalError> {
        let signal = make_signal(m, l, regime, power, seeds.signal_seed)?;
        let a = sample_measurement_matrix(n, m, seeds.matrix_seed);
        let noise = sample_noise(n, nu, seeds.noise_seed)?;
        let y = measure(&a, &signal, &noise)?;
        Ok(Self {
            a,
            signal,
            noise,
            y,
            seeds,
        })
    }
}
