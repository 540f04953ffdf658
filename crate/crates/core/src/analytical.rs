//! Correlated Gaussian benchmark with a closed-form decomposition.
//!
//! `X` is a standard Gaussian vector of dimension 6 with all pairwise
//! correlations equal to `ρ`, and
//! `Y = sin(2π X₁) + X₁X₂ + X₃X₄ + ε` with `ε ~ N(0, σ²)`.
//! Variables are 0-based here: `X₁` is column 0.
//!
//! Random numbers come from ChaCha20 seeded through
//! `SeedableRng::seed_from_u64`; uniforms take the top 53 bits of each
//! 64-bit output and normals use the Box–Muller transform (cosine branch
//! first), so a seed reproduces the same sample on every platform.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};

use crate::diagnostics::ComponentReference;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::partition::SubsetKey;

/// Input dimension of the benchmark.
pub const N_FEATURES: usize = 6;

#[derive(Debug, Clone, PartialEq)]
pub struct CaseConfig {
    pub n: usize,
    pub rho: f64,
    pub noise_sd: f64,
    pub seed: u64,
}

impl Default for CaseConfig {
    fn default() -> Self {
        Self {
            n: 5000,
            rho: 0.5,
            noise_sd: 0.5,
            seed: 0,
        }
    }
}

impl CaseConfig {
    pub fn validate(&self) -> Result<()> {
        let p = N_FEATURES as f64;
        if !(1.0 + (p - 1.0) * self.rho > 0.0 && 1.0 - self.rho > 0.0) {
            return Err(Error::Config(format!(
                "correlation {} does not give a positive definite matrix",
                self.rho
            )));
        }
        if !self.noise_sd.is_finite() || self.noise_sd < 0.0 {
            return Err(Error::Config(format!("noise sd {} must be ≥ 0", self.noise_sd)));
        }
        if self.n == 0 {
            return Err(Error::Config("sample size must be positive".into()));
        }
        Ok(())
    }
}

/// Standard normal variates from ChaCha20 via Box–Muller.
#[derive(Debug, Clone)]
pub struct NormalSampler {
    rng: ChaCha20Rng,
    spare: Option<f64>,
}

impl NormalSampler {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha20Rng::seed_from_u64(seed),
            spare: None,
        }
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        // 1 − u lies in (0, 1], keeping the logarithm finite.
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = libm::sqrt(-2.0 * libm::log(u1));
        let angle = 2.0 * PI * u2;
        self.spare = Some(r * libm::sin(angle));
        r * libm::cos(angle)
    }
}

/// Lower Cholesky factor of the equicorrelation matrix, row-major.
pub fn equicorrelation_factor(p: usize, rho: f64) -> Vec<f64> {
    let mut l = vec![0.0; p * p];
    for i in 0..p {
        for j in 0..=i {
            let target = if i == j { 1.0 } else { rho };
            let s: f64 = (0..j).map(|k| l[i * p + k] * l[j * p + k]).sum();
            l[i * p + j] = if i == j {
                libm::sqrt(target - s)
            } else {
                (target - s) / l[j * p + j]
            };
        }
    }
    l
}

/// Draws `n` rows of `X` and the matching noisy responses.
pub fn sample_case(cfg: &CaseConfig) -> Result<(Matrix, Vec<f64>)> {
    cfg.validate()?;
    let p = N_FEATURES;
    let l = equicorrelation_factor(p, cfg.rho);
    let mut sampler = NormalSampler::new(cfg.seed);
    let mut data = Vec::with_capacity(cfg.n * p);
    let mut y = Vec::with_capacity(cfg.n);
    let mut z = [0.0; N_FEATURES];
    for _ in 0..cfg.n {
        for zi in z.iter_mut() {
            *zi = sampler.normal();
        }
        let start = data.len();
        for i in 0..p {
            data.push((0..=i).map(|k| l[i * p + k] * z[k]).sum());
        }
        let noise = sampler.normal();
        y.push(m_true(&data[start..]) + cfg.noise_sd * noise);
    }
    Ok((Matrix::new(data, cfg.n, p)?, y))
}

/// Regression function `sin(2π x₀) + x₀x₁ + x₂x₃`.
pub fn m_true(x: &[f64]) -> f64 {
    libm::sin(2.0 * PI * x[0]) + x[0] * x[1] + x[2] * x[3]
}

/// Closed-form component of the true decomposition under correlation `rho`.
/// Subsets outside the support give zero.
pub fn hfd_true(subset: &SubsetKey, x: &[f64], rho: f64) -> f64 {
    let a = rho / (1.0 + rho * rho);
    let square = |v: f64| v * v - 1.0;
    match subset.vars() {
        [] => 2.0 * rho,
        [0] => libm::sin(2.0 * PI * x[0]) + a * square(x[0]),
        [v @ 1..=3] => a * square(x[*v]),
        [0, 1] | [2, 3] => {
            let (u, w) = (x[subset.vars()[0]], x[subset.vars()[1]]);
            rho * (1.0 - rho * rho) / (1.0 + rho * rho) - a * (u * u + w * w) + u * w
        }
        _ => 0.0,
    }
}

/// Reference components of the benchmark, scored on all six main effects and
/// the two true interactions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticalReference {
    pub rho: f64,
}

impl ComponentReference for AnalyticalReference {
    fn subsets(&self) -> Vec<SubsetKey> {
        let mut s: Vec<SubsetKey> = (0..N_FEATURES).map(|j| SubsetKey::from([j])).collect();
        s.push(SubsetKey::from([0, 1]));
        s.push(SubsetKey::from([2, 3]));
        s
    }

    fn eval(&self, subset: &SubsetKey, x: &[f64]) -> f64 {
        hfd_true(subset, x, self.rho)
    }
}
