//! Finite-difference check of the de-pooling layer gradient.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::depool::{depool_adjoint, depool_forward, KernelBank, SubbandSet};
use crate::error::{Error, Result};
use crate::tensor::Field;

pub const GRADCHECK_EPS: f64 = 1e-5;
pub const GRADCHECK_MAX_SIDE: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradcheckReport {
    /// Largest `|analytic - numeric| / max(1, |analytic|, |numeric|)`.
    pub max_relative_error: f64,
    pub max_gradient: f64,
}

/// Scalar loss on the subbands with its gradient.
pub trait SubbandLoss {
    fn value(&self, s: &SubbandSet) -> f64;
    fn gradient(&self, s: &SubbandSet) -> SubbandSet;
}

/// `½‖s − t‖²`.
pub struct Quadratic {
    pub target: SubbandSet,
}

impl SubbandLoss for Quadratic {
    fn value(&self, s: &SubbandSet) -> f64 {
        s.flatten().iter().zip(self.target.flatten()).map(|(a, b)| 0.5 * (a - b) * (a - b)).sum()
    }

    fn gradient(&self, s: &SubbandSet) -> SubbandSet {
        let g: Vec<f64> = s.flatten().iter().zip(self.target.flatten()).map(|(a, b)| a - b).collect();
        SubbandSet::from_flat(&g, s.original_shape()).expect("same layout")
    }
}

/// `¼ Σ (s − t)⁴`; its central differences carry an `ε²` truncation term.
pub struct Quartic {
    pub target: SubbandSet,
}

impl SubbandLoss for Quartic {
    fn value(&self, s: &SubbandSet) -> f64 {
        s.flatten().iter().zip(self.target.flatten()).map(|(a, b)| 0.25 * (a - b).powi(4)).sum()
    }

    fn gradient(&self, s: &SubbandSet) -> SubbandSet {
        let g: Vec<f64> = s.flatten().iter().zip(self.target.flatten()).map(|(a, b)| (a - b).powi(3)).collect();
        SubbandSet::from_flat(&g, s.original_shape()).expect("same layout")
    }
}

/// Compares `Aᵀ ∇g(Ax)` against central differences of `g(Ax)` in every
/// coordinate of `x`.
pub fn check_gradient(x: &Field, bank: &KernelBank, loss: &impl SubbandLoss, eps: f64) -> Result<GradcheckReport> {
    let s = depool_forward(x, bank)?;
    let analytic = depool_adjoint(&loss.gradient(&s), bank)?;
    let mut probe = x.clone();
    let mut worst: f64 = 0.0;
    let mut largest: f64 = 0.0;
    for k in 0..x.len() {
        let base = x.data()[k];
        probe.data_mut()[k] = base + eps;
        let up = loss.value(&depool_forward(&probe, bank)?);
        probe.data_mut()[k] = base - eps;
        let down = loss.value(&depool_forward(&probe, bank)?);
        probe.data_mut()[k] = base;
        let numeric = (up - down) / (2.0 * eps);
        let a = analytic.data()[k];
        let rel = (a - numeric).abs() / 1f64.max(a.abs()).max(numeric.abs());
        worst = worst.max(rel);
        largest = largest.max(a.abs());
    }
    Ok(GradcheckReport { max_relative_error: worst, max_gradient: largest })
}

/// Random seeded instance of `g(s) = ½‖s − t‖²` through the 4x4 bank.
pub fn gradcheck_depool(shape: (usize, usize), seed: u64) -> Result<GradcheckReport> {
    gradcheck_depool_with(shape, seed, GRADCHECK_EPS, &KernelBank::depool4())
}

pub fn gradcheck_depool_with(shape: (usize, usize), seed: u64, eps: f64, bank: &KernelBank) -> Result<GradcheckReport> {
    let (h, w) = shape;
    if h > GRADCHECK_MAX_SIDE || w > GRADCHECK_MAX_SIDE {
        return Err(Error::param(format!("gradient check limited to {GRADCHECK_MAX_SIDE}x{GRADCHECK_MAX_SIDE}, got {h}x{w}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Field::from_fn(h, w, |_, _| rng.random_range(-1.0..1.0));
    let t_field = Field::from_fn(h, w, |_, _| rng.random_range(-1.0..1.0));
    let target = depool_forward(&t_field, bank)?;
    let flat: Vec<f64> = target.flatten().iter().map(|v| v + rng.random_range(-0.5..0.5)).collect();
    let target = SubbandSet::from_flat(&flat, shape)?;
    check_gradient(&x, bank, &Quadratic { target }, eps)
}
