//! Finite linear-bandit environments with non-negative expected rewards.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::real::{dot, norm2, Real};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InstanceError {
    #[error("arm set is empty")]
    Empty,
    #[error("dimension must be positive")]
    ZeroDimension,
    #[error("arm {index} has dimension {got}, expected {expected}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error("arm {index} has norm {norm} > 1")]
    ArmNorm { index: usize, norm: f64 },
    #[error("theta_star has norm {0} > 1")]
    ThetaNorm(f64),
    #[error("arm {index} has negative expected reward {mean}")]
    NegativeMean { index: usize, mean: f64 },
    #[error("sigma must be finite and non-negative, got {0}")]
    Sigma(f64),
    #[error("non-finite value in instance")]
    NonFinite,
    #[error("infeasible generator parameters: {0}")]
    Infeasible(String),
    #[error("arm index {index} out of range ({len} arms)")]
    IndexOutOfRange { index: usize, len: usize },
}

const NORM_SLACK: f64 = 1e-9;
const MEAN_SLACK: f64 = 1e-12;

/// Ordered, non-empty set of arms in `R^d`, each with `‖x‖₂ ≤ 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmSet<T> {
    dim: usize,
    arms: Vec<Vec<T>>,
}

impl<T: Real> ArmSet<T> {
    pub fn new(dim: usize, arms: Vec<Vec<T>>) -> Result<Self, InstanceError> {
        if dim == 0 {
            return Err(InstanceError::ZeroDimension);
        }
        if arms.is_empty() {
            return Err(InstanceError::Empty);
        }
        for (index, a) in arms.iter().enumerate() {
            if a.len() != dim {
                return Err(InstanceError::DimensionMismatch {
                    index,
                    expected: dim,
                    got: a.len(),
                });
            }
            if a.iter().any(|v| !v.is_finite()) {
                return Err(InstanceError::NonFinite);
            }
            let n = norm2(a);
            if n > T::one() + T::lit(NORM_SLACK) {
                return Err(InstanceError::ArmNorm {
                    index,
                    norm: n.to_f64_lossy(),
                });
            }
        }
        Ok(Self { dim, arms })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.arms.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.arms.is_empty()
    }

    #[inline]
    pub fn arm(&self, i: usize) -> &[T] {
        &self.arms[i]
    }

    pub fn arms(&self) -> &[Vec<T>] {
        &self.arms
    }

    pub fn iter(&self) -> impl Iterator<Item = &[T]> {
        self.arms.iter().map(Vec::as_slice)
    }

    /// Sub-arm-set holding the given indices, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            dim: self.dim,
            arms: indices.iter().map(|&i| self.arms[i].clone()).collect(),
        }
    }
}

/// Simulated environment: arms, hidden parameter and Gaussian noise scale.
#[derive(Debug, Clone, PartialEq)]
pub struct BanditInstance<T> {
    arm_set: ArmSet<T>,
    theta_star: Vec<T>,
    sigma: T,
    means: Vec<T>,
    best: (usize, T),
}

impl<T: Real> BanditInstance<T> {
    /// Validates the norm bounds and non-negative means. Means in
    /// `[-1e-12, 0)` are clamped to zero.
    pub fn new(arm_set: ArmSet<T>, theta_star: Vec<T>, sigma: T) -> Result<Self, InstanceError> {
        if theta_star.len() != arm_set.dim() {
            return Err(InstanceError::DimensionMismatch {
                index: usize::MAX,
                expected: arm_set.dim(),
                got: theta_star.len(),
            });
        }
        if theta_star.iter().any(|v| !v.is_finite()) {
            return Err(InstanceError::NonFinite);
        }
        let tn = norm2(&theta_star);
        if tn > T::one() + T::lit(NORM_SLACK) {
            return Err(InstanceError::ThetaNorm(tn.to_f64_lossy()));
        }
        if !sigma.is_finite() || sigma < T::zero() {
            return Err(InstanceError::Sigma(sigma.to_f64_lossy()));
        }
        let mut means = Vec::with_capacity(arm_set.len());
        for (index, x) in arm_set.iter().enumerate() {
            let m = dot(x, &theta_star);
            if m < -T::lit(MEAN_SLACK) {
                return Err(InstanceError::NegativeMean {
                    index,
                    mean: m.to_f64_lossy(),
                });
            }
            means.push(m.max(T::zero()));
        }
        let best = argmax_lowest(&means);
        Ok(Self {
            arm_set,
            theta_star,
            sigma,
            means,
            best,
        })
    }

    pub fn arm_set(&self) -> &ArmSet<T> {
        &self.arm_set
    }

    pub fn dim(&self) -> usize {
        self.arm_set.dim()
    }

    pub fn theta_star(&self) -> &[T] {
        &self.theta_star
    }

    pub fn sigma(&self) -> T {
        self.sigma
    }

    /// Same arms and parameter, different noise scale.
    pub fn with_sigma(&self, sigma: T) -> Result<Self, InstanceError> {
        if !sigma.is_finite() || sigma < T::zero() {
            return Err(InstanceError::Sigma(sigma.to_f64_lossy()));
        }
        Ok(Self {
            sigma,
            ..self.clone()
        })
    }

    /// Expected reward `⟨x_i, θ*⟩` (clamped at zero).
    #[inline]
    pub fn mean(&self, i: usize) -> T {
        self.means[i]
    }

    pub fn means(&self) -> &[T] {
        &self.means
    }

    /// Lowest index attaining the largest mean, and that mean.
    #[inline]
    pub fn best_arm(&self) -> (usize, T) {
        self.best
    }

    #[inline]
    pub fn mu_star(&self) -> T {
        self.best.1
    }

    /// Draws `⟨x, θ*⟩ + η`, `η ~ N(0, σ²)`.
    pub fn sample_reward<R: Rng + ?Sized>(
        &self,
        arm_idx: usize,
        rng: &mut R,
    ) -> Result<T, InstanceError>
    where
        StandardNormal: Distribution<T>,
    {
        if arm_idx >= self.means.len() {
            return Err(InstanceError::IndexOutOfRange {
                index: arm_idx,
                len: self.means.len(),
            });
        }
        Ok(self.sample_unchecked(arm_idx, rng))
    }

    /// As [`sample_reward`](Self::sample_reward) without the bounds check.
    /// The noise draw is consumed even when `σ = 0` so that random streams stay
    /// aligned across noise levels.
    #[inline]
    pub(crate) fn sample_unchecked<R: Rng + ?Sized>(&self, arm_idx: usize, rng: &mut R) -> T
    where
        StandardNormal: Distribution<T>,
    {
        let z: T = StandardNormal.sample(rng);
        self.means[arm_idx] + self.sigma * z
    }
}

fn argmax_lowest<T: Real>(v: &[T]) -> (usize, T) {
    let mut best = (0, v[0]);
    for (i, &m) in v.iter().enumerate().skip(1) {
        if m > best.1 {
            best = (i, m);
        }
    }
    best
}

/// Lowest index attaining the max expected reward, with that reward.
pub fn best_arm<T: Real>(inst: &BanditInstance<T>) -> (usize, T) {
    inst.best_arm()
}

/// Free-function form of [`BanditInstance::sample_reward`].
pub fn sample_reward<T: Real, R: Rng + ?Sized>(
    inst: &BanditInstance<T>,
    arm_idx: usize,
    rng: &mut R,
) -> Result<T, InstanceError>
where
    StandardNormal: Distribution<T>,
{
    inst.sample_reward(arm_idx, rng)
}

/// Synthetic instance: Gaussian arms projected to the unit sphere, a
/// `sparsity`-sparse unit `θ*`, and every arm with a negative mean negated.
///
/// Uses ChaCha12 seeded from `seed`; the noise scale is left at zero and is
/// set by the caller via [`BanditInstance::with_sigma`].
pub fn make_synthetic_instance(
    d: usize,
    n_arms: usize,
    sparsity: usize,
    seed: u64,
) -> Result<BanditInstance<f64>, InstanceError> {
    if !(1..=64).contains(&d) {
        return Err(InstanceError::Infeasible(format!("d = {d} not in 1..=64")));
    }
    if n_arms < d {
        return Err(InstanceError::Infeasible(format!(
            "n_arms = {n_arms} < d = {d}"
        )));
    }
    if !(1..=d).contains(&sparsity) {
        return Err(InstanceError::Infeasible(format!(
            "sparsity = {sparsity} not in 1..={d}"
        )));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);

    let mut arms = Vec::with_capacity(n_arms);
    while arms.len() < n_arms {
        let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let n = norm2(&v);
        if n > 1e-12 {
            arms.push(v.into_iter().map(|x| x / n).collect::<Vec<_>>());
        }
    }

    // partial Fisher-Yates for the support
    let mut coords: Vec<usize> = (0..d).collect();
    for i in 0..sparsity {
        let j = rng.random_range(i..d);
        coords.swap(i, j);
    }
    let mut theta = vec![0.0; d];
    loop {
        for &c in &coords[..sparsity] {
            theta[c] = StandardNormal.sample(&mut rng);
        }
        if norm2(&theta) > 1e-12 {
            break;
        }
    }
    let tn = norm2(&theta);
    theta.iter_mut().for_each(|v| *v /= tn);

    for a in arms.iter_mut() {
        if dot(a, &theta) < 0.0 {
            a.iter_mut().for_each(|v| *v = -*v);
        }
    }
    BanditInstance::new(ArmSet::new(d, arms)?, theta, 0.0)
}

/// On-disk instance document `{d, arms, theta_star, sigma}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceDoc {
    pub d: usize,
    pub arms: Vec<Vec<f64>>,
    pub theta_star: Vec<f64>,
    pub sigma: f64,
}

impl InstanceDoc {
    pub fn from_instance(inst: &BanditInstance<f64>) -> Self {
        Self {
            d: inst.dim(),
            arms: inst.arm_set().arms().to_vec(),
            theta_star: inst.theta_star().to_vec(),
            sigma: inst.sigma(),
        }
    }

    pub fn into_instance(self) -> Result<BanditInstance<f64>, InstanceError> {
        BanditInstance::new(ArmSet::new(self.d, self.arms)?, self.theta_star, self.sigma)
    }
}
