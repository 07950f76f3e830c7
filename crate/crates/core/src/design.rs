//! D-optimal experimental design over a finite arm set.
//!
//! The solver is Frank-Wolfe on `log det U(λ)`, `U(λ) = Σ λ_x x xᵀ`, with the
//! closed-form line search `γ = (g/d − 1)/(g − 1)` and Wolfe away steps that
//! shed weight from the worst support point. Away steps keep the support
//! small; without them the plain iteration leaves a long tail of tiny weights.

use serde::Serialize;
use thiserror::Error;

use crate::instances::ArmSet;
use crate::numerics::{Cholesky, SymMatrix};
use crate::real::{dot, Real};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DesignError<T: Real> {
    #[error("arm set does not span R^d")]
    NonSpanningArmSet,
    #[error("design matrix is singular")]
    SingularDesign,
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("eps must be positive")]
    InvalidEps,
    #[error("Frank-Wolfe did not reach the tolerance within the iteration budget")]
    IterationBudgetExceeded(Box<DesignWeights<T>>),
}

/// Distribution over arms together with its G-optimal value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignWeights<T> {
    pub weights: Vec<T>,
    pub g_value: T,
    pub iterations_used: usize,
}

impl<T: Real> DesignWeights<T> {
    /// Indices with positive weight, ascending.
    pub fn support(&self) -> Vec<usize> {
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, w)| **w > T::zero())
            .map(|(i, _)| i)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignOptions<T> {
    pub eps: T,
    /// `None` means `1000·d`.
    pub max_iters: Option<usize>,
    pub prune_threshold: T,
}

impl<T: Real> Default for DesignOptions<T> {
    fn default() -> Self {
        Self {
            eps: T::lit(0.01),
            max_iters: None,
            prune_threshold: T::lit(1e-6),
        }
    }
}

impl<T: Real> DesignOptions<T> {
    pub fn with_eps(eps: T) -> Self {
        Self {
            eps,
            ..Self::default()
        }
    }
}

/// Solves the D-optimal design problem. See [`d_optimal_design_with`].
pub fn d_optimal_design<T: Real>(
    arms: &ArmSet<T>,
    eps: T,
    max_iters: usize,
) -> Result<DesignWeights<T>, DesignError<T>> {
    let opts = DesignOptions {
        eps,
        max_iters: Some(max_iters),
        ..DesignOptions::default()
    };
    d_optimal_design_with(arms, &opts, None)
}

/// Frank-Wolfe with away steps. When `history` is given, `log det U(λ_k)` is
/// pushed for every iterate (including the initial one).
pub fn d_optimal_design_with<T: Real>(
    arms: &ArmSet<T>,
    opts: &DesignOptions<T>,
    mut history: Option<&mut Vec<T>>,
) -> Result<DesignWeights<T>, DesignError<T>> {
    if !(opts.eps > T::zero()) {
        return Err(DesignError::InvalidEps);
    }
    let d = arms.dim();
    let n = arms.len();
    let df = T::from_usize_lossy(d);
    let target = df * (T::one() + opts.eps);
    let max_iters = opts.max_iters.unwrap_or(1000 * d);

    let init = spanning_subset(arms).ok_or(DesignError::NonSpanningArmSet)?;
    let mut w = vec![T::zero(); n];
    let share = T::one() / df;
    let mut u = SymMatrix::zeros(d);
    for &i in &init {
        w[i] = share;
        u.rank1_update_mut(arms.arm(i), share)
            .expect("arm dimension checked by ArmSet");
    }

    let mut best: Option<DesignWeights<T>> = None;
    let mut g = vec![T::zero(); n];
    for it in 0..=max_iters {
        let ch = match u.cholesky() {
            Ok(ch) => ch,
            Err(_) if it == 0 => return Err(DesignError::NonSpanningArmSet),
            Err(_) => return Err(DesignError::SingularDesign),
        };
        if let Some(h) = history.as_deref_mut() {
            h.push(ch.logdet());
        }
        variances(arms, &ch, &mut g);
        let (j_plus, g_max) = argmax_lowest(&g);

        if best.as_ref().is_none_or(|b| g_max < b.g_value) {
            best = Some(DesignWeights {
                weights: w.clone(),
                g_value: g_max,
                iterations_used: it,
            });
        }

        if g_max <= target {
            if let Some(pruned) = prune(arms, &w, opts.prune_threshold, it) {
                if pruned.g_value <= target {
                    return Ok(pruned);
                }
            }
        }
        if it == max_iters {
            break;
        }

        let (j_minus, g_min) = argmin_on_support(&g, &w);
        let fw_gap = g_max - df;
        let away_gap = df - g_min;
        let (j, gamma) = if away_gap > fw_gap && w[j_minus] < T::one() {
            let wj = w[j_minus];
            let floor = -wj / (T::one() - wj);
            let line = if g_min > T::one() {
                (g_min / df - T::one()) / (g_min - T::one())
            } else {
                T::neg_infinity()
            };
            (j_minus, line.max(floor))
        } else {
            (j_plus, (g_max / df - T::one()) / (g_max - T::one()))
        };
        step(arms, &mut w, &mut u, j, gamma);
    }
    let best = best.expect("at least one iterate");
    Err(DesignError::IterationBudgetExceeded(Box::new(best)))
}

fn step<T: Real>(arms: &ArmSet<T>, w: &mut [T], u: &mut SymMatrix<T>, j: usize, gamma: T) {
    let keep = T::one() - gamma;
    for wi in w.iter_mut() {
        *wi = *wi * keep;
    }
    w[j] = w[j] + gamma;
    // drop steps land exactly on zero
    if w[j] < T::zero() || (gamma < T::zero() && w[j] <= T::epsilon()) {
        w[j] = T::zero();
    }
    let x = arms.arm(j);
    let dim = u.dim();
    for r in 0..dim {
        for c in r..dim {
            u.set(r, c, u.get(r, c) * keep + gamma * x[r] * x[c]);
        }
    }
}

fn prune<T: Real>(
    arms: &ArmSet<T>,
    w: &[T],
    threshold: T,
    it: usize,
) -> Option<DesignWeights<T>> {
    let mut pruned: Vec<T> = w
        .iter()
        .map(|&x| if x < threshold { T::zero() } else { x })
        .collect();
    let total: T = pruned.iter().copied().sum();
    pruned.iter_mut().for_each(|x| *x = *x / total);
    let g = g_value(arms, &pruned).ok()?;
    Some(DesignWeights {
        weights: pruned,
        g_value: g,
        iterations_used: it,
    })
}

fn variances<T: Real>(arms: &ArmSet<T>, ch: &Cholesky<T>, out: &mut [T]) {
    for (o, x) in out.iter_mut().zip(arms.iter()) {
        *o = ch.inv_quad_form(x);
    }
}

fn argmax_lowest<T: Real>(v: &[T]) -> (usize, T) {
    let mut best = (0, v[0]);
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > best.1 {
            best = (i, x);
        }
    }
    best
}

fn argmin_on_support<T: Real>(g: &[T], w: &[T]) -> (usize, T) {
    let mut best = (usize::MAX, T::infinity());
    for (i, (&gi, &wi)) in g.iter().zip(w).enumerate() {
        if wi > T::zero() && gi < best.1 {
            best = (i, gi);
        }
    }
    best
}

/// Design matrix `U(λ) = Σ λ_i x_i x_iᵀ`.
pub fn design_matrix<T: Real>(arms: &ArmSet<T>, weights: &[T]) -> SymMatrix<T> {
    let mut u = SymMatrix::zeros(arms.dim());
    for (x, &wi) in arms.iter().zip(weights) {
        if wi > T::zero() {
            u.rank1_update_mut(x, wi).expect("dimension checked");
        }
    }
    u
}

/// `max_x xᵀ U(λ)⁻¹ x`.
pub fn g_value<T: Real>(arms: &ArmSet<T>, weights: &[T]) -> Result<T, DesignError<T>> {
    if weights.len() != arms.len() {
        return Err(DesignError::InvalidWeights(format!(
            "{} weights for {} arms",
            weights.len(),
            arms.len()
        )));
    }
    if weights.iter().any(|w| !(*w >= T::zero()) || !w.is_finite()) {
        return Err(DesignError::InvalidWeights("negative or non-finite".into()));
    }
    let total: T = weights.iter().copied().sum();
    if (total - T::one()).abs() > T::lit(1e-6) {
        return Err(DesignError::InvalidWeights(format!("sum {total} != 1")));
    }
    let ch = design_matrix(arms, weights)
        .cholesky()
        .map_err(|_| DesignError::SingularDesign)?;
    Ok(arms
        .iter()
        .map(|x| ch.inv_quad_form(x))
        .fold(T::neg_infinity(), T::max))
}

/// `(arm, ⌈λ_z·T̃/3⌉)` for every support arm, by ascending index.
pub fn round_robin_schedule<T: Real>(weights: &[T], t_tilde: usize) -> Vec<(usize, usize)> {
    let tt = T::from_usize_lossy(t_tilde);
    let three = T::lit(3.0);
    weights
        .iter()
        .enumerate()
        .filter(|(_, w)| **w > T::zero())
        .map(|(i, &w)| (i, ceil_count(w * tt / three)))
        .collect()
}

/// Ceiling that ignores rounding noise just above an integer, so that
/// e.g. `(1/3)·9/3` counts as 1 rather than 2.
pub(crate) fn ceil_count<T: Real>(v: T) -> usize {
    let slack = T::lit(1e-9) * v.abs().max(T::one());
    (v - slack).ceil().max(T::zero()).to_usize().unwrap_or(0)
}

/// Greedy pivoted selection of `d` arms with the largest residual norm after
/// projecting out the arms already chosen. `None` if the arms do not span.
pub fn spanning_subset<T: Real>(arms: &ArmSet<T>) -> Option<Vec<usize>> {
    let basis = pivoted_basis(arms)?;
    (basis.0.len() == arms.dim()).then_some(basis.0)
}

// Returns the pivot indices and the orthonormal basis they generate, stopping
// when no arm has a residual above tolerance.
fn pivoted_basis<T: Real>(arms: &ArmSet<T>) -> Option<(Vec<usize>, Vec<Vec<T>>)> {
    let d = arms.dim();
    let scale = arms
        .iter()
        .map(|x| dot(x, x).sqrt())
        .fold(T::zero(), T::max);
    if !(scale > T::zero()) {
        return Some((Vec::new(), Vec::new()));
    }
    let tol = T::TOL * T::lit(10.0) * scale;
    let mut residuals: Vec<Vec<T>> = arms.iter().map(|x| x.to_vec()).collect();
    let mut picked = Vec::new();
    let mut basis: Vec<Vec<T>> = Vec::new();
    while basis.len() < d {
        let mut best = (usize::MAX, tol);
        for (i, r) in residuals.iter().enumerate() {
            let nr = dot(r, r).sqrt();
            if nr > best.1 {
                best = (i, nr);
            }
        }
        if best.0 == usize::MAX {
            break;
        }
        let q: Vec<T> = residuals[best.0].iter().map(|v| *v / best.1).collect();
        for r in residuals.iter_mut() {
            let c = dot(r, &q);
            for (rv, qv) in r.iter_mut().zip(&q) {
                *rv = *rv - c * *qv;
            }
        }
        picked.push(best.0);
        basis.push(q);
    }
    Some((picked, basis))
}

/// Orthonormal basis (rows) of the linear span of `arms`.
pub fn orthonormal_span<T: Real>(arms: &ArmSet<T>) -> Vec<Vec<T>> {
    pivoted_basis(arms).map(|b| b.1).unwrap_or_default()
}

/// Coordinates of `x` in an orthonormal `basis`.
pub fn project<T: Real>(basis: &[Vec<T>], x: &[T]) -> Vec<T> {
    basis.iter().map(|q| dot(q, x)).collect()
}

/// Inverse of [`project`] for vectors inside the span.
pub fn lift<T: Real>(basis: &[Vec<T>], y: &[T], dim: usize) -> Vec<T> {
    let mut out = vec![T::zero(); dim];
    for (q, &c) in basis.iter().zip(y) {
        for (o, qv) in out.iter_mut().zip(q) {
            *o = *o + c * *qv;
        }
    }
    out
}

/// A design solved inside the linear span of a (possibly rank-deficient) arm set.
#[derive(Debug, Clone, PartialEq)]
pub struct SpanDesign<T> {
    /// Orthonormal basis rows of the span, `k × d`.
    pub basis: Vec<Vec<T>>,
    /// Arms expressed in basis coordinates.
    pub projected: ArmSet<T>,
    pub design: DesignWeights<T>,
}

/// Projects the arms onto their span, solves the design there, and keeps the
/// basis so that estimates can be lifted back. A budget overrun falls back
/// to the best iterate.
pub fn design_in_span<T: Real>(
    arms: &ArmSet<T>,
    opts: &DesignOptions<T>,
) -> Result<SpanDesign<T>, DesignError<T>> {
    let basis = orthonormal_span(arms);
    if basis.is_empty() {
        return Err(DesignError::NonSpanningArmSet);
    }
    let projected = ArmSet::new(
        basis.len(),
        arms.iter().map(|x| project(&basis, x)).collect(),
    )
    .map_err(|e| DesignError::InvalidWeights(e.to_string()))?;
    let design = match d_optimal_design_with(&projected, opts, None) {
        Ok(w) => w,
        Err(DesignError::IterationBudgetExceeded(best)) => *best,
        Err(e) => return Err(e),
    };
    Ok(SpanDesign {
        basis,
        projected,
        design,
    })
}
