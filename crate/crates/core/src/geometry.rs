//! John-center approximation of `conv(X)` and the sampling distribution `ρ`
//! whose mean sits at that center.
//!
//! The center is the Chebyshev center of the hull restricted to a fixed set
//! of probe directions: maximize `r` subject to `c + r·u_j ∈ conv(X)` for
//! every probe `u_j` (and `c` itself). Hull membership is never written out
//! as a halfspace list. Instead the solver alternates between a small master
//! LP over `(c, r)` and a separation LP per probe point. Each separation
//! either certifies membership or returns a hyperplane `aᵀy ≤ h(a)` valid
//! for the whole hull, which becomes one master row
//! `aᵀc + r·max(0, max_j aᵀu_j) ≤ h(a)`. The loop ends when every probe
//! point is certified.

use serde::Serialize;
use thiserror::Error;

use crate::instances::{ArmSet, BanditInstance};
use crate::lp::{LinearProgram, LpError, Sense};
use crate::real::{dot, norm2, Real};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("linear program failed: {0}")]
    LpInfeasible(#[from] LpError),
    #[error("point lies outside the convex hull (residual {0})")]
    InfeasiblePoint(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("cutting-plane loop did not converge after {0} cuts")]
    NoConvergence(usize),
}

/// Approximate John center, inscribed radius and a distribution over arms with
/// mean at the center.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JohnDistribution<T> {
    pub center: Vec<T>,
    pub radius: T,
    pub rho: Vec<T>,
}

impl<T: Real> JohnDistribution<T> {
    pub fn support(&self) -> Vec<usize> {
        self.rho
            .iter()
            .enumerate()
            .filter(|(_, p)| **p > T::zero())
            .map(|(i, _)| i)
            .collect()
    }

    /// `Σ ρ_i x_i`
    pub fn mean(&self, arms: &ArmSet<T>) -> Vec<T> {
        weighted_mean(arms, &self.rho)
    }
}

/// Default probe count, `max(50, 10·d)`.
pub fn default_n_dirs(d: usize) -> usize {
    50.max(10 * d)
}

/// Deterministic, nested, quasi-uniform unit directions in `R^d`.
///
/// The first `k` directions of `probe_directions(d, n)` equal
/// `probe_directions(d, k)` for every `k ≤ n`. In two dimensions the angles
/// follow the base-2 van der Corput sequence. In higher dimensions the
/// sequence starts with `±e_i` and continues with antipodal pairs built from
/// an additive-recurrence sequence pushed through Box–Muller.
pub fn probe_directions<T: Real>(d: usize, n: usize) -> Vec<Vec<T>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(n);
    match d {
        0 => return Vec::new(),
        1 => {
            for k in 0..n {
                out.push(vec![if k % 2 == 0 { 1.0 } else { -1.0 }]);
            }
        }
        2 => {
            for k in 0..n {
                let a = std::f64::consts::TAU * van_der_corput(k as u64);
                out.push(vec![a.cos(), a.sin()]);
            }
        }
        _ => {
            'axes: for i in 0..d {
                for s in [1.0, -1.0] {
                    if out.len() == n {
                        break 'axes;
                    }
                    let mut e = vec![0.0; d];
                    e[i] = s;
                    out.push(e);
                }
            }
            let dims = d + d % 2;
            let alpha = recurrence_alphas(dims);
            let mut k = 1u64;
            while out.len() < n {
                let u: Vec<f64> = alpha
                    .iter()
                    .map(|a| (0.5 + k as f64 * a).fract())
                    .collect();
                k += 1;
                let mut z = Vec::with_capacity(dims);
                for pair in u.chunks(2) {
                    let r = (-2.0 * pair[0].max(1e-300).ln()).sqrt();
                    let t = std::f64::consts::TAU * pair[1];
                    z.push(r * t.cos());
                    z.push(r * t.sin());
                }
                z.truncate(d);
                let nz = norm2(&z);
                if nz < 1e-12 {
                    continue;
                }
                let v: Vec<f64> = z.iter().map(|x| x / nz).collect();
                out.push(v.clone());
                if out.len() < n {
                    out.push(v.into_iter().map(|x| -x).collect());
                }
            }
        }
    }
    out.into_iter()
        .map(|v| v.into_iter().map(T::lit).collect())
        .collect()
}

fn van_der_corput(mut k: u64) -> f64 {
    let mut q = 0.0;
    let mut bk = 0.5;
    while k > 0 {
        if k & 1 == 1 {
            q += bk;
        }
        bk *= 0.5;
        k >>= 1;
    }
    q
}

// Roberts' generalized golden ratio: φ solves φ^{D+1} = φ + 1.
fn recurrence_alphas(dims: usize) -> Vec<f64> {
    let mut phi = 2.0f64;
    for _ in 0..64 {
        phi = (1.0 + phi).powf(1.0 / (dims as f64 + 1.0));
    }
    (1..=dims).map(|i| phi.powi(-(i as i32)).fract()).collect()
}

struct Cut<T> {
    a: Vec<T>,
    h: T,
}

/// Chebyshev center `(c, r)` of `conv(arms)` over `n_dirs` probe directions.
/// Returns `r = 0` with a hull point `c` when the arms do not span.
pub fn chebyshev_center<T: Real>(
    arms: &ArmSet<T>,
    n_dirs: usize,
) -> Result<(Vec<T>, T), GeometryError> {
    let d = arms.dim();
    let dirs = probe_directions::<T>(d, n_dirs);
    let mut cuts: Vec<Cut<T>> = Vec::new();
    for i in 0..d {
        for s in [T::one(), -T::one()] {
            let mut a = vec![T::zero(); d];
            a[i] = s;
            let h = support_value(arms, &a);
            cuts.push(Cut { a, h });
        }
    }
    let max_cuts = 200 * (d + 1) * (n_dirs + 1);
    loop {
        let (c, r) = solve_master(&cuts, &dirs, d)?;
        let mut added = 0;
        let mut probe = c.clone();
        for u in std::iter::once(None).chain(dirs.iter().map(Some)) {
            for k in 0..d {
                probe[k] = match u {
                    Some(u) => c[k] + r * u[k],
                    None => c[k],
                };
            }
            if let Some(cut) = separate(arms, &probe)? {
                // a cut that is already present means the master is stalling on
                // rounding; it is dropped
                if !cuts.iter().any(|q| q.a == cut.a) {
                    cuts.push(cut);
                    added += 1;
                }
            }
        }
        if added == 0 {
            return Ok((c, r.max(T::zero())));
        }
        if cuts.len() > max_cuts {
            return Err(GeometryError::NoConvergence(cuts.len()));
        }
    }
}

fn support_value<T: Real>(arms: &ArmSet<T>, a: &[T]) -> T {
    arms.iter()
        .map(|x| dot(a, x))
        .fold(T::neg_infinity(), T::max)
}

fn solve_master<T: Real>(
    cuts: &[Cut<T>],
    dirs: &[Vec<T>],
    d: usize,
) -> Result<(Vec<T>, T), GeometryError> {
    // variables: c_0..c_{d-1} (free), r ≥ 0
    let mut obj = vec![T::zero(); d + 1];
    obj[d] = T::one();
    let mut lp = LinearProgram::new(obj);
    for k in 0..d {
        lp.set_free(k);
    }
    for cut in cuts {
        let reach = dirs
            .iter()
            .map(|u| dot(&cut.a, u))
            .fold(T::zero(), T::max);
        let mut row = cut.a.clone();
        row.push(reach);
        lp.push(row, Sense::Le, cut.h);
    }
    let mut row = vec![T::zero(); d + 1];
    row[d] = T::one();
    lp.push(row, Sense::Le, T::one());
    let sol = lp.solve()?;
    let r = sol.x[d];
    let mut c = sol.x;
    c.truncate(d);
    Ok((c, r))
}

/// Returns a hull-valid cut violated by `p`, or `None` when `p ∈ conv(arms)`
/// within tolerance. Solves `max aᵀp − t` over `aᵀx_i ≤ t`, `‖a‖_∞ ≤ 1`.
fn separate<T: Real>(arms: &ArmSet<T>, p: &[T]) -> Result<Option<Cut<T>>, GeometryError> {
    let d = arms.dim();
    let mut obj: Vec<T> = p.to_vec();
    obj.push(-T::one());
    let mut lp = LinearProgram::new(obj);
    for k in 0..=d {
        lp.set_free(k);
    }
    for x in arms.iter() {
        let mut row = x.to_vec();
        row.push(-T::one());
        lp.push(row, Sense::Le, T::zero());
    }
    for k in 0..d {
        let mut row = vec![T::zero(); d + 1];
        row[k] = T::one();
        lp.push(row.clone(), Sense::Le, T::one());
        row[k] = -T::one();
        lp.push(row, Sense::Le, T::one());
    }
    let sol = lp.solve()?;
    let a: Vec<T> = sol.x[..d].to_vec();
    let h = support_value(arms, &a);
    let violation = dot(&a, p) - h;
    if violation > T::TOL {
        Ok(Some(Cut { a, h }))
    } else {
        Ok(None)
    }
}

/// `Σ ρ_i x_i`
pub fn weighted_mean<T: Real>(arms: &ArmSet<T>, rho: &[T]) -> Vec<T> {
    let mut m = vec![T::zero(); arms.dim()];
    for (x, &p) in arms.iter().zip(rho) {
        if p != T::zero() {
            for (mk, xk) in m.iter_mut().zip(x) {
                *mk = *mk + p * *xk;
            }
        }
    }
    m
}

/// Writes `c` as a convex combination of at most `d + 1` affinely independent
/// arms. Returns the weights indexed by arm.
pub fn caratheodory_distribution<T: Real>(
    arms: &ArmSet<T>,
    c: &[T],
) -> Result<Vec<T>, GeometryError> {
    let d = arms.dim();
    let n = arms.len();
    if c.len() != d {
        return Err(GeometryError::DimensionMismatch {
            expected: d,
            got: c.len(),
        });
    }
    let mut lp = LinearProgram::new(vec![T::zero(); n]);
    for k in 0..d {
        lp.push(arms.iter().map(|x| x[k]).collect(), Sense::Eq, c[k]);
    }
    lp.push(vec![T::one(); n], Sense::Eq, T::one());
    let mut rho = match lp.solve() {
        Ok(s) => s.x,
        Err(LpError::Infeasible(res)) => return Err(GeometryError::InfeasiblePoint(res)),
        Err(e) => return Err(e.into()),
    };
    normalize(&mut rho);
    reduce_support(arms, &mut rho);

    let m = weighted_mean(arms, &rho);
    let err = m
        .iter()
        .zip(c)
        .map(|(a, b)| (*a - *b).abs())
        .fold(T::zero(), T::max);
    if err > T::MEMBERSHIP_TOL * T::lit(10.0) {
        return Err(GeometryError::InfeasiblePoint(err.to_f64_lossy()));
    }
    Ok(rho)
}

fn normalize<T: Real>(rho: &mut [T]) {
    rho.iter_mut().for_each(|p| {
        if *p < T::zero() {
            *p = T::zero()
        }
    });
    let s: T = rho.iter().copied().sum();
    if s > T::zero() {
        rho.iter_mut().for_each(|p| *p = *p / s);
    }
}

/// Removes affine dependencies among the support atoms. Each step moves along
/// a null vector of `[x_i; 1]` (which keeps both the mean and the total mass)
/// until one weight hits zero.
pub fn reduce_support<T: Real>(arms: &ArmSet<T>, rho: &mut [T]) {
    loop {
        let support: Vec<usize> = (0..rho.len()).filter(|&i| rho[i] > T::zero()).collect();
        let Some(v) = affine_null_vector(arms, &support) else {
            break;
        };
        // orient so that some entry is positive
        let v = if v.iter().any(|x| *x > T::zero()) {
            v
        } else {
            v.into_iter().map(|x| -x).collect()
        };
        let mut step = (usize::MAX, T::infinity());
        for (k, &vk) in v.iter().enumerate() {
            if vk > T::zero() {
                let t = rho[support[k]] / vk;
                if t < step.1 {
                    step = (k, t);
                }
            }
        }
        for (k, &vk) in v.iter().enumerate() {
            let i = support[k];
            rho[i] = rho[i] - step.1 * vk;
            if rho[i] < T::zero() {
                rho[i] = T::zero();
            }
        }
        rho[support[step.0]] = T::zero();
    }
    normalize(rho);
}

// Null vector of the (d+1) × |S| matrix with columns [x_i; 1], if any.
fn affine_null_vector<T: Real>(arms: &ArmSet<T>, support: &[usize]) -> Option<Vec<T>> {
    let rows = arms.dim() + 1;
    let cols = support.len();
    if cols <= 1 {
        return None;
    }
    let mut m: Vec<Vec<T>> = (0..rows)
        .map(|r| {
            support
                .iter()
                .map(|&i| if r < arms.dim() { arms.arm(i)[r] } else { T::one() })
                .collect()
        })
        .collect();
    let tol = T::TOL * T::lit(10.0);
    let mut pivots: Vec<usize> = Vec::new();
    let mut row = 0;
    for col in 0..cols {
        if row == rows {
            break;
        }
        let (p, pv) = (row..rows)
            .map(|r| (r, m[r][col].abs()))
            .fold((row, T::zero()), |acc, x| if x.1 > acc.1 { x } else { acc });
        if pv <= tol {
            continue;
        }
        m.swap(row, p);
        let piv = m[row][col];
        for c in 0..cols {
            m[row][c] = m[row][c] / piv;
        }
        for r in 0..rows {
            if r != row {
                let f = m[r][col];
                if f != T::zero() {
                    for c in 0..cols {
                        m[r][c] = m[r][c] - f * m[row][c];
                    }
                }
            }
        }
        pivots.push(col);
        row += 1;
    }
    let free = (0..cols).find(|c| !pivots.contains(c))?;
    let mut v = vec![T::zero(); cols];
    v[free] = T::one();
    for (r, &pc) in pivots.iter().enumerate() {
        v[pc] = -m[r][free];
    }
    Some(v)
}

/// Center, radius and a reduced-support `ρ` with mean at the center.
pub fn john_distribution<T: Real>(
    arms: &ArmSet<T>,
    n_dirs: usize,
) -> Result<JohnDistribution<T>, GeometryError> {
    let (center, radius) = chebyshev_center(arms, n_dirs)?;
    let rho = caratheodory_distribution(arms, &center)?;
    Ok(JohnDistribution {
        center,
        radius,
        rho,
    })
}

/// `(d+1)·⟨c, θ*⟩ / μ*`; `+∞` when `μ* = 0`.
pub fn floor_ratio<T: Real>(center: &[T], theta_star: &[T], mu_star: T) -> T {
    if mu_star <= T::zero() {
        return T::infinity();
    }
    T::from_usize_lossy(center.len() + 1) * dot(center, theta_star) / mu_star
}

/// Diagnostic for the `μ*/(d+1)` welfare floor of sampling from `ρ`. A value
/// `≥ 1` means the floor holds on this instance. Uses the hidden `θ*`.
pub fn welfare_floor_check<T: Real>(dist: &JohnDistribution<T>, inst: &BanditInstance<T>) -> T {
    floor_ratio(&dist.center, inst.theta_star(), inst.mu_star())
}
