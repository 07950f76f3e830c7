//! Dense two-phase simplex for the small linear programs in [`crate::geometry`].
//!
//! Problems are stated as `maximize cᵀx` subject to rows `aᵢᵀx {≤,=,≥} bᵢ`,
//! with every variable either non-negative or free. Free variables are split
//! internally. Pricing is Dantzig's rule, switching to Bland's rule after a
//! run of degenerate pivots so the method cannot cycle.

use thiserror::Error;

use crate::real::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("linear program is infeasible (phase-one residual {0})")]
    Infeasible(f64),
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("simplex iteration limit reached")]
    IterationLimit,
    #[error("malformed linear program: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint<T> {
    pub coeffs: Vec<T>,
    pub sense: Sense,
    pub rhs: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram<T> {
    pub objective: Vec<T>,
    pub free: Vec<bool>,
    pub constraints: Vec<Constraint<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution<T> {
    pub x: Vec<T>,
    pub objective: T,
}

impl<T: Real> LinearProgram<T> {
    /// All variables non-negative.
    pub fn new(objective: Vec<T>) -> Self {
        let n = objective.len();
        Self {
            objective,
            free: vec![false; n],
            constraints: Vec::new(),
        }
    }

    pub fn set_free(&mut self, var: usize) {
        self.free[var] = true;
    }

    pub fn push(&mut self, coeffs: Vec<T>, sense: Sense, rhs: T) {
        self.constraints.push(Constraint { coeffs, sense, rhs });
    }

    pub fn solve(&self) -> Result<LpSolution<T>, LpError> {
        let n = self.objective.len();
        if self.free.len() != n {
            return Err(LpError::Malformed("free flags length".into()));
        }
        // column map: original var -> (plus col, Option<minus col>)
        let mut cols = Vec::with_capacity(n);
        let mut next = 0;
        for &f in &self.free {
            if f {
                cols.push((next, Some(next + 1)));
                next += 2;
            } else {
                cols.push((next, None));
                next += 1;
            }
        }
        let n_struct = next;
        let expand = |v: &[T]| -> Vec<T> {
            let mut out = vec![T::zero(); n_struct];
            for (j, &(p, m)) in cols.iter().enumerate() {
                out[p] = v[j];
                if let Some(m) = m {
                    out[m] = -v[j];
                }
            }
            out
        };
        let mut rows = Vec::with_capacity(self.constraints.len());
        for c in &self.constraints {
            if c.coeffs.len() != n {
                return Err(LpError::Malformed("constraint length".into()));
            }
            if !c.rhs.is_finite() || c.coeffs.iter().any(|v| !v.is_finite()) {
                return Err(LpError::Malformed("non-finite coefficient".into()));
            }
            rows.push((expand(&c.coeffs), c.sense, c.rhs));
        }
        let obj = expand(&self.objective);
        let z = Tableau::solve(obj, rows)?;
        let x = cols
            .iter()
            .map(|&(p, m)| match m {
                Some(m) => z.x[p] - z.x[m],
                None => z.x[p],
            })
            .collect();
        Ok(LpSolution {
            x,
            objective: z.objective,
        })
    }
}

struct Tableau<T> {
    m: usize,
    // columns: structural | slack/surplus | artificial, then rhs
    width: usize,
    a: Vec<T>,
    basis: Vec<usize>,
    art_start: usize,
}

impl<T: Real> Tableau<T> {
    #[inline]
    fn at(&self, r: usize, c: usize) -> T {
        self.a[r * (self.width + 1) + c]
    }

    #[inline]
    fn rhs(&self, r: usize) -> T {
        self.a[r * (self.width + 1) + self.width]
    }

    fn solve(obj: Vec<T>, rows: Vec<(Vec<T>, Sense, T)>) -> Result<LpSolution<T>, LpError> {
        let n_struct = obj.len();
        let m = rows.len();
        let mut rows = rows;
        for (coeffs, sense, rhs) in rows.iter_mut() {
            if *rhs < T::zero() {
                coeffs.iter_mut().for_each(|v| *v = -*v);
                *rhs = -*rhs;
                *sense = match *sense {
                    Sense::Le => Sense::Ge,
                    Sense::Ge => Sense::Le,
                    Sense::Eq => Sense::Eq,
                };
            }
        }
        let n_slack = rows.iter().filter(|r| r.1 != Sense::Eq).count();
        let n_art = rows.iter().filter(|r| r.1 != Sense::Le).count();
        let art_start = n_struct + n_slack;
        let width = art_start + n_art;
        let mut t = Tableau {
            m,
            width,
            a: vec![T::zero(); m * (width + 1)],
            basis: vec![0; m],
            art_start,
        };
        let (mut s, mut art) = (n_struct, art_start);
        for (r, (coeffs, sense, rhs)) in rows.into_iter().enumerate() {
            let base = r * (width + 1);
            t.a[base..base + n_struct].copy_from_slice(&coeffs);
            t.a[base + width] = rhs;
            match sense {
                Sense::Le => {
                    t.a[base + s] = T::one();
                    t.basis[r] = s;
                    s += 1;
                }
                Sense::Ge => {
                    t.a[base + s] = -T::one();
                    s += 1;
                    t.a[base + art] = T::one();
                    t.basis[r] = art;
                    art += 1;
                }
                Sense::Eq => {
                    t.a[base + art] = T::one();
                    t.basis[r] = art;
                    art += 1;
                }
            }
        }

        if n_art > 0 {
            let mut phase1 = vec![T::zero(); width];
            for c in art_start..width {
                phase1[c] = -T::one();
            }
            let val = t.optimize(&phase1, width)?;
            let scale = t.rhs_scale();
            if val < -T::TOL * scale {
                return Err(LpError::Infeasible(-val.to_f64_lossy()));
            }
            t.drive_out_artificials();
        }
        let mut full_obj = obj;
        full_obj.resize(width, T::zero());
        let objective = t.optimize(&full_obj, t.art_start)?;
        let mut x = vec![T::zero(); n_struct];
        for (r, &b) in t.basis.iter().enumerate() {
            if b < n_struct {
                x[b] = t.rhs(r).max(T::zero());
            }
        }
        Ok(LpSolution { x, objective })
    }

    fn rhs_scale(&self) -> T {
        (0..self.m)
            .map(|r| self.rhs(r).abs())
            .fold(T::one(), T::max)
    }

    /// Maximizes `obj` over columns `< allowed`. Returns the optimal value.
    fn optimize(&mut self, obj: &[T], allowed: usize) -> Result<T, LpError> {
        let tol = T::TOL;
        let max_iter = 50 * (self.m + self.width) + 1000;
        let mut degenerate_run = 0usize;
        for _ in 0..max_iter {
            // reduced costs c_j - c_Bᵀ B⁻¹ a_j
            let mut enter = None;
            let mut best = tol;
            let bland = degenerate_run > 50;
            for j in 0..allowed {
                if self.basis.contains(&j) {
                    continue;
                }
                let mut rc = obj[j];
                for r in 0..self.m {
                    let cb = obj[self.basis[r]];
                    if cb != T::zero() {
                        rc = rc - cb * self.at(r, j);
                    }
                }
                if rc > best {
                    enter = Some(j);
                    if bland {
                        break;
                    }
                    best = rc;
                }
            }
            let Some(j) = enter else {
                let mut val = T::zero();
                for r in 0..self.m {
                    val = val + obj[self.basis[r]] * self.rhs(r);
                }
                return Ok(val);
            };
            let mut leave: Option<(usize, T)> = None;
            for r in 0..self.m {
                let arj = self.at(r, j);
                if arj > tol {
                    let ratio = self.rhs(r) / arj;
                    match leave {
                        None => leave = Some((r, ratio)),
                        Some((lr, lv)) => {
                            if ratio < lv - tol
                                || (ratio <= lv + tol && self.basis[r] < self.basis[lr])
                            {
                                leave = Some((r, ratio));
                            }
                        }
                    }
                }
            }
            let Some((r, ratio)) = leave else {
                return Err(LpError::Unbounded);
            };
            if ratio <= tol {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            self.pivot(r, j);
        }
        Err(LpError::IterationLimit)
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let w = self.width + 1;
        let p = self.at(r, j);
        for c in 0..w {
            self.a[r * w + c] = self.a[r * w + c] / p;
        }
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.at(i, j);
            if f == T::zero() {
                continue;
            }
            for c in 0..w {
                let v = self.a[r * w + c];
                if v != T::zero() {
                    self.a[i * w + c] = self.a[i * w + c] - f * v;
                }
            }
            self.a[i * w + j] = T::zero();
        }
        self.basis[r] = j;
    }

    fn drive_out_artificials(&mut self) {
        let mut r = 0;
        while r < self.m {
            if self.basis[r] >= self.art_start {
                let col = (0..self.art_start)
                    .filter(|c| !self.basis.contains(c))
                    .max_by(|&a, &b| {
                        self.at(r, a)
                            .abs()
                            .partial_cmp(&self.at(r, b).abs())
                            .unwrap_or(std::cmp::Ordering::Equal)
                    });
                match col {
                    Some(c) if self.at(r, c).abs() > T::TOL => self.pivot(r, c),
                    _ => {
                        // redundant row
                        self.remove_row(r);
                        continue;
                    }
                }
            }
            r += 1;
        }
    }

    fn remove_row(&mut self, r: usize) {
        let w = self.width + 1;
        self.a.drain(r * w..(r + 1) * w);
        self.basis.remove(r);
        self.m -= 1;
    }
}
