//! Small dense symmetric linear algebra.
//!
//! Everything here is factorization based: solves, quadratic forms and
//! log-determinants go through a Cholesky factor, never an explicit inverse.

use thiserror::Error;

use crate::real::{dot, Real};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix is not positive definite")]
    NonPositiveDefinite,
    #[error("non-finite entry encountered")]
    NonFinite,
    #[error("negative weight {0} in rank-one update")]
    NegativeWeight(f64),
}

pub type Result<T> = std::result::Result<T, NumericsError>;

/// Dense `dim × dim` symmetric matrix, stored in full row-major order.
///
/// Every mutating method writes `(i, j)` and `(j, i)` from the same computed
/// value, so symmetry holds bit-exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix<T> {
    dim: usize,
    data: Vec<T>,
}

impl<T: Real> SymMatrix<T> {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![T::zero(); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::scaled_identity(dim, T::one())
    }

    pub fn scaled_identity(dim: usize, alpha: T) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = alpha;
        }
        m
    }

    pub fn from_diag(diag: &[T]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m.data[i * diag.len() + i] = v;
        }
        m
    }

    /// Builds a matrix from rows, symmetrizing from the upper triangle.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let dim = rows.len();
        let mut m = Self::zeros(dim);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(NumericsError::DimensionMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
            for j in i..dim {
                m.set(i, j, row[j]);
            }
        }
        Ok(m)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.dim + j] = v;
        self.data[j * self.dim + i] = v;
    }

    pub fn trace(&self) -> T {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `self + w·x·xᵀ`, in place.
    pub fn rank1_update_mut(&mut self, x: &[T], w: T) -> Result<()> {
        self.check_dim(x.len())?;
        if w < T::zero() {
            return Err(NumericsError::NegativeWeight(w.to_f64_lossy()));
        }
        let n = self.dim;
        for i in 0..n {
            let wxi = w * x[i];
            for j in i..n {
                let v = self.data[i * n + j] + wxi * x[j];
                self.data[i * n + j] = v;
                self.data[j * n + i] = v;
            }
        }
        Ok(())
    }

    /// Adds `alpha` to the diagonal.
    pub fn add_diag_mut(&mut self, alpha: T) {
        for i in 0..self.dim {
            self.data[i * self.dim + i] = self.data[i * self.dim + i] + alpha;
        }
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        (0..self.dim)
            .map(|i| dot(&self.data[i * self.dim..(i + 1) * self.dim], x))
            .collect()
    }

    /// `xᵀ·self·x`
    pub fn quad_form(&self, x: &[T]) -> T {
        dot(x, &self.mul_vec(x))
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn cholesky(&self) -> Result<Cholesky<T>> {
        Cholesky::factor(self)
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.dim {
            return Err(NumericsError::DimensionMismatch {
                expected: self.dim,
                got,
            });
        }
        Ok(())
    }
}

/// Lower-triangular Cholesky factor `L` with `V = L·Lᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cholesky<T> {
    dim: usize,
    // row-major, only the lower triangle is meaningful
    l: Vec<T>,
}

impl<T: Real> Cholesky<T> {
    pub fn factor(v: &SymMatrix<T>) -> Result<Self> {
        if !v.is_finite() {
            return Err(NumericsError::NonFinite);
        }
        let n = v.dim();
        let mut l = vec![T::zero(); n * n];
        for j in 0..n {
            let mut diag = v.get(j, j);
            for k in 0..j {
                diag = diag - l[j * n + k] * l[j * n + k];
            }
            // relative floor rejects matrices that are singular up to rounding
            let scale = v.get(j, j).abs().max(T::min_positive_value());
            if !(diag > scale * T::epsilon() * T::lit(16.0)) || !diag.is_finite() {
                return Err(NumericsError::NonPositiveDefinite);
            }
            let ljj = diag.sqrt();
            l[j * n + j] = ljj;
            for i in (j + 1)..n {
                let mut s = v.get(i, j);
                for k in 0..j {
                    s = s - l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / ljj;
            }
        }
        Ok(Self { dim: n, l })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Solves `L·y = b`.
    pub fn forward(&self, b: &[T]) -> Vec<T> {
        let n = self.dim;
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s = s - self.l[i * n + k] * y[k];
            }
            y[i] = s / self.l[i * n + i];
        }
        y
    }

    /// Solves `Lᵀ·x = y`.
    pub fn backward(&self, y: &[T]) -> Vec<T> {
        let n = self.dim;
        let mut x = y.to_vec();
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in (i + 1)..n {
                s = s - self.l[k * n + i] * x[k];
            }
            x[i] = s / self.l[i * n + i];
        }
        x
    }

    pub fn solve(&self, b: &[T]) -> Result<Vec<T>> {
        if b.len() != self.dim {
            return Err(NumericsError::DimensionMismatch {
                expected: self.dim,
                got: b.len(),
            });
        }
        Ok(self.backward(&self.forward(b)))
    }

    /// `xᵀ·V⁻¹·x = ‖L⁻¹x‖²`
    pub fn inv_quad_form(&self, x: &[T]) -> T {
        let y = self.forward(x);
        dot(&y, &y)
    }

    pub fn logdet(&self) -> T {
        let n = self.dim;
        let two = T::lit(2.0);
        (0..n).map(|i| two * self.l[i * n + i].ln()).sum()
    }

    /// Updates the factor in place so that it factors `V + x·xᵀ`.
    ///
    /// Standard Givens-style sweep; O(d²), no refactorization.
    pub fn rank1_update(&mut self, x: &[T]) -> Result<()> {
        let n = self.dim;
        if x.len() != n {
            return Err(NumericsError::DimensionMismatch {
                expected: n,
                got: x.len(),
            });
        }
        let mut w = x.to_vec();
        for k in 0..n {
            let lkk = self.l[k * n + k];
            let r = lkk.hypot(w[k]);
            let c = r / lkk;
            let s = w[k] / lkk;
            self.l[k * n + k] = r;
            for i in (k + 1)..n {
                let lik = (self.l[i * n + k] + s * w[i]) / c;
                w[i] = c * w[i] - s * lik;
                self.l[i * n + k] = lik;
            }
        }
        Ok(())
    }
}

/// Result of [`solve_spd`]: the solution and the diagonal jitter, if any was needed.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdSolve<T> {
    pub x: Vec<T>,
    pub jitter: Option<T>,
}

/// Jitter added to the diagonal when a factorization fails.
pub fn jitter_for<T: Real>(v: &SymMatrix<T>) -> T {
    let d = T::from_usize_lossy(v.dim().max(1));
    T::lit(1e-10) * v.trace().abs() / d + T::lit(1e-12)
}

/// Factors `v`, retrying once with [`jitter_for`] on the diagonal.
pub fn factor_with_jitter<T: Real>(v: &SymMatrix<T>) -> Result<(Cholesky<T>, Option<T>)> {
    if !v.is_finite() {
        return Err(NumericsError::NonFinite);
    }
    match v.cholesky() {
        Ok(ch) => Ok((ch, None)),
        Err(NumericsError::NonPositiveDefinite) => {
            let j = jitter_for(v);
            let mut vj = v.clone();
            vj.add_diag_mut(j);
            Ok((vj.cholesky()?, Some(j)))
        }
        Err(e) => Err(e),
    }
}

/// `V + w·x·xᵀ`
pub fn rank1_update<T: Real>(v: &SymMatrix<T>, x: &[T], w: T) -> Result<SymMatrix<T>> {
    let mut out = v.clone();
    out.rank1_update_mut(x, w)?;
    Ok(out)
}

/// Solves `V·y = b` for symmetric positive-definite `V`, falling back to a
/// jittered factorization when `V` is singular.
pub fn solve_spd<T: Real>(v: &SymMatrix<T>, b: &[T]) -> Result<SpdSolve<T>> {
    if b.iter().any(|x| !x.is_finite()) {
        return Err(NumericsError::NonFinite);
    }
    let (ch, jitter) = factor_with_jitter(v)?;
    Ok(SpdSolve {
        x: ch.solve(b)?,
        jitter,
    })
}

/// `xᵀ·V⁻¹·x`. Fails on a singular `V`; no jitter is applied.
pub fn mahalanobis_sq<T: Real>(v: &SymMatrix<T>, x: &[T]) -> Result<T> {
    v.check_dim(x.len())?;
    Ok(v.cholesky()?.inv_quad_form(x))
}

/// Natural-log determinant of a positive-definite matrix.
pub fn logdet<T: Real>(v: &SymMatrix<T>) -> Result<T> {
    Ok(v.cholesky()?.logdet())
}
