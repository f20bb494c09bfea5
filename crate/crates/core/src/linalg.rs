//! Dense symmetric positive-definite linear algebra.
//!
//! Matrices are stored row-major in a flat `Vec<f64>`. Everything that
//! touches a determinant works with `ln L_ii` sums; `det Σ` itself is never
//! formed because it underflows once `n` reaches a few hundred.

use std::ops::{Index, IndexMut};

use serde::Serialize;

use crate::error::{Error, Result};

/// Default bound on `max |ΣΣ⁻¹ − I|` before an inverse is trusted.
pub const DEFAULT_RESIDUAL_TOLERANCE: f64 = 1e-3;

/// Square dense matrix, row-major.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Ok(Self { n, data })
    }

    pub fn from_row_major(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::DimensionMismatch(format!(
                "{} values cannot fill a {n}x{n} matrix",
                data.len()
            )));
        }
        Ok(Self { n, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.row(i).to_vec()).collect()
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.n, other.n, "matmul shape mismatch");
        let n = self.n;
        let mut out = Matrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let src = other.row(k);
                let dst = &mut out.data[i * n..(i + 1) * n];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += a * s;
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self[(i, i)]).sum()
    }

    /// `xᵀ M x`, accumulated row by row.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.n);
        let mut total = 0.0;
        for (i, xi) in x.iter().enumerate() {
            let inner: f64 = self.row(i).iter().zip(x).map(|(a, b)| a * b).sum();
            total += xi * inner;
        }
        total
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| self[(i, j)] == self[(j, i)]))
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

/// Symmetric kernel matrix Σ.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct CovarianceMatrix(Matrix);

impl CovarianceMatrix {
    /// Wraps a matrix, rejecting anything that is not exactly symmetric.
    pub fn new(m: Matrix) -> Result<Self> {
        if m.n() == 0 {
            return Err(Error::InvalidArgument(
                "covariance matrix must be at least 1x1".into(),
            ));
        }
        if !m.is_symmetric() {
            return Err(Error::InvalidArgument(
                "covariance matrix is not symmetric".into(),
            ));
        }
        Ok(Self(m))
    }

    pub fn identity(n: usize) -> Self {
        Self(Matrix::identity(n))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(Matrix::from_rows(rows)?)
    }

    /// Bivariate correlation matrix `[[1, ρ], [ρ, 1]]`.
    pub fn bivariate(rho: f64) -> Self {
        Self(Matrix {
            n: 2,
            data: vec![1.0, rho, rho, 1.0],
        })
    }

    pub fn n(&self) -> usize {
        self.0.n()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    /// Returns `Σ + εI`. Only reached through an explicit opt-in.
    pub fn with_jitter(&self, epsilon: f64) -> Self {
        let mut m = self.0.clone();
        for i in 0..m.n() {
            m[(i, i)] += epsilon;
        }
        Self(m)
    }

    pub fn has_unit_diagonal(&self) -> bool {
        (0..self.n()).all(|i| self.0[(i, i)] == 1.0)
    }
}

impl Index<(usize, usize)> for CovarianceMatrix {
    type Output = f64;

    fn index(&self, idx: (usize, usize)) -> &f64 {
        &self.0[idx]
    }
}

/// Lower-triangular `L` with `LLᵀ = Σ`.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    lower: Matrix,
    log_diag: Vec<f64>,
    inverse_residual: Option<f64>,
}

impl CholeskyFactor {
    pub fn lower(&self) -> &Matrix {
        &self.lower
    }

    pub fn log_diag(&self) -> &[f64] {
        &self.log_diag
    }

    pub fn n(&self) -> usize {
        self.lower.n()
    }

    /// `‖ΣΣ⁻¹ − I‖` (max entry), available once [`inverse_from_cholesky`] ran.
    pub fn inverse_residual(&self) -> Option<f64> {
        self.inverse_residual
    }

    /// `ln det Σ = 2 Σ ln L_ii`.
    pub fn log_det(&self) -> f64 {
        2.0 * self.log_diag.iter().sum::<f64>()
    }

    /// Reconstructs `LLᵀ`.
    pub fn reconstruct(&self) -> Matrix {
        self.lower.matmul(&self.lower.transpose())
    }
}

/// Cholesky–Banachiewicz factorisation.
pub fn cholesky(sigma: &CovarianceMatrix) -> Result<CholeskyFactor> {
    let a = sigma.matrix();
    let n = a.n();
    let mut l = Matrix::zeros(n);
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            if i == j {
                if !(s > 0.0) {
                    return Err(Error::NotPositiveDefinite { index: i, pivot: s });
                }
                l[(i, i)] = s.sqrt();
            } else {
                l[(i, j)] = s / l[(j, j)];
            }
        }
    }
    let log_diag = (0..n).map(|i| l[(i, i)].ln()).collect();
    Ok(CholeskyFactor {
        lower: l,
        log_diag,
        inverse_residual: None,
    })
}

/// Inverse of the lower factor by forward substitution, column by column.
fn lower_inverse(l: &Matrix) -> Matrix {
    let n = l.n();
    let mut inv = Matrix::zeros(n);
    for col in 0..n {
        inv[(col, col)] = 1.0 / l[(col, col)];
        for i in col + 1..n {
            let mut s = 0.0;
            for k in col..i {
                s -= l[(i, k)] * inv[(k, col)];
            }
            inv[(i, col)] = s / l[(i, i)];
        }
    }
    inv
}

/// Max absolute entry of `ΣΣ⁻¹ − I`.
pub fn inverse_residual(sigma: &Matrix, sigma_inv: &Matrix) -> f64 {
    let mut product = sigma.matmul(sigma_inv);
    for i in 0..product.n() {
        product[(i, i)] -= 1.0;
    }
    product.max_abs()
}

/// `Σ⁻¹ = (L⁻¹)ᵀ L⁻¹`, recording the inverse residual on the factor.
pub fn inverse_from_cholesky(factor: &mut CholeskyFactor, sigma: &CovarianceMatrix) -> Matrix {
    let linv = lower_inverse(&factor.lower);
    let n = linv.n();
    let mut inv = Matrix::zeros(n);
    for i in 0..n {
        for j in i..n {
            // L⁻¹ is lower triangular, so only rows k ≥ j contribute.
            let mut s = 0.0;
            for k in j..n {
                s += linv[(k, i)] * linv[(k, j)];
            }
            inv[(i, j)] = s;
            inv[(j, i)] = s;
        }
    }
    factor.inverse_residual = Some(inverse_residual(sigma.matrix(), &inv));
    inv
}

/// `ⁿ√det Σ = exp((2/n) Σ ln L_ii)`.
pub fn normalized_det_root(factor: &CholeskyFactor) -> f64 {
    let n = factor.n() as f64;
    (2.0 / n * factor.log_diag.iter().sum::<f64>()).exp()
}

/// True iff every entry of `ΣΣ⁻¹ − I` is below `tol` in absolute value.
pub fn residual_check(sigma: &CovarianceMatrix, sigma_inv: &Matrix, tol: f64) -> Result<bool> {
    if sigma.n() != sigma_inv.n() {
        return Err(Error::DimensionMismatch(format!(
            "Σ is {0}x{0} but Σ⁻¹ is {1}x{1}",
            sigma.n(),
            sigma_inv.n()
        )));
    }
    Ok(inverse_residual(sigma.matrix(), sigma_inv) < tol)
}
