//! Small dense linear algebra used by the regression-based tests.
//!
//! Everything here is sized for econometric auxiliary regressions (a few
//! hundred rows, a handful of columns), so plain row-major storage and
//! textbook algorithms are adequate.

use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LinalgError {
    #[error("matrix is rank deficient (column {column})")]
    RankDeficient { column: usize },
    #[error("matrix is not positive definite (pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },
    #[error("dimension mismatch: {0}")]
    Shape(String),
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from row-major storage.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self, LinalgError> {
        if data.len() != rows * cols {
            return Err(LinalgError::Shape(format!(
                "{} elements for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Stacks equal-length columns side by side.
    pub fn from_columns(columns: &[&[T]]) -> Result<Self, LinalgError> {
        let rows = columns.first().map_or(0, |c| c.len());
        if columns.iter().any(|c| c.len() != rows) {
            return Err(LinalgError::Shape("columns of unequal length".into()));
        }
        Ok(Self::from_fn(rows, columns.len(), |i, j| columns[j][i]))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Self) -> Result<Self, LinalgError> {
        if self.cols != other.rows {
            return Err(LinalgError::Shape(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ · other / divisor`, the moment-matrix building block.
    pub fn cross(&self, other: &Self, divisor: T) -> Result<Self, LinalgError> {
        if self.rows != other.rows {
            return Err(LinalgError::Shape("cross product of unequal row counts".into()));
        }
        let mut out = Self::zeros(self.cols, other.cols);
        for t in 0..self.rows {
            for i in 0..self.cols {
                let a = self[(t, i)];
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(t, j)];
                }
            }
        }
        out.data.iter_mut().for_each(|v| *v /= divisor);
        Ok(out)
    }

    /// Concatenates columns of `self` and `other`.
    pub fn hstack(&self, other: &Self) -> Result<Self, LinalgError> {
        if self.rows != other.rows {
            return Err(LinalgError::Shape("hstack of unequal row counts".into()));
        }
        Ok(Self::from_fn(self.rows, self.cols + other.cols, |i, j| {
            if j < self.cols {
                self[(i, j)]
            } else {
                other[(i, j - self.cols)]
            }
        }))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;

    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// Householder QR factorization of a tall matrix.
#[derive(Debug, Clone)]
pub struct Qr<T> {
    /// Householder vectors below the diagonal, R on and above it.
    packed: Matrix<T>,
    /// Householder scalars.
    betas: Vec<T>,
}

impl<T: Scalar> Qr<T> {
    /// Factors `x`, failing if any column is numerically dependent on the
    /// preceding ones (|R_jj| below the rank tolerance times the column norm).
    pub fn new(x: &Matrix<T>) -> Result<Self, LinalgError> {
        let (n, k) = (x.rows, x.cols);
        if n < k {
            return Err(LinalgError::Shape(format!("{n} rows for {k} regressors")));
        }
        let tol = T::rank_tolerance();
        let norms: Vec<T> = (0..k)
            .map(|j| (0..n).map(|i| x[(i, j)] * x[(i, j)]).sum::<T>().sqrt())
            .collect();
        let mut a = x.clone();
        let mut betas = Vec::with_capacity(k);
        for j in 0..k {
            let sigma: T = (j..n).map(|i| a[(i, j)] * a[(i, j)]).sum::<T>().sqrt();
            if !(sigma > tol * norms[j]) {
                return Err(LinalgError::RankDeficient { column: j });
            }
            let alpha = if a[(j, j)] > T::zero() { -sigma } else { sigma };
            let v0 = a[(j, j)] - alpha;
            // v = (v0, a[j+1..n, j]) scaled so v[0] = 1
            for i in (j + 1)..n {
                a[(i, j)] /= v0;
            }
            let beta = -v0 / alpha;
            a[(j, j)] = alpha;
            for c in (j + 1)..k {
                let mut dot = a[(j, c)];
                for i in (j + 1)..n {
                    dot += a[(i, j)] * a[(i, c)];
                }
                let s = beta * dot;
                a[(j, c)] -= s;
                for i in (j + 1)..n {
                    let vi = a[(i, j)];
                    a[(i, c)] -= s * vi;
                }
            }
            betas.push(beta);
        }
        Ok(Self { packed: a, betas })
    }

    fn apply_qt(&self, y: &mut [T]) {
        let n = self.packed.rows;
        for (j, &beta) in self.betas.iter().enumerate() {
            let mut dot = y[j];
            for i in (j + 1)..n {
                dot += self.packed[(i, j)] * y[i];
            }
            let s = beta * dot;
            y[j] -= s;
            for i in (j + 1)..n {
                y[i] -= s * self.packed[(i, j)];
            }
        }
    }

    /// Least-squares coefficients for a single response.
    pub fn solve(&self, y: &[T]) -> Vec<T> {
        let k = self.betas.len();
        let mut qty = y.to_vec();
        self.apply_qt(&mut qty);
        let mut coef = vec![T::zero(); k];
        for i in (0..k).rev() {
            let mut acc = qty[i];
            for j in (i + 1)..k {
                acc -= self.packed[(i, j)] * coef[j];
            }
            coef[i] = acc / self.packed[(i, i)];
        }
        coef
    }

    /// Diagonal of (XᵀX)⁻¹ = R⁻¹R⁻ᵀ.
    pub fn xtx_inverse_diagonal(&self) -> Vec<T> {
        let k = self.betas.len();
        // Columns of R⁻¹ by back substitution.
        let mut rinv = Matrix::<T>::zeros(k, k);
        for c in 0..k {
            for i in (0..=c).rev() {
                let mut acc = if i == c { T::one() } else { T::zero() };
                for j in (i + 1)..=c {
                    acc -= self.packed[(i, j)] * rinv[(j, c)];
                }
                rinv[(i, c)] = acc / self.packed[(i, i)];
            }
        }
        (0..k)
            .map(|i| (i..k).map(|c| rinv[(i, c)] * rinv[(i, c)]).sum())
            .collect()
    }
}

/// Ordinary least-squares fit of one response.
#[derive(Debug, Clone)]
pub struct LeastSquares<T> {
    pub coef: Vec<T>,
    pub residuals: Vec<T>,
    pub ssr: T,
    /// Standard errors of the coefficients under homoskedastic errors.
    pub std_errors: Vec<T>,
}

pub fn least_squares<T: Scalar>(x: &Matrix<T>, y: &[T]) -> Result<LeastSquares<T>, LinalgError> {
    if x.rows != y.len() {
        return Err(LinalgError::Shape(format!("{} rows vs {} responses", x.rows, y.len())));
    }
    let qr = Qr::new(x)?;
    let coef = qr.solve(y);
    let residuals: Vec<T> = (0..x.rows)
        .map(|i| y[i] - x.row(i).iter().zip(&coef).map(|(&a, &b)| a * b).sum::<T>())
        .collect();
    let ssr: T = residuals.iter().map(|&e| e * e).sum();
    let dof = x.rows.saturating_sub(x.cols);
    let sigma2 = if dof > 0 { ssr / T::from_usize_lossy(dof) } else { T::nan() };
    let std_errors = qr
        .xtx_inverse_diagonal()
        .into_iter()
        .map(|d| (sigma2 * d).sqrt())
        .collect();
    Ok(LeastSquares { coef, residuals, ssr, std_errors })
}

/// Residuals of regressing every column of `y` on `x`. An empty `x` returns `y`.
pub fn residualize<T: Scalar>(y: &Matrix<T>, x: &Matrix<T>) -> Result<Matrix<T>, LinalgError> {
    if x.cols == 0 {
        return Ok(y.clone());
    }
    if x.rows != y.rows {
        return Err(LinalgError::Shape("residualize of unequal row counts".into()));
    }
    let qr = Qr::new(x)?;
    let mut out = y.clone();
    for j in 0..y.cols {
        let col = y.column(j);
        let coef = qr.solve(&col);
        for i in 0..y.rows {
            let fit: T = x.row(i).iter().zip(&coef).map(|(&a, &b)| a * b).sum();
            out[(i, j)] = col[i] - fit;
        }
    }
    Ok(out)
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
///
/// A pivot that falls below the rank tolerance relative to the original
/// diagonal entry is reported as [`LinalgError::NotPositiveDefinite`].
pub fn cholesky<T: Scalar>(a: &Matrix<T>) -> Result<Matrix<T>, LinalgError> {
    let n = a.rows;
    if a.cols != n {
        return Err(LinalgError::Shape("cholesky of a non-square matrix".into()));
    }
    let tol = T::rank_tolerance();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > tol * a[(j, j)].abs()) || !(d > T::zero()) {
            return Err(LinalgError::NotPositiveDefinite { pivot: j });
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Ok(l)
}

/// Solves `L · X = B` for lower-triangular `L`.
pub fn solve_lower<T: Scalar>(l: &Matrix<T>, b: &Matrix<T>) -> Matrix<T> {
    let n = l.rows;
    let mut x = b.clone();
    for c in 0..b.cols {
        for i in 0..n {
            let mut acc = x[(i, c)];
            for k in 0..i {
                acc -= l[(i, k)] * x[(k, c)];
            }
            x[(i, c)] = acc / l[(i, i)];
        }
    }
    x
}

/// Solves `A · X = B` given the Cholesky factor `L` of `A`.
pub fn cholesky_solve<T: Scalar>(l: &Matrix<T>, b: &Matrix<T>) -> Matrix<T> {
    let n = l.rows;
    let mut x = solve_lower(l, b);
    for c in 0..b.cols {
        for i in (0..n).rev() {
            let mut acc = x[(i, c)];
            for k in (i + 1)..n {
                acc -= l[(k, i)] * x[(k, c)];
            }
            x[(i, c)] = acc / l[(i, i)];
        }
    }
    x
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, sorted descending.
pub fn symmetric_eigenvalues<T: Scalar>(a: &Matrix<T>) -> Vec<T> {
    let n = a.rows;
    let mut m = a.clone();
    // Symmetrize away round-off asymmetry.
    for i in 0..n {
        for j in (i + 1)..n {
            let v = (m[(i, j)] + m[(j, i)]) / T::lit(2.0);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    for _sweep in 0..100 {
        let off: T = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)] * m[(i, j)])
            .sum();
        let diag: T = (0..n).map(|i| m[(i, i)] * m[(i, i)]).sum();
        if off <= T::epsilon() * T::epsilon() * diag || off == T::zero() {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[(p, q)];
                if apq == T::zero() {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut eig: Vec<T> = (0..n).map(|i| m[(i, i)]).collect();
    eig.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    eig
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn least_squares_recovers_exact_line() {
        let x = Matrix::from_fn(5, 2, |i, j| if j == 0 { 1.0 } else { i as f64 });
        let y: Vec<f64> = (0..5).map(|i| 2.0 + 3.0 * i as f64).collect();
        let fit = least_squares(&x, &y).unwrap();
        assert!(close(fit.coef[0], 2.0, 1e-12));
        assert!(close(fit.coef[1], 3.0, 1e-12));
        assert!(fit.ssr < 1e-20);
    }

    #[test]
    fn standard_errors_match_closed_form() {
        // Simple regression: se(slope) = sqrt(s² / Σ(x - x̄)²).
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        let ys = [1.1, 1.9, 3.2, 3.8, 5.3];
        let x = Matrix::from_fn(5, 2, |i, j| if j == 0 { 1.0 } else { xs[i] });
        let fit = least_squares(&x, &ys).unwrap();
        let sxx: f64 = xs.iter().map(|v| (v - 3.0) * (v - 3.0)).sum();
        let s2 = fit.ssr / 3.0;
        assert!(close(fit.std_errors[1], (s2 / sxx).sqrt(), 1e-12));
    }

    #[test]
    fn collinear_columns_are_rank_deficient() {
        let x = Matrix::from_fn(6, 2, |i, j| (i as f64 + 1.0) * (j as f64 + 1.0));
        assert!(matches!(Qr::new(&x), Err(LinalgError::RankDeficient { column: 1 })));
    }

    #[test]
    fn cholesky_solve_inverts() {
        let a = Matrix::from_vec(2, 2, vec![4.0, 2.0, 2.0, 3.0]).unwrap();
        let l = cholesky(&a).unwrap();
        let b = Matrix::from_vec(2, 1, vec![1.0, 2.0]).unwrap();
        let x = cholesky_solve(&l, &b);
        assert!(close(4.0 * x[(0, 0)] + 2.0 * x[(1, 0)], 1.0, 1e-12));
        assert!(close(2.0 * x[(0, 0)] + 3.0 * x[(1, 0)], 2.0, 1e-12));
    }

    #[test]
    fn singular_matrix_fails_cholesky() {
        let a = Matrix::from_vec(2, 2, vec![1.0, 2.0, 2.0, 4.0]).unwrap();
        assert!(cholesky(&a).is_err());
    }

    #[test]
    fn jacobi_eigenvalues_of_known_matrix() {
        // [[2,1],[1,2]] has eigenvalues 3 and 1.
        let a = Matrix::from_vec(2, 2, vec![2.0, 1.0, 1.0, 2.0]).unwrap();
        let e = symmetric_eigenvalues(&a);
        assert!(close(e[0], 3.0, 1e-12) && close(e[1], 1.0, 1e-12));
        let b = Matrix::from_vec(3, 3, vec![2.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 2.0]).unwrap();
        let e = symmetric_eigenvalues(&b);
        let s2 = 2f64.sqrt();
        assert!(close(e[0], 2.0 + s2, 1e-12) && close(e[1], 2.0, 1e-12) && close(e[2], 2.0 - s2, 1e-12));
    }
}
