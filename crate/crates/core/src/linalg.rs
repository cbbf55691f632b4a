//! Small dense and banded solvers used by the spline machinery.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Result, SplineError};

/// LU factorization (no pivoting) of a tridiagonal matrix, reusable for many
/// right-hand sides. Intended for diagonally dominant systems.
#[derive(Debug, Clone)]
pub struct Tridiagonal {
    sub: Vec<f64>,
    // Modified super-diagonal c'_i and pivots of the forward sweep.
    sup_mod: Vec<f64>,
    pivots: Vec<f64>,
}

impl Tridiagonal {
    /// `sub[i]` is entry `(i+1, i)`, `sup[i]` is entry `(i, i+1)`.
    pub fn factor(sub: &[f64], diag: &[f64], sup: &[f64]) -> Result<Self> {
        let m = diag.len();
        assert!(m >= 1 && sub.len() + 1 == m && sup.len() + 1 == m);
        let mut pivots = vec![0.0; m];
        let mut sup_mod = vec![0.0; m.saturating_sub(1)];
        pivots[0] = diag[0];
        for i in 0..m {
            if i > 0 {
                pivots[i] = diag[i] - sub[i - 1] * sup_mod[i - 1];
            }
            if pivots[i] == 0.0 || !pivots[i].is_finite() {
                return Err(SplineError::SingularSystem);
            }
            if i + 1 < m {
                sup_mod[i] = sup[i] / pivots[i];
            }
        }
        Ok(Self {
            sub: sub.to_vec(),
            sup_mod,
            pivots,
        })
    }

    pub fn dim(&self) -> usize {
        self.pivots.len()
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let m = self.dim();
        assert_eq!(b.len(), m);
        b[0] /= self.pivots[0];
        for i in 1..m {
            b[i] = (b[i] - self.sub[i - 1] * b[i - 1]) / self.pivots[i];
        }
        for i in (0..m - 1).rev() {
            b[i] -= self.sup_mod[i] * b[i + 1];
        }
    }

    /// Solve for every column of `rhs`.
    pub fn solve_matrix(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = rhs.clone();
        for mut col in out.column_iter_mut() {
            self.solve_in_place(col.as_mut_slice());
        }
        out
    }
}

/// Cholesky factorization of a symmetric positive definite band matrix with
/// half-bandwidth `k`, stored by lower diagonals.
#[derive(Debug, Clone)]
pub struct BandedCholesky {
    k: usize,
    // lower[i][d] = L[i, i - d]
    lower: Vec<Vec<f64>>,
}

impl BandedCholesky {
    /// `band[i][d]` holds `A[i, i - d]` for `d <= min(i, k)`.
    pub fn factor(band: &[Vec<f64>], k: usize) -> Result<Self> {
        let m = band.len();
        let mut lower: Vec<Vec<f64>> = (0..m).map(|i| vec![0.0; k.min(i) + 1]).collect();
        for i in 0..m {
            let jmin = i.saturating_sub(k);
            for j in jmin..=i {
                let mut sum = band[i].get(i - j).copied().unwrap_or(0.0);
                let kmin = i.saturating_sub(k).max(j.saturating_sub(k));
                for p in kmin..j {
                    sum -= lower[i][i - p] * lower[j][j - p];
                }
                if i == j {
                    if !(sum > 0.0) || !sum.is_finite() {
                        return Err(SplineError::SingularSystem);
                    }
                    lower[i][0] = sum.sqrt();
                } else {
                    lower[i][i - j] = sum / lower[j][0];
                }
            }
        }
        Ok(Self { k, lower })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let m = self.dim();
        assert_eq!(b.len(), m);
        for i in 0..m {
            let mut s = b[i];
            for p in i.saturating_sub(self.k)..i {
                s -= self.lower[i][i - p] * b[p];
            }
            b[i] = s / self.lower[i][0];
        }
        for i in (0..m).rev() {
            let mut s = b[i];
            for r in (i + 1)..m.min(i + self.k + 1) {
                s -= self.lower[r][r - i] * b[r];
            }
            b[i] = s / self.lower[i][0];
        }
    }
}

/// Spectral cut-off below which an eigenvalue counts as zero.
pub fn null_threshold(max_abs_eigenvalue: f64, dim: usize) -> f64 {
    dim as f64 * f64::EPSILON * max_abs_eigenvalue
}

/// Eigen-decomposition of a symmetric matrix with eigenvalues ascending and
/// each eigenvector's first non-negligible entry made positive.
pub fn sorted_symmetric_eigen(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let dim = m.nrows();
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = DVector::from_iterator(dim, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(dim, dim);
    for (c, &i) in order.iter().enumerate() {
        let mut v = eig.eigenvectors.column(i).into_owned();
        let scale = v.amax();
        if let Some(first) = v.iter().find(|x| x.abs() > 1e-10 * scale) {
            if *first < 0.0 {
                v.neg_mut();
            }
        }
        vectors.set_column(c, &v);
    }
    (values, vectors)
}

/// Numerical rank from singular values with the usual `max(m, n) * eps * s_max` rule.
pub fn numerical_rank(m: &DMatrix<f64>) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.clone().singular_values();
    let smax = sv.max();
    let tol = m.nrows().max(m.ncols()) as f64 * f64::EPSILON * smax;
    sv.iter().filter(|s| **s > tol).count()
}

/// Largest absolute entry; zero for empty matrices.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |a, x| a.max(x.abs()))
}

/// Symmetric positive definite solve, falling back to LU when Cholesky fails.
pub fn solve_spd(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if let Some(ch) = a.clone().cholesky() {
        return Some(ch.solve(b));
    }
    a.clone().full_piv_lu().solve(b)
}
