//! Quadratic penalties on natural coordinates.
//!
//! `C` is the Gram matrix of the second derivatives of the basis. The Gram
//! matrices `C_rs = [int phi_i^(r) phi_j^(s)]` are assembled exactly from the
//! piecewise polynomial coefficients, and combine into
//! `P_pen(a0, a1, a2) = sum_{r,s} a_r a_s C_rs`, the matrix of
//! `int |a2 s'' + a1 s' + a0 s|^2`.

use nalgebra::{DMatrix, DVector};

use crate::basis::BasisMatrices;
use crate::error::{Result, SplineError};
use crate::linalg::{null_threshold, numerical_rank, sorted_symmetric_eigen};
use crate::types::KnotGrid;

/// Origin of a penalty matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PenaltyKind {
    Curvature,
    Gram { r: usize, s: usize },
    Combined { a0: f64, a1: f64, a2: f64 },
    User,
}

/// Symmetric non-negative `(n+3) x (n+3)` penalty on `(u_1, p, u_{n+1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyMatrix {
    pub matrix: DMatrix<f64>,
    /// Measured dimension of the null space.
    pub nullspace_dim: usize,
    pub kind: PenaltyKind,
}

impl PenaltyMatrix {
    fn measured(matrix: DMatrix<f64>, kind: PenaltyKind) -> Self {
        let nullspace_dim = nullspace_dim(&matrix);
        Self {
            matrix,
            nullspace_dim,
            kind,
        }
    }

    /// Validate a caller-supplied matrix.
    pub fn user(matrix: DMatrix<f64>) -> Result<Self> {
        let m = matrix.nrows();
        if matrix.ncols() != m {
            return Err(SplineError::ShapeMismatch {
                expected: m,
                actual: matrix.ncols(),
            });
        }
        if m < 5 {
            return Err(SplineError::ShapeMismatch {
                expected: 5,
                actual: m,
            });
        }
        if let Some(i) = matrix.iter().position(|x| !x.is_finite()) {
            return Err(SplineError::NonFiniteInput(i));
        }
        let scale = crate::linalg::max_abs(&matrix).max(f64::MIN_POSITIVE);
        if crate::linalg::max_abs(&(&matrix - matrix.transpose())) > 1e-12 * scale {
            return Err(SplineError::NotSymmetric);
        }
        let (vals, _) = sorted_symmetric_eigen(&matrix);
        let top = vals.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        if vals[0] < -1e-10 * top {
            return Err(SplineError::NotNonNegative(vals[0]));
        }
        Ok(Self::measured(matrix, PenaltyKind::User))
    }

    /// Coordinate dimension `n + 3`.
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// The block acting on the knot values `p`.
    pub fn middle_block(&self) -> DMatrix<f64> {
        let m = self.dim();
        self.matrix.view((1, 1), (m - 2, m - 2)).into_owned()
    }

    /// The 2x2 block acting on `(u_1, u_{n+1})`.
    pub fn corner(&self) -> DMatrix<f64> {
        let l = self.dim() - 1;
        DMatrix::from_row_slice(
            2,
            2,
            &[
                self.matrix[(0, 0)],
                self.matrix[(0, l)],
                self.matrix[(l, 0)],
                self.matrix[(l, l)],
            ],
        )
    }

    /// Eigen-split at the null threshold: null-space basis, positive
    /// eigenvectors and their eigenvalues (ascending).
    pub fn spectral_split(&self) -> SpectralSplit {
        let (vals, vecs) = sorted_symmetric_eigen(&self.matrix);
        let top = vals.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        let tau = null_threshold(top, self.dim());
        let keep: Vec<usize> = (0..self.dim()).filter(|&k| vals[k].abs() > tau).collect();
        let null: Vec<usize> = (0..self.dim()).filter(|&k| vals[k].abs() <= tau).collect();
        SpectralSplit {
            null_basis: vecs.select_columns(&null),
            range_basis: vecs.select_columns(&keep),
            range_values: DVector::from_iterator(keep.len(), keep.iter().map(|&k| vals[k])),
        }
    }

    /// `xᵀ M x`.
    pub fn quadratic_form(&self, x: &DVector<f64>) -> f64 {
        x.dot(&(&self.matrix * x))
    }
}

/// Result of [`PenaltyMatrix::spectral_split`].
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSplit {
    pub null_basis: DMatrix<f64>,
    pub range_basis: DMatrix<f64>,
    pub range_values: DVector<f64>,
}

/// Number of eigenvalues at most `(n+3) eps lambda_max` in absolute value.
pub fn nullspace_dim(m: &DMatrix<f64>) -> usize {
    let (vals, _) = sorted_symmetric_eigen(m);
    let top = vals.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let tau = null_threshold(top, m.nrows());
    vals.iter().filter(|v| v.abs() <= tau).count()
}

/// `int |s''|^2` for the piecewise linear second derivative with knot values `u`.
pub fn j2(grid: &KnotGrid, u: &[f64]) -> Result<f64> {
    if u.len() != grid.len() {
        return Err(SplineError::ShapeMismatch {
            expected: grid.len(),
            actual: u.len(),
        });
    }
    Ok(grid
        .spacings()
        .iter()
        .enumerate()
        .map(|(i, h)| h / 3.0 * (u[i] * u[i] + u[i] * u[i + 1] + u[i + 1] * u[i + 1]))
        .sum())
}

/// The curvature matrix `C`, assembled from outer products of rows of `U`.
pub fn build_curvature(basis: &BasisMatrices) -> PenaltyMatrix {
    let h = basis.grid().spacings();
    let m = basis.dim();
    let mut c = DMatrix::zeros(m, m);
    for (i, hi) in h.iter().enumerate() {
        let a = basis.u.row(i);
        let b = basis.u.row(i + 1);
        c += (a.transpose() * a + b.transpose() * b) * (hi / 3.0);
        c += (a.transpose() * b + b.transpose() * a) * (hi / 6.0);
    }
    let c = (&c + c.transpose()) * 0.5;
    PenaltyMatrix::measured(c, PenaltyKind::Curvature)
}

/// Alias of [`build_curvature`].
pub fn build_c(basis: &BasisMatrices) -> PenaltyMatrix {
    build_curvature(basis)
}

/// Local power-basis coefficients of derivative `r` of every basis function
/// on piece `i`: row `k` holds the coefficient of `(t - t_i)^k`.
fn local_coefficients(basis: &BasisMatrices, i: usize, r: usize) -> DMatrix<f64> {
    let m = basis.dim();
    let mut c = DMatrix::zeros(4, m);
    c[(0, i + 1)] = 1.0;
    for j in 0..m {
        c[(1, j)] = basis.q[(i, j)];
        c[(2, j)] = basis.u[(i, j)] / 2.0;
        c[(3, j)] = basis.v[(i, j)] / 6.0;
    }
    let mut d = DMatrix::zeros(4, m);
    for k in 0..4 - r {
        let factor: f64 = ((k + 1)..=(k + r)).map(|f| f as f64).product();
        d.set_row(k, &(c.row(k + r) * factor));
    }
    d
}

/// `C_rs = [int phi_i^(r) phi_j^(s)]` for derivative orders `r, s <= 2`.
pub fn build_gram(basis: &BasisMatrices, r: usize, s: usize) -> Result<DMatrix<f64>> {
    if r > 2 {
        return Err(SplineError::InvalidDerivativeOrder(r));
    }
    if s > 2 {
        return Err(SplineError::InvalidDerivativeOrder(s));
    }
    let m = basis.dim();
    let mut g = DMatrix::zeros(m, m);
    for (i, &h) in basis.grid().spacings().iter().enumerate() {
        let a = local_coefficients(basis, i, r);
        let b = local_coefficients(basis, i, s);
        // int_0^h x^(k+l) dx
        let w = DMatrix::from_fn(4, 4, |k, l| h.powi((k + l + 1) as i32) / (k + l + 1) as f64);
        g += a.transpose() * w * b;
    }
    Ok(g)
}

/// Gram matrix wrapped as a penalty (only meaningful for `r == s`).
pub fn gram_penalty(basis: &BasisMatrices, r: usize) -> Result<PenaltyMatrix> {
    let g = build_gram(basis, r, r)?;
    let g = (&g + g.transpose()) * 0.5;
    Ok(PenaltyMatrix::measured(g, PenaltyKind::Gram { r, s: r }))
}

/// `P_pen(a0, a1, a2)`, the matrix of `int |a2 s'' + a1 s' + a0 s|^2`.
pub fn build_ppen(basis: &BasisMatrices, a0: f64, a1: f64, a2: f64) -> Result<PenaltyMatrix> {
    let a = [a0, a1, a2];
    if let Some(i) = a.iter().position(|x| !x.is_finite()) {
        return Err(SplineError::NonFiniteInput(i));
    }
    if a.iter().all(|x| *x == 0.0) {
        return Err(SplineError::AllCoefficientsZero);
    }
    let m = basis.dim();
    let mut p = DMatrix::zeros(m, m);
    for r in 0..3 {
        for s in r..3 {
            if a[r] == 0.0 || a[s] == 0.0 {
                continue;
            }
            let g = build_gram(basis, r, s)?;
            if r == s {
                p += g * (a[r] * a[r]);
            } else {
                p += (&g + g.transpose()) * (a[r] * a[s]);
            }
        }
    }
    let p = (&p + p.transpose()) * 0.5;
    Ok(PenaltyMatrix::measured(
        p,
        PenaltyKind::Combined { a0, a1, a2 },
    ))
}

/// Minimizer of `vᵀ M v` subject to `A v = c`, with the multiplier `l`
/// satisfying `M v = Aᵀ l`.
pub fn solve_constrained_quadratic(
    m: &DMatrix<f64>,
    a: &DMatrix<f64>,
    c: &DVector<f64>,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let dim = m.nrows();
    let k = a.nrows();
    if m.ncols() != dim {
        return Err(SplineError::ShapeMismatch {
            expected: dim,
            actual: m.ncols(),
        });
    }
    if a.ncols() != dim {
        return Err(SplineError::ShapeMismatch {
            expected: dim,
            actual: a.ncols(),
        });
    }
    if c.len() != k {
        return Err(SplineError::ShapeMismatch {
            expected: k,
            actual: c.len(),
        });
    }
    let mut stacked = DMatrix::zeros(dim + k, dim);
    stacked.view_mut((0, 0), (dim, dim)).copy_from(m);
    stacked.view_mut((dim, 0), (k, dim)).copy_from(a);
    if numerical_rank(&stacked) < dim {
        return Err(SplineError::OverlappingNullspaces);
    }

    let svd_a = a.clone().svd(true, true);
    let smax = svd_a.singular_values.max();
    let tol_a = k.max(dim) as f64 * f64::EPSILON * smax;
    let z = svd_a
        .solve(c, tol_a)
        .map_err(|_| SplineError::InconsistentConstraint)?;
    let resid = (a * &z - c).norm();
    if resid > 1e-9 * c.norm().max(1.0) {
        return Err(SplineError::InconsistentConstraint);
    }

    let mut kkt = DMatrix::zeros(dim + k, dim + k);
    kkt.view_mut((0, 0), (dim, dim)).copy_from(m);
    kkt.view_mut((0, dim), (dim, k))
        .copy_from(&(-a.transpose()));
    kkt.view_mut((dim, 0), (k, dim)).copy_from(a);
    let mut rhs = DVector::zeros(dim + k);
    rhs.rows_mut(dim, k).copy_from(c);
    let svd = kkt.svd(true, true);
    let tol = (dim + k) as f64 * f64::EPSILON * svd.singular_values.max();
    let sol = svd
        .solve(&rhs, tol)
        .map_err(|_| SplineError::SingularSystem)?;
    Ok((sol.rows(0, dim).into_owned(), sol.rows(dim, k).into_owned()))
}

/// Rows of the identity selecting the given coordinates.
pub fn selector(dim: usize, rows: &[usize]) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(rows.len(), dim);
    for (r, &j) in rows.iter().enumerate() {
        a[(r, j)] = 1.0;
    }
    a
}

/// The linear model `L = [1, t]` and the orthogonal projector onto its range.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearTrend {
    pub l: DMatrix<f64>,
    pub projector: DMatrix<f64>,
    knots: Vec<f64>,
}

pub fn linear_trend(grid: &KnotGrid) -> LinearTrend {
    LinearTrend::new(grid)
}

impl LinearTrend {
    pub fn new(grid: &KnotGrid) -> Self {
        let m = grid.len();
        let l = DMatrix::from_fn(m, 2, |i, j| if j == 0 { 1.0 } else { grid.knots()[i] });
        // Center before orthonormalizing so that distant knots do not lose digits.
        let mean = grid.knots().iter().sum::<f64>() / m as f64;
        let centered = DMatrix::from_fn(
            m,
            2,
            |i, j| {
                if j == 0 {
                    1.0
                } else {
                    grid.knots()[i] - mean
                }
            },
        );
        let q = centered.qr().q();
        let projector = &q * q.transpose();
        Self {
            l,
            projector,
            knots: grid.knots().to_vec(),
        }
    }

    /// `Lreg y`.
    pub fn apply(&self, y: &DVector<f64>) -> DVector<f64> {
        &self.projector * y
    }

    /// `y - Lreg y`.
    pub fn residual(&self, y: &DVector<f64>) -> DVector<f64> {
        y - self.apply(y)
    }

    /// `||y - Lreg y||^2`.
    pub fn residual_norm2(&self, y: &DVector<f64>) -> f64 {
        self.residual(y).norm_squared()
    }

    /// Mean knot position.
    pub fn mean(&self) -> f64 {
        self.knots.iter().sum::<f64>() / self.knots.len() as f64
    }

    /// `sum_k (t_k - mean)^2`.
    pub fn spread(&self) -> f64 {
        let mean = self.mean();
        self.knots.iter().map(|t| (t - mean) * (t - mean)).sum()
    }

    /// Intercept and slope `(beta_1, beta_2)` of the regression line of the
    /// unit vector `e_i` (0-based `i`).
    pub fn line_for_unit(&self, i: usize) -> Result<(f64, f64)> {
        let len = self.knots.len();
        if i >= len {
            return Err(SplineError::IndexOutOfRange { index: i, len });
        }
        let mean = self.mean();
        let b2 = (self.knots[i] - mean) / self.spread();
        let b1 = 1.0 / len as f64 - mean * b2;
        Ok((b1, b2))
    }
}
