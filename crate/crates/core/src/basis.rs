//! The natural basis `phi_0, ..., phi_{n+2}` of C² cubic splines.
//!
//! A C² cubic spline on the grid is coordinated by `x = (u_1, p, u_{n+1})`:
//! its boundary second derivatives and its knot values. The matrices
//! `Q`, `U`, `V` map `x` to the slopes `q`, second derivatives `u` and third
//! derivatives `v` of the piecewise representation, so that basis function
//! `phi_j` is the spline whose coordinates are the canonical vector `e_j`.
//!
//! `U` is obtained by solving the bordered tridiagonal system
//! `[e_1; S; e_{n+1}] u = [e_1; 0 Delta 0; e_{n+3}] x` once for all `n + 3`
//! right-hand sides.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SplineError};
use crate::linalg::Tridiagonal;
use crate::types::{KnotGrid, NaturalCoordinates, SplineCoefficients};

/// The sparse building blocks of the continuity equations.
#[derive(Debug, Clone)]
pub struct SystemMatrices {
    /// `n x (n+1)`, slope part from divided differences.
    pub q1: DMatrix<f64>,
    /// `n x (n+1)`, slope part from second derivatives.
    pub q2: DMatrix<f64>,
    /// `(n-1) x (n+1)`, tridiagonal curvature coupling.
    pub s: DMatrix<f64>,
    /// `(n-1) x (n+1)`, second divided differences.
    pub delta: DMatrix<f64>,
    /// `(n+1) x (n+1)`, `S` bordered by `e_1` and `e_{n+1}`.
    pub s_bordered: DMatrix<f64>,
    /// `n x (n+1)`, maps `u` to `v`.
    pub v_tilde: DMatrix<f64>,
    /// `n x (n+1)`, first divided differences.
    pub d: DMatrix<f64>,
}

/// Assemble the continuity-equation matrices for a grid.
pub fn build_system(grid: &KnotGrid) -> SystemMatrices {
    let n = grid.n();
    let h = grid.spacings();
    let mut q1 = DMatrix::zeros(n, n + 1);
    let mut q2 = DMatrix::zeros(n, n + 1);
    for i in 0..n {
        q1[(i, i)] = -1.0 / h[i];
        q1[(i, i + 1)] = 1.0 / h[i];
        q2[(i, i)] = -h[i] / 3.0;
        q2[(i, i + 1)] = -h[i] / 6.0;
    }
    let mut s = DMatrix::zeros(n - 1, n + 1);
    let mut delta = DMatrix::zeros(n - 1, n + 1);
    for i in 0..n - 1 {
        s[(i, i)] = h[i] / 6.0;
        s[(i, i + 1)] = (h[i] + h[i + 1]) / 3.0;
        s[(i, i + 2)] = h[i + 1] / 6.0;
        delta[(i, i)] = 1.0 / h[i];
        delta[(i, i + 1)] = -(1.0 / h[i] + 1.0 / h[i + 1]);
        delta[(i, i + 2)] = 1.0 / h[i + 1];
    }
    let mut s_bordered = DMatrix::zeros(n + 1, n + 1);
    s_bordered[(0, 0)] = 1.0;
    s_bordered.view_mut((1, 0), (n - 1, n + 1)).copy_from(&s);
    s_bordered[(n, n)] = 1.0;
    SystemMatrices {
        v_tilde: q1.clone(),
        d: q1.clone(),
        q1,
        q2,
        s,
        delta,
        s_bordered,
    }
}

impl SystemMatrices {
    /// Factorization of the bordered system, reusable for many right-hand sides.
    pub fn factor_bordered(&self, grid: &KnotGrid) -> Result<Tridiagonal> {
        let n = grid.n();
        let h = grid.spacings();
        let mut sub = vec![0.0; n];
        let mut diag = vec![1.0; n + 1];
        let mut sup = vec![0.0; n];
        for r in 1..n {
            sub[r - 1] = h[r - 1] / 6.0;
            diag[r] = (h[r - 1] + h[r]) / 3.0;
            sup[r] = h[r] / 6.0;
        }
        Tridiagonal::factor(&sub, &diag, &sup)
    }

    /// Right-hand side `[e_1; 0 Delta 0; e_{n+3}]` of the `U` system.
    pub fn bordered_rhs(&self) -> DMatrix<f64> {
        let n = self.q1.nrows();
        let mut rhs = DMatrix::zeros(n + 1, n + 3);
        rhs[(0, 0)] = 1.0;
        rhs.view_mut((1, 1), (n - 1, n + 1)).copy_from(&self.delta);
        rhs[(n, n + 2)] = 1.0;
        rhs
    }
}

/// `Q`, `U`, `V` for one grid, together with the grid itself.
#[derive(Debug, Clone)]
pub struct BasisMatrices {
    grid: KnotGrid,
    /// `n x (n+3)`: slopes `q = Q x`.
    pub q: DMatrix<f64>,
    /// `(n+1) x (n+3)`: second derivatives `u = U x`.
    pub u: DMatrix<f64>,
    /// `n x (n+3)`: third derivatives `v = V x`.
    pub v: DMatrix<f64>,
}

/// Build `Q`, `U`, `V` for a grid.
pub fn build_basis(grid: &KnotGrid) -> Result<BasisMatrices> {
    BasisMatrices::new(grid)
}

impl BasisMatrices {
    pub fn new(grid: &KnotGrid) -> Result<Self> {
        let n = grid.n();
        let sys = build_system(grid);
        let lu = sys.factor_bordered(grid)?;
        let u = lu.solve_matrix(&sys.bordered_rhs());
        if u.iter().any(|x| !x.is_finite()) {
            return Err(SplineError::SingularSystem);
        }
        let mut q = &sys.q2 * &u;
        for i in 0..n {
            q[(i, i + 1)] += sys.q1[(i, i)];
            q[(i, i + 2)] += sys.q1[(i, i + 1)];
        }
        let v = &sys.v_tilde * &u;
        Ok(Self {
            grid: grid.clone(),
            q,
            u,
            v,
        })
    }

    pub fn grid(&self) -> &KnotGrid {
        &self.grid
    }

    /// Dimension `n + 3` of the coordinate space.
    pub fn dim(&self) -> usize {
        self.grid.coord_dim()
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(SplineError::ShapeMismatch {
                expected: self.dim(),
                actual: len,
            });
        }
        Ok(())
    }

    /// Piecewise coefficients of the spline with flattened coordinates `x`.
    pub fn coefficients_from_flat(&self, x: &DVector<f64>) -> Result<SplineCoefficients> {
        self.check_dim(x.len())?;
        let m = self.dim();
        Ok(SplineCoefficients {
            p: x.rows(1, m - 2).iter().copied().collect(),
            q: (&self.q * x).iter().copied().collect(),
            u: (&self.u * x).iter().copied().collect(),
            v: (&self.v * x).iter().copied().collect(),
        })
    }

    pub fn coefficients_for(&self, coords: &NaturalCoordinates) -> Result<SplineCoefficients> {
        self.coefficients_from_flat(&coords.flatten())
    }

    /// Coefficients of basis function `phi_j`, `j` in `0..=n+2`.
    pub fn basis_coefficients(&self, j: usize) -> Result<SplineCoefficients> {
        let coords = NaturalCoordinates::canonical(self.grid.len(), j)?;
        self.coefficients_for(&coords)
    }

    /// Derivative of order `order` of `phi_j` at `t`.
    pub fn eval_basis(&self, j: usize, t: f64, order: usize) -> Result<f64> {
        self.basis_coefficients(j)?.eval(&self.grid, t, order)
    }

    /// The natural C² cubic spline interpolating `(t_i, p_i)`.
    pub fn interpolate_natural(&self, p: &[f64]) -> Result<SplineCoefficients> {
        if p.len() != self.grid.len() {
            return Err(SplineError::ShapeMismatch {
                expected: self.grid.len(),
                actual: p.len(),
            });
        }
        self.coefficients_for(&NaturalCoordinates::natural(p.to_vec()))
    }

    /// `max |Q + diag(h/2) U + diag(h^2/6) V - [0 D 0]|`, using the first `n`
    /// rows of `U` (one per piece).
    pub fn divided_difference_residual(&self) -> f64 {
        let n = self.grid.n();
        let h = self.grid.spacings();
        let mut worst = 0.0_f64;
        for i in 0..n {
            for c in 0..self.dim() {
                let mut lhs = self.q[(i, c)]
                    + h[i] / 2.0 * self.u[(i, c)]
                    + h[i] * h[i] / 6.0 * self.v[(i, c)];
                if c == i + 1 {
                    lhs += 1.0 / h[i];
                } else if c == i + 2 {
                    lhs -= 1.0 / h[i];
                }
                worst = worst.max(lhs.abs());
            }
        }
        worst
    }
}

/// Free-function form of [`BasisMatrices::coefficients_for`].
pub fn coefficients_for(
    basis: &BasisMatrices,
    coords: &NaturalCoordinates,
) -> Result<SplineCoefficients> {
    basis.coefficients_for(coords)
}

/// Free-function form of [`BasisMatrices::eval_basis`].
pub fn eval_basis(basis: &BasisMatrices, j: usize, t: f64, order: usize) -> Result<f64> {
    basis.eval_basis(j, t, order)
}

/// Free-function form of [`BasisMatrices::interpolate_natural`].
pub fn interpolate_natural(basis: &BasisMatrices, p: &[f64]) -> Result<SplineCoefficients> {
    basis.interpolate_natural(p)
}
