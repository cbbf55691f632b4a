//! Penalized least-squares estimators.
//!
//! The natural estimator minimizes `lambda xᵀ C x + ||y - p||^2`. Its
//! solution has `u_1 = u_{n+1} = 0` and `p = H(lambda) y` with
//! `H(lambda) = (I + lambda C(2, n+2))^{-1}`. Since
//! `C(2, n+2) = Deltaᵀ S_int^{-1} Delta`, the fit is computed through the
//! pentadiagonal system `(S_int + lambda Delta Deltaᵀ) gamma = Delta y`,
//! `p = y - lambda Deltaᵀ gamma`, which stays well conditioned for large
//! `lambda`.
//!
//! The general estimator uses any penalty `P` and minimizes
//! `lambda xᵀ P x + ||y - Pi x||^2`, where `Pi` picks the knot values.

use nalgebra::{DMatrix, DVector};

use crate::basis::BasisMatrices;
use crate::error::{Result, SplineError};
use crate::linalg::{max_abs, solve_spd, BandedCholesky};
use crate::penalty::{LinearTrend, PenaltyMatrix};
use crate::types::{KnotGrid, NaturalCoordinates, Observations, SplineCoefficients};

/// `H(lambda)` as a dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct HatMatrix {
    pub h: DMatrix<f64>,
    pub lambda: f64,
}

impl HatMatrix {
    pub fn trace(&self) -> f64 {
        self.h.trace()
    }

    pub fn apply(&self, y: &DVector<f64>) -> DVector<f64> {
        &self.h * y
    }

    /// Dense route `(I + lambda C(2, n+2))^{-1}` from an assembled curvature
    /// penalty, by Cholesky factorization.
    pub fn from_penalty(c: &PenaltyMatrix, lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        let mid = c.middle_block();
        let m = mid.nrows();
        let id = DMatrix::identity(m, m);
        if lambda == 0.0 {
            return Ok(Self { h: id, lambda });
        }
        let a = &id + mid * lambda;
        let h = solve_spd(&a, &id).ok_or(SplineError::SingularSystem)?;
        Ok(Self {
            h: (&h + h.transpose()) * 0.5,
            lambda,
        })
    }
}

/// A natural-spline fit.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothFit {
    pub coords: NaturalCoordinates,
    pub lambda: f64,
    /// `||y - p_hat||^2`.
    pub rss: f64,
    pub fitted_coeffs: SplineCoefficients,
}

impl SmoothFit {
    pub fn p_hat(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.coords.values)
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !lambda.is_finite() {
        return Err(SplineError::NonFiniteInput(0));
    }
    if lambda < 0.0 {
        return Err(SplineError::NegativeLambda(lambda));
    }
    Ok(())
}

/// Grid-dependent data of the natural estimator, reusable across `lambda`
/// and `y`.
#[derive(Debug, Clone)]
pub struct NaturalSmoother {
    basis: BasisMatrices,
    trend: LinearTrend,
    // S_int and Delta Deltaᵀ as lower bands: band[i][d] = A[i, i - d].
    s_band: Vec<Vec<f64>>,
    dd_band: Vec<Vec<f64>>,
    // Nonzeros of Delta row i at columns i, i+1, i+2.
    delta: Vec<[f64; 3]>,
}

impl NaturalSmoother {
    pub fn new(grid: &KnotGrid) -> Result<Self> {
        let basis = BasisMatrices::new(grid)?;
        Ok(Self::with_basis(basis))
    }

    pub fn with_basis(basis: BasisMatrices) -> Self {
        let grid = basis.grid().clone();
        let h = grid.spacings();
        let n = grid.n();
        let delta: Vec<[f64; 3]> = (0..n - 1)
            .map(|i| [1.0 / h[i], -(1.0 / h[i] + 1.0 / h[i + 1]), 1.0 / h[i + 1]])
            .collect();
        let mut s_band = Vec::with_capacity(n - 1);
        let mut dd_band = Vec::with_capacity(n - 1);
        for i in 0..n - 1 {
            let mut s_row = vec![(h[i] + h[i + 1]) / 3.0];
            if i >= 1 {
                s_row.push(h[i] / 6.0);
            }
            s_band.push(s_row);
            let mut dd_row = Vec::with_capacity(3);
            for d in 0..=i.min(2) {
                let j = i - d;
                // Delta rows i and j overlap in columns i..=j+2.
                let mut acc = 0.0;
                for col in i..=j + 2 {
                    acc += delta[i][col - i] * delta[j][col - j];
                }
                dd_row.push(acc);
            }
            dd_band.push(dd_row);
        }
        Self {
            trend: LinearTrend::new(&grid),
            basis,
            s_band,
            dd_band,
            delta,
        }
    }

    pub fn grid(&self) -> &KnotGrid {
        self.basis.grid()
    }

    pub fn basis(&self) -> &BasisMatrices {
        &self.basis
    }

    pub fn trend(&self) -> &LinearTrend {
        &self.trend
    }

    fn knot_count(&self) -> usize {
        self.delta.len() + 2
    }

    fn check_y(&self, y: &DVector<f64>) -> Result<()> {
        if y.len() != self.knot_count() {
            return Err(SplineError::ShapeMismatch {
                expected: self.knot_count(),
                actual: y.len(),
            });
        }
        Ok(())
    }

    fn factor(&self, lambda: f64) -> Result<BandedCholesky> {
        let band: Vec<Vec<f64>> = self
            .dd_band
            .iter()
            .enumerate()
            .map(|(i, dd)| {
                dd.iter()
                    .enumerate()
                    .map(|(d, v)| lambda * v + self.s_band[i].get(d).copied().unwrap_or(0.0))
                    .collect()
            })
            .collect();
        BandedCholesky::factor(&band, 2)
    }

    fn delta_times(&self, y: &[f64]) -> Vec<f64> {
        self.delta
            .iter()
            .enumerate()
            .map(|(i, d)| d[0] * y[i] + d[1] * y[i + 1] + d[2] * y[i + 2])
            .collect()
    }

    fn delta_t_times(&self, g: &[f64]) -> DVector<f64> {
        let mut out = DVector::zeros(self.knot_count());
        for (i, d) in self.delta.iter().enumerate() {
            for k in 0..3 {
                out[i + k] += d[k] * g[i];
            }
        }
        out
    }

    /// `y - H(lambda) y = lambda Deltaᵀ gamma`.
    pub fn residual(&self, y: &DVector<f64>, lambda: f64) -> Result<DVector<f64>> {
        check_lambda(lambda)?;
        self.check_y(y)?;
        if lambda == 0.0 {
            return Ok(DVector::zeros(y.len()));
        }
        let chol = self.factor(lambda)?;
        let mut gamma = self.delta_times(y.as_slice());
        chol.solve_in_place(&mut gamma);
        Ok(self.delta_t_times(&gamma) * lambda)
    }

    /// `p_hat = H(lambda) y`.
    pub fn fitted_values(&self, y: &DVector<f64>, lambda: f64) -> Result<DVector<f64>> {
        Ok(y - self.residual(y, lambda)?)
    }

    /// `psi(lambda) = ||y - H(lambda) y||^2`.
    pub fn psi(&self, y: &DVector<f64>, lambda: f64) -> Result<f64> {
        Ok(self.residual(y, lambda)?.norm_squared())
    }

    pub fn hat(&self, lambda: f64) -> Result<HatMatrix> {
        check_lambda(lambda)?;
        let m = self.knot_count();
        let mut h = DMatrix::identity(m, m);
        if lambda == 0.0 {
            return Ok(HatMatrix { h, lambda });
        }
        let chol = self.factor(lambda)?;
        for j in 0..m {
            let mut e = vec![0.0; m];
            e[j] = 1.0;
            let mut g = self.delta_times(&e);
            chol.solve_in_place(&mut g);
            let col = self.delta_t_times(&g) * lambda;
            for i in 0..m {
                h[(i, j)] -= col[i];
            }
        }
        let h = (&h + h.transpose()) * 0.5;
        Ok(HatMatrix { h, lambda })
    }

    /// `trace H(lambda)`.
    pub fn trace(&self, lambda: f64) -> Result<f64> {
        check_lambda(lambda)?;
        let m = self.knot_count();
        if lambda == 0.0 {
            return Ok(m as f64);
        }
        let chol = self.factor(lambda)?;
        let mut reduction = 0.0;
        for j in 0..m {
            let mut e = vec![0.0; m];
            e[j] = 1.0;
            let mut g = self.delta_times(&e);
            chol.solve_in_place(&mut g);
            reduction += lambda * self.delta_t_times(&g)[j];
        }
        Ok(m as f64 - reduction)
    }

    pub fn fit(&self, y: &DVector<f64>, lambda: f64) -> Result<SmoothFit> {
        let p = self.fitted_values(y, lambda)?;
        let rss = (y - &p).norm_squared();
        let coords = NaturalCoordinates::natural(p.iter().copied().collect());
        let fitted_coeffs = self.basis.coefficients_for(&coords)?;
        Ok(SmoothFit {
            coords,
            lambda,
            rss,
            fitted_coeffs,
        })
    }

    /// `(Lreg y, (H(lambda) - Lreg) y)`.
    pub fn decompose(&self, y: &DVector<f64>, lambda: f64) -> Result<(DVector<f64>, DVector<f64>)> {
        let p = self.fitted_values(y, lambda)?;
        let trend = self.trend.apply(y);
        let rest = p - &trend;
        Ok((trend, rest))
    }
}

/// `H(lambda)` for the curvature penalty on `grid`.
pub fn hat_matrix(grid: &KnotGrid, lambda: f64) -> Result<HatMatrix> {
    check_lambda(lambda)?;
    NaturalSmoother::new(grid)?.hat(lambda)
}

/// The natural smoothing spline of `obs` at `lambda`.
pub fn smooth_natural(obs: &Observations, lambda: f64) -> Result<SmoothFit> {
    check_lambda(lambda)?;
    NaturalSmoother::new(obs.grid())?.fit(obs.y(), lambda)
}

/// Orthogonal split of the fit into the linear trend and the penalized part.
pub fn decompose_fit(obs: &Observations, lambda: f64) -> Result<(DVector<f64>, DVector<f64>)> {
    check_lambda(lambda)?;
    NaturalSmoother::new(obs.grid())?.decompose(obs.y(), lambda)
}

/// `Piᵀ Pi`: the diagonal selecting the knot-value coordinates.
pub fn value_selector_gram(dim: usize) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(dim, dim);
    for i in 1..dim - 1 {
        d[(i, i)] = 1.0;
    }
    d
}

/// `(0, y, 0)`.
pub fn embed_values(y: &DVector<f64>) -> DVector<f64> {
    let mut x = DVector::zeros(y.len() + 2);
    x.rows_mut(1, y.len()).copy_from(y);
    x
}

fn check_general(p: &PenaltyMatrix, y_len: Option<usize>) -> Result<()> {
    let dim = p.dim();
    if let Some(len) = y_len {
        if len + 2 != dim {
            return Err(SplineError::ShapeMismatch {
                expected: dim - 2,
                actual: len,
            });
        }
    }
    let corner = p.corner();
    let sv = corner.singular_values();
    let tol = dim as f64 * f64::EPSILON * max_abs(&p.matrix);
    if sv.min() <= tol {
        return Err(SplineError::SingularCorner);
    }
    Ok(())
}

/// Solve `(lambda P + Piᵀ Pi) X = rhs`.
///
/// With a non-trivial null space the system is solved in the eigenbasis of
/// `P` with the null eigenvalues set to zero, so that large `lambda` does
/// not amplify the rounding left in the computed null directions of `P`.
fn solve_general(p: &PenaltyMatrix, lambda: f64, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let dim = p.dim();
    let gram = value_selector_gram(dim);
    if p.nullspace_dim == 0 {
        let a = &p.matrix * lambda + gram;
        return solve_spd(&a, rhs).ok_or(SplineError::SingularCorner);
    }
    let split = p.spectral_split();
    let d0 = split.null_basis.ncols();
    let mut v = DMatrix::zeros(dim, dim);
    v.view_mut((0, 0), (dim, d0)).copy_from(&split.null_basis);
    v.view_mut((0, d0), (dim, dim - d0))
        .copy_from(&split.range_basis);
    let mut m = v.transpose() * gram * &v;
    for (k, mu) in split.range_values.iter().enumerate() {
        m[(d0 + k, d0 + k)] += lambda * mu;
    }
    let z = solve_spd(&m, &(v.transpose() * rhs)).ok_or(SplineError::SingularCorner)?;
    Ok(v * z)
}

fn check_positive_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(SplineError::NonPositiveLambda(lambda));
    }
    Ok(())
}

/// `H_P(lambda) = (lambda P + Piᵀ Pi)^{-1}`; the fitted coordinates are
/// `H_P(lambda) (0, y, 0)`.
pub fn general_hat(p: &PenaltyMatrix, lambda: f64) -> Result<DMatrix<f64>> {
    check_positive_lambda(lambda)?;
    check_general(p, None)?;
    let dim = p.dim();
    let inv = solve_general(p, lambda, &DMatrix::identity(dim, dim))?;
    Ok((&inv + inv.transpose()) * 0.5)
}

/// Fitted coordinates of the general estimator.
pub fn general_fit(p: &PenaltyMatrix, y: &DVector<f64>, lambda: f64) -> Result<DVector<f64>> {
    check_positive_lambda(lambda)?;
    check_general(p, Some(y.len()))?;
    let dim = p.dim();
    let rhs = DMatrix::from_column_slice(dim, 1, embed_values(y).as_slice());
    Ok(solve_general(p, lambda, &rhs)?.column(0).into_owned())
}

/// Limit of the general fit as `lambda -> 0`: `p = y` and the boundary
/// curvatures solve the corner system
/// `[p_11 p_1m; p_m1 p_mm] (u_1, u_{n+1}) = -(P_1,mid y, P_m,mid y)`.
pub fn general_limit_zero(p: &PenaltyMatrix, y: &DVector<f64>) -> Result<DVector<f64>> {
    check_general(p, Some(y.len()))?;
    let dim = p.dim();
    let mid_first = p.matrix.view((0, 1), (1, dim - 2));
    let mid_last = p.matrix.view((dim - 1, 1), (1, dim - 2));
    let rhs = DVector::from_vec(vec![-(mid_first * y)[0], -(mid_last * y)[0]]);
    let u = p
        .corner()
        .lu()
        .solve(&rhs)
        .ok_or(SplineError::SingularCorner)?;
    let mut x = embed_values(y);
    x[0] = u[0];
    x[dim - 1] = u[1];
    Ok(x)
}

/// Limit of the general fit as `lambda -> infinity`: least squares of `y`
/// over the coordinates annihilated by `P`.
pub fn general_limit_infinity(p: &PenaltyMatrix, y: &DVector<f64>) -> Result<DVector<f64>> {
    let dim = p.dim();
    if y.len() + 2 != dim {
        return Err(SplineError::ShapeMismatch {
            expected: dim - 2,
            actual: y.len(),
        });
    }
    let split = p.spectral_split();
    let p0 = split.null_basis;
    if p0.ncols() == 0 {
        return Err(SplineError::EmptyNullspace);
    }
    let f = p0.rows(1, dim - 2).into_owned();
    let svd = f.svd(true, true);
    let tol = (dim - 2).max(p0.ncols()) as f64 * f64::EPSILON * svd.singular_values.max();
    let beta = svd.solve(y, tol).map_err(|_| SplineError::SingularGls)?;
    Ok(&p0 * beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::build_basis;
    use crate::linalg::sorted_symmetric_eigen;
    use crate::oracle;
    use crate::penalty::{build_curvature, build_ppen};
    use crate::types::make_grid;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_y(rng: &mut ChaCha8Rng, m: usize) -> DVector<f64> {
        DVector::from_fn(m, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn hat_at_zero_is_identity() {
        let h = hat_matrix(&KnotGrid::uniform(7).unwrap(), 0.0).unwrap();
        assert_eq!(h.h, DMatrix::identity(8, 8));
    }

    #[test]
    fn negative_lambda_is_rejected() {
        let g = KnotGrid::uniform(4).unwrap();
        assert_eq!(hat_matrix(&g, -1.0), Err(SplineError::NegativeLambda(-1.0)));
        let obs = Observations::new(g, vec![0.0; 5]).unwrap();
        assert!(smooth_natural(&obs, -0.5).is_err());
    }

    #[test]
    fn large_lambda_approaches_trend_projector() {
        let g = KnotGrid::uniform(7).unwrap();
        let h = hat_matrix(&g, 1e8).unwrap();
        let proj = oracle::trend_projector(g.knots());
        assert!(oracle::max_abs_diff(&h.h, &proj) < 1e-5);
    }

    #[test]
    fn hat_matches_dense_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for knots in [
            KnotGrid::uniform(7).unwrap().knots().to_vec(),
            oracle::random_knots(&mut rng, 11),
        ] {
            let g = make_grid(&knots).unwrap();
            for lambda in [1e-3, 1.0, 1e3] {
                let h = hat_matrix(&g, lambda).unwrap();
                let dense = oracle::dense_hat(&knots, lambda);
                // The dense oracle loses digits with the condition number.
                let tol = 100.0
                    * f64::EPSILON
                    * (1.0 + lambda * max_abs(&oracle::roughness_matrix(&knots)));
                let diff = oracle::max_abs_diff(&h.h, &dense);
                assert!(diff < tol, "lambda {lambda}: {diff:e}");
                assert!((h.trace() - dense.trace()).abs() < 10.0 * tol);
                let s = NaturalSmoother::new(&g).unwrap();
                assert!((s.trace(lambda).unwrap() - dense.trace()).abs() < 10.0 * tol);
            }
        }
    }

    #[test]
    fn dense_penalty_route_agrees() {
        let g = KnotGrid::uniform(9).unwrap();
        let c = build_curvature(&build_basis(&g).unwrap());
        for lambda in [0.0, 0.01, 1.0] {
            let a = HatMatrix::from_penalty(&c, lambda).unwrap();
            let b = hat_matrix(&g, lambda).unwrap();
            assert!(oracle::max_abs_diff(&a.h, &b.h) < 1e-10);
        }
    }

    #[test]
    fn affine_data_pass_through() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let knots = oracle::random_knots(&mut rng, 8);
        let g = make_grid(&knots).unwrap();
        let s = NaturalSmoother::new(&g).unwrap();
        let l = s.trend().l.clone();
        for lambda in [1e-3, 1.0, 1e3] {
            let h = s.hat(lambda).unwrap();
            assert!(oracle::max_abs_diff(&(&h.h * &l), &l) < 1e-9);
            let y = DVector::from_iterator(9, knots.iter().map(|t| 0.5 - t));
            assert!(s.psi(&y, lambda).unwrap() < 1e-20);
        }
    }

    #[test]
    fn natural_fit_properties() {
        let g = KnotGrid::uniform(7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let y = random_y(&mut rng, 8);
        let obs = Observations::new(g.clone(), y.iter().copied().collect()).unwrap();
        let fit = smooth_natural(&obs, 0.0).unwrap();
        assert_eq!(fit.p_hat(), y);
        assert_eq!(fit.rss, 0.0);
        let fit = smooth_natural(&obs, 0.5).unwrap();
        assert_eq!(fit.coords.u_first, 0.0);
        assert_eq!(fit.coords.u_last, 0.0);
        assert!((fit.rss - (&y - fit.p_hat()).norm_squared()).abs() < 1e-15);
        assert!(fit.fitted_coeffs.c2_defect(&g) < 1e-9);
    }

    #[test]
    fn natural_fit_matches_direct_quadratic_minimizer() {
        let g = KnotGrid::uniform(7).unwrap();
        let b = build_basis(&g).unwrap();
        let c = build_curvature(&b);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let y = random_y(&mut rng, 8);
        let lambda = 0.5;
        // Minimize lambda xᵀCx + ||Pi x - y||^2: stationarity (lambda C + PiᵀPi) x = Piᵀ y.
        let a = &c.matrix * lambda + value_selector_gram(10);
        let x = a.lu().solve(&embed_values(&y)).unwrap();
        let p = NaturalSmoother::new(&g)
            .unwrap()
            .fitted_values(&y, lambda)
            .unwrap();
        assert!((x.rows(1, 8) - &p).amax() < 1e-8);
        assert!(x[0].abs() < 1e-8 && x[9].abs() < 1e-8);
    }

    #[test]
    fn decomposition_is_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let knots = oracle::random_knots(&mut rng, 10);
        let g = make_grid(&knots).unwrap();
        let y = random_y(&mut rng, 11);
        let obs = Observations::new(g.clone(), y.iter().copied().collect()).unwrap();
        let (trend, rest) = decompose_fit(&obs, 1.0).unwrap();
        assert!(trend.dot(&rest).abs() < 1e-9 * y.norm_squared());
        let proj = oracle::trend_projector(&knots);
        assert!((&proj * &rest).norm() < 1e-9);
        let p = smooth_natural(&obs, 1.0).unwrap().p_hat();
        assert!((&trend + &rest - p).amax() < 1e-12);
        let affine = Observations::new(g, knots.iter().map(|t| 3.0 * t).collect()).unwrap();
        let (_, rest) = decompose_fit(&affine, 1.0).unwrap();
        assert!(rest.amax() < 1e-10);
    }

    #[test]
    fn trace_endpoints_and_monotonicity() {
        let g = KnotGrid::uniform(7).unwrap();
        let s = NaturalSmoother::new(&g).unwrap();
        assert_eq!(s.trace(0.0).unwrap(), 8.0);
        assert!((s.trace(1e10).unwrap() - 2.0).abs() < 1e-3);
        let mut prev = f64::INFINITY;
        for k in -60..=100 {
            let lambda = 10f64.powf(k as f64 / 10.0);
            let t = s.trace(lambda).unwrap();
            assert!(t < prev);
            prev = t;
        }
    }

    #[test]
    fn hat_commutes_with_trend_projector() {
        let g = KnotGrid::uniform(12).unwrap();
        let s = NaturalSmoother::new(&g).unwrap();
        let proj = &s.trend().projector;
        for lambda in [1e-2, 1.0, 1e2, 1e5] {
            let h = s.hat(lambda).unwrap().h;
            assert!(oracle::max_abs_diff(&(&h * proj), proj) < 1e-9);
            assert!(oracle::max_abs_diff(&(proj * &h), proj) < 1e-9);
        }
    }

    #[test]
    fn hat_eigenvalues_shrink() {
        let g = KnotGrid::uniform(9).unwrap();
        let b = build_basis(&g).unwrap();
        let (mu, vecs) = sorted_symmetric_eigen(&build_curvature(&b).middle_block());
        let s = NaturalSmoother::new(&g).unwrap();
        let mut prev: Option<Vec<f64>> = None;
        for lambda in [0.0, 1e-3, 1e-1, 1.0, 10.0] {
            let h = s.hat(lambda).unwrap().h;
            let diag: Vec<f64> = (0..10)
                .map(|k| {
                    let v = vecs.column(k);
                    v.dot(&(&h * v))
                })
                .collect();
            for k in 0..10 {
                let expected = 1.0 / (1.0 + lambda * mu[k].max(0.0));
                assert!((diag[k] - expected).abs() < 1e-8);
                assert!(diag[k] > -1e-10 && diag[k] <= 1.0 + 1e-10);
            }
            if let Some(p) = prev {
                assert!(p.iter().zip(&diag).all(|(a, b)| a + 1e-12 >= *b));
            }
            prev = Some(diag);
        }
    }

    #[test]
    fn general_estimator_reduces_to_natural() {
        let g = KnotGrid::uniform(7).unwrap();
        let c = build_curvature(&build_basis(&g).unwrap());
        let s = NaturalSmoother::new(&g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let y = random_y(&mut rng, 8);
        for lambda in [1e-3, 1.0, 1e3] {
            let x = general_fit(&c, &y, lambda).unwrap();
            let p = s.fitted_values(&y, lambda).unwrap();
            assert!(x[0].abs() < 1e-8 && x[9].abs() < 1e-8);
            assert!((x.rows(1, 8) - p).amax() < 1e-8);
            let h = general_hat(&c, lambda).unwrap();
            assert!((&h * embed_values(&y) - &x).amax() < 1e-8);
        }
    }

    #[test]
    fn general_estimator_is_not_natural_for_combined_penalty() {
        let g = KnotGrid::uniform(7).unwrap();
        let p = build_ppen(&build_basis(&g).unwrap(), 1.0, 1.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let y = random_y(&mut rng, 8);
        let x = general_fit(&p, &y, 1.0).unwrap();
        assert!(x[0].abs().max(x[9].abs()) > 1e-6);
    }

    #[test]
    fn small_lambda_limit_solves_corner_system() {
        let g = KnotGrid::uniform(7).unwrap();
        let p = build_ppen(&build_basis(&g).unwrap(), 1.0, 1.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let y = random_y(&mut rng, 8);
        let m = &p.matrix;
        let corner_residual = |x: &DVector<f64>| {
            let r1 = x[0] * m[(0, 0)]
                + x[9] * m[(0, 9)]
                + (1..9).map(|i| m[(0, i)] * y[i - 1]).sum::<f64>();
            let r2 = x[0] * m[(9, 0)]
                + x[9] * m[(9, 9)]
                + (1..9).map(|i| m[(9, i)] * y[i - 1]).sum::<f64>();
            r1.abs().max(r2.abs())
        };
        let lim = general_limit_zero(&p, &y).unwrap();
        assert!(corner_residual(&lim) < 1e-10);
        assert_eq!(lim.rows(1, 8), y.rows(0, 8));
        let x = general_fit(&p, &y, 1e-10).unwrap();
        assert!((x.rows(1, 8) - &y).amax() < 1e-6);
        assert!(corner_residual(&x) < 1e-6);
        // The approach to the limit is linear in lambda.
        let far = general_fit(&p, &y, 1e-8).unwrap();
        let ratio = (far[0] - lim[0]).abs() / (x[0] - lim[0]).abs();
        assert!((ratio - 100.0).abs() < 5.0, "ratio {ratio}");
    }

    #[test]
    fn infinite_lambda_limit() {
        let g = KnotGrid::uniform(7).unwrap();
        let c = build_curvature(&build_basis(&g).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let y = random_y(&mut rng, 8);
        let lim = general_limit_infinity(&c, &y).unwrap();
        let proj = oracle::trend_projector(g.knots());
        assert!((lim.rows(1, 8) - &proj * &y).amax() < 1e-9);
        assert!(lim[0].abs() < 1e-9 && lim[9].abs() < 1e-9);
        assert!((&c.matrix * &lim).amax() < 1e-9);
        let far = general_fit(&c, &y, 1e9).unwrap();
        assert!((far - &lim).amax() < 1e-4);
        let affine = DVector::from_iterator(8, g.knots().iter().map(|t| 1.0 + t));
        let lim = general_limit_infinity(&c, &affine).unwrap();
        assert!((lim.rows(1, 8) - affine).amax() < 1e-10);

        let p = build_ppen(&build_basis(&g).unwrap(), 1.0, 1.0, 1.0).unwrap();
        assert_eq!(
            general_limit_infinity(&p, &y),
            Err(SplineError::EmptyNullspace)
        );
    }

    #[test]
    fn general_errors() {
        let g = KnotGrid::uniform(5).unwrap();
        let c = build_curvature(&build_basis(&g).unwrap());
        assert_eq!(
            general_hat(&c, 0.0),
            Err(SplineError::NonPositiveLambda(0.0))
        );
        let mut m = c.matrix.clone();
        m[(0, 0)] = 0.0;
        m[(7, 7)] = 0.0;
        m[(0, 7)] = 0.0;
        m[(7, 0)] = 0.0;
        let singular = PenaltyMatrix::user(m).unwrap();
        assert_eq!(
            general_hat(&singular, 1.0),
            Err(SplineError::SingularCorner)
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn psi_is_monotone_and_bounded(seed in any::<u64>(), n in 2usize..20) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = make_grid(&oracle::random_knots(&mut rng, n)).unwrap();
            let s = NaturalSmoother::new(&g).unwrap();
            let y = random_y(&mut rng, n + 1);
            let bound = s.trend().residual_norm2(&y);
            let mut prev = 0.0;
            for k in -40..=40 {
                let v = s.psi(&y, 10f64.powf(k as f64 / 4.0)).unwrap();
                prop_assert!(v >= prev - 1e-12);
                prop_assert!(v <= bound + 1e-9);
                prev = v;
            }
        }

        #[test]
        fn hat_is_symmetric_with_spectrum_in_unit_interval(seed in any::<u64>(), n in 2usize..16, e in -4.0f64..6.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = make_grid(&oracle::random_knots(&mut rng, n)).unwrap();
            let h = hat_matrix(&g, 10f64.powf(e)).unwrap().h;
            let (vals, _) = sorted_symmetric_eigen(&h);
            prop_assert!(vals[0] > -1e-10 && vals[n] <= 1.0 + 1e-10);
        }
    }
}
