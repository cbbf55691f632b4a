//! Mixed-model reading of the penalized estimator.
//!
//! Splitting the coordinates as `x = P0 beta + P1 eta`, with `P0` spanning
//! the null space of the penalty and `P1ᵀ P P1 = I`, turns
//! `lambda xᵀ P x + ||y - Pi x||^2` into
//! `lambda ||eta||^2 + ||y - F beta - R eta||^2` with `F = Pi P0`,
//! `R = Pi P1`. Its minimizer is the BLUE of `beta` and the BLUP of `eta` in
//! `y = F beta + R eta + w`, `eta ~ (0, sigma_s^2 I)`, `w ~ (0, sigma_w^2 I)`,
//! with `lambda = sigma_w^2 / sigma_s^2`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SplineError};
use crate::penalty::PenaltyMatrix;
use crate::smoother::{general_fit, general_limit_zero};
use crate::types::NaturalCoordinates;

/// `P0` (null-space basis) and `P1` (with `P1ᵀ P P1 = I`).
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyFactorization {
    pub p0: DMatrix<f64>,
    pub p1: DMatrix<f64>,
    // Orthonormal eigenvectors behind p1 and the square roots of their eigenvalues.
    range_vectors: DMatrix<f64>,
    range_sqrt: DVector<f64>,
}

pub fn factorize_penalty(p: &PenaltyMatrix) -> PenaltyFactorization {
    let split = p.spectral_split();
    let range_sqrt = split.range_values.map(f64::sqrt);
    let mut p1 = split.range_basis.clone();
    for (k, mut col) in p1.column_iter_mut().enumerate() {
        col /= range_sqrt[k];
    }
    PenaltyFactorization {
        p0: split.null_basis,
        p1,
        range_vectors: split.range_basis,
        range_sqrt,
    }
}

impl PenaltyFactorization {
    /// `d0`, the number of fixed effects.
    pub fn null_dim(&self) -> usize {
        self.p0.ncols()
    }

    pub fn dim(&self) -> usize {
        self.p0.nrows()
    }

    /// The unique `(beta, eta)` with `P0 beta + P1 eta = x`.
    pub fn split(&self, x: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
        if x.len() != self.dim() {
            return Err(SplineError::ShapeMismatch {
                expected: self.dim(),
                actual: x.len(),
            });
        }
        let beta = self.p0.transpose() * x;
        let eta = (self.range_vectors.transpose() * x).component_mul(&self.range_sqrt);
        Ok((beta, eta))
    }

    pub fn reconstruct(&self, beta: &DVector<f64>, eta: &DVector<f64>) -> DVector<f64> {
        &self.p0 * beta + &self.p1 * eta
    }

    /// Designs `(F, R) = (Pi P0, Pi P1)`.
    pub fn designs(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let m = self.dim() - 2;
        (
            self.p0.rows(1, m).into_owned(),
            self.p1.rows(1, m).into_owned(),
        )
    }
}

/// `y = F beta + R eta + w` with scalar covariances.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedModel {
    pub f: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub sigma_w2: f64,
    pub sigma_s2: f64,
}

fn check_variances(sigma_w2: f64, sigma_s2: f64) -> Result<()> {
    if !(sigma_w2 >= 0.0) || !sigma_w2.is_finite() {
        return Err(SplineError::NegativeVariance(sigma_w2));
    }
    if !(sigma_s2 > 0.0) || !sigma_s2.is_finite() {
        return Err(SplineError::NonPositiveLambda(sigma_s2));
    }
    Ok(())
}

impl MixedModel {
    pub fn new(f: DMatrix<f64>, r: DMatrix<f64>, sigma_w2: f64, sigma_s2: f64) -> Result<Self> {
        check_variances(sigma_w2, sigma_s2)?;
        if f.nrows() != r.nrows() {
            return Err(SplineError::ShapeMismatch {
                expected: r.nrows(),
                actual: f.nrows(),
            });
        }
        Ok(Self {
            f,
            r,
            sigma_w2,
            sigma_s2,
        })
    }

    pub fn from_factorization(
        fact: &PenaltyFactorization,
        sigma_w2: f64,
        sigma_s2: f64,
    ) -> Result<Self> {
        let (f, r) = fact.designs();
        Self::new(f, r, sigma_w2, sigma_s2)
    }

    /// `sigma_w^2 / sigma_s^2`.
    pub fn lambda(&self) -> f64 {
        self.sigma_w2 / self.sigma_s2
    }

    /// `R Sigma_eta Rᵀ + Sigma_w`.
    pub fn covariance(&self) -> DMatrix<f64> {
        let m = self.r.nrows();
        &self.r * self.r.transpose() * self.sigma_s2 + DMatrix::identity(m, m) * self.sigma_w2
    }
}

/// BLUE, BLUP and the linear maps `y -> beta_hat`, `y -> eta_hat`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlupEstimate {
    pub beta: DVector<f64>,
    pub eta: DVector<f64>,
    pub m_beta: DMatrix<f64>,
    pub m_eta: DMatrix<f64>,
}

/// Henderson's BLUE of `beta` and BLUP of `eta`.
///
/// The BLUP is evaluated as `(RᵀR + lambda I)^{-1} Rᵀ (y - F beta_hat)`, the
/// closed form multiplied through by `sigma_w^2`.
pub fn blue_blup(model: &MixedModel, y: &DVector<f64>) -> Result<BlupEstimate> {
    let m = model.r.nrows();
    if y.len() != m {
        return Err(SplineError::ShapeMismatch {
            expected: m,
            actual: y.len(),
        });
    }
    let d0 = model.f.ncols();
    let id = DMatrix::identity(m, m);
    let m_beta = if d0 == 0 {
        DMatrix::zeros(0, m)
    } else {
        let v = model
            .covariance()
            .cholesky()
            .ok_or(SplineError::SingularGls)?;
        let vinv_f = v.solve(&model.f);
        let gls = (model.f.transpose() * &vinv_f)
            .cholesky()
            .ok_or(SplineError::SingularGls)?;
        gls.solve(&vinv_f.transpose())
    };
    let k = model.r.ncols();
    let shrink = (model.r.transpose() * &model.r + DMatrix::identity(k, k) * model.lambda())
        .cholesky()
        .ok_or(SplineError::SingularGls)?;
    let m_eta = shrink.solve(&(model.r.transpose() * (&id - &model.f * &m_beta)));
    Ok(BlupEstimate {
        beta: &m_beta * y,
        eta: &m_eta * y,
        m_beta,
        m_eta,
    })
}

/// The two routes to the estimator and their common coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Equivalence {
    pub lambda: f64,
    pub beta: DVector<f64>,
    pub eta: DVector<f64>,
    pub coords: NaturalCoordinates,
    pub factorization: PenaltyFactorization,
}

/// `(beta_hat, eta_hat)` minimizing `lambda ||eta||^2 + ||y - F beta - R eta||^2`
/// with `lambda = sigma_w^2 / sigma_s^2`, and the coordinates
/// `P0 beta_hat + P1 eta_hat`.
pub fn equivalence(
    p: &PenaltyMatrix,
    y: &DVector<f64>,
    sigma_w2: f64,
    sigma_s2: f64,
) -> Result<Equivalence> {
    check_variances(sigma_w2, sigma_s2)?;
    let fact = factorize_penalty(p);
    let lambda = sigma_w2 / sigma_s2;
    let (beta, eta, coords) = if lambda == 0.0 {
        let x = general_limit_zero(p, y)?;
        let (beta, eta) = fact.split(&x)?;
        (beta, eta, x)
    } else {
        // Validates shapes and the corner condition.
        general_fit(p, y, lambda)?;
        let (f, r) = fact.designs();
        let d0 = f.ncols();
        let k = r.ncols();
        let mut design = DMatrix::zeros(y.len(), d0 + k);
        design.view_mut((0, 0), (y.len(), d0)).copy_from(&f);
        design.view_mut((0, d0), (y.len(), k)).copy_from(&r);
        let mut normal = design.transpose() * &design;
        for j in d0..d0 + k {
            normal[(j, j)] += lambda;
        }
        let z = normal
            .cholesky()
            .ok_or(SplineError::SingularCorner)?
            .solve(&(design.transpose() * y));
        let beta = z.rows(0, d0).into_owned();
        let eta = z.rows(d0, k).into_owned();
        let x = fact.reconstruct(&beta, &eta);
        (beta, eta, x)
    };
    Ok(Equivalence {
        lambda,
        beta,
        eta,
        coords: NaturalCoordinates::from_vector(&coords)?,
        factorization: fact,
    })
}
