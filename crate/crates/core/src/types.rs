//! Validated value types shared by every other module: the knot grid, the
//! natural coordinates `(u_1, p, u_{n+1})`, piecewise-polynomial
//! coefficients and noisy observations.

use nalgebra::DVector;

use crate::error::{Result, SplineError};

/// Strictly increasing knots `t_1 < ... < t_{n+1}` with `n >= 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct KnotGrid {
    knots: Vec<f64>,
    spacings: Vec<f64>,
}

impl KnotGrid {
    pub fn new(knots: Vec<f64>) -> Result<Self> {
        if knots.len() < 3 {
            return Err(SplineError::TooFewKnots(knots.len()));
        }
        if let Some(i) = knots.iter().position(|t| !t.is_finite()) {
            return Err(SplineError::NonFiniteInput(i));
        }
        for i in 1..knots.len() {
            if knots[i] <= knots[i - 1] {
                return Err(SplineError::NonIncreasingKnots {
                    index: i,
                    prev: knots[i - 1],
                    next: knots[i],
                });
            }
        }
        let spacings: Vec<f64> = knots.windows(2).map(|w| w[1] - w[0]).collect();
        // Differences of huge finite values can overflow.
        if let Some(i) = spacings.iter().position(|h| !h.is_finite()) {
            return Err(SplineError::NonFiniteInput(i + 1));
        }
        Ok(Self { knots, spacings })
    }

    /// Uniform grid `t_i = (i - 1) / n` on `[0, 1]`.
    pub fn uniform(n: usize) -> Result<Self> {
        Self::new((0..=n).map(|i| i as f64 / n as f64).collect())
    }

    /// Number of intervals `n`.
    pub fn n(&self) -> usize {
        self.spacings.len()
    }

    /// Number of knots `n + 1`.
    pub fn len(&self) -> usize {
        self.knots.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Dimension `n + 3` of the natural coordinate space.
    pub fn coord_dim(&self) -> usize {
        self.knots.len() + 2
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn spacings(&self) -> &[f64] {
        &self.spacings
    }

    pub fn first(&self) -> f64 {
        self.knots[0]
    }

    pub fn last(&self) -> f64 {
        self.knots[self.knots.len() - 1]
    }

    /// Index `i` (0-based) of the piece `[t_i, t_{i+1})` containing `t`.
    /// The right end point belongs to the last piece.
    pub fn locate(&self, t: f64) -> Result<usize> {
        if !(t >= self.first() && t <= self.last()) {
            return Err(SplineError::OutOfDomain {
                t,
                lo: self.first(),
                hi: self.last(),
            });
        }
        let idx = self.knots.partition_point(|&k| k <= t);
        Ok(idx.saturating_sub(1).min(self.n() - 1))
    }

    /// Mirror image `t'_i = t_1 + t_{n+1} - t_{n+2-i}` on the same interval.
    pub fn reversed(&self) -> Self {
        let (a, b) = (self.first(), self.last());
        let knots: Vec<f64> = self.knots.iter().rev().map(|t| a + b - t).collect();
        let spacings = self.spacings.iter().rev().copied().collect();
        Self { knots, spacings }
    }
}

/// Validate a knot vector. See [`KnotGrid::new`].
pub fn make_grid(knots: &[f64]) -> Result<KnotGrid> {
    KnotGrid::new(knots.to_vec())
}

/// Coordinates of a C² cubic spline in the natural basis: the boundary second
/// derivatives together with the knot values.
#[derive(Debug, Clone, PartialEq)]
pub struct NaturalCoordinates {
    pub u_first: f64,
    pub values: Vec<f64>,
    pub u_last: f64,
}

impl NaturalCoordinates {
    pub fn new(u_first: f64, values: Vec<f64>, u_last: f64) -> Self {
        Self {
            u_first,
            values,
            u_last,
        }
    }

    /// Coordinates of the natural spline through `values`.
    pub fn natural(values: Vec<f64>) -> Self {
        Self::new(0.0, values, 0.0)
    }

    pub fn zeros(knot_count: usize) -> Self {
        Self::natural(vec![0.0; knot_count])
    }

    /// Canonical vector `delta_j` of the `(n+3)`-space, `j` in `0..n+3`.
    pub fn canonical(knot_count: usize, j: usize) -> Result<Self> {
        let dim = knot_count + 2;
        if j >= dim {
            return Err(SplineError::IndexOutOfRange { index: j, len: dim });
        }
        let mut flat = vec![0.0; dim];
        flat[j] = 1.0;
        Self::unflatten(&flat)
    }

    pub fn dim(&self) -> usize {
        self.values.len() + 2
    }

    /// `(u_1, p_1, ..., p_{n+1}, u_{n+1})`.
    pub fn flatten(&self) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim());
        out[0] = self.u_first;
        for (k, p) in self.values.iter().enumerate() {
            out[k + 1] = *p;
        }
        out[self.dim() - 1] = self.u_last;
        out
    }

    pub fn unflatten(flat: &[f64]) -> Result<Self> {
        if flat.len() < 5 {
            return Err(SplineError::ShapeMismatch {
                expected: 5,
                actual: flat.len(),
            });
        }
        let m = flat.len();
        Ok(Self::new(flat[0], flat[1..m - 1].to_vec(), flat[m - 1]))
    }

    pub fn from_vector(v: &DVector<f64>) -> Result<Self> {
        Self::unflatten(v.as_slice())
    }
}

/// Free-function form of [`NaturalCoordinates::flatten`].
pub fn flatten(coords: &NaturalCoordinates) -> DVector<f64> {
    coords.flatten()
}

/// Free-function form of [`NaturalCoordinates::unflatten`].
pub fn unflatten(flat: &[f64]) -> Result<NaturalCoordinates> {
    NaturalCoordinates::unflatten(flat)
}

/// Piecewise coefficients: on `[t_i, t_{i+1})`
/// `s(t) = p_i + q_i (t - t_i) + u_i/2 (t - t_i)^2 + v_i/6 (t - t_i)^3`.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineCoefficients {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl SplineCoefficients {
    pub fn n(&self) -> usize {
        self.q.len()
    }

    /// Value or derivative of order `order` (0..=3) at `t`.
    ///
    /// At the right end point the left limit of the last piece is used; the
    /// third derivative is the piecewise-constant right limit `v_i`.
    pub fn eval(&self, grid: &KnotGrid, t: f64, order: usize) -> Result<f64> {
        if order > 3 {
            return Err(SplineError::InvalidOrder(order));
        }
        if self.p.len() != grid.len() || self.q.len() != grid.n() {
            return Err(SplineError::ShapeMismatch {
                expected: grid.len(),
                actual: self.p.len(),
            });
        }
        let i = grid.locate(t)?;
        let x = t - grid.knots()[i];
        let (p, q, u, v) = (self.p[i], self.q[i], self.u[i], self.v[i]);
        Ok(match order {
            0 => p + x * (q + x * (u / 2.0 + x * v / 6.0)),
            1 => q + x * (u + x * v / 2.0),
            2 => u + x * v,
            _ => v,
        })
    }

    /// Largest violation of the value / slope / curvature continuity
    /// conditions at the interior knots, relative to the coefficient scale.
    pub fn c2_defect(&self, grid: &KnotGrid) -> f64 {
        let h = grid.spacings();
        let scale = self
            .p
            .iter()
            .chain(&self.q)
            .chain(&self.u)
            .chain(&self.v)
            .fold(1.0_f64, |m, x| m.max(x.abs()));
        let mut worst = 0.0_f64;
        for i in 0..self.n() {
            let hi = h[i];
            let value = self.p[i]
                + self.q[i] * hi
                + self.u[i] / 2.0 * hi * hi
                + self.v[i] / 6.0 * hi * hi * hi;
            worst = worst.max((value - self.p[i + 1]).abs());
            worst = worst.max((self.u[i] + hi * self.v[i] - self.u[i + 1]).abs());
            if i + 1 < self.n() {
                let slope = self.q[i] + self.u[i] * hi + self.v[i] / 2.0 * hi * hi;
                worst = worst.max((slope - self.q[i + 1]).abs());
            }
        }
        worst / scale
    }
}

/// Free-function form of [`SplineCoefficients::eval`].
pub fn eval(coeffs: &SplineCoefficients, grid: &KnotGrid, t: f64, order: usize) -> Result<f64> {
    coeffs.eval(grid, t, order)
}

/// Observations `y_i = s(t_i) + w_i` at the knots.
#[derive(Debug, Clone, PartialEq)]
pub struct Observations {
    grid: KnotGrid,
    y: DVector<f64>,
}

impl Observations {
    pub fn new(grid: KnotGrid, y: Vec<f64>) -> Result<Self> {
        if y.len() != grid.len() {
            return Err(SplineError::ShapeMismatch {
                expected: grid.len(),
                actual: y.len(),
            });
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(SplineError::NonFiniteInput(i));
        }
        Ok(Self {
            grid,
            y: DVector::from_vec(y),
        })
    }

    pub fn grid(&self) -> &KnotGrid {
        &self.grid
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }
}
