//! Cubic smoothing splines in the natural basis `phi_0, ..., phi_{n+2}`.
//!
//! A C² cubic spline on knots `t_1 < ... < t_{n+1}` is coordinated by its
//! boundary second derivatives and its knot values, `(u_1, p, u_{n+1})`.
//! The crate provides:
//!
//! * [`basis`]: the matrices `Q`, `U`, `V` and evaluation of the basis,
//! * [`penalty`]: the curvature matrix `C`, Gram matrices `C_rs`, combined
//!   penalties and a constrained quadratic solver,
//! * [`smoother`]: the penalized estimators and their limits,
//! * [`select`]: smoothing-parameter selection (noise matching, bands, SURE),
//! * [`bayes`]: the mixed-model (BLUE/BLUP) reading of the estimators.
//!
//! ```
//! use natspline::{KnotGrid, Observations, smoother::smooth_natural};
//!
//! let grid = KnotGrid::uniform(7).unwrap();
//! let y: Vec<f64> = grid.knots().iter().map(|t| 1.0 + 2.0 * t).collect();
//! let obs = Observations::new(grid, y.clone()).unwrap();
//! let fit = smooth_natural(&obs, 3.0).unwrap();
//! for (a, b) in fit.coords.values.iter().zip(&y) {
//!     assert!((a - b).abs() < 1e-9);
//! }
//! ```

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]
pub mod basis;
pub mod bayes;
pub mod error;
pub mod linalg;
pub mod penalty;
pub mod select;
pub mod smoother;
pub mod types;

pub use basis::{build_basis, build_system, BasisMatrices, SystemMatrices};
pub use error::{Result, SplineError};
pub use penalty::{LinearTrend, PenaltyKind, PenaltyMatrix};
pub use smoother::{HatMatrix, SmoothFit};
pub use types::{
    flatten, make_grid, unflatten, KnotGrid, NaturalCoordinates, Observations, SplineCoefficients,
};

#[cfg(test)]
#[path = "../tests/common/oracle.rs"]
#[allow(dead_code)]
mod oracle;
