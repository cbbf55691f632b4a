//! Choice of the smoothing parameter.
//!
//! `psi(lambda) = ||y - H(lambda) y||^2` grows from 0 to `||y - Lreg y||^2`,
//! so the equation `psi(lambda) = target` has a root exactly when the target
//! lies below that supremum. Roots are found by bisection on `log10 lambda`.
//! SURE is minimized by a coarse scan followed by golden-section search.

use nalgebra::DVector;

use crate::error::{Result, SplineError};
use crate::smoother::NaturalSmoother;
use crate::types::{KnotGrid, Observations};

/// Which rule produced a [`SelectionResult`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionMethod {
    NoiseMatch,
    BandLower,
    BandUpper,
    Sure,
}

impl SelectionMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::NoiseMatch => "noise_match",
            Self::BandLower => "band_lower",
            Self::BandUpper => "band_upper",
            Self::Sure => "sure",
        }
    }
}

/// Outcome of a selection rule. `lambda` is `None` when the equation has no
/// solution; `criterion_value` is then the supremum of `psi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionResult {
    pub lambda: Option<f64>,
    pub criterion_value: f64,
    pub method: SelectionMethod,
}

impl SelectionResult {
    pub fn is_solution(&self) -> bool {
        self.lambda.is_some()
    }
}

/// Parameters of the selection rules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionConfig {
    /// Noise variance.
    pub sigma2: f64,
    /// Relative half-width of the band.
    pub epsilon: f64,
    /// Initial search interval in `lambda` (both ends positive).
    pub lambda_bracket: (f64, f64),
    /// Relative tolerance on the criterion value.
    pub tol: f64,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            sigma2: 0.0,
            epsilon: 0.2,
            lambda_bracket: (1e-10, 1e10),
            tol: 1e-10,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma2 >= 0.0) || !self.sigma2.is_finite() {
            return Err(SplineError::NegativeVariance(self.sigma2));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(SplineError::InvalidConfig("epsilon must lie in (0, 1)"));
        }
        let (lo, hi) = self.lambda_bracket;
        if !(lo > 0.0 && lo < hi && hi.is_finite()) {
            return Err(SplineError::InvalidConfig(
                "lambda bracket must satisfy 0 < lower < upper < infinity",
            ));
        }
        if !(self.tol > 0.0) {
            return Err(SplineError::InvalidConfig("tolerance must be positive"));
        }
        Ok(())
    }
}

const MAX_LOG10_LAMBDA: f64 = 300.0;
const MAX_BISECTIONS: usize = 400;
const SCAN_POINTS: usize = 64;

/// A smoother bound to one data vector, for repeated criterion evaluations.
#[derive(Debug, Clone)]
pub struct Selector {
    smoother: NaturalSmoother,
    y: DVector<f64>,
    sup: f64,
}

impl Selector {
    pub fn new(obs: &Observations) -> Result<Self> {
        let smoother = NaturalSmoother::new(obs.grid())?;
        Ok(Self::with_smoother(smoother, obs.y().clone()))
    }

    pub fn with_smoother(smoother: NaturalSmoother, y: DVector<f64>) -> Self {
        let sup = smoother.trend().residual_norm2(&y);
        Self { smoother, y, sup }
    }

    pub fn smoother(&self) -> &NaturalSmoother {
        &self.smoother
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    fn knot_count(&self) -> f64 {
        self.y.len() as f64
    }

    /// `||y - Lreg y||^2`, the supremum of `psi`.
    pub fn psi_sup(&self) -> f64 {
        self.sup
    }

    pub fn psi(&self, lambda: f64) -> Result<f64> {
        self.smoother.psi(&self.y, lambda)
    }

    /// Root of `psi(lambda) = target` on `log10 lambda`, starting from the
    /// bracket `[lo, hi]` and widening it as needed.
    fn solve_psi(&self, target: f64, bracket: (f64, f64), tol: f64) -> Result<Option<f64>> {
        if target <= 0.0 {
            return Ok(Some(0.0));
        }
        if target >= self.sup {
            return Ok(None);
        }
        let accept = tol * target.max(1.0);
        let mut lo = bracket.0.log10();
        let mut hi = bracket.1.log10();
        let f = |e: f64| -> Result<f64> { Ok(self.psi(10f64.powf(e))? - target) };
        let mut f_lo = f(lo)?;
        while f_lo > 0.0 {
            if f_lo.abs() <= accept {
                return Ok(Some(10f64.powf(lo)));
            }
            hi = lo;
            lo -= 10.0;
            if lo < -MAX_LOG10_LAMBDA {
                return Ok(Some(10f64.powf(hi)));
            }
            f_lo = f(lo)?;
        }
        let mut f_hi = f(hi)?;
        while f_hi < 0.0 {
            if f_hi.abs() <= accept {
                return Ok(Some(10f64.powf(hi)));
            }
            lo = hi;
            hi += 10.0;
            if hi > MAX_LOG10_LAMBDA {
                return Ok(Some(10f64.powf(lo)));
            }
            f_hi = f(hi)?;
        }
        let mut best = if f_lo.abs() < f_hi.abs() {
            (lo, f_lo)
        } else {
            (hi, f_hi)
        };
        for _ in 0..MAX_BISECTIONS {
            if best.1.abs() <= accept {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let f_mid = f(mid)?;
            if f_mid.abs() < best.1.abs() {
                best = (mid, f_mid);
            }
            if f_mid < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(Some(10f64.powf(best.0)))
    }

    fn result(
        &self,
        target: f64,
        cfg: &SelectionConfig,
        method: SelectionMethod,
    ) -> Result<SelectionResult> {
        let lambda = self.solve_psi(target, cfg.lambda_bracket, cfg.tol)?;
        let criterion_value = match lambda {
            Some(l) => self.psi(l)?,
            None => self.sup,
        };
        Ok(SelectionResult {
            lambda,
            criterion_value,
            method,
        })
    }

    /// Solve `psi(lambda) = w_norm2`.
    pub fn noise_match(&self, w_norm2: f64, cfg: &SelectionConfig) -> Result<SelectionResult> {
        if !(w_norm2 >= 0.0) {
            return Err(SplineError::NegativeVariance(w_norm2));
        }
        self.result(w_norm2, cfg, SelectionMethod::NoiseMatch)
    }

    /// `(lambda^-, lambda^+)` solving `psi = (n+1)(1 -+ epsilon) sigma^2`.
    pub fn band(&self, cfg: &SelectionConfig) -> Result<(SelectionResult, SelectionResult)> {
        cfg.validate()?;
        let base = self.knot_count() * cfg.sigma2;
        let lower = self.result(base * (1.0 - cfg.epsilon), cfg, SelectionMethod::BandLower)?;
        let upper = self.result(base * (1.0 + cfg.epsilon), cfg, SelectionMethod::BandUpper)?;
        Ok((lower, upper))
    }

    /// `RSS + 2 sigma^2 trace H - (n+1) sigma^2`.
    pub fn sure(&self, lambda: f64, sigma2: f64) -> Result<f64> {
        Ok(self.pe(lambda, sigma2)? - self.knot_count() * sigma2)
    }

    /// `RSS + 2 sigma^2 trace H`.
    pub fn pe(&self, lambda: f64, sigma2: f64) -> Result<f64> {
        if !(sigma2 >= 0.0) {
            return Err(SplineError::NegativeVariance(sigma2));
        }
        let rss = self.psi(lambda)?;
        if sigma2 == 0.0 {
            return Ok(rss);
        }
        Ok(rss + 2.0 * sigma2 * self.smoother.trace(lambda)?)
    }

    /// Minimizer of SURE over `bracket`.
    pub fn minimize_sure(&self, sigma2: f64, bracket: (f64, f64)) -> Result<SelectionResult> {
        if !(sigma2 >= 0.0) || !sigma2.is_finite() {
            return Err(SplineError::NegativeVariance(sigma2));
        }
        let (lo, hi) = bracket;
        if !(lo > 0.0 && lo < hi && hi.is_finite()) {
            return Err(SplineError::InvalidConfig(
                "lambda bracket must satisfy 0 < lower < upper < infinity",
            ));
        }
        if sigma2 == 0.0 {
            return Ok(SelectionResult {
                lambda: Some(0.0),
                criterion_value: 0.0,
                method: SelectionMethod::Sure,
            });
        }
        let (a, b) = (lo.log10(), hi.log10());
        let step = (b - a) / (SCAN_POINTS - 1) as f64;
        let g = |e: f64| self.sure(10f64.powf(e), sigma2);
        let mut best = (0, f64::INFINITY);
        for k in 0..SCAN_POINTS {
            let v = g(a + step * k as f64)?;
            if v < best.1 {
                best = (k, v);
            }
        }
        if best.0 == 0 || best.0 == SCAN_POINTS - 1 {
            return Err(SplineError::BracketTooNarrow { lo, hi });
        }
        let centre = a + step * best.0 as f64;
        let (e, v) = golden_section(&g, centre - step, centre + step, 1e-12)?;
        let (e, v) = if v <= best.1 {
            (e, v)
        } else {
            (centre, best.1)
        };
        Ok(SelectionResult {
            lambda: Some(10f64.powf(e)),
            criterion_value: v,
            method: SelectionMethod::Sure,
        })
    }

    /// Largest positive second difference of `psi` on a log-spaced grid;
    /// zero when the sampled curve is concave.
    pub fn psi_convexity_excess(&self, lambdas: &[f64]) -> Result<f64> {
        let values: Vec<f64> = lambdas
            .iter()
            .map(|l| self.psi(*l))
            .collect::<Result<_>>()?;
        let mut worst = 0.0_f64;
        for k in 1..values.len().saturating_sub(1) {
            let (l0, l1, l2) = (lambdas[k - 1], lambdas[k], lambdas[k + 1]);
            // Divided second difference in lambda.
            let d1 = (values[k] - values[k - 1]) / (l1 - l0);
            let d2 = (values[k + 1] - values[k]) / (l2 - l1);
            worst = worst.max((d2 - d1) / (l2 - l0));
        }
        Ok(worst)
    }
}

fn golden_section(
    g: &impl Fn(f64) -> Result<f64>,
    mut a: f64,
    mut b: f64,
    tol: f64,
) -> Result<(f64, f64)> {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut gc = g(c)?;
    let mut gd = g(d)?;
    while (b - a).abs() > tol {
        if gc < gd {
            b = d;
            d = c;
            gd = gc;
            c = b - inv_phi * (b - a);
            gc = g(c)?;
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + inv_phi * (b - a);
            gd = g(d)?;
        }
    }
    Ok(if gc < gd { (c, gc) } else { (d, gd) })
}

/// `psi(lambda) = ||y - H(lambda) y||^2`.
pub fn psi(obs: &Observations, lambda: f64) -> Result<f64> {
    NaturalSmoother::new(obs.grid())?.psi(obs.y(), lambda)
}

/// Solve `psi(lambda) = w_norm2` with the default configuration.
pub fn solve_noise_match(obs: &Observations, w_norm2: f64) -> Result<SelectionResult> {
    Selector::new(obs)?.noise_match(w_norm2, &SelectionConfig::default())
}

pub fn lambda_band(
    obs: &Observations,
    cfg: &SelectionConfig,
) -> Result<(SelectionResult, SelectionResult)> {
    Selector::new(obs)?.band(cfg)
}

pub fn sure(obs: &Observations, lambda: f64, sigma2: f64) -> Result<f64> {
    Selector::new(obs)?.sure(lambda, sigma2)
}

pub fn pe_estimate(obs: &Observations, lambda: f64, sigma2: f64) -> Result<f64> {
    Selector::new(obs)?.pe(lambda, sigma2)
}

pub fn minimize_sure(
    obs: &Observations,
    sigma2: f64,
    bracket: (f64, f64),
) -> Result<SelectionResult> {
    Selector::new(obs)?.minimize_sure(sigma2, bracket)
}

/// `<e_i - Lreg e_i, e_j - Lreg e_j>` by the closed forms
/// `n/(n+1) - (t_i - mean)^2 / spread` (diagonal) and
/// `-1/(n+1) - (t_i - mean)(t_j - mean) / spread`. Indices are 0-based.
pub fn leverage_linear(grid: &KnotGrid, i: usize, j: usize) -> Result<f64> {
    let len = grid.len();
    for idx in [i, j] {
        if idx >= len {
            return Err(SplineError::IndexOutOfRange { index: idx, len });
        }
    }
    let t = grid.knots();
    let mean = t.iter().sum::<f64>() / len as f64;
    let spread: f64 = t.iter().map(|x| (x - mean) * (x - mean)).sum();
    let m = len as f64;
    let cross = (t[i] - mean) * (t[j] - mean) / spread;
    Ok(if i == j {
        (m - 1.0) / m - cross
    } else {
        -1.0 / m - cross
    })
}

/// `||e_i - H(lambda) e_i||^2` (0-based `i`).
pub fn nsr_column(grid: &KnotGrid, i: usize, lambda: f64) -> Result<f64> {
    if i >= grid.len() {
        return Err(SplineError::IndexOutOfRange {
            index: i,
            len: grid.len(),
        });
    }
    let mut e = DVector::zeros(grid.len());
    e[i] = 1.0;
    NaturalSmoother::new(grid)?.psi(&e, lambda)
}

/// `||y - Lreg y||^2 / (n - 1)`.
pub fn estimate_sigma2(obs: &Observations) -> f64 {
    let trend = crate::penalty::LinearTrend::new(obs.grid());
    trend.residual_norm2(obs.y()) / (obs.grid().n() - 1) as f64
}
