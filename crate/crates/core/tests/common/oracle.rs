//! Independent reference computations for tests. Nothing here calls the
//! library: quadrature, dense piecewise-cubic solves and explicit inverses.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

const GL5: [(f64, f64); 5] = [
    (0.0, 0.568_888_888_888_888_9),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
    (0.906_179_845_938_664, 0.236_926_885_056_189_1),
];

const GL10: [(f64, f64); 10] = [
    (-0.148_874_338_981_631_2, 0.295_524_224_714_752_9),
    (0.148_874_338_981_631_2, 0.295_524_224_714_752_9),
    (-0.433_395_394_129_247_2, 0.269_266_719_309_996_3),
    (0.433_395_394_129_247_2, 0.269_266_719_309_996_3),
    (-0.679_409_568_299_024_4, 0.219_086_362_515_982),
    (0.679_409_568_299_024_4, 0.219_086_362_515_982),
    (-0.865_063_366_688_984_5, 0.149_451_349_150_580_6),
    (0.865_063_366_688_984_5, 0.149_451_349_150_580_6),
    (-0.973_906_528_517_171_7, 0.066_671_344_308_688_1),
    (0.973_906_528_517_171_7, 0.066_671_344_308_688_1),
];

/// Gauss–Legendre nodes and weights on `[-1, 1]` (5 or 10 nodes).
pub fn gauss_legendre(nodes: usize) -> &'static [(f64, f64)] {
    match nodes {
        5 => &GL5,
        10 => &GL10,
        _ => panic!("only 5 and 10 nodes are tabulated"),
    }
}

/// `sum_i int_{t_i}^{t_{i+1}} f` by Gauss–Legendre on every interval.
/// `f` receives points strictly inside the interval and the interval index.
pub fn piecewise_integral_indexed(
    knots: &[f64],
    nodes: usize,
    mut f: impl FnMut(f64, usize) -> f64,
) -> f64 {
    let rule = gauss_legendre(nodes);
    let mut total = 0.0;
    for i in 0..knots.len() - 1 {
        let (a, b) = (knots[i], knots[i + 1]);
        let (mid, half) = ((a + b) / 2.0, (b - a) / 2.0);
        total += half
            * rule
                .iter()
                .map(|(x, w)| w * f(mid + half * x, i))
                .sum::<f64>();
    }
    total
}

pub fn piecewise_integral(knots: &[f64], nodes: usize, mut f: impl FnMut(f64) -> f64) -> f64 {
    piecewise_integral_indexed(knots, nodes, |t, _| f(t))
}

/// Random strictly increasing knots on `[0, 1]` with spacings bounded away
/// from zero (ratio of extremes below 20).
pub fn random_knots<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let steps: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = steps.iter().sum();
    let mut knots = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    knots.push(0.0);
    for s in &steps[..n - 1] {
        acc += s / total;
        knots.push(acc);
    }
    knots.push(1.0);
    knots
}

/// Piecewise cubic in local coordinates, `a + b x + c x^2 + d x^3` on piece `i`.
#[derive(Debug, Clone)]
pub struct DensePiecewise {
    pub knots: Vec<f64>,
    pub coef: Vec<[f64; 4]>,
}

impl DensePiecewise {
    pub fn eval(&self, t: f64, order: usize) -> f64 {
        let n = self.coef.len();
        let mut i = 0;
        while i + 1 < n && t >= self.knots[i + 1] {
            i += 1;
        }
        self.eval_on(i, t, order)
    }

    pub fn eval_on(&self, i: usize, t: f64, order: usize) -> f64 {
        let x = t - self.knots[i];
        let [a, b, c, d] = self.coef[i];
        match order {
            0 => a + b * x + c * x * x + d * x * x * x,
            1 => b + 2.0 * c * x + 3.0 * d * x * x,
            2 => 2.0 * c + 6.0 * d * x,
            3 => 6.0 * d,
            _ => panic!("order"),
        }
    }
}

/// The C² cubic spline with knot values `p` and end second derivatives
/// `u_first`, `u_last`, from a dense `4n x 4n` solve of all the gluing
/// conditions.
pub fn dense_spline(knots: &[f64], u_first: f64, p: &[f64], u_last: f64) -> DensePiecewise {
    let n = knots.len() - 1;
    let m = 4 * n;
    let mut a = DMatrix::zeros(m, m);
    let mut b = DVector::zeros(m);
    let mut row = 0;
    for i in 0..n {
        let h = knots[i + 1] - knots[i];
        let c = 4 * i;
        a[(row, c)] = 1.0;
        b[row] = p[i];
        row += 1;
        for k in 0..4 {
            a[(row, c + k)] = h.powi(k as i32);
        }
        b[row] = p[i + 1];
        row += 1;
        if i + 1 < n {
            // slope and curvature continuity at t_{i+1}
            a[(row, c + 1)] = 1.0;
            a[(row, c + 2)] = 2.0 * h;
            a[(row, c + 3)] = 3.0 * h * h;
            a[(row, c + 5)] = -1.0;
            row += 1;
            a[(row, c + 2)] = 2.0;
            a[(row, c + 3)] = 6.0 * h;
            a[(row, c + 6)] = -2.0;
            row += 1;
        }
    }
    a[(row, 2)] = 2.0;
    b[row] = u_first;
    row += 1;
    let hl = knots[n] - knots[n - 1];
    a[(row, 4 * (n - 1) + 2)] = 2.0;
    a[(row, 4 * (n - 1) + 3)] = 6.0 * hl;
    b[row] = u_last;
    let x = a.lu().solve(&b).expect("dense spline system is singular");
    DensePiecewise {
        knots: knots.to_vec(),
        coef: (0..n)
            .map(|i| [x[4 * i], x[4 * i + 1], x[4 * i + 2], x[4 * i + 3]])
            .collect(),
    }
}

/// Dense `(n+1) x (n+1)` roughness matrix `K = Qᵀ R⁻¹ Q` in the classical
/// value-based formulation, with `R` inverted explicitly.
pub fn roughness_matrix(knots: &[f64]) -> DMatrix<f64> {
    let n = knots.len() - 1;
    let h: Vec<f64> = knots.windows(2).map(|w| w[1] - w[0]).collect();
    let mut q = DMatrix::zeros(n + 1, n - 1);
    let mut r = DMatrix::zeros(n - 1, n - 1);
    for j in 0..n - 1 {
        q[(j, j)] = 1.0 / h[j];
        q[(j + 1, j)] = -1.0 / h[j] - 1.0 / h[j + 1];
        q[(j + 2, j)] = 1.0 / h[j + 1];
        r[(j, j)] = (h[j] + h[j + 1]) / 3.0;
        if j + 1 < n - 1 {
            r[(j, j + 1)] = h[j + 1] / 6.0;
            r[(j + 1, j)] = h[j + 1] / 6.0;
        }
    }
    let rinv = r.try_inverse().expect("R invertible");
    &q * rinv * q.transpose()
}

/// `(I + lambda K)^{-1}` by explicit inversion.
pub fn dense_hat(knots: &[f64], lambda: f64) -> DMatrix<f64> {
    let k = roughness_matrix(knots);
    let m = k.nrows();
    (DMatrix::identity(m, m) + k * lambda)
        .try_inverse()
        .expect("I + lambda K invertible")
}

/// `L (LᵀL)^{-1} Lᵀ` with the 2x2 inverse written out.
pub fn trend_projector(knots: &[f64]) -> DMatrix<f64> {
    let m = knots.len();
    let s0 = m as f64;
    let s1: f64 = knots.iter().sum();
    let s2: f64 = knots.iter().map(|t| t * t).sum();
    let det = s0 * s2 - s1 * s1;
    DMatrix::from_fn(m, m, |i, j| {
        let (a, b) = (knots[i], knots[j]);
        (s2 - s1 * (a + b) + s0 * a * b) / det
    })
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

/// Round half away from zero to `digits` decimals.
pub fn round_to(x: f64, digits: u32) -> f64 {
    let s = 10f64.powi(digits as i32);
    (x * s).round() / s
}

/// The printed curvature matrix for the uniform grid with `n = 7`.
pub const PRINTED_C: [[f64; 10]; 10] = [
    [0.04, 0.00, 0.00, 0.00, 0.00, 0.00, 0.00, 0.00, 0.00, 0.00],
    [
        0.00, 551.44, -1250.64, 886.54, -237.54, 63.63, -16.97, 4.24, -0.71, 0.00,
    ],
    [
        0.00, -1250.64, 3387.82, -3261.27, 1425.26, -381.77, 101.80, -25.45, 4.24, 0.00,
    ],
    [
        0.00, 886.54, -3261.27, 4813.08, -3643.03, 1527.06, -407.22, 101.80, -16.97, 0.00,
    ],
    [
        0.00, -237.54, 1425.26, -3643.03, 4914.88, -3668.49, 1527.06, -381.77, 63.63, 0.00,
    ],
    [
        0.00, 63.63, -381.77, 1527.06, -3668.49, 4914.88, -3643.03, 1425.26, -237.54, 0.00,
    ],
    [
        0.00, -16.97, 101.80, -407.22, 1527.06, -3643.03, 4813.08, -3261.27, 886.54, 0.00,
    ],
    [
        0.00, 4.24, -25.45, 101.80, -381.77, 1425.26, -3261.27, 3387.82, -1250.64, 0.00,
    ],
    [
        0.00, -0.71, 4.24, -16.97, 63.63, -237.54, 886.54, -1250.64, 551.44, 0.00,
    ],
    [0.00, 0.00, 0.00, 0.00, 0.00, 0.00, 0.00, 0.00, 0.00, 0.04],
];

/// The printed combined penalty `a = (1, 1, 1)`, uniform `n = 7`, as the
/// literal strings so that each entry keeps its printed precision.
pub const PRINTED_PPEN: [[&str; 10]; 10] = [
    [
        "2.6", "-239.22", "614.68", "-559.93", "255.91", "-96.85", "33.253", "-9.951", "1.841",
        "-0.01",
    ],
    [
        "-239.22",
        "30883.64",
        "-89524.08",
        "98923.05",
        "-57634.4",
        "23760.7",
        "-8518.95",
        "2611.28",
        "-488.75",
        "1.84",
    ],
    [
        "614.68",
        "-89524.08",
        "278142.5",
        "-345243.9",
        "238016.7",
        "-113691.9",
        "43414.47",
        "-13742.88",
        "2611.71",
        "-9.94",
    ],
    [
        "-559.93",
        "98923.05",
        "-345243.9",
        "516426.7",
        "-459007.5",
        "281450.3",
        "-127439.9",
        "43417.03",
        "-8521.09",
        "33.24",
    ],
    [
        "255.91",
        "-57634.4",
        "238016.7",
        "-459007.5",
        "559860.4",
        "-472755.5",
        "281452.9",
        "-113702.2",
        "23768.8",
        "-96.81",
    ],
    [
        "-96.85",
        "23760.7",
        "-113691.9",
        "281450.3",
        "-472755.5",
        "559863",
        "-459017.7",
        "238055.1",
        "-57664.7",
        "255.76",
    ],
    [
        "33.253",
        "-8518.95",
        "43414.47",
        "-127439.9",
        "281452.9",
        "-459017.7",
        "516465.1",
        "-345387.2",
        "99036.12",
        "-559.40",
    ],
    [
        "-9.951",
        "2611.28",
        "-13742.88",
        "43417.03",
        "-113702.2",
        "238055.1",
        "-345387.2",
        "278677.6",
        "-89946.04",
        "612.72",
    ],
    [
        "1.841",
        "-488.75",
        "2611.71",
        "-8521.09",
        "23768.8",
        "-57664.7",
        "99036.12",
        "-89946.04",
        "31219.29",
        "-236.99",
    ],
    [
        "-0.01", "1.84", "-9.95", "33.24", "-96.819", "255.76", "-559.40", "612.722", "-236.99",
        "3.85",
    ],
];

/// Number of decimals in a printed entry.
pub fn printed_decimals(s: &str) -> u32 {
    s.split_once('.').map_or(0, |(_, d)| d.len() as u32)
}
