use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use natspline::bayes::{blue_blup, equivalence, MixedModel};
use natspline::penalty::{build_curvature, build_ppen};
use natspline::select::{SelectionConfig, SelectionResult, Selector};
use natspline::smoother::{general_fit, general_hat, general_limit_zero, NaturalSmoother};
use natspline::{build_basis, BasisMatrices, KnotGrid, PenaltyMatrix, SplineCoefficients};
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{CliError, CliResult};
use crate::io::{
    fmt_f64, prepare_dir, read_dataset, resolve_output_dir, write_csv, write_csv_file,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SelectorKind {
    Fixed,
    #[value(name = "noise_match")]
    NoiseMatch,
    Band,
    Sure,
}

impl SelectorKind {
    fn name(self) -> &'static str {
        match self {
            Self::Fixed => "fixed",
            Self::NoiseMatch => "noise_match",
            Self::Band => "band",
            Self::Sure => "sure",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PenaltyChoice {
    Curvature,
    Combined(f64, f64, f64),
}

impl PenaltyChoice {
    pub fn parse(kind: &str, a: Option<&str>) -> CliResult<Self> {
        match kind {
            "curvature" => {
                if a.is_some() {
                    return Err(CliError::input("--a applies only to the combined penalty"));
                }
                Ok(Self::Curvature)
            }
            "combined" => {
                let (a0, a1, a2) = match a {
                    Some(s) => parse_weights(s)?,
                    None => (1.0, 1.0, 1.0),
                };
                Ok(Self::Combined(a0, a1, a2))
            }
            other => Err(CliError::input(format!(
                "unknown penalty `{other}` (expected curvature or combined)"
            ))),
        }
    }

    fn label(&self) -> String {
        match self {
            Self::Curvature => "curvature".into(),
            Self::Combined(a0, a1, a2) => {
                format!(
                    "combined({},{},{})",
                    fmt_f64(*a0),
                    fmt_f64(*a1),
                    fmt_f64(*a2)
                )
            }
        }
    }

    fn build(&self, basis: &BasisMatrices) -> CliResult<PenaltyMatrix> {
        Ok(match *self {
            Self::Curvature => build_curvature(basis),
            Self::Combined(a0, a1, a2) => build_ppen(basis, a0, a1, a2)?,
        })
    }
}

pub fn parse_weights(s: &str) -> CliResult<(f64, f64, f64)> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(CliError::input(format!("expected a0,a1,a2, got `{s}`")));
    }
    let mut v = [0.0_f64; 3];
    for (k, p) in parts.iter().enumerate() {
        v[k] = p
            .parse()
            .map_err(|_| CliError::input(format!("cannot parse weight `{p}`")))?;
        if !v[k].is_finite() {
            return Err(CliError::input(format!("weight `{p}` is not finite")));
        }
    }
    Ok((v[0], v[1], v[2]))
}

/// Settings shared by `fit` and `select`.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub input_path: PathBuf,
    pub output_dir: PathBuf,
    pub lambda: Option<f64>,
    pub selector: SelectorKind,
    pub sigma2: Option<f64>,
    pub w_norm2: Option<f64>,
    pub epsilon: f64,
    pub bracket: (f64, f64),
    pub penalty: PenaltyChoice,
    pub eval_points: usize,
}

impl RunConfig {
    fn validate(&self) -> CliResult<()> {
        match (self.selector, self.lambda) {
            (SelectorKind::Fixed, None) => {
                return Err(CliError::input(
                    "--lambda is required with the fixed selector",
                ))
            }
            (SelectorKind::Fixed, Some(l)) if !(l >= 0.0 && l.is_finite()) => {
                return Err(CliError::input(format!(
                    "--lambda must be finite and >= 0, got {l}"
                )))
            }
            (s, Some(_)) if s != SelectorKind::Fixed => {
                return Err(CliError::input(format!(
                    "--lambda cannot be combined with the {} selector",
                    s.name()
                )))
            }
            _ => {}
        }
        if self.selector != SelectorKind::Fixed && self.penalty != PenaltyChoice::Curvature {
            return Err(CliError::input(
                "data-driven selectors are available only for the curvature penalty",
            ));
        }
        if self.eval_points < 2 {
            return Err(CliError::input("--eval-points must be at least 2"));
        }
        Ok(())
    }

    fn selection_config(&self) -> SelectionConfig {
        SelectionConfig {
            sigma2: self.sigma2.unwrap_or(0.0),
            epsilon: self.epsilon,
            lambda_bracket: self.bracket,
            ..SelectionConfig::default()
        }
    }
}

fn require_sigma2(cfg: &RunConfig) -> CliResult<f64> {
    cfg.sigma2.ok_or_else(|| {
        CliError::input(format!(
            "--sigma2 is required with the {} selector",
            cfg.selector.name()
        ))
    })
}

fn no_solution(sup: f64, target: f64, what: &str) -> CliError {
    CliError::NoSolution(format!(
        "no smoothing parameter: ||y - Lreg y||^2 = {} must exceed {what} = {}",
        fmt_f64(sup),
        fmt_f64(target)
    ))
}

fn result_value(r: &SelectionResult) -> Value {
    json!({
        "lambda": r.lambda,
        "criterion_value": r.criterion_value,
        "method": r.method.as_str(),
    })
}

/// The smoothing parameter and the selector's diagnostics.
pub fn choose_lambda(
    cfg: &RunConfig,
    grid: &KnotGrid,
    y: &DVector<f64>,
) -> CliResult<(f64, BTreeMap<String, Value>)> {
    cfg.validate()?;
    let mut diag = BTreeMap::new();
    if cfg.selector == SelectorKind::Fixed {
        return Ok((cfg.lambda.unwrap_or(0.0), diag));
    }
    let sel = Selector::with_smoother(NaturalSmoother::new(grid)?, y.clone());
    let sc = cfg.selection_config();
    sc.validate()?;
    diag.insert("psi_sup".into(), json!(sel.psi_sup()));
    let lambda = match cfg.selector {
        SelectorKind::NoiseMatch => {
            let w2 = match cfg.w_norm2 {
                Some(w) => w,
                None => grid.len() as f64 * require_sigma2(cfg)?,
            };
            diag.insert("w_norm2".into(), json!(w2));
            let r = sel.noise_match(w2, &sc)?;
            diag.insert("noise_match".into(), result_value(&r));
            r.lambda
                .ok_or_else(|| no_solution(sel.psi_sup(), w2, "||w||^2"))?
        }
        SelectorKind::Band => {
            let s2 = require_sigma2(cfg)?;
            let (lo, hi) = sel.band(&SelectionConfig { sigma2: s2, ..sc })?;
            diag.insert("band_lower".into(), result_value(&lo));
            diag.insert("band_upper".into(), result_value(&hi));
            diag.insert("epsilon".into(), json!(cfg.epsilon));
            match (lo.lambda, hi.lambda) {
                (Some(a), Some(b)) => (a * b).sqrt(),
                (Some(a), None) => a,
                _ => {
                    let target = grid.len() as f64 * s2 * (1.0 - cfg.epsilon);
                    return Err(no_solution(
                        sel.psi_sup(),
                        target,
                        "(n+1)(1-epsilon) sigma^2",
                    ));
                }
            }
        }
        SelectorKind::Sure => {
            let s2 = require_sigma2(cfg)?;
            let r = sel.minimize_sure(s2, cfg.bracket)?;
            diag.insert("sure".into(), result_value(&r));
            r.lambda.unwrap_or(0.0)
        }
        SelectorKind::Fixed => unreachable!(),
    };
    Ok((lambda, diag))
}

/// Fitted coordinates, spline coefficients, RSS and `trace H`.
pub struct FitOutcome {
    pub coords: DVector<f64>,
    pub coeffs: SplineCoefficients,
    pub rss: f64,
    pub trace: f64,
}

pub fn compute_fit(
    grid: &KnotGrid,
    y: &DVector<f64>,
    lambda: f64,
    penalty: PenaltyChoice,
) -> CliResult<FitOutcome> {
    match penalty {
        PenaltyChoice::Curvature => {
            let s = NaturalSmoother::new(grid)?;
            let fit = s.fit(y, lambda)?;
            Ok(FitOutcome {
                coords: fit.coords.flatten(),
                coeffs: fit.fitted_coeffs,
                rss: fit.rss,
                trace: s.trace(lambda)?,
            })
        }
        PenaltyChoice::Combined(..) => {
            let basis = build_basis(grid)?;
            let p = penalty.build(&basis)?;
            let m = grid.len();
            let (coords, trace) = if lambda == 0.0 {
                (general_limit_zero(&p, y)?, m as f64)
            } else {
                let h = general_hat(&p, lambda)?;
                (
                    general_fit(&p, y, lambda)?,
                    (1..=m).map(|j| h[(j, j)]).sum(),
                )
            };
            let rss = (coords.rows(1, m) - y).norm_squared();
            Ok(FitOutcome {
                coeffs: basis.coefficients_from_flat(&coords)?,
                coords,
                rss,
                trace,
            })
        }
    }
}

#[derive(Serialize)]
struct Summary {
    knots: usize,
    penalty: String,
    selector: &'static str,
    lambda: f64,
    rss: f64,
    trace_h: f64,
    u_first: f64,
    u_last: f64,
    diagnostics: BTreeMap<String, Value>,
}

fn linspace(a: f64, b: f64, k: usize) -> Vec<f64> {
    (0..k)
        .map(|i| {
            if i + 1 == k {
                b
            } else {
                a + (b - a) * i as f64 / (k - 1) as f64
            }
        })
        .collect()
}

fn load(cfg: &RunConfig) -> CliResult<(KnotGrid, DVector<f64>)> {
    let data = read_dataset(&cfg.input_path)?;
    let grid = KnotGrid::new(data.t)?;
    Ok((grid, DVector::from_vec(data.y)))
}

pub fn cmd_fit(cfg: &RunConfig) -> CliResult<()> {
    let (grid, y) = load(cfg)?;
    let (lambda, diagnostics) = choose_lambda(cfg, &grid, &y)?;
    let out = compute_fit(&grid, &y, lambda, cfg.penalty)?;
    let dir = resolve_output_dir(&cfg.output_dir);
    prepare_dir(&dir)?;

    let m = grid.len();
    let rows: Vec<Vec<String>> = (0..m)
        .map(|i| {
            let p = out.coords[i + 1];
            vec![
                fmt_f64(grid.knots()[i]),
                fmt_f64(y[i]),
                fmt_f64(p),
                fmt_f64(y[i] - p),
            ]
        })
        .collect();
    write_csv_file(
        &dir.join("fit.csv"),
        &["t", "y", "p_hat", "residual"],
        &rows,
    )?;

    let mut rows = Vec::with_capacity(cfg.eval_points);
    for t in linspace(grid.first(), grid.last(), cfg.eval_points) {
        let mut row = vec![fmt_f64(t)];
        for order in 0..4 {
            row.push(fmt_f64(out.coeffs.eval(&grid, t, order)?));
        }
        rows.push(row);
    }
    write_csv_file(
        &dir.join("spline.csv"),
        &["t", "s", "s1", "s2", "s3"],
        &rows,
    )?;

    let summary = Summary {
        knots: m,
        penalty: cfg.penalty.label(),
        selector: cfg.selector.name(),
        lambda,
        rss: out.rss,
        trace_h: out.trace,
        u_first: out.coords[0],
        u_last: out.coords[m + 1],
        diagnostics,
    };
    let mut text = serde_json::to_string_pretty(&summary)?;
    text.push('\n');
    std::fs::write(dir.join("summary.json"), text)
        .map_err(|e| CliError::input(format!("cannot write summary.json: {e}")))?;
    Ok(())
}

pub fn cmd_select(cfg: &RunConfig, out: &mut dyn Write) -> CliResult<()> {
    let (grid, y) = load(cfg)?;
    let (lambda, diagnostics) = choose_lambda(cfg, &grid, &y)?;
    let v = json!({
        "selector": cfg.selector.name(),
        "lambda": lambda,
        "diagnostics": diagnostics,
    });
    writeln!(out, "{}", serde_json::to_string_pretty(&v)?)?;
    Ok(())
}

pub fn cmd_blup(
    input: &Path,
    sigma_w2: f64,
    sigma_s2: f64,
    penalty: PenaltyChoice,
    out: &mut dyn Write,
) -> CliResult<()> {
    let data = read_dataset(input)?;
    let grid = KnotGrid::new(data.t)?;
    let y = DVector::from_vec(data.y);
    let basis = build_basis(&grid)?;
    let p = penalty.build(&basis)?;
    let eq = equivalence(&p, &y, sigma_w2, sigma_s2)?;
    let mut henderson = Value::Null;
    if sigma_w2 > 0.0 {
        let model = MixedModel::from_factorization(&eq.factorization, sigma_w2, sigma_s2)?;
        let est = blue_blup(&model, &y)?;
        henderson = json!({ "beta": est.beta.as_slice(), "eta": est.eta.as_slice() });
    }
    let v = json!({
        "penalty": penalty.label(),
        "lambda": eq.lambda,
        "null_dim": eq.factorization.null_dim(),
        "beta": eq.beta.as_slice(),
        "eta": eq.eta.as_slice(),
        "henderson": henderson,
        "u_first": eq.coords.u_first,
        "p_hat": eq.coords.values,
        "u_last": eq.coords.u_last,
    });
    writeln!(out, "{}", serde_json::to_string_pretty(&v)?)?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum MatrixKind {
    #[value(name = "C")]
    C,
    #[value(name = "Ppen")]
    Ppen,
    #[value(name = "U")]
    U,
    #[value(name = "Q")]
    Q,
    #[value(name = "V")]
    V,
}

pub fn matrix_for(n: usize, which: MatrixKind, a: Option<&str>) -> CliResult<DMatrix<f64>> {
    let grid = KnotGrid::uniform(n)?;
    let basis = build_basis(&grid)?;
    if a.is_some() && which != MatrixKind::Ppen {
        return Err(CliError::input("--a applies only to --which Ppen"));
    }
    Ok(match which {
        MatrixKind::C => build_curvature(&basis).matrix,
        MatrixKind::Ppen => {
            let (a0, a1, a2) = match a {
                Some(s) => parse_weights(s)?,
                None => (1.0, 1.0, 1.0),
            };
            build_ppen(&basis, a0, a1, a2)?.matrix
        }
        MatrixKind::U => basis.u.clone(),
        MatrixKind::Q => basis.q.clone(),
        MatrixKind::V => basis.v.clone(),
    })
}

pub fn cmd_matrices(
    n: usize,
    which: MatrixKind,
    a: Option<&str>,
    out: &mut dyn Write,
) -> CliResult<()> {
    let m = matrix_for(n, which, a)?;
    let rows: Vec<Vec<String>> = m
        .row_iter()
        .map(|r| r.iter().map(|x| fmt_f64(*x)).collect())
        .collect();
    write_csv(out, &[], &rows)
}

/// Abscissae for curve figures: `count` uniform points with the knots merged in.
pub fn figure_abscissae(grid: &KnotGrid, count: usize) -> Vec<f64> {
    let mut xs = linspace(grid.first(), grid.last(), count);
    xs.extend_from_slice(grid.knots());
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs
}

fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    linspace(lo.log10(), hi.log10(), count)
        .into_iter()
        .map(|e| 10f64.powf(e))
        .collect()
}

/// File stem and its `(series, x, value)` rows.
pub type FigureFile = (&'static str, Vec<Vec<String>>);

pub const FIGURE_SAMPLES: usize = 200;
pub const FIG10_LAMBDAS: [f64; 3] = [0.1, 0.5, 1.0];

/// Long-format rows `(series, x, value)` for each figure file.
pub fn figure_data(n: usize) -> CliResult<Vec<FigureFile>> {
    let grid = KnotGrid::uniform(n)?;
    let basis = build_basis(&grid)?;
    let smoother = NaturalSmoother::with_basis(basis.clone());
    let m = grid.len();
    let xs = figure_abscissae(&grid, FIGURE_SAMPLES);
    let mut files = Vec::new();

    for (name, order) in [("fig1", 0), ("fig2", 1), ("fig3", 2)] {
        let mut rows = Vec::new();
        for j in 0..basis.dim() {
            let coeffs = basis.basis_coefficients(j)?;
            for &x in &xs {
                rows.push(vec![
                    j.to_string(),
                    fmt_f64(x),
                    fmt_f64(coeffs.eval(&grid, x, order)?),
                ]);
            }
        }
        files.push((name, rows));
    }

    let lambdas = log_grid(1e-6, 1e2, FIGURE_SAMPLES);
    let mut rows = Vec::new();
    for i in 0..m {
        let mut e = DVector::zeros(m);
        e[i] = 1.0;
        for &l in &lambdas {
            rows.push(vec![
                (i + 1).to_string(),
                fmt_f64(l),
                fmt_f64(smoother.psi(&e, l)?),
            ]);
        }
    }
    files.push(("fig4", rows));

    let line_x = linspace(grid.first(), grid.last(), FIGURE_SAMPLES);
    let mut rows = Vec::new();
    for i in 0..m {
        let (b1, b2) = smoother.trend().line_for_unit(i)?;
        for &x in &line_x {
            rows.push(vec![(i + 1).to_string(), fmt_f64(x), fmt_f64(b1 + b2 * x)]);
        }
    }
    files.push(("fig9", rows));

    let mut rows = Vec::new();
    for &l in &FIG10_LAMBDAS {
        let h = smoother.hat(l)?;
        for i in 0..m {
            let series = format!("lambda={};i={}", fmt_f64(l), i + 1);
            for j in 0..m {
                rows.push(vec![
                    series.clone(),
                    (j + 1).to_string(),
                    fmt_f64(h.h[(j, i)]),
                ]);
            }
        }
    }
    files.push(("fig10", rows));

    let mut lambdas = vec![0.0];
    lambdas.extend(log_grid(1e-6, 1e10, FIGURE_SAMPLES - 1));
    let mut rows = Vec::new();
    for &l in &lambdas {
        rows.push(vec![
            "trace".to_string(),
            fmt_f64(l),
            fmt_f64(smoother.trace(l)?),
        ]);
    }
    files.push(("fig11", rows));
    Ok(files)
}

pub fn cmd_figures(n: usize, out_dir: &Path) -> CliResult<()> {
    let dir = resolve_output_dir(out_dir);
    let files = figure_data(n)?;
    prepare_dir(&dir)?;
    for (name, rows) in files {
        write_csv_file(
            &dir.join(format!("{name}.csv")),
            &["series", "x", "value"],
            &rows,
        )?;
    }
    Ok(())
}
