//! `natspline` command-line interface.
//!
//! Exit codes: 0 success, 2 input error, 3 no smoothing parameter satisfies
//! the selector, 4 numerical failure. `NATSPLINE_OUT` overrides the output
//! directory of `fit` and `figures`.

mod commands;
mod error;
mod io;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::{MatrixKind, PenaltyChoice, RunConfig, SelectorKind};
use error::CliResult;

#[derive(Parser)]
#[command(
    name = "natspline",
    version,
    about = "Natural cubic splines and penalized smoothing"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a smoothing spline to a `t,y` CSV and write fit.csv, spline.csv, summary.json.
    Fit(FitArgs),
    /// Select the smoothing parameter and print it as JSON.
    Select(SelectArgs),
    /// Write the data behind figures 1-4 and 9-11 as long-format CSV.
    Figures {
        #[arg(long, default_value_t = 7)]
        n: usize,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Print a basis or penalty matrix of the uniform grid on [0, 1] as CSV.
    Matrices {
        #[arg(long)]
        n: usize,
        #[arg(long, value_enum)]
        which: MatrixKind,
        /// Penalty weights a0,a1,a2 for Ppen (default 1,1,1).
        #[arg(long, allow_hyphen_values = true)]
        a: Option<String>,
    },
    /// Fixed effects, random effects and fitted coordinates of the mixed-model reading.
    Blup {
        #[arg(long)]
        input: PathBuf,
        /// Noise variance.
        #[arg(long)]
        sigma_w2: f64,
        /// Random-effect variance.
        #[arg(long)]
        sigma_s2: f64,
        #[command(flatten)]
        penalty: PenaltyArgs,
    },
}

#[derive(Args, Clone)]
struct PenaltyArgs {
    /// curvature or combined.
    #[arg(long, default_value = "curvature")]
    penalty: String,
    /// Weights a0,a1,a2 of the combined penalty (default 1,1,1).
    #[arg(long, allow_hyphen_values = true)]
    a: Option<String>,
}

#[derive(Args, Clone)]
struct SelectionArgs {
    #[arg(long)]
    input: PathBuf,
    /// Smoothing parameter; implies the fixed selector.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, value_enum)]
    selector: Option<SelectorKind>,
    /// Noise variance.
    #[arg(long)]
    sigma2: Option<f64>,
    /// Target ||w||^2 for noise matching (default (n+1) sigma2).
    #[arg(long)]
    w_norm2: Option<f64>,
    /// Relative half-width of the band selector.
    #[arg(long, default_value_t = 0.2)]
    epsilon: f64,
    /// Lower end of the lambda search bracket.
    #[arg(long, default_value_t = 1e-10)]
    lambda_min: f64,
    /// Upper end of the lambda search bracket.
    #[arg(long, default_value_t = 1e10)]
    lambda_max: f64,
    #[command(flatten)]
    penalty: PenaltyArgs,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    selection: SelectionArgs,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Number of evaluation points in spline.csv.
    #[arg(long, default_value_t = 200)]
    eval_points: usize,
}

#[derive(Args)]
struct SelectArgs {
    #[command(flatten)]
    selection: SelectionArgs,
}

fn run_config(s: &SelectionArgs, out_dir: PathBuf, eval_points: usize) -> CliResult<RunConfig> {
    let selector = s.selector.unwrap_or(SelectorKind::Fixed);
    Ok(RunConfig {
        input_path: s.input.clone(),
        output_dir: out_dir,
        lambda: s.lambda,
        selector,
        sigma2: s.sigma2,
        w_norm2: s.w_norm2,
        epsilon: s.epsilon,
        bracket: (s.lambda_min, s.lambda_max),
        penalty: PenaltyChoice::parse(&s.penalty.penalty, s.penalty.a.as_deref())?,
        eval_points,
    })
}

fn run(cli: Cli) -> CliResult<()> {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Fit(a) => commands::cmd_fit(&run_config(&a.selection, a.out_dir, a.eval_points)?),
        Command::Select(a) => commands::cmd_select(
            &run_config(&a.selection, PathBuf::from("."), 200)?,
            &mut out,
        ),
        Command::Figures { n, out_dir } => commands::cmd_figures(n, &out_dir),
        Command::Matrices { n, which, a } => {
            commands::cmd_matrices(n, which, a.as_deref(), &mut out)
        }
        Command::Blup {
            input,
            sigma_w2,
            sigma_s2,
            penalty,
        } => {
            let p = PenaltyChoice::parse(&penalty.penalty, penalty.a.as_deref())?;
            commands::cmd_blup(&input, sigma_w2, sigma_s2, p, &mut out)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
