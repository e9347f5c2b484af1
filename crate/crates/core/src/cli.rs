//! `lfred` command-line front end.
//!
//! Every command writes CSV (with a header row) or a plain-text report to
//! `out`; summaries and diagnostics go to `err`. Failures print
//! `error[<code>]: <message>` and map to the exit statuses of
//! [`Error::exit_code`].

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel_ops::{find_characteristic_numbers, DiscreteKernel, DEFAULT_SCAN_POINTS};
use crate::load_system::{ClassificationKind, ReducedOutcome, LoadSystem};
use crate::problem_file::ProblemFile;
use crate::quadrature::QuadratureRule;
use crate::solver::{analyze, solve, RouteChoice, Solution, SolverOptions};

#[derive(Debug, Parser)]
#[command(name = "lfred", version, about = "Solve loaded Fredholm integral equations of the second kind")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RouteArg {
    Auto,
    Regular,
    Successive,
    Nilpotent,
    Irregular,
    Oracle,
}

impl From<RouteArg> for RouteChoice {
    fn from(r: RouteArg) -> Self {
        match r {
            RouteArg::Auto => RouteChoice::Auto,
            RouteArg::Regular => RouteChoice::Regular,
            RouteArg::Successive => RouteChoice::Successive,
            RouteArg::Nilpotent => RouteChoice::Nilpotent,
            RouteArg::Irregular => RouteChoice::Irregular,
            RouteArg::Oracle => RouteChoice::Oracle,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct NumericArgs {
    /// Gauss-Legendre nodes for the master and load rules [default: 64]
    #[arg(long)]
    pub nodes: Option<usize>,
    /// Stopping tolerance for successive approximations [default: 1e-12]
    #[arg(long)]
    pub tol: Option<f64>,
    /// Relative tolerance for detecting a vanishing iterated kernel [default: 1e-10]
    #[arg(long)]
    pub nilpotency_tol: Option<f64>,
    /// Iteration cap for successive approximations [default: 1000]
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Taylor truncation depth M [default: 30]
    #[arg(long)]
    pub truncation: Option<usize>,
    /// Contraction factor for successive approximations [default: 0.5]
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long, value_enum, default_value_t = RouteArg::Auto)]
    pub route: RouteArg,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Report the load-system structure of a problem
    Analyze {
        file: PathBuf,
        #[command(flatten)]
        num: NumericArgs,
    },
    /// Solve at one lambda; CSV of (t, x)
    Solve {
        file: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        lambda: Option<f64>,
        #[command(flatten)]
        num: NumericArgs,
    },
    /// Solve on an evenly spaced lambda grid
    Sweep {
        file: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        lambda_min: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        lambda_max: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
        /// Probe points for x(t), comma separated [default: left endpoint]
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        probe: Vec<f64>,
        #[command(flatten)]
        num: NumericArgs,
    },
    /// Locate characteristic numbers of the kernel
    FindPoles {
        file: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        lambda_min: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        lambda_max: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_SCAN_POINTS)]
        scan_points: usize,
        #[command(flatten)]
        num: NumericArgs,
    },
    /// Compare a route against the dense reference solver
    OracleCheck {
        file: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        lambda: Option<f64>,
        /// Fail when the max-norm disagreement exceeds this
        #[arg(long, default_value_t = 1e-6)]
        threshold: f64,
        #[command(flatten)]
        num: NumericArgs,
    },
}

/// Fixed 17-significant-digit form used in all CSV output.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

struct Loaded {
    file: ProblemFile,
    kernel: DiscreteKernel,
    opts: SolverOptions,
    route: RouteChoice,
}

impl Loaded {
    fn open(path: &Path, args: &NumericArgs) -> Result<Self> {
        let file = ProblemFile::load(path, args.nodes)?;
        let (a, b) = file.problem.interval();
        let rule = Arc::new(QuadratureRule::gauss_legendre(file.nodes, a, b)?);
        let kernel = DiscreteKernel::discretize(file.problem.kernel(), rule)?;
        let n = &file.numerics;
        let mut opts = SolverOptions::default();
        if let Some(v) = args.tol.or(n.tol) {
            opts.iteration_tol = v;
        }
        if let Some(v) = args.nilpotency_tol.or(n.nilpotency_tol) {
            opts.nilpotency_tol = v;
        }
        if let Some(v) = args.max_iter.or(n.max_iter) {
            opts.max_iter = v;
        }
        if let Some(v) = args.truncation.or(n.truncation) {
            if v == 0 {
                return Err(Error::InvalidArgument("truncation must be positive".into()));
            }
            opts.truncation = v;
        }
        if let Some(v) = args.q.or(n.q) {
            opts.q = v;
        }
        Ok(Loaded {
            file,
            kernel,
            opts,
            route: args.route.into(),
        })
    }

    fn system(&self) -> Result<LoadSystem<'_>> {
        LoadSystem::new(&self.file.problem, &self.kernel)
    }

    fn lambda(&self, flag: Option<f64>) -> Result<f64> {
        flag.or(self.file.numerics.lambda)
            .ok_or_else(|| Error::InvalidArgument("no lambda given (use --lambda or numerics.lambda)".into()))
    }

    fn range(&self, lo: Option<f64>, hi: Option<f64>) -> Result<(f64, f64)> {
        let lo = lo.or(self.file.numerics.lambda_min);
        let hi = hi.or(self.file.numerics.lambda_max);
        match (lo, hi) {
            (Some(lo), Some(hi)) if lo < hi => Ok((lo, hi)),
            (Some(lo), Some(hi)) => Err(Error::InvalidArgument(format!("empty lambda range [{lo}, {hi}]"))),
            _ => Err(Error::InvalidArgument(
                "no lambda range given (use --lambda-min/--lambda-max or numerics)".into(),
            )),
        }
    }
}

fn write_matrix(out: &mut dyn Write, m: &DMatrix<f64>) -> std::io::Result<()> {
    for row in m.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| num(*v)).collect();
        writeln!(out, "  [{}]", cells.join(", "))?;
    }
    Ok(())
}

fn cmd_analyze(path: &Path, args: &NumericArgs, out: &mut dyn Write) -> Result<()> {
    let ctx = Loaded::open(path, args)?;
    let sys = ctx.system()?;
    let a = analyze(&sys, &ctx.opts)?;
    let (lo, hi) = ctx.file.problem.interval();
    writeln!(out, "interval: [{lo}, {hi}]")?;
    writeln!(out, "nodes: {}", ctx.file.nodes)?;
    writeln!(out, "loads: {}", sys.n())?;
    writeln!(out, "A0:")?;
    write_matrix(out, &a.a0)?;
    writeln!(out, "f_gamma: [{}]", a.f_gamma.iter().map(|v| num(*v)).collect::<Vec<_>>().join(", "))?;
    writeln!(out, "det(E - A0): {}", num(a.classification.det))?;
    let pole = match &a.irregular {
        Some(Ok(e)) => format!(", p={}", e.p),
        _ => String::new(),
    };
    match a.classification.kind {
        ClassificationKind::UnsupportedIrregular => writeln!(
            out,
            "classification: UnsupportedIrregular (singular E - A0 with A0 != E; not handled)"
        )?,
        kind => writeln!(out, "classification: {kind}{pole}")?,
    }
    writeln!(out, "condition I:")?;
    for (k, c) in a.condition_i.iter().enumerate() {
        let status = if c.holds { "holds" } else { "fails" };
        writeln!(out, "  load {}: {status} (max deviation {})", k + 1, num(c.deviation))?;
    }
    match &a.reduced {
        None => {}
        Some(ReducedOutcome::Unique(c)) => writeln!(
            out,
            "load system (E - A0) c = f_gamma: unique, c = [{}]",
            c.iter().map(|v| num(*v)).collect::<Vec<_>>().join(", ")
        )?,
        Some(ReducedOutcome::NonUnique { null_space, .. }) => writeln!(
            out,
            "load system (E - A0) c = f_gamma: consistent, {} free parameter(s)",
            null_space.len()
        )?,
        Some(ReducedOutcome::NoSolution { residual }) => writeln!(
            out,
            "load system (E - A0) c = f_gamma: inconsistent (residual {}); no continuous solution",
            num(*residual)
        )?,
    }
    match a.nilpotency_index {
        Some(p) => writeln!(out, "nilpotency index: {p}")?,
        None => writeln!(out, "nilpotency index: none within {} iterations", ctx.opts.truncation + 1)?,
    }
    writeln!(out, "operator norm: {}", num(a.operator_norm))?;
    if let Some(b) = a.successive_bound {
        writeln!(out, "successive approximations: |lambda| <= {} (q = {})", num(b), ctx.opts.q)?;
    }
    if let Some(r) = a.regular_radius {
        writeln!(out, "regular series radius: {} (contraction {})", num(r), ctx.opts.radius_q)?;
    }
    match &a.irregular {
        Some(Ok(e)) => {
            writeln!(out, "pole order: {}", e.p)?;
            writeln!(out, "A_p:")?;
            write_matrix(out, &e.coeffs[0])?;
            writeln!(out, "A_p condition number: {}", num(e.ap_condition))?;
            writeln!(out, "laurent radius: {} (contraction {})", num(e.rho), e.q)?;
        }
        Some(Err(msg)) => writeln!(out, "pole order: not determined ({msg})")?,
        None => {}
    }
    Ok(())
}

fn write_summary(err: &mut dyn Write, s: &Solution) -> std::io::Result<()> {
    writeln!(err, "route: {}", s.route)?;
    writeln!(err, "lambda: {}", num(s.lambda))?;
    if let Some(c) = s.classification {
        writeln!(err, "classification: {}", c.kind)?;
    }
    for (k, v) in s.x_gamma.iter().enumerate() {
        writeln!(err, "x_gamma[{}]: {}", k + 1, num(*v))?;
    }
    writeln!(err, "residual: {}", num(s.residual))?;
    if let Some(p) = s.pole_order {
        writeln!(err, "pole order: {p}")?;
    }
    if let Some(t) = s.tail_bound {
        writeln!(err, "series tail bound: {}", num(t))?;
    }
    Ok(())
}

fn cmd_solve(path: &Path, lambda: Option<f64>, args: &NumericArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let ctx = Loaded::open(path, args)?;
    let lambda = ctx.lambda(lambda)?;
    let sys = ctx.system()?;
    let s = solve(&sys, lambda, ctx.route, &ctx.opts)?;
    writeln!(out, "t,x")?;
    for (t, x) in s.x.rule().nodes().iter().zip(s.x.values()) {
        writeln!(out, "{},{}", num(*t), num(*x))?;
    }
    write_summary(err, &s)?;
    Ok(())
}

fn cmd_sweep(
    path: &Path,
    range: (Option<f64>, Option<f64>),
    steps: Option<usize>,
    probe: &[f64],
    args: &NumericArgs,
    out: &mut dyn Write,
) -> Result<()> {
    let ctx = Loaded::open(path, args)?;
    let (lo, hi) = ctx.range(range.0, range.1)?;
    let steps = steps.or(ctx.file.numerics.steps).unwrap_or(11);
    if steps < 2 {
        return Err(Error::InvalidArgument("sweep needs at least 2 steps".into()));
    }
    let probe: Vec<f64> = if !probe.is_empty() {
        probe.to_vec()
    } else if let Some(p) = &ctx.file.numerics.probe {
        p.clone()
    } else {
        vec![ctx.file.problem.interval().0]
    };
    for &t in &probe {
        if !ctx.kernel.rule().contains(t) {
            let (a, b) = ctx.file.problem.interval();
            return Err(Error::OutOfDomain { t, a, b });
        }
    }
    let sys = ctx.system()?;
    let lambdas: Vec<f64> = (0..steps)
        .map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64)
        .collect();
    let rows: Vec<String> = lambdas
        .par_iter()
        .map(|&lambda| {
            let solved = solve(&sys, lambda, ctx.route, &ctx.opts).and_then(|s| {
                let xs = probe.iter().map(|&t| s.x.interpolate(t)).collect::<Result<Vec<_>>>()?;
                Ok((s, xs))
            });
            let mut cells = vec![num(lambda)];
            match solved {
                Ok((s, xs)) => {
                    cells.extend(xs.into_iter().map(num));
                    cells.push(num(s.x_gamma.norm()));
                    cells.push(num(s.residual));
                    cells.push("ok".into());
                }
                Err(e) => {
                    cells.extend(std::iter::repeat_n("NaN".to_string(), probe.len() + 2));
                    cells.push(e.code().into());
                }
            }
            cells.join(",")
        })
        .collect();
    let mut header = vec!["lambda".to_string()];
    header.extend(probe.iter().map(|t| format!("x({t})")));
    header.extend(["norm_x_gamma", "residual", "status"].map(String::from));
    writeln!(out, "{}", header.join(","))?;
    for row in rows {
        writeln!(out, "{row}")?;
    }
    Ok(())
}

fn cmd_find_poles(
    path: &Path,
    range: (Option<f64>, Option<f64>),
    scan_points: usize,
    args: &NumericArgs,
    out: &mut dyn Write,
) -> Result<()> {
    let ctx = Loaded::open(path, args)?;
    let (lo, hi) = ctx.range(range.0, range.1)?;
    if scan_points < 2 {
        return Err(Error::InvalidArgument("need at least 2 scan points".into()));
    }
    writeln!(out, "lambda,bracket_lo,bracket_hi,abs_det_lo,abs_det_hi")?;
    for c in find_characteristic_numbers(&ctx.kernel, lo, hi, scan_points) {
        writeln!(
            out,
            "{},{},{},{},{}",
            num(c.lambda),
            num(c.bracket.0),
            num(c.bracket.1),
            num(c.det_at_bracket.0),
            num(c.det_at_bracket.1)
        )?;
    }
    Ok(())
}

/// Returns `true` when the disagreement stays within the threshold.
fn cmd_oracle_check(
    path: &Path,
    lambda: Option<f64>,
    threshold: f64,
    args: &NumericArgs,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<bool> {
    let ctx = Loaded::open(path, args)?;
    let lambda = ctx.lambda(lambda)?;
    let sys = ctx.system()?;
    let routed = solve(&sys, lambda, ctx.route, &ctx.opts)?;
    let reference = crate::oracle::dense_solve(&ctx.file.problem, &ctx.kernel, lambda)?;
    let disagreement = routed.x.max_abs_diff(&reference.x);
    writeln!(out, "lambda,route,route_residual,oracle_residual,disagreement")?;
    writeln!(
        out,
        "{},{},{},{},{}",
        num(lambda),
        routed.route,
        num(routed.residual),
        num(reference.residual),
        num(disagreement)
    )?;
    let ok = disagreement <= threshold;
    if !ok {
        writeln!(
            err,
            "error[oracle-disagreement]: route {} differs from the dense solution by {} > {}",
            routed.route,
            num(disagreement),
            num(threshold)
        )?;
    }
    Ok(ok)
}

/// Runs the CLI with `args` (including the program name) and returns the exit
/// status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{e}");
                    0
                }
                _ => {
                    let _ = write!(err, "{e}");
                    4
                }
            };
        }
    };
    let result = match &cli.command {
        Command::Analyze { file, num } => cmd_analyze(file, num, out).map(|_| true),
        Command::Solve { file, lambda, num } => cmd_solve(file, *lambda, num, out, err).map(|_| true),
        Command::Sweep {
            file,
            lambda_min,
            lambda_max,
            steps,
            probe,
            num,
        } => cmd_sweep(file, (*lambda_min, *lambda_max), *steps, probe, num, out).map(|_| true),
        Command::FindPoles {
            file,
            lambda_min,
            lambda_max,
            scan_points,
            num,
        } => cmd_find_poles(file, (*lambda_min, *lambda_max), *scan_points, num, out).map(|_| true),
        Command::OracleCheck {
            file,
            lambda,
            threshold,
            num,
        } => cmd_oracle_check(file, *lambda, *threshold, num, out, err),
    };
    match result {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            let _ = writeln!(err, "error[{}]: {e}", e.code());
            e.exit_code()
        }
    }
}
