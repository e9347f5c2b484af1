//! TOML problem files.
//!
//! ```toml
//! interval = [0.0, 1.0]
//! kernel = "exp(t*s)"        # variables t, s
//! source = "1"               # variable t
//!
//! [[load]]
//! coeff = "t"                # variable t
//! points = ["2 @ 0", "-1 @ 1/2"]
//! integrals = ["s^2 on [0, 1]"]
//!
//! [numerics]
//! nodes = 64
//! lambda = 0.25
//! ```

use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::functionals::{Functional, IntegralTerm, PointTerm};
use crate::load_system::{Load, ProblemSpec};
use crate::quadrature::DEFAULT_NODES;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Numerics {
    pub nodes: Option<usize>,
    pub tol: Option<f64>,
    pub nilpotency_tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub truncation: Option<usize>,
    pub q: Option<f64>,
    pub lambda: Option<f64>,
    pub lambda_min: Option<f64>,
    pub lambda_max: Option<f64>,
    pub steps: Option<usize>,
    pub probe: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLoad {
    coeff: String,
    #[serde(default)]
    points: Vec<String>,
    #[serde(default)]
    integrals: Vec<String>,
    stieltjes: Option<toml::Value>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    interval: [f64; 2],
    kernel: String,
    source: String,
    #[serde(default)]
    load: Vec<RawLoad>,
    #[serde(default)]
    numerics: Numerics,
}

#[derive(Debug, Clone)]
pub struct ProblemFile {
    pub problem: ProblemSpec,
    pub numerics: Numerics,
    /// Node count used for the master and sub-interval rules.
    pub nodes: usize,
}

fn context(what: &str) -> impl Fn(Error) -> Error + '_ {
    move |e| match e {
        Error::UnsupportedLoad(_) | Error::ProblemFile(_) => e,
        other => Error::ProblemFile(format!("{what}: {other}")),
    }
}

fn constant(text: &str, what: &str) -> Result<f64> {
    let e = Expr::parse(text, &[]).map_err(|e| Error::ProblemFile(format!("{what}: {e}")))?;
    e.eval(&[]).map_err(|e| Error::ProblemFile(format!("{what}: {e}")))
}

/// `"alpha @ t0"`, both sides constant expressions.
pub fn parse_point_term(text: &str) -> Result<PointTerm> {
    let (alpha, t) = text
        .split_once('@')
        .ok_or_else(|| Error::ProblemFile(format!("point term `{text}`: expected `alpha @ t0`")))?;
    Ok(PointTerm {
        alpha: constant(alpha.trim(), &format!("point term `{text}` coefficient"))?,
        t: constant(t.trim(), &format!("point term `{text}` location"))?,
    })
}

/// `"weight on [a0, b0]"` with the weight an expression in `s`.
pub fn parse_integral_term(text: &str, nodes: usize) -> Result<IntegralTerm> {
    let bad = || Error::ProblemFile(format!("integral term `{text}`: expected `weight on [a0, b0]`"));
    let body = text.trim().strip_suffix(']').ok_or_else(bad)?;
    let open = body.rfind('[').ok_or_else(bad)?;
    let (head, range) = (body[..open].trim_end(), &body[open + 1..]);
    let weight = head.strip_suffix("on").ok_or_else(bad)?;
    if !(weight.is_empty() || weight.ends_with(char::is_whitespace)) {
        return Err(bad());
    }
    let weight = weight.trim();
    let weight = if weight.is_empty() { "1" } else { weight };
    let (lo, hi) = range.split_once(',').ok_or_else(bad)?;
    let lo = constant(lo.trim(), &format!("integral term `{text}` lower limit"))?;
    let hi = constant(hi.trim(), &format!("integral term `{text}` upper limit"))?;
    let weight = Expr::parse(weight, &["s"]).map_err(|e| Error::ProblemFile(format!("integral term `{text}` weight: {e}")))?;
    IntegralTerm::new(lo, hi, weight, nodes).map_err(context(&format!("integral term `{text}`")))
}

impl ProblemFile {
    /// Parses a problem; `nodes` overrides the file's `numerics.nodes`.
    pub fn parse(text: &str, nodes: Option<usize>) -> Result<Self> {
        let raw: RawProblem = toml::from_str(text).map_err(|e| Error::ProblemFile(e.to_string()))?;
        let nodes = nodes.or(raw.numerics.nodes).unwrap_or(DEFAULT_NODES);
        if nodes == 0 {
            return Err(Error::ZeroNodes);
        }
        let interval = (raw.interval[0], raw.interval[1]);
        let kernel = Expr::parse(&raw.kernel, &["t", "s"]).map_err(|e| Error::ProblemFile(format!("kernel: {e}")))?;
        let source = Expr::parse(&raw.source, &["t"]).map_err(|e| Error::ProblemFile(format!("source: {e}")))?;
        let mut loads = Vec::with_capacity(raw.load.len());
        for (k, rl) in raw.load.iter().enumerate() {
            let what = format!("load {}", k + 1);
            if rl.stieltjes.is_some() {
                return Err(Error::UnsupportedLoad(format!(
                    "{what}: Stieltjes-integral loads are not supported"
                )));
            }
            let coeff = Expr::parse(&rl.coeff, &["t"]).map_err(|e| Error::ProblemFile(format!("{what} coeff: {e}")))?;
            let points = rl.points.iter().map(|p| parse_point_term(p)).collect::<Result<Vec<_>>>()?;
            let integrals = rl
                .integrals
                .iter()
                .map(|p| parse_integral_term(p, nodes))
                .collect::<Result<Vec<_>>>()?;
            let functional = Functional::new(interval, points, integrals).map_err(context(&what))?;
            loads.push(Load { coeff, functional });
        }
        let problem = ProblemSpec::new(interval, kernel, source, loads).map_err(context("problem"))?;
        Ok(ProblemFile {
            problem,
            numerics: raw.numerics,
            nodes,
        })
    }

    pub fn load(path: &Path, nodes: Option<usize>) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::ProblemFile(format!("{}: {e}", path.display())))?;
        Self::parse(&text, nodes)
    }
}
