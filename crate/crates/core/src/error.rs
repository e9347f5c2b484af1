use thiserror::Error;

use crate::expr::ExprError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("invalid interval [{a}, {b}]: need a < b")]
    InvalidInterval { a: f64, b: f64 },
    #[error("quadrature rule needs at least one node")]
    ZeroNodes,
    #[error("point {t} lies outside [{a}, {b}]")]
    OutOfDomain { t: f64, a: f64, b: f64 },
    #[error("non-finite value {value} at t = {t}")]
    NonFinite { t: f64, value: f64 },
    #[error("functional has no terms")]
    EmptyFunctional,
    #[error("unsupported load type: {0}")]
    UnsupportedLoad(String),
    #[error("problem needs at least one load")]
    NoLoads,
    #[error("lambda = {lambda} is too close to a characteristic number (log|det| = {log_abs_det:.3}, pivot ratio {pivot_ratio:.3e})")]
    CharacteristicProximity {
        lambda: f64,
        log_abs_det: f64,
        pivot_ratio: f64,
    },
    #[error("load system singular at lambda = {lambda} (|det| = {det:.3e})")]
    LoadSystemSingular { lambda: f64, det: f64 },
    #[error("no continuous solution: load system (E - A0) c = f_gamma is inconsistent (residual {residual:.3e})")]
    NoSolution { residual: f64 },
    #[error("condition I fails for load {load} (max deviation {deviation:.3e})")]
    ConditionIViolated { load: usize, deviation: f64 },
    #[error("route precondition failed: {0}")]
    Precondition(String),
    #[error("pole-order hypothesis failed: {0}")]
    PoleHypothesis(String),
    #[error("|lambda| = {lambda} outside the admissible radius {bound}")]
    RadiusExceeded { lambda: f64, bound: f64 },
    #[error("lambda = 0 is the pole of the irregular solution")]
    PoleAtZero,
    #[error("singular E - A0 with A0 != E (det = {det:.3e}) is not handled")]
    UnsupportedIrregular { det: f64 },
    #[error("successive approximations did not converge in {iterations} iterations (last step {last_delta:.3e})")]
    NonConvergence { iterations: usize, last_delta: f64 },
    #[error("dense system singular at lambda = {lambda}")]
    DenseSingular { lambda: f64 },
    #[error("{0}")]
    ProblemFile(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable machine-readable name for this failure.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Expr(_) => "expr",
            Error::InvalidInterval { .. } => "invalid-interval",
            Error::ZeroNodes => "zero-nodes",
            Error::OutOfDomain { .. } => "out-of-domain",
            Error::NonFinite { .. } => "non-finite",
            Error::EmptyFunctional => "empty-functional",
            Error::UnsupportedLoad(_) => "unsupported-load",
            Error::NoLoads => "no-loads",
            Error::CharacteristicProximity { .. } => "characteristic-number",
            Error::LoadSystemSingular { .. } => "load-system-singular",
            Error::NoSolution { .. } => "no-solution",
            Error::ConditionIViolated { .. } => "condition-i-violated",
            Error::Precondition(_) => "precondition",
            Error::PoleHypothesis(_) => "pole-hypothesis",
            Error::RadiusExceeded { .. } => "radius-exceeded",
            Error::PoleAtZero => "pole-at-zero",
            Error::UnsupportedIrregular { .. } => "unsupported-irregular",
            Error::NonConvergence { .. } => "non-convergence",
            Error::DenseSingular { .. } => "dense-singular",
            Error::ProblemFile(_) => "problem-file",
            Error::InvalidArgument(_) => "invalid-argument",
            Error::Io(_) => "io",
        }
    }

    /// Process exit status: 2 no solution, 3 route precondition, 4 parse
    /// error, 1 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NoSolution { .. } => 2,
            Error::ConditionIViolated { .. }
            | Error::Precondition(_)
            | Error::PoleHypothesis(_)
            | Error::RadiusExceeded { .. }
            | Error::PoleAtZero
            | Error::UnsupportedIrregular { .. } => 3,
            Error::Expr(ExprError::Syntax { .. } | ExprError::UndeclaredVariable { .. })
            | Error::ProblemFile(_)
            | Error::InvalidArgument(_)
            | Error::UnsupportedLoad(_)
            | Error::EmptyFunctional
            | Error::NoLoads
            | Error::InvalidInterval { .. }
            | Error::ZeroNodes => 4,
            _ => 1,
        }
    }
}
