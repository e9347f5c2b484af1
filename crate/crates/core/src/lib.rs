//! Numerical solver for loaded Fredholm integral equations of the second kind
//!
//! ```text
//! x(t) − Σₖ aₖ(t)⟨γₖ, x⟩ − λ ∫ₐᵇ K(t,s) x(s) ds = f(t)
//! ```
//!
//! where each load `γₖ` is a finite combination of point evaluations and
//! weighted subinterval integrals.

// `!(a > b)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod expr;
pub mod functionals;
pub mod kernel_ops;
pub mod load_system;
pub mod oracle;
pub mod problem_file;
pub mod quadrature;
pub mod solver;

pub use error::{Error, Result};
pub use expr::Expr;
pub use functionals::Functional;
pub use kernel_ops::{DiscreteKernel, IteratedKernels, ResolventOperator};
pub use load_system::{ClassificationKind, Load, LoadSystem, ProblemSpec};
pub use quadrature::{GridFunction, QuadratureRule};
pub use solver::{Route, RouteChoice, Solution, SolverOptions};
