//! Brute-force reference solver.
//!
//! Discretizes the whole loaded operator as one dense `m×m` matrix
//! `I − Σₖ aₖ(tᵢ) vₖ[j] − λ K(tᵢ,sⱼ) wⱼ` and solves it by LU. Shares only
//! expression evaluation, quadrature and kernel samples with the structured
//! routes.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::functionals::Functional;
use crate::kernel_ops::DiscreteKernel;
use crate::load_system::ProblemSpec;
use crate::quadrature::{GridFunction, QuadratureRule};
use crate::solver::{residual, Route, Solution};

/// Row vector `v` with `⟨γ, x⟩ ≈ Σⱼ vⱼ x(sⱼ)` for interpolated grid data.
pub fn gamma_weights(gamma: &Functional, rule: &QuadratureRule) -> Result<Vec<f64>> {
    let mut v = vec![0.0; rule.len()];
    for term in gamma.point_terms() {
        for (vj, lj) in v.iter_mut().zip(rule.lagrange_basis(term.t)?) {
            *vj += term.alpha * lj;
        }
    }
    for term in gamma.integral_terms() {
        for (s, wm) in term.weighted_nodes() {
            for (vj, lj) in v.iter_mut().zip(rule.lagrange_basis(s)?) {
                *vj += wm * lj;
            }
        }
    }
    Ok(v)
}

#[derive(Debug, Clone)]
pub struct DenseSystem {
    pub matrix: DMatrix<f64>,
    pub rhs: DVector<f64>,
    /// One row of [`gamma_weights`] per load.
    pub gamma_rows: Vec<Vec<f64>>,
}

impl DenseSystem {
    pub fn assemble(problem: &ProblemSpec, kernel: &DiscreteKernel, lambda: f64) -> Result<Self> {
        let rule = kernel.rule();
        let nodes = rule.nodes();
        let w = rule.weights();
        let m = rule.len();
        let gamma_rows = problem
            .loads()
            .iter()
            .map(|l| gamma_weights(&l.functional, rule))
            .collect::<Result<Vec<_>>>()?;
        let mut matrix = DMatrix::identity(m, m);
        for (i, &t) in nodes.iter().enumerate() {
            for j in 0..m {
                matrix[(i, j)] -= lambda * kernel.values()[(i, j)] * w[j];
            }
            for (load, row) in problem.loads().iter().zip(&gamma_rows) {
                let a = load.coeff.eval(&[t])?;
                for j in 0..m {
                    matrix[(i, j)] -= a * row[j];
                }
            }
        }
        let rhs = nodes
            .iter()
            .map(|&t| problem.source().eval(&[t]))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(DenseSystem {
            matrix,
            rhs: DVector::from_vec(rhs),
            gamma_rows,
        })
    }
}

/// Solves the dense system at `λ`.
pub fn dense_solve(problem: &ProblemSpec, kernel: &DiscreteKernel, lambda: f64) -> Result<Solution> {
    let sys = DenseSystem::assemble(problem, kernel, lambda)?;
    let lu = sys.matrix.clone().lu();
    let u = lu.u();
    let diag = u.diagonal().map(f64::abs);
    if !(diag.min() > 1e-13 * diag.max()) {
        return Err(Error::DenseSingular { lambda });
    }
    let x = lu.solve(&sys.rhs).ok_or(Error::DenseSingular { lambda })?;
    let x = GridFunction::new(kernel.rule().clone(), x.as_slice().to_vec())?;
    let x_gamma = DVector::from_iterator(
        sys.gamma_rows.len(),
        sys.gamma_rows
            .iter()
            .map(|row| row.iter().zip(x.values()).map(|(v, x)| v * x).sum::<f64>()),
    );
    let residual = residual(problem, kernel, lambda, &x)?;
    Ok(Solution {
        lambda,
        x,
        x_gamma,
        route: Route::Oracle,
        residual,
        classification: None,
        pole_order: None,
        expansion: None,
        tail_bound: None,
    })
}
