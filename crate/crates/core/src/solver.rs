//! Solution routes for the loaded equation
//! `x − Σₖ aₖ⟨γₖ,x⟩ − λKx = f`.
//!
//! * [`solve_regular`]: solve the `n×n` load system at `λ`, then rebuild `x`
//!   through the resolvent.
//! * [`solve_successive`]: fixed-point iteration
//!   `xₙ = λ(I−L)⁻¹K xₙ₋₁ + (I−L)⁻¹f`.
//! * [`solve_nilpotent`]: finite Neumann polynomial when `K_{p+1} = 0` and the
//!   loads annihilate the kernel.
//! * [`solve_irregular`]: Laurent expansion of the load vector around the
//!   pole `λ = 0` when `A₀ = E`.

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::functionals::ConditionIStatus;
use crate::kernel_ops::{
    iterate_kernels, nilpotency_index, DiscreteKernel, IteratedKernels, ResolventOperator, NILPOTENCY_TOL,
};
use crate::load_system::{
    Classification, ClassificationKind, ReducedOutcome, LoadSystem, ProblemSpec, TOL_RANK,
};
use crate::quadrature::GridFunction;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    Regular,
    Successive,
    Nilpotent,
    Irregular,
    Oracle,
}

impl Route {
    pub fn name(self) -> &'static str {
        match self {
            Route::Regular => "regular",
            Route::Successive => "successive",
            Route::Nilpotent => "nilpotent",
            Route::Irregular => "irregular",
            Route::Oracle => "oracle",
        }
    }
}

impl fmt::Display for Route {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Numerical knobs shared by all routes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Relative tolerance for condition I.
    pub condition_tol: f64,
    /// Relative rank tolerance for small dense systems.
    pub rank_tol: f64,
    pub nilpotency_tol: f64,
    /// Taylor truncation depth `M` for `A(λ)`.
    pub truncation: usize,
    /// Target contraction factor for successive approximations.
    pub q: f64,
    pub max_iter: usize,
    /// Stopping tolerance on `‖xₙ − xₙ₋₁‖_∞`.
    pub iteration_tol: f64,
    /// Relative threshold below which a Taylor coefficient counts as zero.
    pub pole_tol: f64,
    /// Contraction bound used to size the admissible radius `ρ`.
    pub radius_q: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            condition_tol: 1e-10,
            rank_tol: TOL_RANK,
            nilpotency_tol: NILPOTENCY_TOL,
            truncation: 30,
            q: 0.5,
            max_iter: 1000,
            iteration_tol: 1e-12,
            pole_tol: 1e-9,
            radius_q: 0.9,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub lambda: f64,
    pub x: GridFunction,
    /// Load vector `x_γ` produced by the route.
    pub x_gamma: DVector<f64>,
    pub route: Route,
    /// `max_i |x − Lx − λKx − f|` at the nodes.
    pub residual: f64,
    pub classification: Option<Classification>,
    pub pole_order: Option<usize>,
    pub expansion: Option<IrregularExpansion>,
    /// Bound on the neglected tail of a truncated series, if any.
    pub tail_bound: Option<f64>,
}

/// Defect of `x − Σₖ aₖ⟨γₖ,x⟩ − λ Σⱼ wⱼ K(·,sⱼ) x(sⱼ) − f` at the nodes,
/// with loads recomputed from `x`.
pub fn residual(problem: &ProblemSpec, kernel: &DiscreteKernel, lambda: f64, x: &GridFunction) -> Result<f64> {
    let nodes = kernel.rule().nodes();
    let loads = problem
        .loads()
        .iter()
        .map(|l| l.functional.apply(x))
        .collect::<Result<Vec<_>>>()?;
    let kx = kernel.apply(x);
    let mut worst: f64 = 0.0;
    for (i, &t) in nodes.iter().enumerate() {
        let mut lx = 0.0;
        for (load, c) in problem.loads().iter().zip(&loads) {
            lx += load.coeff.eval(&[t])? * c;
        }
        let f = problem.source().eval(&[t])?;
        let d = x.values()[i] - lx - lambda * kx.values()[i] - f;
        worst = worst.max(d.abs());
    }
    Ok(worst)
}

impl Solution {
    pub(crate) fn assemble(
        sys: &LoadSystem<'_>,
        lambda: f64,
        x: GridFunction,
        x_gamma: DVector<f64>,
        route: Route,
    ) -> Result<Self> {
        let residual = residual(sys.problem(), sys.kernel(), lambda, &x)?;
        Ok(Solution {
            lambda,
            x,
            x_gamma,
            route,
            residual,
            classification: Some(sys.classify()),
            pole_order: None,
            expansion: None,
            tail_bound: None,
        })
    }

    /// Recomputes `⟨γₖ, x⟩` from the grid function.
    pub fn recomputed_loads(&self, problem: &ProblemSpec) -> Result<DVector<f64>> {
        let v = problem
            .loads()
            .iter()
            .map(|l| l.functional.apply(&self.x))
            .collect::<Result<Vec<_>>>()?;
        Ok(DVector::from_vec(v))
    }
}

fn require_regular(sys: &LoadSystem<'_>) -> Result<Classification> {
    let class = sys.classify();
    match class.kind {
        ClassificationKind::Regular => Ok(class),
        ClassificationKind::UnsupportedIrregular => Err(Error::UnsupportedIrregular { det: class.det }),
        ClassificationKind::IrregularIdentity => Err(Error::Precondition(
            "A0 = E: the load system is singular at lambda = 0; use the irregular route".into(),
        )),
    }
}

/// `‖M‖_∞`, the maximum absolute row sum.
pub(crate) fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `‖M‖₁`, the maximum absolute column sum.
fn one_norm(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Solves a small square system, refusing when its smallest singular value is
/// below `rank_tol · scale`.
fn solve_small(m: &DMatrix<f64>, rhs: &DVector<f64>, rank_tol: f64, scale: f64) -> Option<DVector<f64>> {
    let sv = m.singular_values();
    if !(sv.min() > rank_tol * sv.max().max(scale)) {
        return None;
    }
    m.clone().lu().solve(rhs)
}

/// Direct solve: `(E − A₀ − A(λ)) x_γ = b(λ)`, then
/// `x = (I − λKW)⁻¹ (f + Σ aₖ x_γ,ₖ)`.
pub fn solve_regular(sys: &LoadSystem<'_>, lambda: f64) -> Result<Solution> {
    solve_regular_with(sys, lambda, &SolverOptions::default())
}

pub fn solve_regular_with(sys: &LoadSystem<'_>, lambda: f64, opts: &SolverOptions) -> Result<Solution> {
    require_regular(sys)?;
    let op = ResolventOperator::new(sys.kernel(), lambda)?;
    let (a, b) = sys.at_lambda_with(&op)?;
    let n = sys.n();
    let scale = 1.0 + inf_norm(sys.a0()) + inf_norm(&a);
    let m = DMatrix::identity(n, n) - sys.a0() - a;
    let c = solve_small(&m, &b, opts.rank_tol, scale).ok_or(Error::LoadSystemSingular {
        lambda,
        det: m.determinant(),
    })?;
    let x = op.apply(&sys.source_plus(&c));
    Solution::assemble(sys, lambda, x, c, Route::Regular)
}

/// `l` with `‖(I − L)⁻¹ K‖ ≤ l`, from
/// `‖(I−L)⁻¹g‖ ≤ (1 + maxₖ‖aₖ‖ · ‖(E−A₀)⁻¹‖₁ · Σᵢ‖γᵢ‖) ‖g‖`.
pub fn contraction_constant(sys: &LoadSystem<'_>) -> Result<f64> {
    require_regular(sys)?;
    let n = sys.n();
    let inv = (DMatrix::identity(n, n) - sys.a0())
        .try_inverse()
        .ok_or(Error::UnsupportedIrregular { det: 0.0 })?;
    let a_max = sys.coeffs().iter().map(|a| a.max_abs()).fold(0.0, f64::max);
    let gamma_sum: f64 = sys.problem().loads().iter().map(|l| l.functional.norm()).sum();
    Ok((1.0 + a_max * one_norm(&inv) * gamma_sum) * sys.kernel().operator_norm())
}

/// Largest `|λ|` accepted by [`solve_successive`] for contraction factor `q`.
pub fn successive_bound(sys: &LoadSystem<'_>, q: f64) -> Result<f64> {
    let l = contraction_constant(sys)?;
    Ok(if l > 0.0 { q / l } else { f64::INFINITY })
}

#[derive(Debug, Clone)]
pub struct SuccessiveSolution {
    pub solution: Solution,
    /// `‖xₙ − xₙ₋₁‖_∞` for n = 1, 2, …
    pub deltas: Vec<f64>,
    /// Admissible `|λ|` bound `q / l`.
    pub bound: f64,
}

impl SuccessiveSolution {
    /// `‖Δₙ₊₁‖ / ‖Δₙ‖` for consecutive steps.
    pub fn ratios(&self) -> Vec<f64> {
        self.deltas.windows(2).map(|w| w[1] / w[0]).collect()
    }
}

/// Successive approximations `xₙ = λ(I−L)⁻¹K xₙ₋₁ + (I−L)⁻¹f`, `x₀ = 0`.
///
/// `(I−L)⁻¹g = g + Σ aₖ cₖ` where `(E − A₀) c = ⟨γ, g⟩`.
pub fn solve_successive(sys: &LoadSystem<'_>, lambda: f64, opts: &SolverOptions) -> Result<SuccessiveSolution> {
    if !(opts.q > 0.0 && opts.q < 1.0) {
        return Err(Error::Precondition(format!("contraction factor q = {} must lie in (0, 1)", opts.q)));
    }
    let bound = successive_bound(sys, opts.q)?;
    if lambda.abs() > bound * (1.0 + 1e-12) {
        return Err(Error::RadiusExceeded {
            lambda: lambda.abs(),
            bound,
        });
    }
    let n = sys.n();
    let lu = (DMatrix::identity(n, n) - sys.a0()).lu();
    let invert = |g: &GridFunction| -> Result<GridFunction> {
        let rhs = sys.apply_loads(g)?;
        let c = lu.solve(&rhs).ok_or(Error::UnsupportedIrregular { det: 0.0 })?;
        let combo = sys.combine(&c);
        Ok(GridFunction::from_raw(
            g.rule().clone(),
            g.values().iter().zip(combo.values()).map(|(a, b)| a + b).collect(),
        ))
    };

    let h = invert(sys.source())?;
    let kernel = sys.kernel();
    let mut x = GridFunction::zeros(h.rule().clone());
    let mut deltas = Vec::new();
    for _ in 0..opts.max_iter {
        let kx = invert(&kernel.apply(&x))?;
        let next = GridFunction::from_raw(
            h.rule().clone(),
            kx.values().iter().zip(h.values()).map(|(k, h)| lambda * k + h).collect(),
        );
        let delta = next.max_abs_diff(&x);
        deltas.push(delta);
        x = next;
        if delta <= opts.iteration_tol {
            let x_gamma = sys.apply_loads(&x)?;
            let solution = Solution::assemble(sys, lambda, x, x_gamma, Route::Successive)?;
            return Ok(SuccessiveSolution {
                solution,
                deltas,
                bound,
            });
        }
    }
    Err(Error::NonConvergence {
        iterations: opts.max_iter,
        last_delta: deltas.last().copied().unwrap_or(f64::NAN),
    })
}

fn first_violation(status: &[ConditionIStatus]) -> Option<(usize, f64)> {
    status
        .iter()
        .enumerate()
        .find(|(_, s)| !s.holds)
        .map(|(k, s)| (k, s.deviation))
}

/// Finite Neumann polynomial
/// `x = g + Σ_{m=1}^{p} λ^m ∫ K_m(·,s) g(s) ds`, `g = f + Σ aₖ cₖ`, with `c`
/// from `(E − A₀) c = f_γ`. Exact for every `λ`.
pub fn solve_nilpotent(
    sys: &LoadSystem<'_>,
    iter: &IteratedKernels,
    index: usize,
    lambda: f64,
    opts: &SolverOptions,
) -> Result<Solution> {
    if let Some((load, deviation)) = first_violation(&sys.condition_i(opts.condition_tol)?) {
        return Err(Error::ConditionIViolated { load, deviation });
    }
    if index > iter.depth() {
        return Err(Error::Precondition(format!(
            "nilpotency index {index} exceeds iterated-kernel depth {}",
            iter.depth()
        )));
    }
    if index < iter.depth() {
        let threshold = opts.nilpotency_tol * (1.0 + iter.get(1).amax());
        if iter.get(index + 1).amax() > threshold {
            return Err(Error::Precondition(format!("K_{} does not vanish", index + 1)));
        }
    }
    let c = match sys.reduced(opts.rank_tol) {
        ReducedOutcome::Unique(c) => c,
        ReducedOutcome::NonUnique { particular, .. } => particular,
        ReducedOutcome::NoSolution { residual } => return Err(Error::NoSolution { residual }),
    };
    let g = sys.source_plus(&c);
    let mut values = g.values().to_vec();
    for m in 1..=index {
        let term = iter.apply(m, &g);
        let pow = lambda.powi(m as i32);
        for (v, t) in values.iter_mut().zip(term.values()) {
            *v += pow * t;
        }
    }
    let x = GridFunction::new(g.rule().clone(), values)?;
    Solution::assemble(sys, lambda, x, c, Route::Nilpotent)
}

/// Laurent data for the irregular case `A₀ = E`, `A(λ) = Σ_{m≥p} λ^m A_m`.
///
/// With `T(λ) = Σ_{m=p+1}^{M} λ^{m−p} A_p⁻¹ A_m` the load vector is
/// `x_γ = λ^{−p} ν(λ)`, `ν(λ) = −Σ_n (−T(λ))ⁿ A_p⁻¹ b(λ)`.
#[derive(Debug, Clone)]
pub struct IrregularExpansion {
    /// Pole order.
    pub p: usize,
    /// `A_p … A_M`.
    pub coeffs: Vec<DMatrix<f64>>,
    pub ap_inverse: DMatrix<f64>,
    /// Condition number of `A_p` (2-norm).
    pub ap_condition: f64,
    /// `A_p⁻¹ A_m` for `m = p+1 … M`.
    scaled: Vec<DMatrix<f64>>,
    /// Contraction bound defining `ρ`.
    pub q: f64,
    /// Largest `|λ|` with `contraction(|λ|) ≤ q`.
    pub rho: f64,
}

impl IrregularExpansion {
    pub fn build(sys: &LoadSystem<'_>, iter: &IteratedKernels, opts: &SolverOptions) -> Result<Self> {
        let depth = opts.truncation.min(iter.depth());
        let taylor = sys.taylor_a(iter, depth)?;
        let k_norm = sys.kernel().operator_norm();
        let a_max = sys.coeffs().iter().map(|a| a.max_abs()).fold(0.0, f64::max);
        let gamma_max = sys
            .problem()
            .loads()
            .iter()
            .map(|l| l.functional.norm())
            .fold(0.0, f64::max);
        let p = taylor
            .iter()
            .enumerate()
            .find(|(i, am)| {
                let scale = k_norm.powi(*i as i32 + 1) * a_max * gamma_max;
                am.amax() > opts.pole_tol * (1.0 + scale)
            })
            .map(|(i, _)| i + 1)
            .ok_or_else(|| {
                Error::PoleHypothesis(format!("A(lambda) vanishes through order {depth}; no finite pole order"))
            })?;
        let ap = &taylor[p - 1];
        let sv = ap.singular_values();
        let (smin, smax) = (sv.min(), sv.max());
        if !(smin > opts.rank_tol * smax) {
            return Err(Error::PoleHypothesis(format!(
                "A_{p} is singular (singular values {smin:.3e} .. {smax:.3e})"
            )));
        }
        let ap_inverse = ap.clone().try_inverse().ok_or_else(|| {
            Error::PoleHypothesis(format!("A_{p} is not invertible"))
        })?;
        let scaled: Vec<_> = taylor[p..].iter().map(|am| &ap_inverse * am).collect();
        let mut exp = IrregularExpansion {
            p,
            coeffs: taylor[p - 1..].to_vec(),
            ap_inverse,
            ap_condition: smax / smin,
            scaled,
            q: opts.radius_q,
            rho: 0.0,
        };
        exp.rho = exp.radius(opts.radius_q);
        Ok(exp)
    }

    /// Truncation depth `M`.
    pub fn truncation(&self) -> usize {
        self.p + self.scaled.len()
    }

    /// Majorant `Σ_{m>p} r^{m−p} ‖A_p⁻¹A_m‖_∞ ≥ ‖T(λ)‖_∞` for `|λ| ≤ r`.
    pub fn contraction(&self, r: f64) -> f64 {
        let r = r.abs();
        self.scaled
            .iter()
            .enumerate()
            .map(|(i, m)| r.powi(i as i32 + 1) * inf_norm(m))
            .sum()
    }

    /// Largest `r` with `contraction(r) ≤ q`; infinite when the series is empty.
    pub fn radius(&self, q: f64) -> f64 {
        if self.scaled.iter().all(|m| m.amax() == 0.0) {
            return f64::INFINITY;
        }
        let mut hi = 1.0;
        while self.contraction(hi) <= q {
            hi *= 2.0;
            if hi > 1e300 {
                return f64::INFINITY;
            }
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.contraction(mid) <= q {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        lo
    }

    /// `T(λ)`.
    pub fn tail_operator(&self, lambda: f64) -> DMatrix<f64> {
        let n = self.ap_inverse.nrows();
        let mut t = DMatrix::zeros(n, n);
        for (i, m) in self.scaled.iter().enumerate() {
            t += m * lambda.powi(i as i32 + 1);
        }
        t
    }

    /// `ν(λ)`: the sum of the geometric series, `−(E + T)⁻¹ A_p⁻¹ b`.
    pub fn nu(&self, lambda: f64, b: &DVector<f64>) -> Option<DVector<f64>> {
        let n = b.len();
        let m = DMatrix::identity(n, n) + self.tail_operator(lambda);
        m.lu().solve(&(&self.ap_inverse * b)).map(|v| -v)
    }

    /// Partial sum `−Σ_{n<terms} (−T)ⁿ A_p⁻¹ b`.
    pub fn nu_partial(&self, lambda: f64, b: &DVector<f64>, terms: usize) -> DVector<f64> {
        let t = self.tail_operator(lambda);
        let mut term = &self.ap_inverse * b;
        let mut sum = DVector::zeros(b.len());
        for _ in 0..terms {
            sum += &term;
            term = -(&t * term);
        }
        -sum
    }
}

/// Laurent route for `A₀ = E`: `x_γ = λ^{−p} ν(λ)`, then
/// `x = (I − λKW)⁻¹ (f + Σ aₖ x_γ,ₖ)`.
pub fn solve_irregular(sys: &LoadSystem<'_>, lambda: f64, opts: &SolverOptions) -> Result<Solution> {
    let class = sys.classify();
    match class.kind {
        ClassificationKind::IrregularIdentity => {}
        ClassificationKind::UnsupportedIrregular => return Err(Error::UnsupportedIrregular { det: class.det }),
        ClassificationKind::Regular => {
            return Err(Error::Precondition(
                "det(E - A0) != 0: regular problem, no pole at lambda = 0".into(),
            ))
        }
    }
    if lambda == 0.0 {
        return Err(Error::PoleAtZero);
    }
    let iter = iterate_kernels(sys.kernel(), opts.truncation.max(1));
    let expansion = IrregularExpansion::build(sys, &iter, opts)?;
    let q = expansion.contraction(lambda);
    if q >= 1.0 {
        return Err(Error::RadiusExceeded {
            lambda: lambda.abs(),
            bound: expansion.rho,
        });
    }
    let op = ResolventOperator::new(sys.kernel(), lambda)?;
    let b = sys.apply_loads(&op.apply(sys.source()))?;
    let nu = expansion.nu(lambda, &b).ok_or(Error::LoadSystemSingular {
        lambda,
        det: 0.0,
    })?;
    let x_gamma = nu / lambda.powi(expansion.p as i32);
    let x = op.apply(&sys.source_plus(&x_gamma));
    let mut solution = Solution::assemble(sys, lambda, x, x_gamma, Route::Irregular)?;
    let tail_exp = (expansion.truncation() - expansion.p + 1) as i32;
    solution.tail_bound = Some(q.powi(tail_exp) / (1.0 - q));
    solution.pole_order = Some(expansion.p);
    solution.expansion = Some(expansion);
    Ok(solution)
}

/// Which route to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RouteChoice {
    #[default]
    Auto,
    Regular,
    Successive,
    Nilpotent,
    Irregular,
    Oracle,
}

/// Picks and runs a route.
///
/// When condition I holds for every load, `(E − A₀) c = f_γ` is checked first
/// and an inconsistent system means there is no continuous solution. A
/// nilpotent kernel then takes the polynomial route; otherwise the
/// classification decides between the regular and irregular routes.
pub fn solve(sys: &LoadSystem<'_>, lambda: f64, route: RouteChoice, opts: &SolverOptions) -> Result<Solution> {
    match route {
        RouteChoice::Regular => solve_regular_with(sys, lambda, opts),
        RouteChoice::Successive => Ok(solve_successive(sys, lambda, opts)?.solution),
        RouteChoice::Irregular => solve_irregular(sys, lambda, opts),
        RouteChoice::Oracle => crate::oracle::dense_solve(sys.problem(), sys.kernel(), lambda),
        RouteChoice::Nilpotent => {
            let iter = iterate_kernels(sys.kernel(), opts.truncation.max(1) + 1);
            let index = nilpotency_index(&iter, opts.nilpotency_tol).ok_or_else(|| {
                Error::Precondition(format!("kernel is not nilpotent within {} iterations", iter.depth()))
            })?;
            solve_nilpotent(sys, &iter, index, lambda, opts)
        }
        RouteChoice::Auto => {
            let class = sys.classify();
            let cond = sys.condition_i(opts.condition_tol)?;
            let annihilated = first_violation(&cond).is_none();
            if annihilated {
                if let ReducedOutcome::NoSolution { residual } = sys.reduced(opts.rank_tol) {
                    return Err(Error::NoSolution { residual });
                }
            }
            if class.kind == ClassificationKind::UnsupportedIrregular {
                return Err(Error::UnsupportedIrregular { det: class.det });
            }
            if annihilated {
                let iter = iterate_kernels(sys.kernel(), opts.truncation.max(1) + 1);
                if let Some(index) = nilpotency_index(&iter, opts.nilpotency_tol) {
                    return solve_nilpotent(sys, &iter, index, lambda, opts);
                }
            }
            match class.kind {
                ClassificationKind::Regular => solve_regular_with(sys, lambda, opts),
                _ => solve_irregular(sys, lambda, opts),
            }
        }
    }
}

/// Everything `analyze` reports about a problem.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub a0: DMatrix<f64>,
    pub f_gamma: DVector<f64>,
    pub classification: Classification,
    pub condition_i: Vec<ConditionIStatus>,
    pub reduced: Option<ReducedOutcome>,
    pub nilpotency_index: Option<usize>,
    pub operator_norm: f64,
    /// Admissible `|λ|` for successive approximations (regular case).
    pub successive_bound: Option<f64>,
    /// Radius where `‖(E−A₀)⁻¹A(λ)‖ ≤ q` (regular case).
    pub regular_radius: Option<f64>,
    /// Pole order and Laurent data (irregular case), or why they are missing.
    pub irregular: Option<std::result::Result<IrregularExpansion, String>>,
}

pub fn analyze(sys: &LoadSystem<'_>, opts: &SolverOptions) -> Result<Analysis> {
    let classification = sys.classify();
    let condition_i = sys.condition_i(opts.condition_tol)?;
    let depth = opts.truncation.max(1) + 1;
    let iter = iterate_kernels(sys.kernel(), depth);
    let nil = nilpotency_index(&iter, opts.nilpotency_tol);
    let reduced = first_violation(&condition_i)
        .is_none()
        .then(|| sys.reduced(opts.rank_tol));

    let mut successive = None;
    let mut regular_radius = None;
    let mut irregular = None;
    match classification.kind {
        ClassificationKind::Regular => {
            successive = Some(successive_bound(sys, opts.q)?);
            let n = sys.n();
            let inv = (DMatrix::identity(n, n) - sys.a0())
                .try_inverse()
                .ok_or(Error::UnsupportedIrregular { det: classification.det })?;
            let norms: Vec<f64> = sys
                .taylor_a(&iter, opts.truncation.min(iter.depth()))?
                .iter()
                .map(|am| inf_norm(&(&inv * am)))
                .collect();
            regular_radius = Some(majorant_radius(&norms, opts.radius_q));
        }
        ClassificationKind::IrregularIdentity => {
            irregular = Some(match IrregularExpansion::build(sys, &iter, opts) {
                Ok(e) => Ok(e),
                Err(e) => Err(e.to_string()),
            });
        }
        ClassificationKind::UnsupportedIrregular => {}
    }
    Ok(Analysis {
        a0: sys.a0().clone(),
        f_gamma: sys.f_gamma().clone(),
        classification,
        condition_i,
        reduced,
        nilpotency_index: nil,
        operator_norm: sys.kernel().operator_norm(),
        successive_bound: successive,
        regular_radius,
        irregular,
    })
}

/// Largest `r` with `Σ_{m≥1} r^m normsₘ ≤ q`.
fn majorant_radius(norms: &[f64], q: f64) -> f64 {
    let g = |r: f64| -> f64 {
        norms
            .iter()
            .enumerate()
            .map(|(i, n)| r.powi(i as i32 + 1) * n)
            .sum()
    };
    if norms.iter().all(|n| *n == 0.0) {
        return f64::INFINITY;
    }
    let mut hi = 1.0;
    while g(hi) <= q {
        hi *= 2.0;
        if hi > 1e300 {
            return f64::INFINITY;
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) <= q {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    lo
}
