//! The finite linear systems that determine the load vector
//! `x_γ = (⟨γ₁,x⟩, …, ⟨γₙ,x⟩)`.
//!
//! Applying every load to `x − Σ aₖ⟨γₖ,x⟩ − λKx = f` gives
//! `(E − A₀ − A(λ)) x_γ = b(λ)` with
//!
//! * `A₀ = [⟨γᵢ, aₖ⟩]`,
//! * `A(λ) = [⟨γᵢ, λ ∫ Γ(·,s,λ) aₖ(s) ds⟩]`,
//! * `b(λ) = [⟨γᵢ, f + λ ∫ Γ(·,s,λ) f(s) ds⟩]`.
//!
//! The explicit `λ` in front of `Γ` makes `A(0) = 0` and gives the Taylor
//! expansion `A(λ) = Σ_{m≥1} λ^m A_m` with `A_m = [⟨γᵢ, ∫ K_m(·,s) aₖ(s) ds⟩]`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::functionals::{check_condition_i, ConditionIStatus, Functional};
use crate::kernel_ops::{DiscreteKernel, IteratedKernels, ResolventOperator};
use crate::quadrature::GridFunction;

/// Default relative tolerance for `A₀ = E`.
pub const TOL_IDENTITY: f64 = 1e-10;
/// Default tolerance on `|det(E − A₀)|` for the regular case.
pub const TOL_DET: f64 = 1e-10;
/// Default relative rank tolerance for the `(E − A₀) c = f_γ` system.
pub const TOL_RANK: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct Load {
    /// `aₖ(t)`
    pub coeff: Expr,
    /// `γₖ`
    pub functional: Functional,
}

/// One instance of `x − Σₖ aₖ(t)⟨γₖ,x⟩ − λ∫ₐᵇ K(t,s)x(s)ds = f(t)`.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    a: f64,
    b: f64,
    kernel: Expr,
    source: Expr,
    loads: Vec<Load>,
}

fn check_vars(e: &Expr, expected: &[&str], what: &str) -> Result<()> {
    if e.vars().len() != expected.len() || e.vars().iter().zip(expected).any(|(v, w)| v != w) {
        return Err(Error::ProblemFile(format!(
            "{what} must be declared over ({}), got ({})",
            expected.join(", "),
            e.vars().join(", ")
        )));
    }
    Ok(())
}

impl ProblemSpec {
    /// `kernel` over `(t, s)`, `source` and every coefficient over `t`.
    pub fn new(interval: (f64, f64), kernel: Expr, source: Expr, loads: Vec<Load>) -> Result<Self> {
        let (a, b) = interval;
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidInterval { a, b });
        }
        if loads.is_empty() {
            return Err(Error::NoLoads);
        }
        check_vars(&kernel, &["t", "s"], "kernel")?;
        check_vars(&source, &["t"], "source")?;
        for load in &loads {
            check_vars(&load.coeff, &["t"], "load coefficient")?;
        }
        Ok(ProblemSpec {
            a,
            b,
            kernel,
            source,
            loads,
        })
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn kernel(&self) -> &Expr {
        &self.kernel
    }

    pub fn source(&self) -> &Expr {
        &self.source
    }

    pub fn loads(&self) -> &[Load] {
        &self.loads
    }

    pub fn n(&self) -> usize {
        self.loads.len()
    }
}

/// `A₀ = [⟨γᵢ, aₖ⟩]` from the continuous coefficients.
pub fn assemble_a0(problem: &ProblemSpec) -> Result<DMatrix<f64>> {
    let n = problem.n();
    let mut a0 = DMatrix::zeros(n, n);
    for (i, li) in problem.loads.iter().enumerate() {
        for (k, lk) in problem.loads.iter().enumerate() {
            a0[(i, k)] = li.functional.apply(&lk.coeff)?;
        }
    }
    Ok(a0)
}

#[derive(Debug, Clone, PartialEq)]
pub enum ReducedOutcome {
    Unique(DVector<f64>),
    /// `E − A₀` singular and `f_γ` outside its range.
    NoSolution { residual: f64 },
    /// `E − A₀` singular but consistent: `particular + span(null_space)`.
    NonUnique {
        particular: DVector<f64>,
        null_space: Vec<DVector<f64>>,
    },
}

/// Solves `(E − A₀) c = f_γ`, deciding rank with relative tolerance `tol`.
pub fn solve_reduced(a0: &DMatrix<f64>, f_gamma: &DVector<f64>, tol: f64) -> ReducedOutcome {
    let n = a0.nrows();
    let m = DMatrix::identity(n, n) - a0;
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let cutoff = tol * smax.max(1.0);
    if svd.singular_values.min() > cutoff {
        let c = m.lu().solve(f_gamma).expect("full-rank system");
        return ReducedOutcome::Unique(c);
    }
    let particular = svd
        .solve(f_gamma, cutoff)
        .expect("svd computed with both factors");
    let residual = (&m * &particular - f_gamma).amax();
    if residual > tol * (1.0 + f_gamma.amax()) * (1.0 + m.amax()) {
        return ReducedOutcome::NoSolution { residual };
    }
    let v_t = svd.v_t.as_ref().expect("svd computed with v_t");
    let null_space = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, s)| **s <= cutoff)
        .map(|(i, _)| v_t.row(i).transpose())
        .collect();
    ReducedOutcome::NonUnique {
        particular,
        null_space,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassificationKind {
    /// `det(E − A₀)` bounded away from zero.
    Regular,
    /// `A₀ = E`.
    IrregularIdentity,
    /// `det(E − A₀) ≈ 0` but `A₀ ≠ E`.
    UnsupportedIrregular,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Classification {
    pub kind: ClassificationKind,
    /// `det(E − A₀)`
    pub det: f64,
}

impl std::fmt::Display for ClassificationKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ClassificationKind::Regular => "Regular",
            ClassificationKind::IrregularIdentity => "IrregularIdentity",
            ClassificationKind::UnsupportedIrregular => "UnsupportedIrregular",
        })
    }
}

pub fn classify(a0: &DMatrix<f64>, tol_identity: f64, tol_det: f64) -> Classification {
    let n = a0.nrows();
    let e = DMatrix::<f64>::identity(n, n);
    let det = (&e - a0).determinant();
    let scale = 1.0 + a0.amax();
    let kind = if (a0 - &e).amax() <= tol_identity * scale {
        ClassificationKind::IrregularIdentity
    } else if det.abs() > tol_det * scale {
        ClassificationKind::Regular
    } else {
        ClassificationKind::UnsupportedIrregular
    };
    Classification { kind, det }
}

/// Discretized data for the load systems of one problem on one grid.
pub struct LoadSystem<'a> {
    problem: &'a ProblemSpec,
    kernel: &'a DiscreteKernel,
    coeffs: Vec<GridFunction>,
    source: GridFunction,
    a0: DMatrix<f64>,
    f_gamma: DVector<f64>,
}

impl<'a> LoadSystem<'a> {
    pub fn new(problem: &'a ProblemSpec, kernel: &'a DiscreteKernel) -> Result<Self> {
        let rule = kernel.rule().clone();
        let sample = |e: &Expr| GridFunction::sample(rule.clone(), |t| Ok(e.eval(&[t])?));
        let coeffs = problem
            .loads
            .iter()
            .map(|l| sample(&l.coeff))
            .collect::<Result<Vec<_>>>()?;
        let source = sample(&problem.source)?;
        let mut sys = LoadSystem {
            problem,
            kernel,
            coeffs,
            source,
            a0: DMatrix::zeros(0, 0),
            f_gamma: DVector::zeros(0),
        };
        let n = problem.n();
        let mut a0 = DMatrix::zeros(n, n);
        for k in 0..n {
            a0.set_column(k, &sys.apply_loads(&sys.coeffs[k])?);
        }
        sys.f_gamma = sys.apply_loads(&sys.source)?;
        sys.a0 = a0;
        Ok(sys)
    }

    pub fn problem(&self) -> &'a ProblemSpec {
        self.problem
    }

    pub fn kernel(&self) -> &'a DiscreteKernel {
        self.kernel
    }

    pub fn n(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[GridFunction] {
        &self.coeffs
    }

    pub fn source(&self) -> &GridFunction {
        &self.source
    }

    pub fn a0(&self) -> &DMatrix<f64> {
        &self.a0
    }

    pub fn f_gamma(&self) -> &DVector<f64> {
        &self.f_gamma
    }

    /// `(⟨γ₁,g⟩, …, ⟨γₙ,g⟩)`.
    pub fn apply_loads(&self, g: &GridFunction) -> Result<DVector<f64>> {
        let values = self
            .problem
            .loads
            .iter()
            .map(|l| l.functional.apply(g))
            .collect::<Result<Vec<_>>>()?;
        Ok(DVector::from_vec(values))
    }

    /// `Σₖ aₖ cₖ` on the grid.
    pub fn combine(&self, c: &DVector<f64>) -> GridFunction {
        let mut out = vec![0.0; self.source.values().len()];
        for (a, ck) in self.coeffs.iter().zip(c.iter()) {
            for (o, v) in out.iter_mut().zip(a.values()) {
                *o += ck * v;
            }
        }
        GridFunction::from_raw(self.source.rule().clone(), out)
    }

    /// `f + Σₖ aₖ cₖ`.
    pub fn source_plus(&self, c: &DVector<f64>) -> GridFunction {
        let combo = self.combine(c);
        let values = combo
            .values()
            .iter()
            .zip(self.source.values())
            .map(|(x, f)| x + f)
            .collect();
        GridFunction::from_raw(self.source.rule().clone(), values)
    }

    pub fn classify(&self) -> Classification {
        classify(&self.a0, TOL_IDENTITY, TOL_DET)
    }

    pub fn reduced(&self, tol: f64) -> ReducedOutcome {
        solve_reduced(&self.a0, &self.f_gamma, tol)
    }

    pub fn condition_i(&self, tol: f64) -> Result<Vec<ConditionIStatus>> {
        self.problem
            .loads
            .iter()
            .map(|l| check_condition_i(&l.functional, self.kernel, tol))
            .collect()
    }

    /// `A(λ)` and `b(λ)` from one factorization of `I − λKW`.
    pub fn at_lambda(&self, lambda: f64) -> Result<(DMatrix<f64>, DVector<f64>)> {
        let op = ResolventOperator::new(self.kernel, lambda)?;
        self.at_lambda_with(&op)
    }

    pub fn at_lambda_with(&self, op: &ResolventOperator) -> Result<(DMatrix<f64>, DVector<f64>)> {
        let n = self.n();
        let mut a = DMatrix::zeros(n, n);
        for (k, ak) in self.coeffs.iter().enumerate() {
            // λ Γ W aₖ = (I − λKW)⁻¹ aₖ − aₖ
            let y = op.apply(ak);
            let correction = GridFunction::from_raw(
                ak.rule().clone(),
                y.values().iter().zip(ak.values()).map(|(y, a)| y - a).collect(),
            );
            a.set_column(k, &self.apply_loads(&correction)?);
        }
        let b = self.apply_loads(&op.apply(&self.source))?;
        Ok((a, b))
    }

    pub fn a_of_lambda(&self, lambda: f64) -> Result<DMatrix<f64>> {
        Ok(self.at_lambda(lambda)?.0)
    }

    pub fn b_of_lambda(&self, lambda: f64) -> Result<DVector<f64>> {
        let op = ResolventOperator::new(self.kernel, lambda)?;
        self.apply_loads(&op.apply(&self.source))
    }

    /// Taylor coefficients `A₁ … A_M` of `A(λ)`.
    pub fn taylor_a(&self, iter: &IteratedKernels, depth: usize) -> Result<Vec<DMatrix<f64>>> {
        assert!(depth <= iter.depth(), "truncation exceeds iteration depth");
        let n = self.n();
        (1..=depth)
            .map(|m| {
                let mut am = DMatrix::zeros(n, n);
                for (k, ak) in self.coeffs.iter().enumerate() {
                    am.set_column(k, &self.apply_loads(&iter.apply(m, ak))?);
                }
                Ok(am)
            })
            .collect()
    }

    /// Taylor coefficients `b₁ … b_M` of `b(λ)`; `b₀ = f_γ`.
    pub fn taylor_b(&self, iter: &IteratedKernels, depth: usize) -> Result<Vec<DVector<f64>>> {
        assert!(depth <= iter.depth(), "truncation exceeds iteration depth");
        (1..=depth)
            .map(|m| self.apply_loads(&iter.apply(m, &self.source)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel_ops::iterate_kernels;
    use crate::quadrature::gauss_legendre;
    use std::sync::Arc;

    const UNIT: (f64, f64) = (0.0, 1.0);

    fn t_expr(text: &str) -> Expr {
        Expr::parse(text, &["t"]).unwrap()
    }

    fn integral_01() -> Functional {
        Functional::integral(UNIT, 0.0, 1.0, Expr::constant(1.0, &["s"]), 32).unwrap()
    }

    fn problem(kernel: &str, source: &str, loads: Vec<Load>) -> ProblemSpec {
        ProblemSpec::new(UNIT, Expr::parse(kernel, &["t", "s"]).unwrap(), t_expr(source), loads).unwrap()
    }

    fn discretize(p: &ProblemSpec, n: usize) -> DiscreteKernel {
        let rule = Arc::new(gauss_legendre(n, 0.0, 1.0).unwrap());
        DiscreteKernel::discretize(p.kernel(), rule).unwrap()
    }

    #[test]
    fn a0_examples() {
        let p = problem("0", "1", vec![Load { coeff: t_expr("0"), functional: integral_01() }]);
        assert_eq!(assemble_a0(&p).unwrap()[(0, 0)], 0.0);

        let p = problem(
            "0",
            "1",
            vec![Load { coeff: t_expr("1"), functional: Functional::point(UNIT, 0.0).unwrap() }],
        );
        assert_eq!(assemble_a0(&p).unwrap()[(0, 0)], 1.0);

        let p = problem(
            "0",
            "1",
            vec![
                Load { coeff: t_expr("t"), functional: integral_01() },
                Load { coeff: t_expr("1"), functional: Functional::point(UNIT, 1.0).unwrap() },
            ],
        );
        let a0 = assemble_a0(&p).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[0.5, 1.0, 1.0, 1.0]);
        assert!((a0 - &expected).amax() < 1e-14);
        let k = discretize(&p, 16);
        let sys = LoadSystem::new(&p, &k).unwrap();
        assert!((sys.a0() - expected).amax() < 1e-13);
    }

    #[test]
    fn reduced_outcomes() {
        let one = DVector::from_vec(vec![1.0]);
        assert_eq!(
            solve_reduced(&DMatrix::zeros(1, 1), &one, TOL_RANK),
            ReducedOutcome::Unique(one.clone())
        );
        let e = DMatrix::identity(1, 1);
        assert!(matches!(solve_reduced(&e, &one, TOL_RANK), ReducedOutcome::NoSolution { .. }));
        match solve_reduced(&e, &DVector::zeros(1), TOL_RANK) {
            ReducedOutcome::NonUnique { particular, null_space } => {
                assert_eq!(particular[0], 0.0);
                assert_eq!(null_space.len(), 1);
                assert!((null_space[0][0].abs() - 1.0).abs() < 1e-15);
            }
            other => panic!("unexpected {other:?}"),
        }
        // rank-deficient 2x2 with consistent rhs
        let a0 = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        match solve_reduced(&a0, &DVector::from_vec(vec![0.0, 3.0]), TOL_RANK) {
            ReducedOutcome::NonUnique { particular, null_space } => {
                assert!((particular[1] - 3.0).abs() < 1e-14);
                assert_eq!(null_space.len(), 1);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn classification() {
        assert_eq!(classify(&DMatrix::zeros(2, 2), TOL_IDENTITY, TOL_DET).kind, ClassificationKind::Regular);
        assert_eq!(
            classify(&DMatrix::identity(2, 2), TOL_IDENTITY, TOL_DET).kind,
            ClassificationKind::IrregularIdentity
        );
        let diag = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0]));
        let c = classify(&diag, TOL_IDENTITY, TOL_DET);
        assert_eq!(c.kind, ClassificationKind::UnsupportedIrregular);
        assert_eq!(c.det, 0.0);
    }

    #[test]
    fn a_and_b_of_lambda() {
        let p = problem("1", "1", vec![Load { coeff: t_expr("1"), functional: integral_01() }]);
        let k = discretize(&p, 32);
        let sys = LoadSystem::new(&p, &k).unwrap();
        let (a, b) = sys.at_lambda(0.0).unwrap();
        assert_eq!(a.amax(), 0.0);
        assert!((b - sys.f_gamma()).amax() < 1e-15);
        let (a, b) = sys.at_lambda(0.5).unwrap();
        assert!((a[(0, 0)] - 1.0).abs() < 1e-12);
        assert!((b[0] - 2.0).abs() < 1e-12);

        let zero_src = problem("1", "0", vec![Load { coeff: t_expr("1"), functional: integral_01() }]);
        let sys0 = LoadSystem::new(&zero_src, &k).unwrap();
        for l in [-0.7, 0.2, 0.9, 3.0] {
            assert_eq!(sys0.b_of_lambda(l).unwrap().amax(), 0.0);
        }
    }

    #[test]
    fn taylor_coefficients() {
        let p = problem("1", "1", vec![Load { coeff: t_expr("1"), functional: integral_01() }]);
        let k = discretize(&p, 32);
        let sys = LoadSystem::new(&p, &k).unwrap();
        let it = iterate_kernels(&k, 5);
        for am in sys.taylor_a(&it, 5).unwrap() {
            assert!((am[(0, 0)] - 1.0).abs() < 1e-12);
        }

        let zero = problem("0", "1", vec![Load { coeff: t_expr("t"), functional: integral_01() }]);
        let kz = discretize(&zero, 16);
        let sysz = LoadSystem::new(&zero, &kz).unwrap();
        let itz = iterate_kernels(&kz, 4);
        assert!(sysz.taylor_a(&itz, 4).unwrap().iter().all(|m| m.amax() == 0.0));

        // Condition I: ⟨γ, K(·,s)⟩ = 0 ⇒ A₁ = 0
        let cond = problem(
            "(t - 1/2)*exp(s)",
            "1",
            vec![Load { coeff: t_expr("t^2"), functional: integral_01() }],
        );
        let kc = discretize(&cond, 32);
        let sysc = LoadSystem::new(&cond, &kc).unwrap();
        assert!(sysc.condition_i(1e-10).unwrap()[0].holds);
        let itc = iterate_kernels(&kc, 3);
        assert!(sysc.taylor_a(&itc, 1).unwrap()[0].amax() < 1e-14);
    }

    #[test]
    fn series_agrees_with_resolvent() {
        let p = problem(
            "exp(-t*s) + t",
            "cos(t)",
            vec![
                Load { coeff: t_expr("t"), functional: integral_01() },
                Load { coeff: t_expr("1 - t"), functional: Functional::point(UNIT, 0.3).unwrap() },
            ],
        );
        let k = discretize(&p, 32);
        let sys = LoadSystem::new(&p, &k).unwrap();
        let it = iterate_kernels(&k, 30);
        let am = sys.taylor_a(&it, 30).unwrap();
        let bm = sys.taylor_b(&it, 30).unwrap();
        let lambda = 0.5 / k.operator_norm();
        let (a, b) = sys.at_lambda(lambda).unwrap();
        let mut a_series = DMatrix::zeros(2, 2);
        let mut b_series = sys.f_gamma().clone();
        for m in 0..30 {
            let pow = lambda.powi(m as i32 + 1);
            a_series += &am[m] * pow;
            b_series += &bm[m] * pow;
        }
        assert!((a - a_series).amax() < 1e-8);
        assert!((b - b_series).amax() < 1e-8);
    }

    #[test]
    fn rejects_bad_problem_specs() {
        assert!(matches!(
            ProblemSpec::new(UNIT, Expr::parse("1", &["t", "s"]).unwrap(), t_expr("1"), vec![]),
            Err(Error::NoLoads)
        ));
        assert!(ProblemSpec::new((1.0, 0.0), Expr::parse("1", &["t", "s"]).unwrap(), t_expr("1"), vec![]).is_err());
        let bad_kernel = Expr::parse("t", &["t"]).unwrap();
        assert!(ProblemSpec::new(
            UNIT,
            bad_kernel,
            t_expr("1"),
            vec![Load { coeff: t_expr("1"), functional: integral_01() }]
        )
        .is_err());
    }
}
