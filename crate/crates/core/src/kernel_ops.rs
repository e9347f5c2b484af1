//! Operator-level computations on the kernel `K(t,s)`: Nyström
//! discretization, iterated kernels, nilpotency, the resolvent
//! `Γ(t,s,λ)` and the discrete Fredholm determinant.
//!
//! With `W = diag(w)` the master weights, the integral operator acts on grid
//! functions as `x ↦ K W x`. The resolvent kernel is
//! `Γ = (I − λ K W)⁻¹ K`, so that `(I − λ K W)⁻¹ = I + λ Γ W`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, LU, Dyn};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::quadrature::{GridFunction, QuadratureRule};

/// Default relative tolerance for nilpotency detection.
pub const NILPOTENCY_TOL: f64 = 1e-10;
/// Default number of scan points for the characteristic-number search.
pub const DEFAULT_SCAN_POINTS: usize = 512;
/// Pivot ratio below which `I − λKW` counts as singular.
pub const PROXIMITY_TOL: f64 = 1e-8;

const BISECTION_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct DiscreteKernel {
    rule: Arc<QuadratureRule>,
    /// `values[(i, j)] = K(tᵢ, sⱼ)`
    values: DMatrix<f64>,
}

impl DiscreteKernel {
    pub fn discretize(kernel: &Expr, rule: Arc<QuadratureRule>) -> Result<Self> {
        let nodes = rule.nodes();
        let n = nodes.len();
        let mut values = DMatrix::zeros(n, n);
        for (i, &t) in nodes.iter().enumerate() {
            for (j, &s) in nodes.iter().enumerate() {
                values[(i, j)] = kernel.eval(&[t, s])?;
            }
        }
        Ok(DiscreteKernel { rule, values })
    }

    pub fn from_matrix(rule: Arc<QuadratureRule>, values: DMatrix<f64>) -> Self {
        assert_eq!(values.shape(), (rule.len(), rule.len()));
        DiscreteKernel { rule, values }
    }

    pub fn rule(&self) -> &Arc<QuadratureRule> {
        &self.rule
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.rule.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rule.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.amax()
    }

    /// `K W`: the matrix of the integral operator on grid values.
    pub fn weighted(&self) -> DMatrix<f64> {
        weight_columns(&self.values, self.rule.weights())
    }

    /// `(K W x)(tᵢ) = Σⱼ wⱼ K(tᵢ,sⱼ) x(sⱼ)`.
    pub fn apply(&self, x: &GridFunction) -> GridFunction {
        let wx = DVector::from_iterator(
            self.len(),
            x.values().iter().zip(self.rule.weights()).map(|(v, w)| v * w),
        );
        let y = &self.values * wx;
        GridFunction::from_raw(self.rule.clone(), y.as_slice().to_vec())
    }

    /// `max_i Σⱼ wⱼ |K(tᵢ,sⱼ)|`, the sup-norm of the discrete operator.
    pub fn operator_norm(&self) -> f64 {
        operator_norm(self)
    }
}

fn weight_columns(m: &DMatrix<f64>, w: &[f64]) -> DMatrix<f64> {
    let mut out = m.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        col *= w[j];
    }
    out
}

pub fn operator_norm(kernel: &DiscreteKernel) -> f64 {
    let w = kernel.rule.weights();
    kernel
        .values
        .row_iter()
        .map(|row| row.iter().zip(w).map(|(k, w)| w * k.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// `K₁ … K_M` with `Kₙ = K W Kₙ₋₁`.
#[derive(Debug, Clone)]
pub struct IteratedKernels {
    rule: Arc<QuadratureRule>,
    kernels: Vec<DMatrix<f64>>,
}

impl IteratedKernels {
    pub fn compute(kernel: &DiscreteKernel, depth: usize) -> Self {
        assert!(depth >= 1, "iteration depth must be at least 1");
        let kw = kernel.weighted();
        let mut kernels = Vec::with_capacity(depth);
        kernels.push(kernel.values.clone());
        for n in 1..depth {
            let next = &kw * &kernels[n - 1];
            kernels.push(next);
        }
        IteratedKernels {
            rule: kernel.rule.clone(),
            kernels,
        }
    }

    pub fn rule(&self) -> &Arc<QuadratureRule> {
        &self.rule
    }

    pub fn depth(&self) -> usize {
        self.kernels.len()
    }

    /// `Kₙ`, 1-based.
    pub fn get(&self, n: usize) -> &DMatrix<f64> {
        &self.kernels[n - 1]
    }

    pub fn iter(&self) -> impl Iterator<Item = &DMatrix<f64>> {
        self.kernels.iter()
    }

    /// `∫ Kₙ(t,s) g(s) ds` on the grid.
    pub fn apply(&self, n: usize, g: &GridFunction) -> GridFunction {
        let wx = DVector::from_iterator(
            g.values().len(),
            g.values().iter().zip(self.rule.weights()).map(|(v, w)| v * w),
        );
        let y = self.get(n) * wx;
        GridFunction::from_raw(self.rule.clone(), y.as_slice().to_vec())
    }
}

pub fn iterate_kernels(kernel: &DiscreteKernel, depth: usize) -> IteratedKernels {
    IteratedKernels::compute(kernel, depth)
}

/// Smallest `p` with `K_{p+1} ≈ 0` and `K_p` not negligible.
///
/// `K_{p+1}` must be below `tol·(1 + max|K₁|)` and also below `tol·max|K_p|`,
/// so geometric decay (`K = t·s`, ratio 1/3) is not mistaken for a collapse.
/// `Some(0)` means the kernel itself vanishes. `None` when no iterate up to
/// the computed depth vanishes.
pub fn nilpotency_index(iter: &IteratedKernels, tol: f64) -> Option<usize> {
    let threshold = tol * (1.0 + iter.get(1).amax());
    let k1 = iter.kernels[0].amax();
    if k1 <= threshold {
        return Some(0);
    }
    (1..iter.depth()).find(|&k| {
        let next = iter.kernels[k].amax();
        next <= threshold && next <= tol * iter.kernels[k - 1].amax()
    })
}

/// LU factorization of `I − λ K W`.
pub struct ResolventOperator {
    lambda: f64,
    rule: Arc<QuadratureRule>,
    lu: LU<f64, Dyn, Dyn>,
    log_abs_det: f64,
    det_sign: f64,
}

/// Signed log-determinant and pivot ratio from an LU factorization.
fn lu_determinant(lu: &LU<f64, Dyn, Dyn>) -> (f64, f64, f64) {
    let u = lu.u();
    let mut log_abs = 0.0;
    let mut sign: f64 = lu.p().determinant();
    let mut max_pivot: f64 = 0.0;
    let mut min_pivot = f64::INFINITY;
    for i in 0..u.nrows() {
        let d = u[(i, i)];
        max_pivot = max_pivot.max(d.abs());
        min_pivot = min_pivot.min(d.abs());
        if d == 0.0 {
            sign = 0.0;
            log_abs = f64::NEG_INFINITY;
        } else {
            log_abs += d.abs().ln();
            sign *= d.signum();
        }
    }
    let ratio = if max_pivot > 0.0 { min_pivot / max_pivot } else { 0.0 };
    (log_abs, sign, ratio)
}

fn factor(kernel: &DiscreteKernel, lambda: f64) -> (LU<f64, Dyn, Dyn>, f64, f64, f64) {
    let n = kernel.len();
    let m = DMatrix::identity(n, n) - kernel.weighted() * lambda;
    let lu = m.lu();
    let (log_abs, sign, ratio) = lu_determinant(&lu);
    (lu, log_abs, sign, ratio)
}

/// Signed log-determinant of `I − λ K W`: returns `(log|det|, sign)`.
pub fn log_det(kernel: &DiscreteKernel, lambda: f64) -> (f64, f64) {
    let (_, log_abs, sign, _) = factor(kernel, lambda);
    (log_abs, sign)
}

impl ResolventOperator {
    pub fn new(kernel: &DiscreteKernel, lambda: f64) -> Result<Self> {
        let (lu, log_abs_det, det_sign, pivot_ratio) = factor(kernel, lambda);
        if !(pivot_ratio > PROXIMITY_TOL) {
            return Err(Error::CharacteristicProximity {
                lambda,
                log_abs_det,
                pivot_ratio,
            });
        }
        Ok(ResolventOperator {
            lambda,
            rule: kernel.rule.clone(),
            lu,
            log_abs_det,
            det_sign,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn log_abs_det(&self) -> f64 {
        self.log_abs_det
    }

    pub fn det_sign(&self) -> f64 {
        self.det_sign
    }

    /// Solves `(I − λ K W) y = g`, i.e. `y = g + λ Γ W g`.
    pub fn apply(&self, g: &GridFunction) -> GridFunction {
        let rhs = DVector::from_column_slice(g.values());
        let y = self
            .lu
            .solve(&rhs)
            .expect("factorization was checked for singularity");
        GridFunction::from_raw(self.rule.clone(), y.as_slice().to_vec())
    }

    pub fn solve_matrix(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        self.lu
            .solve(rhs)
            .expect("factorization was checked for singularity")
    }
}

#[derive(Debug, Clone)]
pub struct ResolventData {
    pub lambda: f64,
    /// `Γ(tᵢ, sⱼ, λ)`
    pub gamma: DMatrix<f64>,
    /// `log|det(I − λ K W)|`
    pub log_abs_det: f64,
    pub det_sign: f64,
}

pub fn resolvent(kernel: &DiscreteKernel, lambda: f64) -> Result<ResolventData> {
    let op = ResolventOperator::new(kernel, lambda)?;
    let gamma = op.solve_matrix(&kernel.values);
    Ok(ResolventData {
        lambda,
        gamma,
        log_abs_det: op.log_abs_det,
        det_sign: op.det_sign,
    })
}

pub fn resolvent_apply(kernel: &DiscreteKernel, lambda: f64, g: &GridFunction) -> Result<GridFunction> {
    Ok(ResolventOperator::new(kernel, lambda)?.apply(g))
}

/// A located zero of `det(I − λ K W)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharacteristicNumber {
    pub lambda: f64,
    /// Scan bracket that contained the sign change.
    pub bracket: (f64, f64),
    /// `|det|` at the bracket ends.
    pub det_at_bracket: (f64, f64),
}

/// Locates sign changes of `det(I − λ K W)` on `[lo, hi]` and refines each by
/// bisection. Zeros of even multiplicity are not detected.
pub fn find_characteristic_numbers(
    kernel: &DiscreteKernel,
    lo: f64,
    hi: f64,
    scan_points: usize,
) -> Vec<CharacteristicNumber> {
    assert!(lo < hi, "empty scan range");
    let scan_points = scan_points.max(2);
    let grid: Vec<f64> = (0..scan_points)
        .map(|i| lo + (hi - lo) * i as f64 / (scan_points - 1) as f64)
        .collect();
    let dets: Vec<(f64, f64)> = grid.par_iter().map(|&l| log_det(kernel, l)).collect();

    let abs = |(log_abs, _): (f64, f64)| log_abs.exp();
    let mut found = Vec::new();
    for i in 0..grid.len() - 1 {
        let (l0, l1) = (grid[i], grid[i + 1]);
        let (s0, s1) = (dets[i].1, dets[i + 1].1);
        if s0 == 0.0 {
            found.push(CharacteristicNumber {
                lambda: l0,
                bracket: (l0, l0),
                det_at_bracket: (0.0, 0.0),
            });
            continue;
        }
        if s1 == 0.0 || s0 == s1 {
            continue;
        }
        let (mut a, mut b) = (l0, l1);
        while b - a > BISECTION_TOL {
            let mid = 0.5 * (a + b);
            let (_, sm) = log_det(kernel, mid);
            if sm == 0.0 {
                a = mid;
                b = mid;
                break;
            }
            if sm == s0 {
                a = mid;
            } else {
                b = mid;
            }
        }
        found.push(CharacteristicNumber {
            lambda: 0.5 * (a + b),
            bracket: (l0, l1),
            det_at_bracket: (abs(dets[i]), abs(dets[i + 1])),
        });
    }
    if dets[grid.len() - 1].1 == 0.0 {
        let l = grid[grid.len() - 1];
        found.push(CharacteristicNumber {
            lambda: l,
            bracket: (l, l),
            det_at_bracket: (0.0, 0.0),
        });
    }
    found
}
