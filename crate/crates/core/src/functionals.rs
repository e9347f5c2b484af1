//! Loads `⟨γ, x⟩`: finite combinations of point evaluations and weighted
//! integrals over subintervals.

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::kernel_ops::DiscreteKernel;
use crate::quadrature::{GridFunction, QuadratureRule};

#[derive(Debug, Clone, PartialEq)]
pub struct PointTerm {
    pub t: f64,
    pub alpha: f64,
}

/// `∫_{lo}^{hi} m(s) x(s) ds`, integrated with its own rule on `[lo, hi]`.
#[derive(Debug, Clone)]
pub struct IntegralTerm {
    lo: f64,
    hi: f64,
    weight: Expr,
    rule: QuadratureRule,
    /// `w_q · m(s_q)` at the sub-rule nodes.
    scaled_weights: Vec<f64>,
}

impl IntegralTerm {
    /// `weight` is an expression in the single variable `s`.
    pub fn new(lo: f64, hi: f64, weight: Expr, nodes: usize) -> Result<Self> {
        let rule = QuadratureRule::gauss_legendre(nodes, lo, hi)?;
        let scaled_weights = rule
            .nodes()
            .iter()
            .zip(rule.weights())
            .map(|(&s, &w)| {
                let m = weight.eval(&[s])?;
                Ok(w * m)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(IntegralTerm {
            lo,
            hi,
            weight,
            rule,
            scaled_weights,
        })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn weight(&self) -> &Expr {
        &self.weight
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    /// Pairs `(s_q, w_q·m(s_q))`.
    pub fn weighted_nodes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.rule.nodes().iter().copied().zip(self.scaled_weights.iter().copied())
    }
}

/// Anything a load can be applied to.
pub trait LoadTarget {
    fn value_at(&self, t: f64) -> Result<f64>;
}

impl LoadTarget for GridFunction {
    fn value_at(&self, t: f64) -> Result<f64> {
        self.interpolate(t)
    }
}

impl<F: Fn(f64) -> f64> LoadTarget for F {
    fn value_at(&self, t: f64) -> Result<f64> {
        let v = self(t);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite { t, value: v })
        }
    }
}

impl LoadTarget for Expr {
    fn value_at(&self, t: f64) -> Result<f64> {
        Ok(self.eval(&[t])?)
    }
}

#[derive(Debug, Clone)]
pub struct Functional {
    points: Vec<PointTerm>,
    integrals: Vec<IntegralTerm>,
}

impl Functional {
    /// Validates that every term lies in the master interval `[a, b]`.
    pub fn new(domain: (f64, f64), points: Vec<PointTerm>, integrals: Vec<IntegralTerm>) -> Result<Self> {
        let (a, b) = domain;
        if points.is_empty() && integrals.is_empty() {
            return Err(Error::EmptyFunctional);
        }
        for p in &points {
            if !(p.t >= a && p.t <= b) {
                return Err(Error::OutOfDomain { t: p.t, a, b });
            }
            if !p.alpha.is_finite() {
                return Err(Error::NonFinite { t: p.t, value: p.alpha });
            }
        }
        for term in &integrals {
            if term.lo < a || term.hi > b {
                let t = if term.lo < a { term.lo } else { term.hi };
                return Err(Error::OutOfDomain { t, a, b });
            }
        }
        Ok(Functional { points, integrals })
    }

    /// Point evaluation `x(t)`.
    pub fn point(domain: (f64, f64), t: f64) -> Result<Self> {
        Self::new(domain, vec![PointTerm { t, alpha: 1.0 }], vec![])
    }

    /// `∫_lo^hi m(s) x(s) ds`.
    pub fn integral(domain: (f64, f64), lo: f64, hi: f64, weight: Expr, nodes: usize) -> Result<Self> {
        Self::new(domain, vec![], vec![IntegralTerm::new(lo, hi, weight, nodes)?])
    }

    pub fn point_terms(&self) -> &[PointTerm] {
        &self.points
    }

    pub fn integral_terms(&self) -> &[IntegralTerm] {
        &self.integrals
    }

    /// `Σ αᵢ x(tᵢ) + Σ ∫ mᵢ(s) x(s) ds`.
    pub fn apply(&self, x: &impl LoadTarget) -> Result<f64> {
        let mut acc = 0.0;
        for p in &self.points {
            acc += p.alpha * x.value_at(p.t)?;
        }
        for term in &self.integrals {
            for (s, w) in term.weighted_nodes() {
                acc += w * x.value_at(s)?;
            }
        }
        Ok(acc)
    }

    /// Bound on `|⟨γ, x⟩| / ‖x‖_∞`: `Σ|αᵢ| + Σ ∫|mᵢ|`.
    pub fn norm(&self) -> f64 {
        let pts: f64 = self.points.iter().map(|p| p.alpha.abs()).sum();
        let ints: f64 = self
            .integrals
            .iter()
            .flat_map(|t| t.scaled_weights.iter())
            .map(|w| w.abs())
            .sum();
        pts + ints
    }
}

/// `s ↦ ⟨γ, K(·, s)⟩` sampled at every s-node of the kernel's rule.
pub fn apply_to_kernel_slices(gamma: &Functional, kernel: &DiscreteKernel) -> Result<GridFunction> {
    let rule = kernel.rule().clone();
    let n = rule.len();
    let values = (0..n)
        .map(|j| {
            let column = GridFunction::from_raw(rule.clone(), kernel.values().column(j).iter().copied().collect());
            gamma.apply(&column)
        })
        .collect::<Result<Vec<_>>>()?;
    GridFunction::new(rule, values)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionIStatus {
    pub holds: bool,
    pub deviation: f64,
}

/// Checks `⟨γ, K(·, s)⟩ = 0` at every s-node, relative to kernel magnitude.
pub fn check_condition_i(gamma: &Functional, kernel: &DiscreteKernel, tol: f64) -> Result<ConditionIStatus> {
    let slices = apply_to_kernel_slices(gamma, kernel)?;
    let deviation = slices.max_abs();
    Ok(ConditionIStatus {
        holds: deviation <= tol * (1.0 + kernel.max_abs()),
        deviation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{gauss_legendre, DEFAULT_NODES};
    use std::sync::Arc;
    use proptest::prelude::*;

    const UNIT: (f64, f64) = (0.0, 1.0);

    fn one_s() -> Expr {
        Expr::constant(1.0, &["s"])
    }

    fn kernel(text: &str, n: usize) -> DiscreteKernel {
        let rule = Arc::new(gauss_legendre(n, 0.0, 1.0).unwrap());
        DiscreteKernel::discretize(&Expr::parse(text, &["t", "s"]).unwrap(), rule).unwrap()
    }

    #[test]
    fn apply_basic_loads() {
        let at0 = Functional::point(UNIT, 0.0).unwrap();
        assert_eq!(at0.apply(&|t: f64| t * t).unwrap(), 0.0);

        let int = Functional::integral(UNIT, 0.0, 1.0, one_s(), 16).unwrap();
        assert!((int.apply(&|_t: f64| 1.0).unwrap() - 1.0).abs() < 1e-14);

        let mixed = Functional::new(
            UNIT,
            vec![PointTerm { t: 0.5, alpha: 2.0 }],
            vec![IntegralTerm::new(0.0, 0.5, Expr::parse("s", &["s"]).unwrap(), 8).unwrap()],
        )
        .unwrap();
        let expected = 1.0 + 1.0 / 24.0;
        assert!((mixed.apply(&|t: f64| t).unwrap() - expected).abs() < 1e-14);
        assert!((mixed.norm() - (2.0 + 0.125)).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_functionals() {
        assert!(matches!(Functional::new(UNIT, vec![], vec![]), Err(Error::EmptyFunctional)));
        assert!(matches!(Functional::point(UNIT, 1.5), Err(Error::OutOfDomain { .. })));
        assert!(matches!(
            Functional::integral(UNIT, -0.5, 0.5, one_s(), 4),
            Err(Error::OutOfDomain { .. })
        ));
        assert!(Functional::integral(UNIT, 0.5, 0.5, one_s(), 4).is_err());
    }

    #[test]
    fn kernel_slices() {
        let at0 = Functional::point(UNIT, 0.0).unwrap();
        let ts = kernel("t*s", 8);
        assert!(apply_to_kernel_slices(&at0, &ts).unwrap().max_abs() < 1e-14);

        let int = Functional::integral(UNIT, 0.0, 1.0, one_s(), 8).unwrap();
        let centered = kernel("t - 1/2", 8);
        assert!(apply_to_kernel_slices(&int, &centered).unwrap().max_abs() < 1e-15);

        let ones = kernel("1", 8);
        let slices = apply_to_kernel_slices(&int, &ones).unwrap();
        assert!(slices.values().iter().all(|v| (v - 1.0).abs() < 1e-14));
    }

    #[test]
    fn condition_i() {
        let at0 = Functional::point(UNIT, 0.0).unwrap();
        assert!(check_condition_i(&at0, &kernel("t*s", 16), 1e-10).unwrap().holds);

        let int = Functional::integral(UNIT, 0.0, 1.0, one_s(), 16).unwrap();
        let st = check_condition_i(&int, &kernel("1", 16), 1e-10).unwrap();
        assert!(!st.holds);
        assert!((st.deviation - 1.0).abs() < 1e-13);

        assert!(check_condition_i(&int, &kernel("t - 1/2", 16), 1e-10).unwrap().holds);
    }

    #[test]
    fn grid_and_function_application_agree() {
        let rule = Arc::new(gauss_legendre(DEFAULT_NODES, 0.0, 1.0).unwrap());
        let gamma = Functional::new(
            UNIT,
            vec![PointTerm { t: 0.0, alpha: 1.5 }, PointTerm { t: 0.77, alpha: -0.5 }],
            vec![IntegralTerm::new(0.2, 0.9, Expr::parse("cos(s)", &["s"]).unwrap(), DEFAULT_NODES).unwrap()],
        )
        .unwrap();
        let x = |t: f64| (3.0 * t).sin() + t * t;
        let g = GridFunction::sample(rule, |t| Ok(x(t))).unwrap();
        let direct = gamma.apply(&x).unwrap();
        let grid = gamma.apply(&g).unwrap();
        assert!((direct - grid).abs() < 1e-8);
    }

    proptest! {
        #[test]
        fn linearity(cx in prop::collection::vec(-2.0f64..2.0, 4), cy in prop::collection::vec(-2.0f64..2.0, 4),
                     alpha in -3.0f64..3.0, beta in -3.0f64..3.0) {
            let rule = Arc::new(gauss_legendre(16, 0.0, 1.0).unwrap());
            let gamma = Functional::new(
                UNIT,
                vec![PointTerm { t: 0.3, alpha: 2.0 }],
                vec![IntegralTerm::new(0.1, 0.6, Expr::parse("1 + s", &["s"]).unwrap(), 16).unwrap()],
            ).unwrap();
            let poly = |c: &[f64], t: f64| c.iter().rev().fold(0.0, |acc, k| acc * t + k);
            let x = GridFunction::sample(rule.clone(), |t| Ok(poly(&cx, t))).unwrap();
            let y = GridFunction::sample(rule.clone(), |t| Ok(poly(&cy, t))).unwrap();
            let combo = GridFunction::sample(rule, |t| Ok(alpha * poly(&cx, t) + beta * poly(&cy, t))).unwrap();
            let lhs = gamma.apply(&combo).unwrap();
            let rhs = alpha * gamma.apply(&x).unwrap() + beta * gamma.apply(&y).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs().max(rhs.abs())));
        }
    }
}
