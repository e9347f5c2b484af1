//! Gauss–Legendre rules on `[a, b]`, integration, and barycentric
//! interpolation through the rule's nodes.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Default master node count.
pub const DEFAULT_NODES: usize = 64;

const NEWTON_TOL: f64 = 1e-15;
const NEWTON_MAX_ITER: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    a: f64,
    b: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    /// Barycentric weights (second form), up to a common factor.
    bary: Vec<f64>,
}

/// Legendre polynomial `P_m(x)` and its derivative by the three-term recurrence.
fn legendre(m: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if m == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=m {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

impl QuadratureRule {
    /// `m`-point Gauss–Legendre rule on `[a, b]`, exact through degree `2m - 1`.
    pub fn gauss_legendre(m: usize, a: f64, b: f64) -> Result<Self> {
        if m == 0 {
            return Err(Error::ZeroNodes);
        }
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidInterval { a, b });
        }
        // reference rule on [-1, 1], ascending
        let mut x_ref = vec![0.0; m];
        let mut w_ref = vec![0.0; m];
        let half = m.div_ceil(2);
        for i in 0..half {
            // Tricomi's initial guess, descending in i
            let mut x = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..NEWTON_MAX_ITER {
                let (p, d) = legendre(m, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() <= NEWTON_TOL {
                    break;
                }
            }
            let (_, d) = legendre(m, x);
            if d.is_finite() {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            x_ref[m - 1 - i] = x;
            w_ref[m - 1 - i] = w;
            x_ref[i] = -x;
            w_ref[i] = w;
        }
        if m % 2 == 1 {
            x_ref[m / 2] = 0.0;
        }
        if m == 1 {
            w_ref[0] = 2.0;
        }

        let bary = x_ref
            .iter()
            .zip(&w_ref)
            .enumerate()
            .map(|(j, (x, w))| {
                let mag = ((1.0 - x * x) * w).sqrt();
                if j % 2 == 0 {
                    mag
                } else {
                    -mag
                }
            })
            .collect();

        let half_len = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        Ok(QuadratureRule {
            a,
            b,
            nodes: x_ref.iter().map(|x| mid + half_len * x).collect(),
            weights: w_ref.iter().map(|w| half_len * w).collect(),
            bary,
        })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn contains(&self, t: f64) -> bool {
        let slack = 1e-12 * (self.b - self.a);
        t >= self.a - slack && t <= self.b + slack
    }

    /// `Σ wᵢ f(tᵢ)`; fails if `f` is non-finite at any node.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> Result<f64> {
        self.try_integrate(|t| Ok(f(t)))
    }

    pub fn try_integrate(&self, f: impl Fn(f64) -> Result<f64>) -> Result<f64> {
        let mut sum = 0.0;
        for (&t, &w) in self.nodes.iter().zip(&self.weights) {
            let v = f(t)?;
            if !v.is_finite() {
                return Err(Error::NonFinite { t, value: v });
            }
            sum += w * v;
        }
        Ok(sum)
    }

    fn check_point(&self, t: f64) -> Result<()> {
        if self.contains(t) {
            Ok(())
        } else {
            Err(Error::OutOfDomain {
                t,
                a: self.a,
                b: self.b,
            })
        }
    }

    /// Lagrange basis `ℓⱼ(t)` through all nodes, in barycentric form.
    pub fn lagrange_basis(&self, t: f64) -> Result<Vec<f64>> {
        self.check_point(t)?;
        let mut basis = vec![0.0; self.len()];
        if let Some(j) = self.nodes.iter().position(|&x| x == t) {
            basis[j] = 1.0;
            return Ok(basis);
        }
        let mut denom = 0.0;
        for (j, (&x, &w)) in self.nodes.iter().zip(&self.bary).enumerate() {
            let c = w / (t - x);
            basis[j] = c;
            denom += c;
        }
        basis.iter_mut().for_each(|c| *c /= denom);
        Ok(basis)
    }

    /// Barycentric interpolation of `values` (one per node) at `t`.
    pub fn interpolate(&self, values: &[f64], t: f64) -> Result<f64> {
        debug_assert_eq!(values.len(), self.len());
        self.check_point(t)?;
        if let Some(j) = self.nodes.iter().position(|&x| x == t) {
            return Ok(values[j]);
        }
        let mut num = 0.0;
        let mut den = 0.0;
        for ((&x, &w), &v) in self.nodes.iter().zip(&self.bary).zip(values) {
            let c = w / (t - x);
            num += c * v;
            den += c;
        }
        Ok(num / den)
    }
}

pub fn gauss_legendre(m: usize, a: f64, b: f64) -> Result<QuadratureRule> {
    QuadratureRule::gauss_legendre(m, a, b)
}

/// A function sampled at the nodes of a rule.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    rule: Arc<QuadratureRule>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(rule: Arc<QuadratureRule>, values: Vec<f64>) -> Result<Self> {
        assert_eq!(values.len(), rule.len(), "grid function length mismatch");
        if let Some((t, v)) = rule
            .nodes()
            .iter()
            .zip(&values)
            .find(|(_, v)| !v.is_finite())
        {
            return Err(Error::NonFinite { t: *t, value: *v });
        }
        Ok(GridFunction { rule, values })
    }

    pub fn zeros(rule: Arc<QuadratureRule>) -> Self {
        let n = rule.len();
        GridFunction {
            rule,
            values: vec![0.0; n],
        }
    }

    pub fn sample(rule: Arc<QuadratureRule>, f: impl Fn(f64) -> Result<f64>) -> Result<Self> {
        let values = rule.nodes().iter().map(|&t| f(t)).collect::<Result<Vec<_>>>()?;
        Self::new(rule, values)
    }

    /// Builds without the finiteness check; internal arithmetic only.
    pub(crate) fn from_raw(rule: Arc<QuadratureRule>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), rule.len());
        GridFunction { rule, values }
    }

    pub fn rule(&self) -> &Arc<QuadratureRule> {
        &self.rule
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn integral(&self) -> f64 {
        self.rule
            .weights()
            .iter()
            .zip(&self.values)
            .map(|(w, v)| w * v)
            .sum()
    }

    pub fn interpolate(&self, t: f64) -> Result<f64> {
        self.rule.interpolate(&self.values, t)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &GridFunction) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
    }
}
