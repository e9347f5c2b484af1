#![allow(dead_code)]

use std::sync::Arc;

use loaded_fredholm::functionals::{IntegralTerm, PointTerm};
use loaded_fredholm::quadrature::gauss_legendre;
use loaded_fredholm::{DiscreteKernel, Expr, Functional, Load, ProblemSpec};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const UNIT: (f64, f64) = (0.0, 1.0);

pub fn t_expr(text: &str) -> Expr {
    Expr::parse(text, &["t"]).unwrap()
}

pub fn point(t: f64) -> Functional {
    Functional::point(UNIT, t).unwrap()
}

pub fn integral(lo: f64, hi: f64, weight: &str, nodes: usize) -> Functional {
    Functional::integral(UNIT, lo, hi, Expr::parse(weight, &["s"]).unwrap(), nodes).unwrap()
}

pub fn problem(kernel: &str, source: &str, loads: Vec<(&str, Functional)>) -> ProblemSpec {
    let loads = loads
        .into_iter()
        .map(|(a, functional)| Load { coeff: t_expr(a), functional })
        .collect();
    ProblemSpec::new(UNIT, Expr::parse(kernel, &["t", "s"]).unwrap(), t_expr(source), loads).unwrap()
}

pub fn discretize(p: &ProblemSpec, nodes: usize) -> DiscreteKernel {
    let (a, b) = p.interval();
    DiscreteKernel::discretize(p.kernel(), Arc::new(gauss_legendre(nodes, a, b).unwrap())).unwrap()
}

/// Random polynomial of degree `deg` in `var` with coefficients in [-1, 1].
pub fn poly(rng: &mut ChaCha8Rng, deg: usize, var: &str) -> String {
    (0..=deg)
        .map(|d| {
            let c: f64 = rng.gen_range(-1.0..1.0);
            match d {
                0 => format!("({c})"),
                1 => format!("({c})*{var}"),
                _ => format!("({c})*{var}^{d}"),
            }
        })
        .collect::<Vec<_>>()
        .join(" + ")
}

/// Separable polynomial kernel `Σ_{r<rank} u_r(t) v_r(s)`.
pub fn random_kernel_text(rng: &mut ChaCha8Rng, rank: usize) -> String {
    (0..rank)
        .map(|_| {
            let du = rng.gen_range(0..=2);
            let dv = rng.gen_range(0..=2);
            format!("({})*({})", poly(rng, du, "t"), poly(rng, dv, "s"))
        })
        .collect::<Vec<_>>()
        .join(" + ")
}

/// A load mixing point evaluations and weighted subinterval integrals.
pub fn random_functional(rng: &mut ChaCha8Rng, nodes: usize) -> Functional {
    let n_points = rng.gen_range(0..=2);
    let n_integrals = if n_points == 0 { rng.gen_range(1..=2) } else { rng.gen_range(0..=2) };
    let points = (0..n_points)
        .map(|_| PointTerm {
            t: rng.gen_range(0.0..1.0),
            alpha: rng.gen_range(-1.0..1.0),
        })
        .collect();
    let integrals = (0..n_integrals)
        .map(|_| {
            let x: f64 = rng.gen_range(0.0..1.0);
            let y: f64 = rng.gen_range(0.0..1.0);
            let (lo, hi) = if x < y { (x, y) } else { (y, x) };
            let hi = hi.max(lo + 0.05).min(1.0);
            let lo = lo.min(hi - 0.05);
            let deg = rng.gen_range(0..=2);
            IntegralTerm::new(lo, hi, Expr::parse(&poly(rng, deg, "s"), &["s"]).unwrap(), nodes).unwrap()
        })
        .collect();
    Functional::new(UNIT, points, integrals).unwrap()
}

/// Random problem with `n ≤ 3` mixed loads, a separable polynomial kernel of
/// rank ≤ 3 and `det(E − A₀)` bounded away from zero.
pub fn random_regular(rng: &mut ChaCha8Rng, nodes: usize) -> ProblemSpec {
    loop {
        let n = rng.gen_range(1..=3);
        let rank = rng.gen_range(1..=3);
        let kernel = random_kernel_text(rng, rank);
        let source_deg = rng.gen_range(0..=3);
        let source = format!("{} + sin(2*t)/3", poly(rng, source_deg, "t"));
        let loads: Vec<Load> = (0..n)
            .map(|_| {
                let deg = rng.gen_range(0..=2);
                Load {
                    coeff: t_expr(&poly(rng, deg, "t")),
                    functional: random_functional(rng, nodes),
                }
            })
            .collect();
        let p = ProblemSpec::new(UNIT, Expr::parse(&kernel, &["t", "s"]).unwrap(), t_expr(&source), loads).unwrap();
        let a0 = loaded_fredholm::load_system::assemble_a0(&p).unwrap();
        let m = nalgebra::DMatrix::identity(n, n) - a0;
        if m.singular_values().min() >= 0.05 {
            return p;
        }
    }
}
