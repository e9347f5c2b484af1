mod common;

use common::*;
use loaded_fredholm::kernel_ops::{iterate_kernels, ResolventOperator};
use loaded_fredholm::oracle::dense_solve;
use loaded_fredholm::solver::{
    solve, solve_irregular, solve_regular, solve_successive, successive_bound, IrregularExpansion,
};
use loaded_fredholm::{LoadSystem, RouteChoice, SolverOptions};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const NODES: usize = 32;

/// `x − a(t)x(0) − λ b(t)∫m(s)x(s)ds = f` with `a(0) = 1` has the load
/// `x(0) = [−f(0)/(λb(0)) − (f,m) + (f(0)/b(0))(b,m)] / (a,m)`.
#[test]
fn first_order_pole_with_variable_data() {
    // a = 1 + t, b = 2 − t, m = 1 + s, f = e^t
    let p = problem("(2 - t)*(1 + s)", "exp(t)", vec![("1 + t", point(0.0))]);
    let k = discretize(&p, NODES);
    let sys = LoadSystem::new(&p, &k).unwrap();
    let (am, fm, bm) = (7.0 / 3.0, std::f64::consts::E, 13.0 / 6.0);
    let opts = SolverOptions::default();
    let iter = iterate_kernels(&k, opts.truncation);
    let exp = IrregularExpansion::build(&sys, &iter, &opts).unwrap();
    assert_eq!(exp.p, 1);
    for lambda in [0.02, 0.05, -0.08, 0.1] {
        assert!(lambda < exp.rho);
        let x0 = (-1.0 / (2.0 * lambda) - fm + bm / 2.0) / am;
        let s = solve_irregular(&sys, lambda, &opts).unwrap();
        assert!((s.x_gamma[0] - x0).abs() < 1e-9, "lambda={lambda}: {} vs {x0}", s.x_gamma[0]);
        for (t, x) in k.rule().nodes().iter().zip(s.x.values()) {
            let exact = t.exp() - (2.0 - t) / 2.0 + (1.0 + t) * x0;
            assert!((x - exact).abs() < 1e-9);
        }
        let dense = dense_solve(&p, &k, lambda).unwrap();
        assert!(s.x.max_abs_diff(&dense.x) < 1e-9);
    }
}

#[test]
fn load_vector_times_lambda_tends_to_residue() {
    let p = problem("(2 - t)*(1 + s)", "exp(t)", vec![("1 + t", point(0.0))]);
    let k = discretize(&p, NODES);
    let sys = LoadSystem::new(&p, &k).unwrap();
    // λ·x(0) → −f(0)/(b(0)(a,m)) = −3/14
    let mut prev = f64::INFINITY;
    for lambda in [1e-2, 1e-3, 1e-4] {
        let s = solve_irregular(&sys, lambda, &SolverOptions::default()).unwrap();
        let gap = (lambda * s.x_gamma[0] + 3.0 / 14.0).abs();
        assert!(gap < prev);
        prev = gap;
    }
    assert!(prev < 1e-4);
}

#[test]
fn taylor_series_matches_resolvent_near_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..5 {
        let p = random_regular(&mut rng, NODES);
        let k = discretize(&p, NODES);
        let sys = LoadSystem::new(&p, &k).unwrap();
        let iter = iterate_kernels(&k, 40);
        let coeffs = sys.taylor_a(&iter, 40).unwrap();
        let lambda = 0.25 / k.operator_norm();
        let mut series = DMatrix::zeros(p.n(), p.n());
        for (m, am) in coeffs.iter().enumerate() {
            series += am * lambda.powi(m as i32 + 1);
        }
        let direct = sys.a_of_lambda(lambda).unwrap();
        assert!((series - direct).amax() < 1e-10);
    }
}

#[test]
fn successive_differences_contract_geometrically() {
    let p = problem("exp(-(t - s)^2)", "1 + t", vec![("0", integral(0.0, 1.0, "1", NODES))]);
    let k = discretize(&p, NODES);
    let sys = LoadSystem::new(&p, &k).unwrap();
    let opts = SolverOptions::default();
    let lambda = successive_bound(&sys, opts.q).unwrap();
    let out = solve_successive(&sys, lambda, &opts).unwrap();
    for r in &out.ratios()[1..] {
        assert!(*r <= opts.q * 1.001);
    }
}

fn regular_case(seed: u64) -> (loaded_fredholm::ProblemSpec, loaded_fredholm::DiscreteKernel) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = random_regular(&mut rng, NODES);
    let k = discretize(&p, NODES);
    (p, k)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn routes_agree_inside_contraction_radius(seed in any::<u64>(), scale in -1.0f64..1.0) {
        let (p, k) = regular_case(seed);
        let sys = LoadSystem::new(&p, &k).unwrap();
        let opts = SolverOptions::default();
        let lambda = scale * successive_bound(&sys, opts.q).unwrap().min(1e6);
        let regular = solve_regular(&sys, lambda).unwrap();
        let successive = solve_successive(&sys, lambda, &opts).unwrap().solution;
        let dense = dense_solve(&p, &k, lambda).unwrap();
        prop_assert!(regular.x.max_abs_diff(&dense.x) < 1e-9);
        prop_assert!(successive.x.max_abs_diff(&dense.x) < 1e-9);
    }

    #[test]
    fn load_vector_is_consistent(seed in any::<u64>(), scale in -1.0f64..1.0) {
        let (p, k) = regular_case(seed);
        let sys = LoadSystem::new(&p, &k).unwrap();
        let lambda = scale * 0.5 / k.operator_norm().max(1e-12);
        let s = solve(&sys, lambda, RouteChoice::Auto, &SolverOptions::default()).unwrap();
        let recomputed = s.recomputed_loads(&p).unwrap();
        prop_assert!((recomputed - &s.x_gamma).amax() < 1e-10 * (1.0 + s.x_gamma.amax()));
        prop_assert!(s.residual < 1e-9 * (1.0 + s.x.max_abs()));
    }

    #[test]
    fn load_system_matches_resolvent_definition(seed in any::<u64>(), scale in -1.0f64..1.0) {
        let (p, k) = regular_case(seed);
        let sys = LoadSystem::new(&p, &k).unwrap();
        let lambda = scale * 0.5 / k.operator_norm().max(1e-12);
        let op = ResolventOperator::new(&k, lambda).unwrap();
        let (a, b) = sys.at_lambda_with(&op).unwrap();
        // column j of A is ⟨γ, (I − λKW)⁻¹aⱼ⟩ − ⟨γ, aⱼ⟩
        for (j, coeff) in sys.coeffs().iter().enumerate() {
            let col = sys.apply_loads(&op.apply(coeff)).unwrap() - sys.a0().column(j);
            prop_assert!((col - a.column(j)).amax() < 1e-12 * (1.0 + a.amax()));
        }
        let bb = sys.apply_loads(&op.apply(sys.source())).unwrap();
        prop_assert!((bb - b).amax() < 1e-12 * (1.0 + sys.source().max_abs()));
    }
}
