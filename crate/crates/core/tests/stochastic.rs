use pdhjb::bolza::{solve_doc, BolzaProblem, DocOptions, TerminalCost};
use pdhjb::stochastic::{
    check_rescaling_identity, estimate_vn_quadratic_oracle, simulate_scaled_brownian, solve_soc_tree, ControlGrid,
    LatticeSpec, OracleOptions,
};
use pdhjb::{DiscretePath, Error, Lagrangian, TimeGrid};

fn problem(l: &str, h: &str) -> BolzaProblem {
    BolzaProblem::new(
        Lagrangian::from_name(l, 1, 1.0).unwrap(),
        TerminalCost::from_name(h, 1).unwrap(),
    )
}

fn zero() -> DiscretePath {
    DiscretePath::zero(1.0, 1).unwrap()
}

/// `−(1/n) log E exp(−n (x* + Z − c)²)` with `Z ~ N(0, τ/n)`, by composite Simpson.
fn lq_quadrature(n: f64, x_star: f64, c: f64, tau: f64) -> f64 {
    let sd = (tau / n).sqrt();
    let shift = c - x_star;
    let (lo, hi, m) = (shift.min(0.0) - 12.0 * sd, shift.max(0.0) + 12.0 * sd, 400_000);
    let h = (hi - lo) / m as f64;
    let f = |z: f64| {
        let density = (-0.5 * (z / sd).powi(2)).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt());
        density * (-n * (x_star + z - c).powi(2)).exp()
    };
    let mut sum = f(lo) + f(hi);
    for i in 1..m {
        sum += f(lo + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    -(sum * h / 3.0).ln() / n
}

#[test]
fn brownian_samples_have_the_scaled_variance() {
    let grid = TimeGrid::uniform(0.0, 1.0, 8).unwrap();
    let t0 = 0.25;
    let prefix = DiscretePath::from_fn(TimeGrid::uniform(0.0, 1.0, 4).unwrap(), 1, |t, o| o[0] = t).unwrap();
    for n in [1.0, 4.0, 16.0] {
        let m = 10_000;
        let ends: Vec<f64> = (0..m)
            .map(|s| simulate_scaled_brownian(t0, &prefix, n, &grid, s).unwrap().last()[0] - t0)
            .collect();
        let mean = ends.iter().sum::<f64>() / m as f64;
        let var = ends.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
        let expected = (1.0 - t0) / n;
        assert!((var / expected - 1.0).abs() < 0.05, "n={n}: {var} vs {expected}");
        assert!(mean.abs() < 3.0 * (expected / m as f64).sqrt(), "n={n}: mean {mean}");
    }
    let a = simulate_scaled_brownian(t0, &prefix, 2.0, &grid, 42).unwrap();
    let b = simulate_scaled_brownian(t0, &prefix, 2.0, &grid, 42).unwrap();
    assert_eq!(a, b);
    for s in [0.0, 0.1, 0.25] {
        assert_eq!(a.at(s)[0], prefix.at(s)[0]);
    }
    assert!(simulate_scaled_brownian(t0, &prefix, 0.5, &grid, 0).is_err());
}

#[test]
fn paths_concentrate_for_large_n() {
    let grid = TimeGrid::uniform(0.0, 1.0, 16).unwrap();
    let sup_dev = |n: f64| -> f64 {
        (0..200)
            .map(|s| {
                let p = simulate_scaled_brownian(0.0, &zero(), n, &grid, s).unwrap();
                p.values().iter().fold(0.0f64, |m, v| m.max(v.abs()))
            })
            .sum::<f64>()
            / 200.0
    };
    let (a, b, c) = (sup_dev(1.0), sup_dev(16.0), sup_dev(256.0));
    assert!(a > b && b > c, "{a} {b} {c}");
}

#[test]
fn constant_terminal_cost_gives_constant_value() {
    for l in ["quadratic", "power:1.5"] {
        let prob = problem(l, "constant:0.37");
        let spec = LatticeSpec::new(4, ControlGrid::symmetric(1.0, 2));
        let res = solve_soc_tree(&prob, 0.0, &zero(), 3.0, &spec).unwrap();
        assert_eq!(res.value, 0.37);
        assert_eq!(res.root_control, vec![0.0]);
        assert!(res.within_bounds());
    }
    let prob = problem("quadratic", "constant:0.37");
    let grid = TimeGrid::uniform(0.0, 1.0, 8).unwrap();
    for antithetic in [false, true] {
        let opts = OracleOptions {
            samples: 1000,
            antithetic,
            ..OracleOptions::default()
        };
        let est = estimate_vn_quadratic_oracle(&prob, 7.0, 0.0, &zero(), &grid, &opts).unwrap();
        assert_eq!(est.value.to_f64(), 0.37);
        assert_eq!(est.mc_standard_error, 0.0);
    }
}

#[test]
fn oracle_matches_the_gaussian_integral() {
    let closed = 1.0 / 3.0 + 3f64.ln() / 4.0;
    assert!((closed - 0.60798).abs() < 1e-5);
    assert!((lq_quadrature(2.0, 0.0, 1.0, 1.0) - closed).abs() < 1e-9);

    let prob = problem("quadratic", "endpoint_quadratic:1");
    let grid = TimeGrid::uniform(0.0, 1.0, 4).unwrap();
    let opts = OracleOptions {
        samples: 100_000,
        seed: 3,
        ..OracleOptions::default()
    };
    let est = estimate_vn_quadratic_oracle(&prob, 2.0, 0.0, &zero(), &grid, &opts).unwrap();
    let se = est.mc_standard_error;
    assert!(se > 0.0 && se < 0.01);
    assert!((est.value.to_f64() - closed).abs() < 3.0 * se, "{} ± {se}", est.value);
}

#[test]
fn drifted_oracle_stays_unbiased_at_large_n() {
    let prob = problem("quadratic", "endpoint_quadratic:1");
    let x0 = zero();
    let (_, minimizer) = solve_doc(&prob, 0.0, &x0, 8, &DocOptions::default()).unwrap();
    let grid = TimeGrid::uniform(0.0, 1.0, 8).unwrap();
    for n in [16.0, 256.0] {
        let opts = OracleOptions {
            samples: 20_000,
            seed: 9,
            drift: Some(minimizer.clone()),
            ..OracleOptions::default()
        };
        let est = estimate_vn_quadratic_oracle(&prob, n, 0.0, &x0, &grid, &opts).unwrap();
        let exact = lq_quadrature(n, 0.0, 1.0, 1.0);
        assert!((exact - (1.0 / 3.0 + 3f64.ln() / (2.0 * n))).abs() < 1e-9, "{exact}");
        let se = est.mc_standard_error;
        assert!((est.value.to_f64() - exact).abs() < 3.0 * se.max(1e-6), "n={n}: {} ± {se} vs {exact}", est.value);
    }
}

#[test]
fn oracle_rejects_other_running_costs() {
    let prob = problem("power:1.5", "zero");
    let grid = TimeGrid::uniform(0.0, 1.0, 4).unwrap();
    assert!(matches!(
        estimate_vn_quadratic_oracle(&prob, 1.0, 0.0, &zero(), &grid, &OracleOptions::default()),
        Err(Error::Unsupported(_))
    ));
}

#[test]
fn oracle_is_deterministic_per_seed() {
    let prob = problem("quadratic", "tanh_max");
    let grid = TimeGrid::uniform(0.0, 1.0, 6).unwrap();
    let opts = OracleOptions {
        samples: 10_000,
        seed: 5,
        ..OracleOptions::default()
    };
    let a = estimate_vn_quadratic_oracle(&prob, 4.0, 0.0, &zero(), &grid, &opts).unwrap();
    let b = estimate_vn_quadratic_oracle(&prob, 4.0, 0.0, &zero(), &grid, &opts).unwrap();
    assert_eq!(a, b);
}

#[test]
fn tree_agrees_with_oracle_on_path_dependent_cost() {
    let prob = problem("quadratic", "tanh_max");
    let grid = TimeGrid::uniform(0.0, 1.0, 6).unwrap();
    for n in [1.0, 4.0] {
        let tree = solve_soc_tree(&prob, 0.0, &zero(), n, &LatticeSpec::new(6, ControlGrid::auto())).unwrap();
        let opts = OracleOptions {
            samples: 100_000,
            seed: 1,
            ..OracleOptions::default()
        };
        let oracle = estimate_vn_quadratic_oracle(&prob, n, 0.0, &zero(), &grid, &opts).unwrap();
        let gap = (tree.value - oracle.value.to_f64()).abs();
        assert!(gap <= 3.0 * oracle.mc_standard_error + 0.05, "n={n}: tree {} oracle {}", tree.value, oracle.value);
        assert!(tree.within_bounds());
    }
}

#[test]
fn enlarging_the_control_grid_never_increases_the_value() {
    let prob = problem("power:1.5", "tanh_max");
    let small = solve_soc_tree(&prob, 0.0, &zero(), 2.0, &LatticeSpec::new(4, ControlGrid::scalar(&[-1.0, 0.0, 1.0]))).unwrap();
    let large = solve_soc_tree(
        &prob,
        0.0,
        &zero(),
        2.0,
        &LatticeSpec::new(4, ControlGrid::scalar(&[-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0])),
    )
    .unwrap();
    assert!(large.value <= small.value);
    assert!(small.within_bounds() && large.within_bounds());
}

#[test]
fn node_budget_is_enforced() {
    let prob = problem("quadratic", "tanh_max");
    let spec = LatticeSpec {
        node_budget: 1000,
        ..LatticeSpec::new(6, ControlGrid::symmetric(1.0, 3))
    };
    match solve_soc_tree(&prob, 0.0, &zero(), 1.0, &spec) {
        Err(Error::NodeBudget { required, budget }) => {
            assert_eq!(required, 14u128.pow(6));
            assert_eq!(budget, 1000);
        }
        other => panic!("expected budget error, got {other:?}"),
    }
    let no_zero = LatticeSpec::new(2, ControlGrid::scalar(&[-1.0, 1.0]));
    assert!(matches!(solve_soc_tree(&prob, 0.0, &zero(), 1.0, &no_zero), Err(Error::Precondition(_))));
}

#[test]
fn step_doubling_changes_little_on_smooth_costs() {
    let prob = problem("quadratic", "tanh_endpoint");
    let grid = ControlGrid::symmetric(1.0, 2);
    let coarse = solve_soc_tree(&prob, 0.0, &zero(), 1.0, &LatticeSpec::new(3, grid.clone())).unwrap();
    let fine = solve_soc_tree(&prob, 0.0, &zero(), 1.0, &LatticeSpec::new(6, grid)).unwrap();
    assert!((coarse.value - fine.value).abs() < 0.05, "{} vs {}", coarse.value, fine.value);
}

#[test]
fn tree_results_are_deterministic() {
    let prob = problem("quadratic", "tanh_max");
    let spec = LatticeSpec::new(5, ControlGrid::auto());
    let a = solve_soc_tree(&prob, 0.2, &zero(), 2.0, &spec).unwrap();
    let b = solve_soc_tree(&prob, 0.2, &zero(), 2.0, &spec).unwrap();
    assert_eq!(a, b);
}

#[test]
fn rescaling_identity() {
    let l = Lagrangian::quadratic(1, 1.0).unwrap();
    let h = TerminalCost::from_name("tanh_endpoint", 1).unwrap();
    let spec = LatticeSpec::new(4, ControlGrid::symmetric(1.0, 3));
    let x0 = DiscretePath::from_fn(TimeGrid::uniform(0.0, 1.0, 4).unwrap(), 1, |t, o| o[0] = 0.3 * t).unwrap();

    let at0 = check_rescaling_identity(&l, &h, 0.0, &DiscretePath::zero(1.0, 1).unwrap(), &spec).unwrap();
    assert!(at0.gap < 1e-12, "{at0:?}");

    let at1 = check_rescaling_identity(&l, &h, 1.0, &x0, &spec).unwrap();
    assert_eq!(at1.left, 0.3f64.tanh());
    assert_eq!(at1.right, 0.3f64.tanh());
    assert!(at1.gap < 1e-12);

    let mid = check_rescaling_identity(&l, &h, 0.5, &x0, &spec).unwrap();
    assert!(mid.gap < 0.02, "{mid:?}");

    let power = Lagrangian::power(1.5, 1, 1.0).unwrap();
    let mid = check_rescaling_identity(&power, &TerminalCost::from_name("tanh_max", 1).unwrap(), 0.5, &x0, &spec).unwrap();
    assert!(mid.gap < 0.02, "{mid:?}");
}
