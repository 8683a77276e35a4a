use pdhjb::bolza::{BolzaProblem, DocOptions, TerminalCost};
use pdhjb::dini::{
    check_minimax_sub, check_minimax_super, check_subsolution_soc, lower_dini, stochastic_upper_dini, upper_dini,
    Analytic, BolzaValue, DiniSchedule, Noise, PathFunctional, SampleSpace, Shifted, SocCheckOptions, SocSample,
    SocValue, StochasticDiniOptions, SubSample, SuperCheckOptions,
};
use pdhjb::paths::Control;
use pdhjb::stochastic::ControlGrid;
use pdhjb::{DiscretePath, Error, ExtendedReal, Lagrangian, TimeGrid};
use proptest::prelude::*;

fn line(slope: f64, offset: f64) -> DiscretePath {
    DiscretePath::from_fn(TimeGrid::uniform(0.0, 1.0, 8).unwrap(), 1, |t, o| o[0] = offset + slope * t).unwrap()
}

fn endpoint_affine() -> Analytic {
    Analytic::new(1.0, 1, |t, x| ExtendedReal::Finite(t + x.at(t)[0]))
}

fn problem(l: &str, h: &str) -> BolzaProblem {
    BolzaProblem::new(
        Lagrangian::from_name(l, 1, 1.0).unwrap(),
        TerminalCost::from_name(h, 1).unwrap(),
    )
}

#[test]
fn affine_functional_has_exact_quotients() {
    let u = endpoint_affine();
    let s = DiniSchedule::default();
    for a in [-2.0, 0.0, 0.7] {
        let lo = lower_dini(&u, 0.3, &line(0.4, 1.0), &[a], &s).unwrap();
        let up = upper_dini(&u, 0.3, &line(0.4, 1.0), &[a], &s).unwrap();
        for (_, q) in lo.quotients.iter().chain(&up.quotients) {
            // cancellation in u(t0+δ) − u(t0) costs ~ε|u|/δ
            assert!((q.to_f64() - (1.0 + a)).abs() < 1e-10, "{q}");
        }
        assert!(!lo.diverged && !up.diverged);
        assert_eq!(lo.quotients.len(), 11);
    }
    let st = stochastic_upper_dini(&u, 0.3, &line(0.4, 1.0), &[0.5], 3.0, &s, &StochasticDiniOptions::default()).unwrap();
    // the mean of 1000 pair averages adds summation rounding, again over δ
    for (_, q) in &st.quotients {
        assert!((q.to_f64() - 1.5).abs() < 1e-8, "{q}");
    }
}

#[test]
fn squared_endpoint_follows_the_chain_rule() {
    let u = Analytic::new(1.0, 1, |t, x| ExtendedReal::Finite(x.at(t)[0].powi(2)));
    let x0 = DiscretePath::constant(TimeGrid::uniform(0.0, 1.0, 4).unwrap(), &[2.0]).unwrap();
    let s = DiniSchedule::default();
    let lo = lower_dini(&u, 0.25, &x0, &[1.0], &s).unwrap();
    // quotient is 4 + δ exactly
    for (d, q) in &lo.quotients {
        assert!((q.to_f64() - (4.0 + d)).abs() < 1e-9);
    }
    assert!((lo.extrapolated.unwrap() - 4.0).abs() < 1e-3);
}

#[test]
fn positive_part_has_one_sided_derivatives() {
    let u = Analytic::new(1.0, 1, |t, x| ExtendedReal::Finite(x.at(t)[0].max(0.0)));
    let x0 = line(0.0, 0.0);
    let s = DiniSchedule::default();
    for (a, expected) in [(1.0, 1.0), (-1.0, 0.0)] {
        let lo = lower_dini(&u, 0.5, &x0, &[a], &s).unwrap();
        let up = upper_dini(&u, 0.5, &x0, &[a], &s).unwrap();
        assert!((lo.extrapolated.unwrap() - expected).abs() < 1e-12);
        assert!((up.extrapolated.unwrap() - expected).abs() < 1e-12);
    }
}

#[test]
fn infinite_base_value_is_a_domain_error() {
    let u = Analytic::new(1.0, 1, |_, _| ExtendedReal::Infinity);
    assert!(matches!(
        lower_dini(&u, 0.2, &line(0.0, 0.0), &[1.0], &DiniSchedule::default()),
        Err(Error::Domain { .. })
    ));
}

#[test]
fn schedules_are_validated() {
    let u = endpoint_affine();
    let bad = DiniSchedule {
        deltas: vec![0.1, 0.2],
        tail: 1,
        growth: 4.0,
    };
    assert!(lower_dini(&u, 0.2, &line(0.0, 0.0), &[1.0], &bad).is_err());
    // near the horizon only the steps 0.1·2^-k ≤ 0.01 (k ≥ 4) fit
    let s = DiniSchedule::default();
    let short = lower_dini(&u, 0.99, &line(0.0, 0.0), &[1.0], &s).unwrap();
    assert_eq!(short.quotients.len(), 7);
    assert!(lower_dini(&u, 0.9999, &line(0.0, 0.0), &[1.0], &s).is_err());
}

#[test]
fn constrained_value_diverges_in_every_direction() {
    let prob = problem("power:1.5", "sqrt_target");
    let u = BolzaValue::new(prob, 64, DocOptions::default()).unwrap();
    let x0 = DiscretePath::from_fn(TimeGrid::uniform(0.0, 1.0, 16).unwrap(), 1, |t, o| o[0] = t.sqrt()).unwrap();
    let base = u.eval(0.25, &x0).unwrap();
    assert!(base.is_finite());
    for a in [-2.0, -1.0, 0.0, 0.5, 1.0, 2.0] {
        let est = lower_dini(&u, 0.25, &x0, &[a], &DiniSchedule::default()).unwrap();
        assert!(est.diverged, "a = {a}: {est:?}");
        assert!(est.extrapolated.is_none());
    }
}

#[test]
fn stochastic_quotient_of_squared_endpoint() {
    let u = Analytic::new(1.0, 1, |t, x| ExtendedReal::Finite(x.at(t)[0].powi(2)));
    let s = DiniSchedule::default();
    for (x_star, a, n) in [(0.5, 1.0, 2.0), (-1.0, 0.3, 8.0), (0.0, 0.0, 1.0)] {
        let x0 = line(0.0, x_star);
        let opts = StochasticDiniOptions {
            samples: 4000,
            seed: 17,
            antithetic: true,
        };
        let est = stochastic_upper_dini(&u, 0.4, &x0, &[a], n, &s, &opts).unwrap();
        // E(x* + aδ + Z)² = x*² + 2x*aδ + a²δ² + δ/n
        for (i, (d, q)) in est.quotients.iter().enumerate() {
            let exact = 2.0 * x_star * a + a * a * d + 1.0 / n;
            assert!((q.to_f64() - exact).abs() < 3.0 * est.standard_errors[i] + 1e-12, "δ={d}: {q} vs {exact}");
        }
        let tail_delta = s.deltas[s.deltas.len() - s.tail];
        let limit = 2.0 * x_star * a + 1.0 / n;
        let se = est.standard_errors.iter().copied().fold(0.0, f64::max);
        assert!((est.extrapolated.unwrap() - limit).abs() < 3.0 * se + a * a * tail_delta);
        assert!(!est.inconclusive);
    }
}

#[test]
fn stochastic_quotient_of_time_and_linear_endpoint() {
    let s = DiniSchedule::default();
    let opts = StochasticDiniOptions::default();
    let time = Analytic::new(1.0, 1, |t, _| ExtendedReal::Finite(t));
    let est = stochastic_upper_dini(&time, 0.1, &line(1.0, 0.0), &[3.0], 4.0, &s, &opts).unwrap();
    for (i, (_, q)) in est.quotients.iter().enumerate() {
        assert!((q.to_f64() - 1.0).abs() < 1e-9);
        assert!(est.standard_errors[i] < 1e-12);
    }
    let c = 2.5;
    let linear = Analytic::new(1.0, 1, move |t, x| ExtendedReal::Finite(c * x.at(t)[0]));
    let plain = StochasticDiniOptions {
        antithetic: false,
        samples: 5000,
        ..opts
    };
    let est = stochastic_upper_dini(&linear, 0.1, &line(1.0, 0.0), &[-0.4], 4.0, &s, &plain).unwrap();
    for (i, (_, q)) in est.quotients.iter().enumerate() {
        assert!((q.to_f64() + 0.4 * c).abs() < 3.0 * est.standard_errors[i], "{q}");
    }
}

#[test]
fn inconclusive_flag_tracks_noise_dominance() {
    let u = Analytic::new(1.0, 1, |t, x| ExtendedReal::Finite(x.at(t)[0]));
    let s = DiniSchedule::default();
    let mut seen = [false, false];
    for seed in 0..20 {
        let opts = StochasticDiniOptions {
            samples: 8,
            seed,
            antithetic: false,
        };
        let est = stochastic_upper_dini(&u, 0.0, &line(0.0, 0.0), &[0.0], 1.0, &s, &opts).unwrap();
        let (_, q0) = est.quotients[0];
        assert_eq!(est.inconclusive, est.standard_errors[0] > q0.to_f64().abs());
        seen[est.inconclusive as usize] = true;
    }
    assert!(seen[0] && seen[1]);
}

fn arb_functional() -> impl Strategy<Value = (f64, f64, f64)> {
    (-2.0..2.0f64, -2.0..2.0f64, 0.0..3.0f64)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]
    #[test]
    fn lower_never_exceeds_upper((c1, c2, c3) in arb_functional(), t0 in 0.0..0.85f64, a in -3.0..3.0f64, x in -1.0..1.0f64) {
        let u = Analytic::new(1.0, 1, move |t, w| {
            let e = w.at(t)[0];
            ExtendedReal::Finite(c1 * (c3 * e).sin() + c2 * t * e.abs())
        });
        let s = DiniSchedule::default();
        let lo = lower_dini(&u, t0, &line(0.3, x), &[a], &s).unwrap();
        let up = upper_dini(&u, t0, &line(0.3, x), &[a], &s).unwrap();
        prop_assert_eq!(lo.diverged, up.diverged);
        if let (Some(l), Some(h)) = (lo.extrapolated, up.extrapolated) {
            prop_assert!(l <= h);
        }
    }
}

fn soc_value() -> SocValue {
    SocValue::new(problem("quadratic", "tanh_max"), 4.0, 4, ControlGrid::symmetric(2.0, 6)).unwrap()
}

#[test]
fn computed_stochastic_value_is_a_subsolution() {
    let v = soc_value();
    let space = SampleSpace::new(1.0, 1, 4);
    let samples = space.soc_samples(50, 3).unwrap();
    let zero = DiscretePath::zero(1.0, 1).unwrap();
    let coarse = SocValue::new(problem("quadratic", "tanh_max"), 4.0, 2, ControlGrid::symmetric(2.0, 6)).unwrap();
    let allowance = (v.eval(0.0, &zero).unwrap().to_f64() - coarse.eval(0.0, &zero).unwrap().to_f64()).abs();
    let opts = SocCheckOptions {
        tolerance: allowance,
        ..SocCheckOptions::default()
    };
    let report = check_subsolution_soc(&v, v.problem(), 4.0, &samples, &opts).unwrap();
    assert!(report.passed(), "allowance {allowance}, max excess {}", report.max_excess());
    assert_eq!(report.entries.len(), 100);

    let shifted = Shifted::new(&v, 0.1);
    let report = check_subsolution_soc(&shifted, v.problem(), 4.0, &samples, &opts).unwrap();
    let terminal: Vec<_> = report.entries.iter().filter(|e| e.terminal).collect();
    assert!(terminal.iter().all(|e| e.violation));
    assert!(report.entries.iter().filter(|e| !e.terminal).all(|e| !e.violation));

    let floor = Analytic::constant(1.0, 1, -1.0);
    let report = check_subsolution_soc(&floor, v.problem(), 4.0, &samples, &opts).unwrap();
    assert!(report.passed());
}

#[test]
fn tree_recursion_is_tight_at_the_optimal_first_control() {
    let v = soc_value();
    let x0 = line(0.5, -0.2);
    for t0 in [0.0, 0.25, 0.5] {
        let root = v.result(t0, &x0).unwrap();
        let sample = SocSample {
            t0,
            x0: x0.clone(),
            t: t0 + 0.25,
            control: root.root_control.clone(),
        };
        let opts = SocCheckOptions {
            noise: Noise::TwoPoint,
            ..SocCheckOptions::default()
        };
        let report = check_subsolution_soc(&v, v.problem(), 4.0, &[sample], &opts).unwrap();
        let slack = report.entries[0].slack.unwrap();
        assert!(slack.abs() < 1e-12, "t0={t0}: slack {slack}");
    }
}

fn lq_value() -> BolzaValue {
    let opts = DocOptions {
        restarts: 4,
        ..DocOptions::default()
    };
    BolzaValue::new(problem("quadratic", "endpoint_quadratic:1"), 64, opts).unwrap()
}

#[test]
fn computed_deterministic_value_is_a_minimax_solution() {
    let v = lq_value();
    let space = SampleSpace::new(1.0, 1, 8);
    let supers = space.super_samples(100, 5).unwrap();
    let report = check_minimax_super(&v, v.problem(), &supers, &SuperCheckOptions::default()).unwrap();
    assert!(report.passed(), "{:?}", report.entries.iter().find(|e| e.violation || e.error.is_some()));
    assert!(report.entries.iter().filter(|e| !e.terminal).all(|e| e.note.as_deref() == Some("witness")));

    let subs = space.sub_samples(100, 6).unwrap();
    let report = check_minimax_sub(&v, v.problem(), &subs, 1e-6).unwrap();
    assert!(report.passed(), "max excess {}", report.max_excess());

    // fault injection
    let up = Shifted::new(&v, 0.1);
    let report = check_minimax_sub(&up, v.problem(), &subs, 1e-6).unwrap();
    assert_eq!(report.violations, 100);
    assert!(report.entries.iter().filter(|e| e.violation).all(|e| e.terminal));
    let down = Shifted::new(&v, -0.1);
    let report = check_minimax_super(&down, v.problem(), &supers, &SuperCheckOptions::default()).unwrap();
    assert_eq!(report.violations, 100);
    assert!(report.entries.iter().filter(|e| e.violation).all(|e| e.terminal));
}

#[test]
fn minimizer_continuation_is_tight() {
    let v = lq_value();
    let x0 = line(-0.5, 0.2);
    let t0 = 0.25;
    let (est, minimizer) = v.estimate(t0, &x0).unwrap();
    for t in [0.5, 0.75, 1.0] {
        let nodes: Vec<f64> = minimizer.times().iter().copied().filter(|s| *s >= t0 - 1e-12 && *s <= t + 1e-12).collect();
        let slopes: Vec<f64> = nodes
            .windows(2)
            .map(|w| (minimizer.at(w[1])[0] - minimizer.at(w[0])[0]) / (w[1] - w[0]))
            .collect();
        let sample = SubSample {
            t0,
            x0: x0.clone(),
            t,
            continuation: Control::piecewise(TimeGrid::new(nodes).unwrap(), 1, slopes).unwrap(),
        };
        let report = check_minimax_sub(&v, v.problem(), &[sample], 0.0).unwrap();
        let slack = report.entries[0].slack.unwrap();
        assert!(slack.abs() <= 2.0 * est.discretization_allowance + 1e-8, "t={t}: {slack}");
    }
}

#[test]
fn trivial_candidates() {
    let bounded = problem("quadratic", "tanh_endpoint");
    let space = SampleSpace::new(1.0, 1, 4);
    let ceiling = Analytic::constant(1.0, 1, 1.0);
    let report =
        check_minimax_super(&ceiling, &bounded, &space.super_samples(20, 1).unwrap(), &SuperCheckOptions::default())
            .unwrap();
    assert!(report.passed());
    assert!(report.entries.iter().filter(|e| !e.terminal).all(|e| e.note.as_deref() == Some("zero_velocity")));

    let nonneg = problem("quadratic", "endpoint_quadratic:1");
    let zero = Analytic::constant(1.0, 1, 0.0);
    let report = check_minimax_sub(&zero, &nonneg, &space.sub_samples(20, 2).unwrap(), 0.0).unwrap();
    assert!(report.passed());
}

#[test]
fn supersolution_search_finds_a_witness_for_analytic_candidates() {
    // exact value of the quadratic endpoint problem: (x(t) − 1)²/(1 + 2(1 − t))
    let prob = problem("quadratic", "endpoint_quadratic:1");
    let exact = Analytic::new(1.0, 1, |t, x| {
        ExtendedReal::Finite((x.at(t)[0] - 1.0).powi(2) / (1.0 + 2.0 * (1.0 - t)))
    });
    let samples = SampleSpace::new(1.0, 1, 4).super_samples(10, 9).unwrap();
    let opts = SuperCheckOptions {
        tolerance: 1e-5,
        ..SuperCheckOptions::default()
    };
    let report = check_minimax_super(&exact, &prob, &samples, &opts).unwrap();
    assert!(report.passed(), "{:?}", report.entries.iter().find(|e| e.violation));
    assert!(report.entries.iter().any(|e| e.note.as_deref() == Some("search")));
}

#[test]
fn bolza_value_cache_is_exact() {
    let v = lq_value();
    let x0 = line(0.1, 0.0);
    let a = v.eval(0.5, &x0).unwrap();
    let before = v.cached_solves();
    let b = v.eval(0.5, &x0).unwrap();
    assert_eq!(a, b);
    assert_eq!(v.cached_solves(), before);
    v.eval(0.5, &line(0.1, 1e-15)).unwrap();
    assert_eq!(v.cached_solves(), before + 1);
}
