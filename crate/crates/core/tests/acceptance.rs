//! Acceptance criteria, one line each. Runs without the libtest harness so
//! the summary is always printed; exits non-zero if any criterion fails.

use std::time::Instant;

use pdhjb::bolza::{dpp_residuals, solve_doc, solve_doc_constrained, BolzaProblem, DocOptions, TerminalCost};
use pdhjb::dini::{
    lower_dini, stochastic_upper_dini, upper_dini, Analytic, BolzaValue, DiniSchedule, PathFunctional,
    StochasticDiniOptions,
};
use pdhjb::harness::{brute_force_hamiltonian, run_convergence, run_verify, CheckStatus, ExperimentConfig};
use pdhjb::lagrangian::{hamiltonian, HamiltonianOptions, LagrangianFlags};
use pdhjb::paths::{concat_scaled, dinf_distance, rescale_path, GridSpec};
use pdhjb::stochastic::{
    check_rescaling_identity, estimate_vn_quadratic_oracle, solve_soc_tree, ControlGrid, LatticeSpec, OracleOptions,
    SocResult,
};
use pdhjb::{DiscretePath, ExtendedReal, Lagrangian, TimeGrid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn e<E: std::fmt::Display>(err: E) -> String {
    err.to_string()
}

fn problem(l: &str, h: &str) -> BolzaProblem {
    BolzaProblem::new(
        Lagrangian::from_name(l, 1, 1.0).unwrap(),
        TerminalCost::from_name(h, 1).unwrap(),
    )
}

fn zero() -> DiscretePath {
    DiscretePath::zero(1.0, 1).unwrap()
}

fn sqrt_prefix(t0: f64) -> DiscretePath {
    DiscretePath::from_fn(TimeGrid::geometric(0.0, t0, 200, 1.05).unwrap(), 1, |t, o| o[0] = t.sqrt()).unwrap()
}

fn example_value() -> Outcome {
    let t0: f64 = 0.0625;
    let exact = 2f64.sqrt() * (1.0 - t0.powf(0.25));
    ensure((exact - 0.7071068).abs() < 1e-7, || format!("closed form {exact}"))?;
    let prob = problem("power:1.5", "sqrt_target");
    let fine = DocOptions {
        grid: GridSpec::Geometric { ratio: 1.0002 },
        ..DocOptions::default()
    };
    let (short, _) = solve_doc_constrained(&prob, t0, &sqrt_prefix(t0), 10_000, &fine).map_err(e)?;
    let short_err = (short.value.to_f64() - exact).abs();
    ensure(short.metadata.method == "singleton_target" && short_err < 1e-3, || {
        format!("singleton path {} ({})", short.value, short.metadata.method)
    })?;
    let penalty_opts = DocOptions {
        singleton_short_circuit: false,
        restarts: 4,
        ..DocOptions::default()
    };
    let (pen, _) = solve_doc_constrained(&prob, t0, &sqrt_prefix(t0), 64, &penalty_opts).map_err(e)?;
    let rel = ((pen.value.to_f64() - exact) / exact).abs();
    ensure(pen.metadata.method == "penalty" && rel < 0.02, || format!("penalty path {} rel {rel}", pen.value))?;
    let bent = DiscretePath::from_fn(TimeGrid::uniform(0.0, t0, 4).unwrap(), 1, |t, o| o[0] = t.sqrt() + t).unwrap();
    let (off, _) = solve_doc_constrained(&prob, t0, &bent, 100, &DocOptions::default()).map_err(e)?;
    ensure(off.value == ExtendedReal::Infinity, || format!("infeasible prefix gave {}", off.value))?;
    Ok(format!("singleton err {short_err:.1e}, penalty rel err {rel:.1e}, infeasible = +inf"))
}

fn legendre() -> Outcome {
    let q = Lagrangian::quadratic(1, 1.0).unwrap();
    let pw = Lagrangian::power(1.5, 1, 1.0).unwrap();
    let numeric = HamiltonianOptions {
        force_numeric: true,
        ..HamiltonianOptions::default()
    };
    let mut worst = [0.0f64; 4];
    for k in -5..=5 {
        let p = k as f64;
        let hq = hamiltonian(&q, 0.0, &[p], &HamiltonianOptions::default()).map_err(e)?;
        let hp = hamiltonian(&pw, 0.0, &[p], &HamiltonianOptions::default()).map_err(e)?;
        let hpn = hamiltonian(&pw, 0.0, &[p], &numeric).map_err(e)?;
        let eq = -p * p / 2.0;
        let ep = -4.0 / 27.0 * p.abs().powi(3);
        worst[0] = worst[0].max((hq - eq).abs());
        worst[1] = worst[1].max((hp - ep).abs().max((hpn - ep).abs()));
        worst[2] = worst[2].max((brute_force_hamiltonian(&q, 0.0, p, 50.0).map_err(e)? - eq).abs());
        worst[3] = worst[3].max((brute_force_hamiltonian(&pw, 0.0, p, 50.0).map_err(e)? - ep).abs());
    }
    ensure(worst[0] <= 1e-9, || format!("quadratic error {:e}", worst[0]))?;
    ensure(worst[1] <= 1e-6, || format!("power-3/2 error {:e}", worst[1]))?;
    ensure(worst[2] <= 1e-6 && worst[3] <= 1e-6, || format!("grid oracle errors {:e} {:e}", worst[2], worst[3]))?;
    Ok(format!(
        "max errors: quadratic {:.1e}, power {:.1e}, grid {:.1e}",
        worst[0],
        worst[1],
        worst[2].max(worst[3])
    ))
}

fn lq_chain(tree_outputs: &mut Vec<SocResult>) -> Outcome {
    let prob = problem("quadratic", "endpoint_quadratic:1");
    let opts = DocOptions::default();
    let mut worst_v0 = 0.0f64;
    for (t0, x_star) in [(0.0, 0.0), (0.5, 0.4)] {
        let x0 = DiscretePath::constant(TimeGrid::uniform(0.0, 1.0, 8).unwrap(), &[x_star]).unwrap();
        let cells = if t0 == 0.0 { 64 } else { 32 };
        let (est, _) = solve_doc(&prob, t0, &x0, cells, &opts).map_err(e)?;
        let exact = (1.0 - x_star).powi(2) / (1.0 + 2.0 * (1.0 - t0));
        worst_v0 = worst_v0.max((est.value.to_f64() - exact).abs());
    }
    ensure(worst_v0 < 1e-4, || format!("v0 error {worst_v0:e}"))?;

    let grid = TimeGrid::uniform(0.0, 1.0, 64).unwrap();
    let mut worst_z = 0.0f64;
    for n in [1.0, 2.0, 4.0] {
        let o = OracleOptions {
            samples: 100_000,
            seed: 11,
            ..OracleOptions::default()
        };
        let est = estimate_vn_quadratic_oracle(&prob, n, 0.0, &zero(), &grid, &o).map_err(e)?;
        let exact = 1.0 / 3.0 + 3f64.ln() / (2.0 * n);
        let z = (est.value.to_f64() - exact).abs() / est.mc_standard_error;
        ensure(z <= 3.0, || format!("n = {n}: oracle {} vs {exact} ({z:.2} SE)", est.value))?;
        worst_z = worst_z.max(z);
    }
    tree_outputs.push(solve_soc_tree(&prob, 0.0, &zero(), 2.0, &LatticeSpec::new(5, ControlGrid::auto())).map_err(e)?);

    let cfg = ExperimentConfig::from_toml_str(
        "[problem]\nlagrangian = \"quadratic\"\nterminal = \"endpoint_quadratic:1\"\n[solver]\nrestarts = 4\nsamples = 100000\n",
        ".",
    )
    .map_err(e)?;
    let table = run_convergence(&cfg).map_err(e)?;
    let mut worst_gap = 0.0f64;
    for r in &table.rows {
        let expected = 3f64.ln() / (2.0 * r.n);
        let gap = r.gap.ok_or_else(|| format!("row n = {} failed: {:?}", r.n, r.failure))?;
        let tol = (3.0 * r.vn_se).max(0.01);
        ensure((gap - expected).abs() <= tol, || format!("n = {}: gap {gap} vs {expected}", r.n))?;
        worst_gap = worst_gap.max((gap - expected).abs());
    }
    ensure(table.rows.iter().any(|r| r.n == 256.0), || "schedule misses n = 256".into())?;
    Ok(format!(
        "v0 err {worst_v0:.1e}, oracle within {worst_z:.2} SE, gap err {worst_gap:.1e} up to n = 256"
    ))
}

fn tree_oracle(tree_outputs: &mut Vec<SocResult>) -> Outcome {
    let prob = problem("quadratic", "tanh_max");
    let grid = TimeGrid::uniform(0.0, 1.0, 6).unwrap();
    let mut detail = Vec::new();
    for n in [1.0, 4.0] {
        let tree = solve_soc_tree(&prob, 0.0, &zero(), n, &LatticeSpec::new(6, ControlGrid::auto())).map_err(e)?;
        let o = OracleOptions {
            samples: 100_000,
            seed: 1,
            ..OracleOptions::default()
        };
        let oracle = estimate_vn_quadratic_oracle(&prob, n, 0.0, &zero(), &grid, &o).map_err(e)?;
        let gap = (tree.value - oracle.value.to_f64()).abs();
        let bound = 3.0 * oracle.mc_standard_error + 0.05;
        ensure(gap <= bound, || format!("n = {n}: tree {} oracle {} gap {gap}", tree.value, oracle.value))?;
        detail.push(format!("n = {n}: gap {gap:.4} ≤ {bound:.4}"));
        tree_outputs.push(tree);
    }
    Ok(detail.join(", "))
}

fn rescaling() -> Outcome {
    let l = Lagrangian::quadratic(1, 1.0).unwrap();
    let h = TerminalCost::from_name("tanh_endpoint", 1).unwrap();
    let spec = LatticeSpec::new(4, ControlGrid::symmetric(1.0, 3));
    let x0 = DiscretePath::from_fn(TimeGrid::uniform(0.0, 1.0, 4).unwrap(), 1, |t, o| o[0] = 0.3 * t).unwrap();
    let g0 = check_rescaling_identity(&l, &h, 0.0, &zero(), &spec).map_err(e)?.gap;
    let g1 = check_rescaling_identity(&l, &h, 1.0, &x0, &spec).map_err(e)?.gap;
    let gm = check_rescaling_identity(&l, &h, 0.5, &x0, &spec).map_err(e)?.gap;
    ensure(g0 < 1e-12 && g1 < 1e-12, || format!("endpoint gaps {g0:e} {g1:e}"))?;
    ensure(gm < 0.02, || format!("midpoint gap {gm}"))?;
    Ok(format!("gaps t0=0: {g0:.1e}, t0=1: {g1:.1e}, t0=0.5: {gm:.1e}"))
}

fn characterizations() -> Outcome {
    let base = "[problem]\nlagrangian = \"quadratic\"\nterminal = \"tanh_endpoint\"\n[solver]\nrestarts = 4\n";
    let cfg = ExperimentConfig::from_toml_str(base, ".").map_err(e)?;
    let good = run_verify(&cfg).map_err(e)?;
    for (name, s) in good.statuses() {
        ensure(matches!(s, CheckStatus::Pass | CheckStatus::Informational), || format!("{name}: {s:?}"))?;
    }
    let interior = |o: &pdhjb::harness::Outcome<pdhjb::dini::CheckReport>| {
        o.detail.as_ref().map_or(0, |r| r.entries.iter().filter(|e| !e.terminal).count())
    };
    ensure(interior(&good.subsolution_soc) == 50, || "expected 50 subsolution samples".into())?;
    ensure(interior(&good.minimax_super) == 100 && interior(&good.minimax_sub) == 100, || {
        "expected 100 minimax samples".into()
    })?;

    // DPP along the minimizer of the LQ instance, at twice the allowance.
    let prob = problem("quadratic", "endpoint_quadratic:1");
    let opts = DocOptions::default();
    let (est, path) = solve_doc(&prob, 0.0, &zero(), 64, &opts).map_err(e)?;
    let checkpoints: Vec<f64> = (0..=8).map(|k| k as f64 / 8.0).collect();
    let res = dpp_residuals(&prob, 0.0, &est, &path, &checkpoints, 64, &opts).map_err(e)?;
    let allowance = est.discretization_allowance + est.penalty_gap;
    let worst = res.iter().map(|r| r.residual).fold(0.0, f64::max);
    ensure(worst <= 2.0 * allowance + 1e-8, || format!("DPP residual {worst:e} vs allowance {allowance:e}"))?;

    let bad_cfg = ExperimentConfig::from_toml_str(&format!("{base}[verify]\noffset = 0.1\n"), ".").map_err(e)?;
    let bad = run_verify(&bad_cfg).map_err(e)?;
    let violations = bad.minimax_sub.detail.as_ref().map_or(0, |r| r.violations)
        + bad.subsolution_soc.detail.as_ref().map_or(0, |r| r.violations);
    ensure(!bad.passed && violations > 0, || "fault injection went undetected".into())?;
    Ok(format!(
        "all checks pass; DPP {worst:.1e} ≤ 2·{allowance:.1e}; +0.1 shift gives {violations} violations"
    ))
}

fn dini_suite() -> Outcome {
    let s = DiniSchedule::default();
    let line = DiscretePath::from_fn(TimeGrid::uniform(0.0, 1.0, 8).unwrap(), 1, |t, o| o[0] = 1.0 + 0.4 * t).unwrap();
    let affine = Analytic::new(1.0, 1, |t, x| ExtendedReal::Finite(t + x.at(t)[0]));
    for a in [-2.0, 0.0, 0.7] {
        let lo = lower_dini(&affine, 0.3, &line, &[a], &s).map_err(e)?;
        let up = upper_dini(&affine, 0.3, &line, &[a], &s).map_err(e)?;
        for (_, q) in lo.quotients.iter().chain(&up.quotients) {
            ensure((q.to_f64() - (1.0 + a)).abs() < 1e-10, || format!("affine quotient {q} for a = {a}"))?;
        }
    }
    let square = Analytic::new(1.0, 1, |t, x| ExtendedReal::Finite(x.at(t)[0].powi(2)));
    let c2 = DiscretePath::constant(TimeGrid::uniform(0.0, 1.0, 4).unwrap(), &[2.0]).unwrap();
    let lo = lower_dini(&square, 0.25, &c2, &[1.0], &s).map_err(e)?;
    for (d, q) in &lo.quotients {
        ensure((q.to_f64() - (4.0 + d)).abs() < 1e-9, || format!("quadratic quotient {q} at δ = {d}"))?;
    }
    let opts = StochasticDiniOptions {
        samples: 4000,
        seed: 17,
        antithetic: true,
    };
    let x0 = DiscretePath::constant(TimeGrid::uniform(0.0, 1.0, 4).unwrap(), &[0.5]).unwrap();
    let st = stochastic_upper_dini(&square, 0.4, &x0, &[1.0], 2.0, &s, &opts).map_err(e)?;
    for (i, (d, q)) in st.quotients.iter().enumerate() {
        let exact = 2.0 * 0.5 + d + 0.5;
        ensure((q.to_f64() - exact).abs() < 3.0 * st.standard_errors[i] + 1e-12, || {
            format!("stochastic quotient {q} vs {exact} at δ = {d}")
        })?;
    }

    let u = BolzaValue::new(problem("power:1.5", "sqrt_target"), 64, DocOptions::default()).map_err(e)?;
    let sq = DiscretePath::from_fn(TimeGrid::uniform(0.0, 1.0, 16).unwrap(), 1, |t, o| o[0] = t.sqrt()).unwrap();
    ensure(u.eval(0.25, &sq).map_err(e)?.is_finite(), || "constrained value is not finite".into())?;
    let directions = [-2.0, -1.0, 0.0, 0.5, 1.0, 2.0];
    for a in directions {
        let est = lower_dini(&u, 0.25, &sq, &[a], &s).map_err(e)?;
        ensure(est.diverged, || format!("no divergence in direction {a}"))?;
    }
    Ok(format!("exact quotients; divergence flagged in all {} directions", directions.len()))
}

fn random_path(rng: &mut ChaCha8Rng, dim: usize) -> DiscretePath {
    let mut nodes: Vec<f64> = (0..rng.random_range(1..10)).map(|_| rng.random_range(0.01..0.99)).collect();
    nodes.sort_by(f64::total_cmp);
    nodes.dedup_by(|a, b| (*a - *b).abs() < 1e-6);
    nodes.insert(0, 0.0);
    nodes.push(1.0);
    let len = nodes.len();
    let values = (0..len * dim).map(|_| rng.random_range(-3.0..3.0)).collect();
    DiscretePath::new(TimeGrid::new(nodes).unwrap(), dim, values).unwrap()
}

fn structure(tree_outputs: &[SocResult]) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..200 {
        let w = random_path(&mut rng, 2);
        let t = rng.random_range(0.0..0.999);
        let mut w2 = random_path(&mut rng, 2);
        let first = w2.node(0).to_vec();
        let anchored: Vec<f64> = w2.values().chunks(2).flat_map(|c| [c[0] - first[0], c[1] - first[1]]).collect();
        w2 = DiscretePath::new(w2.grid().clone(), 2, anchored).unwrap();
        let back = rescale_path(&concat_scaled(&w, t, &w2).map_err(e)?, t).map_err(e)?;
        for i in 0..w2.len() {
            for k in 0..2 {
                ensure((back.node(i)[k] - w2.node(i)[k]).abs() <= 1e-12, || "rescale∘concat is not the identity".into())?;
            }
        }
        let again = concat_scaled(&w, t, &rescale_path(&w, t).map_err(e)?).map_err(e)?;
        for (i, &s) in w.times().iter().enumerate() {
            ensure((again.at(s)[0] - w.node(i)[0]).abs() <= 1e-12, || "concat∘rescale is not the identity".into())?;
        }
    }
    for _ in 0..1000 {
        let (a, b, c) = (random_path(&mut rng, 2), random_path(&mut rng, 2), random_path(&mut rng, 2));
        let (ta, tb, tc) = (rng.random_range(0.0..=1.0), rng.random_range(0.0..=1.0), rng.random_range(0.0..=1.0));
        let ab = dinf_distance((ta, &a), (tb, &b)).map_err(e)?;
        let ba = dinf_distance((tb, &b), (ta, &a)).map_err(e)?;
        let bc = dinf_distance((tb, &b), (tc, &c)).map_err(e)?;
        let ac = dinf_distance((ta, &a), (tc, &c)).map_err(e)?;
        let aa = dinf_distance((ta, &a), (ta, &a)).map_err(e)?;
        ensure(ab >= 0.0 && (ab - ba).abs() <= 1e-12 && ac <= ab + bc + 1e-12 && aa == 0.0, || {
            format!("metric axioms fail: ab {ab} ba {ba} bc {bc} ac {ac}")
        })?;
    }

    // Dyadic refinement can only lower the transcription value.
    let weighted = Lagrangian::custom(
        "time_weighted",
        1,
        1.0,
        |t, a| ExtendedReal::Finite(0.5 * (1.0 + 3.0 * t) * a[0] * a[0]),
        |r| 0.5 * r * r,
        0.0,
        LagrangianFlags::REGULAR,
    )
    .map_err(e)?;
    let prob = BolzaProblem::new(weighted, TerminalCost::from_name("endpoint_quadratic:2", 1).unwrap());
    let opts = DocOptions {
        restarts: 4,
        estimate_allowance: false,
        ..DocOptions::default()
    };
    let values = [2, 4, 8, 16, 32]
        .iter()
        .map(|&n| solve_doc(&prob, 0.0, &zero(), n, &opts).map(|r| r.0.value.to_f64()))
        .collect::<Result<Vec<_>, _>>()
        .map_err(e)?;
    ensure(values.windows(2).all(|w| w[1] <= w[0] + 1e-9), || format!("refinement raised the value: {values:?}"))?;

    let pw = problem("power:1.5", "tanh_max");
    let small = solve_soc_tree(&pw, 0.0, &zero(), 2.0, &LatticeSpec::new(4, ControlGrid::scalar(&[-1.0, 0.0, 1.0]))).map_err(e)?;
    let large = solve_soc_tree(
        &pw,
        0.0,
        &zero(),
        2.0,
        &LatticeSpec::new(4, ControlGrid::scalar(&[-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0])),
    )
    .map_err(e)?;
    ensure(large.value <= small.value, || format!("larger control grid raised the value: {} > {}", large.value, small.value))?;

    let mut all: Vec<&SocResult> = tree_outputs.iter().collect();
    all.push(&small);
    all.push(&large);
    ensure(all.iter().all(|r| r.within_bounds()), || "a tree value left its a priori bounds".into())?;

    let tm = problem("quadratic", "tanh_max");
    let spec = LatticeSpec::new(5, ControlGrid::auto());
    let t1 = solve_soc_tree(&tm, 0.2, &zero(), 2.0, &spec).map_err(e)?;
    let t2 = solve_soc_tree(&tm, 0.2, &zero(), 2.0, &spec).map_err(e)?;
    let grid = TimeGrid::uniform(0.0, 1.0, 16).unwrap();
    let o = OracleOptions {
        samples: 5000,
        seed: 3,
        ..OracleOptions::default()
    };
    let o1 = estimate_vn_quadratic_oracle(&tm, 4.0, 0.0, &zero(), &grid, &o).map_err(e)?;
    let o2 = estimate_vn_quadratic_oracle(&tm, 4.0, 0.0, &zero(), &grid, &o).map_err(e)?;
    let d1 = solve_doc(&tm, 0.0, &zero(), 16, &opts).map_err(e)?;
    let d2 = solve_doc(&tm, 0.0, &zero(), 16, &opts).map_err(e)?;
    ensure(t1 == t2 && o1 == o2 && d1 == d2, || "repeated runs differ under a fixed seed".into())?;
    Ok(format!(
        "round-trips, 1000 metric triples, refinement {values:.4?}, grid monotone, {} SOC outputs in bounds, deterministic",
        all.len()
    ))
}

fn main() {
    let mut trees = Vec::new();
    let mut results: Vec<(usize, &str, f64, f64, Outcome)> = Vec::new();
    let mut run = |k: usize, name: &'static str, limit: f64, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let mut out = f();
        let secs = start.elapsed().as_secs_f64();
        if out.is_ok() && secs > limit {
            out = Err(format!("took {secs:.1} s, limit {limit} s"));
        }
        let (tag, msg) = match &out {
            Ok(m) => ("PASS", m.clone()),
            Err(m) => ("FAIL", m.clone()),
        };
        println!("[{tag}] criterion {k} ({name}, {secs:.1} s / {limit} s): {msg}");
        results.push((k, name, secs, limit, out));
    };
    run(1, "constrained example value", 10.0, &mut example_value);
    run(2, "Hamiltonian", 5.0, &mut legendre);
    run(3, "LQ chain", 60.0, &mut || lq_chain(&mut trees));
    run(4, "tree vs oracle", 60.0, &mut || tree_oracle(&mut trees));
    run(5, "rescaling identity", 30.0, &mut rescaling);
    run(6, "solution characterizations", 120.0, &mut characterizations);
    run(7, "Dini estimators", 30.0, &mut dini_suite);
    let mut last = || structure(&trees);
    run(8, "structural properties", 120.0, &mut last);
    let failed = results.iter().filter(|r| r.4.is_err()).count();
    println!("acceptance: {} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
