use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::bolza::{solve_doc_constrained, ValueEstimate};
use crate::error::Result;
use crate::lagrangian::{hamiltonian, HamiltonianOptions, Lagrangian};
use crate::paths::{DiscretePath, TimeGrid};
use crate::stochastic::{estimate_vn_quadratic_oracle, solve_soc_tree, LatticeSpec, OracleOptions, SocResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LegendreRow {
    /// Every coordinate of the dual variable equals `p`.
    pub p: f64,
    pub closed_form: Option<f64>,
    pub numeric: f64,
    /// Grid search over `[−R, R]`, one-dimensional problems only.
    pub brute_force: Option<f64>,
    pub numeric_error: Option<f64>,
    pub brute_force_error: Option<f64>,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LegendreTable {
    pub lagrangian: String,
    pub time: f64,
    pub rows: Vec<LegendreRow>,
    pub passed: bool,
}

/// `inf_a [a·p + ℓ(t, a)]` over `[−radius, radius]` by a uniform scan
/// followed by repeated local refinement around the best node.
pub fn brute_force_hamiltonian(l: &Lagrangian, t: f64, p: f64, radius: f64) -> Result<f64> {
    let objective = |a: f64| -> Result<f64> { Ok(a * p + l.eval(t, &[a])?.to_f64()) };
    let mut center = 0.0;
    let mut half = radius;
    let mut best = f64::INFINITY;
    for _ in 0..12 {
        let points = 2000;
        let h = 2.0 * half / points as f64;
        for k in 0..=points {
            let a = center - half + k as f64 * h;
            let v = objective(a)?;
            if v < best {
                best = v;
                center = a;
            }
        }
        half = 4.0 * h;
    }
    Ok(best)
}

pub fn run_legendre(config: &ExperimentConfig) -> Result<LegendreTable> {
    config.validate()?;
    let l = config.lagrangian()?;
    let lc = &config.legendre;
    let dim = config.problem.dim;
    let numeric_opts = HamiltonianOptions {
        force_numeric: true,
        seed: config.seed,
        ..HamiltonianOptions::default()
    };
    let ps: Vec<f64> = if lc.points == 1 {
        vec![lc.p_min]
    } else {
        (0..lc.points)
            .map(|k| lc.p_min + (lc.p_max - lc.p_min) * k as f64 / (lc.points - 1) as f64)
            .collect()
    };
    let tol = &config.tolerances;
    let rows = ps
        .par_iter()
        .map(|&p| -> Result<LegendreRow> {
            let pv = vec![p; dim];
            let closed_form = l.closed_form_hamiltonian(lc.time, &pv);
            let numeric = hamiltonian(&l, lc.time, &pv, &numeric_opts)?;
            let brute_force = if dim == 1 {
                Some(brute_force_hamiltonian(&l, lc.time, p, lc.brute_force_radius)?)
            } else {
                None
            };
            let reference = closed_form.unwrap_or(numeric);
            let numeric_error = closed_form.map(|c| (numeric - c).abs());
            let brute_force_error = brute_force.map(|b| (b - reference).abs());
            let passed = numeric_error.is_none_or(|e| e <= tol.legendre) && brute_force_error.is_none_or(|e| e <= tol.brute_force);
            Ok(LegendreRow {
                p,
                closed_form,
                numeric,
                brute_force,
                numeric_error,
                brute_force_error,
                passed,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LegendreTable {
        lagrangian: l.name().to_string(),
        time: lc.time,
        passed: rows.iter().all(|r| r.passed),
        rows,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BolzaRow {
    pub datum: String,
    pub t0: f64,
    pub estimate: Option<ValueEstimate>,
    #[serde(skip)]
    pub minimizer: Option<DiscretePath>,
    pub failure: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BolzaRun {
    pub rows: Vec<BolzaRow>,
}

/// `v_0` with its minimizer at every initial datum.
pub fn run_bolza(config: &ExperimentConfig) -> Result<BolzaRun> {
    config.validate()?;
    let prob = config.problem()?;
    let doc = config.doc_options()?;
    let rows = config
        .initial_data
        .par_iter()
        .map(|d| -> Result<BolzaRow> {
            let x0 = config.initial_path(d)?;
            let mut row = BolzaRow {
                datum: d.id.clone(),
                t0: d.t0,
                estimate: None,
                minimizer: None,
                failure: None,
            };
            match solve_doc_constrained(&prob, d.t0, &x0, config.cells_from(d.t0), &doc) {
                Ok((est, path)) => {
                    row.estimate = Some(est);
                    row.minimizer = Some(path);
                }
                Err(e) => row.failure = Some(e.to_string()),
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BolzaRun { rows })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SocRow {
    pub datum: String,
    pub t0: f64,
    pub n: f64,
    pub tree: Option<SocResult>,
    pub tree_failure: Option<String>,
    /// Exponential-oracle value and standard error (quadratic running cost only).
    pub oracle: Option<f64>,
    pub oracle_se: Option<f64>,
    pub oracle_failure: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SocRun {
    pub rows: Vec<SocRow>,
}

impl SocRun {
    /// Rows with a tree value outside the zero-control and minorant bounds.
    pub fn bound_violations(&self) -> usize {
        self.rows.iter().filter(|r| r.tree.as_ref().is_some_and(|t| !t.within_bounds())).count()
    }
}

/// `v_n` for every datum and every `n` of the schedule, by tree and, where
/// available, by the exponential oracle.
pub fn run_soc(config: &ExperimentConfig) -> Result<SocRun> {
    config.validate()?;
    let prob = config.problem()?;
    let spec = LatticeSpec {
        steps: config.solver.steps,
        control_grid: config.solver.control_grid.build(config.problem.dim)?,
        node_budget: config.solver.node_budget,
    };
    let with_oracle = prob.lagrangian().name() == "quadratic" && prob.terminal().is_finite_kind();
    let paths: Vec<DiscretePath> = config
        .initial_data
        .iter()
        .map(|d| config.initial_path(d))
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, f64)> = (0..paths.len())
        .flat_map(|i| config.solver.n_schedule.iter().map(move |&n| (i, n)))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&(i, n)| {
            let d = &config.initial_data[i];
            let x0 = &paths[i];
            let mut row = SocRow {
                datum: d.id.clone(),
                t0: d.t0,
                n,
                tree: None,
                tree_failure: None,
                oracle: None,
                oracle_se: None,
                oracle_failure: None,
            };
            match solve_soc_tree(&prob, d.t0, x0, n, &spec) {
                Ok(r) => row.tree = Some(r),
                Err(e) => row.tree_failure = Some(e.to_string()),
            }
            if with_oracle {
                let opts = OracleOptions {
                    samples: config.solver.samples,
                    seed: config.seed,
                    antithetic: true,
                    ..OracleOptions::default()
                };
                let est = TimeGrid::uniform(d.t0, config.problem.horizon, config.solver.mc_cells)
                    .and_then(|grid| estimate_vn_quadratic_oracle(&prob, n, d.t0, x0, &grid, &opts));
                match est {
                    Ok(e) => {
                        row.oracle = Some(e.value.to_f64());
                        row.oracle_se = Some(e.mc_standard_error);
                    }
                    Err(e) => row.oracle_failure = Some(e.to_string()),
                }
            }
            row
        })
        .collect();
    Ok(SocRun { rows })
}
