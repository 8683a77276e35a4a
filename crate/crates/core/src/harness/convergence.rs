use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::bolza::{solve_doc_constrained, ValueEstimate};
use crate::error::{Error, Result};
use crate::paths::{DiscretePath, TimeGrid};
use crate::stochastic::{estimate_vn_quadratic_oracle, solve_soc_tree, LatticeSpec, OracleOptions};

/// One `(n, datum)` cell of the convergence study. Missing values leave a
/// `failure` reason.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n: f64,
    pub datum: String,
    pub t0: f64,
    pub vn: Option<f64>,
    pub vn_se: f64,
    pub vn_method: String,
    pub v0: Option<f64>,
    pub v0_allowance: f64,
    /// `|vn − v0|`, recomputed and checked on reload.
    pub gap: Option<f64>,
    pub failure: Option<String>,
}

impl ConvergenceRow {
    pub fn expected_gap(&self) -> Option<f64> {
        Some((self.vn? - self.v0?).abs())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupGap {
    pub n: f64,
    /// Max of the per-datum gaps among successful rows.
    pub sup_gap: Option<f64>,
    /// Standard error and allowance of the row attaining the sup.
    pub se: f64,
    pub allowance: f64,
    pub failed_rows: usize,
}

/// Property checks on the sup-gap curve; these are trend checks without a
/// claimed rate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrendCheck {
    /// Each sup-gap exceeds its predecessor by at most `2·(SE + allowance)`
    /// of the two rows combined.
    pub monotone_within_noise: bool,
    pub final_gap: Option<f64>,
    pub final_gap_tolerance: f64,
    pub final_gap_ok: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    pub sup_gaps: Vec<SupGap>,
    pub trend: TrendCheck,
}

impl ConvergenceTable {
    pub fn from_rows(rows: Vec<ConvergenceRow>, schedule: &[f64], final_gap_tolerance: f64) -> ConvergenceTable {
        let sup_gaps: Vec<SupGap> = schedule
            .iter()
            .map(|&n| {
                let of_n: Vec<&ConvergenceRow> = rows.iter().filter(|r| r.n == n).collect();
                let best = of_n
                    .iter()
                    .filter_map(|r| r.gap.map(|g| (g, *r)))
                    .fold(None::<(f64, &ConvergenceRow)>, |acc, (g, r)| match acc {
                        Some((b, _)) if b >= g => acc,
                        _ => Some((g, r)),
                    });
                SupGap {
                    n,
                    sup_gap: best.map(|(g, _)| g),
                    se: best.map_or(0.0, |(_, r)| r.vn_se),
                    allowance: best.map_or(0.0, |(_, r)| r.v0_allowance),
                    failed_rows: of_n.iter().filter(|r| r.failure.is_some()).count(),
                }
            })
            .collect();
        let monotone_within_noise = sup_gaps.windows(2).all(|w| match (w[0].sup_gap, w[1].sup_gap) {
            (Some(a), Some(b)) => b <= a + 2.0 * (w[0].se + w[1].se + w[0].allowance + w[1].allowance),
            _ => false,
        });
        let final_gap = sup_gaps.last().and_then(|s| s.sup_gap);
        ConvergenceTable {
            rows,
            trend: TrendCheck {
                monotone_within_noise,
                final_gap,
                final_gap_tolerance,
                final_gap_ok: final_gap.is_some_and(|g| g < final_gap_tolerance),
            },
            sup_gaps,
        }
    }

    pub fn failed_rows(&self) -> usize {
        self.rows.iter().filter(|r| r.failure.is_some()).count()
    }
}

struct Datum {
    id: String,
    t0: f64,
    path: DiscretePath,
    v0: std::result::Result<(ValueEstimate, DiscretePath), String>,
}

/// `v_n` for every datum and every `n` of the schedule next to `v_0`.
///
/// Quadratic running costs with finite terminal costs use the exponential
/// oracle, importance-sampled along the `v_0` minimizer; anything else uses
/// the tree with the configured steps. The same seed is used for every `n`
/// so the gap curves share their noise. Failures stay inside their rows.
pub fn run_convergence(config: &ExperimentConfig) -> Result<ConvergenceTable> {
    config.validate()?;
    let prob = config.problem()?;
    let doc = config.doc_options()?;
    let use_oracle = prob.lagrangian().name() == "quadratic" && prob.terminal().is_finite_kind();
    let data: Vec<Datum> = config
        .initial_data
        .par_iter()
        .map(|d| -> Result<Datum> {
            let path = config.initial_path(d)?;
            let v0 = solve_doc_constrained(&prob, d.t0, &path, config.cells_from(d.t0), &doc).map_err(|e| e.to_string());
            Ok(Datum {
                id: d.id.clone(),
                t0: d.t0,
                path,
                v0,
            })
        })
        .collect::<Result<_>>()?;
    let control_grid = config.solver.control_grid.build(config.problem.dim)?;
    let horizon = config.problem.horizon;

    let cells: Vec<(usize, f64)> = (0..data.len())
        .flat_map(|i| config.solver.n_schedule.iter().map(move |&n| (i, n)))
        .collect();
    let rows: Vec<ConvergenceRow> = cells
        .par_iter()
        .map(|&(i, n)| {
            let d = &data[i];
            let mut row = ConvergenceRow {
                n,
                datum: d.id.clone(),
                t0: d.t0,
                vn: None,
                vn_se: 0.0,
                vn_method: String::new(),
                v0: None,
                v0_allowance: 0.0,
                gap: None,
                failure: None,
            };
            let minimizer = match &d.v0 {
                Ok((est, path)) => {
                    row.v0 = est.value.finite();
                    row.v0_allowance = est.discretization_allowance + est.penalty_gap;
                    if row.v0.is_none() {
                        row.failure = Some("v0 is infinite at this datum".into());
                    }
                    Some(path)
                }
                Err(e) => {
                    row.failure = Some(format!("v0: {e}"));
                    None
                }
            };
            let vn: Result<(f64, f64, String)> = if use_oracle {
                TimeGrid::uniform(d.t0, horizon, config.solver.mc_cells).and_then(|grid| {
                    let opts = OracleOptions {
                        samples: config.solver.samples,
                        seed: config.seed,
                        drift: minimizer.cloned(),
                        ..OracleOptions::default()
                    };
                    let est = estimate_vn_quadratic_oracle(&prob, n, d.t0, &d.path, &grid, &opts)?;
                    Ok((est.value.to_f64(), est.mc_standard_error, est.metadata.method))
                })
            } else {
                let spec = LatticeSpec {
                    steps: config.solver.steps,
                    control_grid: control_grid.clone(),
                    node_budget: config.solver.node_budget,
                };
                solve_soc_tree(&prob, d.t0, &d.path, n, &spec).map(|r| (r.value, 0.0, "tree".to_string()))
            };
            match vn {
                Ok((v, se, method)) => {
                    row.vn = Some(v);
                    row.vn_se = se;
                    row.vn_method = method;
                }
                Err(e) => {
                    let msg = format!("vn: {e}");
                    row.failure = Some(match row.failure.take() {
                        Some(prev) => format!("{prev}; {msg}"),
                        None => msg,
                    });
                }
            }
            row.gap = row.expected_gap();
            row
        })
        .collect();
    Ok(ConvergenceTable::from_rows(
        rows,
        &config.solver.n_schedule,
        config.tolerances.final_gap,
    ))
}

/// Recomputes every gap and rejects rows whose stored gap differs.
pub fn check_row_integrity(rows: &[ConvergenceRow]) -> Result<()> {
    for (i, r) in rows.iter().enumerate() {
        let expected = r.expected_gap();
        let same = match (expected, r.gap) {
            (Some(a), Some(b)) => a.to_bits() == b.to_bits(),
            (None, None) => true,
            _ => false,
        };
        if !same {
            return Err(Error::Integrity(format!(
                "row {i} ({}, n = {}): stored gap {:?} but |vn − v0| = {:?}",
                r.datum, r.n, r.gap, expected
            )));
        }
    }
    Ok(())
}
