use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::terminal::TerminalCost;
use crate::error::{Error, Result};
use crate::lagrangian::{check_hypotheses, ExtendedReal, HypothesisReport, Lagrangian, SampleSpec};
use crate::optimize::{minimize, LbfgsOptions, Minimum};
use crate::paths::{action, is_close, stop_path, DiscretePath, GridSpec, TimeGrid};
use crate::seed::substream;

/// Running cost, terminal cost and the hypothesis report of the running cost.
#[derive(Clone, Debug)]
pub struct BolzaProblem {
    lagrangian: Lagrangian,
    terminal: TerminalCost,
    hypotheses: HypothesisReport,
}

impl BolzaProblem {
    /// Attaches the hypothesis report for the default sample grids.
    pub fn new(lagrangian: Lagrangian, terminal: TerminalCost) -> BolzaProblem {
        let hypotheses = check_hypotheses(&lagrangian, &SampleSpec::default_for(&lagrangian));
        BolzaProblem {
            lagrangian,
            terminal,
            hypotheses,
        }
    }

    pub fn with_report(lagrangian: Lagrangian, terminal: TerminalCost, hypotheses: HypothesisReport) -> BolzaProblem {
        BolzaProblem {
            lagrangian,
            terminal,
            hypotheses,
        }
    }

    /// Same running cost (and report) with another terminal cost.
    pub fn with_terminal(&self, terminal: TerminalCost) -> BolzaProblem {
        BolzaProblem {
            terminal,
            ..self.clone()
        }
    }

    pub fn lagrangian(&self) -> &Lagrangian {
        &self.lagrangian
    }

    pub fn terminal(&self) -> &TerminalCost {
        &self.terminal
    }

    pub fn hypotheses(&self) -> &HypothesisReport {
        &self.hypotheses
    }

    pub fn horizon(&self) -> f64 {
        self.lagrangian.horizon()
    }

    pub fn dim(&self) -> usize {
        self.lagrangian.dim()
    }

    fn require_solvable(&self) -> Result<()> {
        if !self.hypotheses.is_clean() {
            return Err(Error::Precondition(format!(
                "running cost {:?} fails the hypothesis checks: {:?}",
                self.lagrangian.name(),
                self.hypotheses.violations
            )));
        }
        if !self.lagrangian.flags().finite_valued {
            return Err(Error::Unsupported(
                "the transcription solver needs a finite-valued running cost".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct DocOptions {
    pub grid: GridSpec,
    pub restarts: usize,
    pub seed: u64,
    /// Standard deviation of random initial slopes (restart 0 starts at zero
    /// or at `warm_start`).
    pub init_sd: f64,
    /// Relative central-difference step for terminal-cost gradients.
    pub fd_step: f64,
    pub lbfgs: LbfgsOptions,
    /// Also solve on `cells / 2` and report the change as the discretization allowance.
    pub estimate_allowance: bool,
    /// Initial slopes (`cells × d`, row-major) for restart 0.
    pub warm_start: Option<Vec<f64>>,
    pub penalty_schedule: Vec<f64>,
    /// Allowed decrease between successive penalized values before a warning.
    pub monotonicity_tolerance: f64,
    /// Evaluate singleton targets exactly instead of through the penalty path.
    pub singleton_short_circuit: bool,
}

impl Default for DocOptions {
    fn default() -> Self {
        DocOptions {
            grid: GridSpec::Uniform,
            restarts: 20,
            seed: 0,
            init_sd: 2.0,
            fd_step: 1e-6,
            lbfgs: LbfgsOptions {
                max_iters: 2000,
                ..LbfgsOptions::default()
            },
            estimate_allowance: true,
            warm_start: None,
            penalty_schedule: (0..=6).map(|k| 10f64.powi(k)).collect(),
            monotonicity_tolerance: 1e-8,
            singleton_short_circuit: true,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EstimateMetadata {
    pub method: String,
    pub cells: usize,
    pub restarts: usize,
    pub converged_restarts: usize,
    pub seed: u64,
    pub samples: usize,
    pub warnings: Vec<String>,
}

/// A value with its error decomposition; every error field is `≥ 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueEstimate {
    pub value: ExtendedReal,
    pub discretization_allowance: f64,
    pub mc_standard_error: f64,
    pub penalty_gap: f64,
    pub metadata: EstimateMetadata,
}

impl ValueEstimate {
    pub fn exact(value: ExtendedReal, method: &str) -> ValueEstimate {
        ValueEstimate {
            value,
            discretization_allowance: 0.0,
            mc_standard_error: 0.0,
            penalty_gap: 0.0,
            metadata: EstimateMetadata {
                method: method.into(),
                ..EstimateMetadata::default()
            },
        }
    }
}

/// Node layout of a continuation: the frozen prefix on `[0, t0]`, `cells`
/// free cells on `[t0, t1]`, and a constant tail up to the horizon.
struct Layout {
    times: Vec<f64>,
    prefix_nodes: usize,
    widths: Vec<f64>,
    mids: Vec<f64>,
    dim: usize,
    prefix_values: Vec<f64>,
}

impl Layout {
    fn new(x0: &DiscretePath, t0: f64, t1: f64, cells: usize, grid: GridSpec, horizon: f64) -> Result<Layout> {
        let (mut times, prefix_values) = x0.prefix(t0);
        let prefix_nodes = times.len();
        let (widths, mids) = if cells > 0 && t1 > t0 && !is_close(t0, t1) {
            let g = grid.build(t0, t1, cells)?;
            let nodes = g.nodes();
            times.extend_from_slice(&nodes[1..]);
            (
                nodes.windows(2).map(|w| w[1] - w[0]).collect(),
                nodes.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect(),
            )
        } else {
            (Vec::new(), Vec::new())
        };
        let last = *times.last().unwrap();
        if last < horizon && !is_close(last, horizon) {
            times.push(horizon);
        }
        if times.len() == 1 {
            // a degenerate prefix at t = 0 = horizon cannot happen (horizon > 0)
            times.push(horizon);
        }
        Ok(Layout {
            times,
            prefix_nodes,
            widths,
            mids,
            dim: x0.dim(),
            prefix_values,
        })
    }

    fn cells(&self) -> usize {
        self.widths.len()
    }

    fn fill(&self, slopes: &[f64], out: &mut [f64]) {
        let d = self.dim;
        let p = self.prefix_nodes;
        out[..p * d].copy_from_slice(&self.prefix_values);
        for j in 0..self.cells() {
            for k in 0..d {
                out[(p + j) * d + k] = out[(p + j - 1) * d + k] + slopes[j * d + k] * self.widths[j];
            }
        }
        for i in p + self.cells()..self.times.len() {
            for k in 0..d {
                out[i * d + k] = out[(i - 1) * d + k];
            }
        }
    }

    fn path(&self, slopes: &[f64]) -> Result<DiscretePath> {
        let mut values = vec![0.0; self.times.len() * self.dim];
        self.fill(slopes, &mut values);
        DiscretePath::new(TimeGrid::new(self.times.clone())?, self.dim, values)
    }
}

/// Outcome of [`minimize_continuation`].
#[derive(Clone, Debug)]
pub struct ContinuationResult {
    /// Best path on `[0, T]`, frozen on `[0, t0]` and constant after `t1`.
    pub path: DiscretePath,
    pub slopes: Vec<f64>,
    /// `action + terminal`, recomputed on `path`.
    pub value: f64,
    pub action: f64,
    pub terminal: f64,
    pub converged_restarts: usize,
}

/// Minimizes `action(ℓ, x, t0, t1) + terminal(x)` over continuations of `x0`
/// that are linear on each of `cells` cells of `[t0, t1]`.
#[allow(clippy::too_many_arguments)]
pub fn minimize_continuation(
    l: &Lagrangian,
    x0: &DiscretePath,
    t0: f64,
    t1: f64,
    cells: usize,
    terminal: &(dyn Fn(&DiscretePath) -> f64 + Sync),
    opts: &DocOptions,
) -> Result<ContinuationResult> {
    let horizon = l.horizon();
    l.check_time(t0)?;
    l.check_time(t1)?;
    if t1 < t0 {
        return Err(Error::domain("t1", t1, t0, horizon));
    }
    if x0.dim() != l.dim() {
        return Err(Error::DimensionMismatch {
            expected: l.dim(),
            got: x0.dim(),
        });
    }
    if x0.start() > t0 {
        return Err(Error::Precondition(format!(
            "initial path starts at {} after t0 = {t0}",
            x0.start()
        )));
    }
    if cells == 0 {
        return Err(Error::domain("cells", 0.0, 1.0, f64::INFINITY));
    }
    if opts.restarts == 0 {
        return Err(Error::domain("restarts", 0.0, 1.0, f64::INFINITY));
    }
    let layout = Layout::new(x0, t0, t1, cells, opts.grid, horizon)?;
    let n_vars = layout.cells() * layout.dim;

    let finish = |slopes: Vec<f64>, converged_restarts: usize| -> Result<ContinuationResult> {
        let path = layout.path(&slopes)?;
        let act = action(l, &path, t0, t1).to_f64();
        let term = terminal(&path);
        Ok(ContinuationResult {
            value: act + term,
            action: act,
            terminal: term,
            path,
            slopes,
            converged_restarts,
        })
    };
    if n_vars == 0 {
        return finish(Vec::new(), 1);
    }

    let gradient = l.gradient_fn();
    let objective = |slopes: &[f64], grad: &mut [f64], buf: &mut DiscretePath, saved: &mut Vec<f64>| -> f64 {
        let d = layout.dim;
        let p = layout.prefix_nodes;
        layout.fill(slopes, buf.values_mut());
        let mut running = 0.0;
        for j in 0..layout.cells() {
            let v = &slopes[j * d..(j + 1) * d];
            let w = layout.widths[j];
            let m = layout.mids[j];
            match l.value(m, v) {
                ExtendedReal::Finite(c) => running += c * w,
                ExtendedReal::Infinity => return f64::INFINITY,
            }
            let g = &mut grad[j * d..(j + 1) * d];
            if let Some(gf) = &gradient {
                gf(m, v, g);
                g.iter_mut().for_each(|x| *x *= w);
            } else {
                let mut probe = v.to_vec();
                for k in 0..d {
                    let eta = opts.fd_step * v[k].abs().max(1.0);
                    probe[k] = v[k] + eta;
                    let up = l.value(m, &probe).to_f64();
                    probe[k] = v[k] - eta;
                    let down = l.value(m, &probe).to_f64();
                    probe[k] = v[k];
                    g[k] = (up - down) / (2.0 * eta) * w;
                }
            }
        }
        let term = terminal(buf);
        if !term.is_finite() {
            return f64::INFINITY;
        }
        saved.clear();
        saved.extend_from_slice(buf.values());
        let n_nodes = layout.times.len();
        for j in 0..layout.cells() {
            for k in 0..d {
                let eta = opts.fd_step * slopes[j * d + k].abs().max(1.0);
                let shift = eta * layout.widths[j];
                let vals = buf.values_mut();
                for i in p + j..n_nodes {
                    vals[i * d + k] = saved[i * d + k] + shift;
                }
                let up = terminal(buf);
                let vals = buf.values_mut();
                for i in p + j..n_nodes {
                    vals[i * d + k] = saved[i * d + k] - shift;
                }
                let down = terminal(buf);
                let vals = buf.values_mut();
                for i in p + j..n_nodes {
                    vals[i * d + k] = saved[i * d + k];
                }
                grad[j * d + k] += (up - down) / (2.0 * eta);
            }
        }
        running + term
    };

    let runs: Vec<Result<Minimum>> = (0..opts.restarts)
        .into_par_iter()
        .map(|r| {
            let init = if r == 0 {
                match &opts.warm_start {
                    Some(w) if w.len() == n_vars => w.clone(),
                    _ => vec![0.0; n_vars],
                }
            } else {
                let mut rng = substream(opts.seed, r as u64);
                let normal = Normal::new(0.0, opts.init_sd).map_err(|e| Error::Precondition(e.to_string()))?;
                (0..n_vars).map(|_| normal.sample(&mut rng)).collect()
            };
            let mut buf = layout.path(&init)?;
            let mut saved = Vec::new();
            Ok(minimize(
                |v, g| objective(v, g, &mut buf, &mut saved),
                init,
                &opts.lbfgs,
            ))
        })
        .collect();

    let mut best: Option<Minimum> = None;
    let mut converged = 0;
    for run in runs {
        let run = run?;
        if !run.converged {
            continue;
        }
        converged += 1;
        // strict improvement only: ties keep the lower restart index
        if run.value.is_finite() && best.as_ref().is_none_or(|b| run.value < b.value) {
            best = Some(run);
        }
    }
    let Some(best) = best else {
        return Err(Error::OptimizationFailure(format!(
            "none of {} restarts converged to a finite value",
            opts.restarts
        )));
    };
    finish(best.x, converged)
}

fn check_base(prob: &BolzaProblem, t0: f64, x0: &DiscretePath) -> Result<()> {
    prob.lagrangian.check_time(t0)?;
    if x0.dim() != prob.dim() {
        return Err(Error::DimensionMismatch {
            expected: prob.dim(),
            got: x0.dim(),
        });
    }
    Ok(())
}

/// Path on `[0, T]` equal to `x0` up to `t0` and constant afterwards.
fn frozen(x0: &DiscretePath, t0: f64, horizon: f64) -> Result<DiscretePath> {
    let layout = Layout::new(x0, t0, t0, 0, GridSpec::Uniform, horizon)?;
    layout.path(&[])
}

/// Deterministic value `v_0(t0, x0)` for a finite terminal cost, with its minimizer.
pub fn solve_doc(
    prob: &BolzaProblem,
    t0: f64,
    x0: &DiscretePath,
    cells: usize,
    opts: &DocOptions,
) -> Result<(ValueEstimate, DiscretePath)> {
    if !prob.terminal.is_finite_kind() {
        return Err(Error::Precondition(
            "constrained terminal costs go through solve_doc_constrained".into(),
        ));
    }
    prob.require_solvable()?;
    check_base(prob, t0, x0)?;
    if cells == 0 {
        return Err(Error::domain("cells", 0.0, 1.0, f64::INFINITY));
    }
    let horizon = prob.horizon();
    if is_close(t0, horizon) {
        let path = frozen(x0, horizon, horizon)?;
        let value = prob.terminal.eval(&path);
        return Ok((ValueEstimate::exact(value, "terminal"), path));
    }
    let h = &prob.terminal;
    let terminal = |x: &DiscretePath| h.finite_part(x);
    let run = minimize_continuation(&prob.lagrangian, x0, t0, horizon, cells, &terminal, opts)?;
    let mut allowance = 0.0;
    if opts.estimate_allowance && cells >= 2 {
        let coarse_opts = DocOptions {
            estimate_allowance: false,
            warm_start: None,
            ..opts.clone()
        };
        let coarse = minimize_continuation(&prob.lagrangian, x0, t0, horizon, cells / 2, &terminal, &coarse_opts)?;
        allowance = (run.value - coarse.value).abs();
    }
    let estimate = ValueEstimate {
        value: ExtendedReal::Finite(run.value),
        discretization_allowance: allowance,
        mc_standard_error: 0.0,
        penalty_gap: 0.0,
        metadata: EstimateMetadata {
            method: "transcription".into(),
            cells,
            restarts: opts.restarts,
            converged_restarts: run.converged_restarts,
            seed: opts.seed,
            samples: 0,
            warnings: Vec::new(),
        },
    };
    Ok((estimate, run.path))
}

/// Whether `x0` agrees with the singleton target at every node of `[0, t0]`.
fn prefix_feasible(target: &super::TargetSet, x0: &DiscretePath, t0: f64) -> bool {
    let super::TargetSet::Singleton { path, .. } = target else {
        return true;
    };
    let (times, values) = x0.prefix(t0);
    let d = x0.dim();
    let mut g = vec![0.0; d];
    times.iter().enumerate().all(|(i, &t)| {
        path(t, &mut g);
        values[i * d..(i + 1) * d]
            .iter()
            .zip(&g)
            .all(|(a, b)| (a - b).abs() <= 1e-12 * (1.0 + b.abs()))
    })
}

/// Value for either terminal-cost kind. Constrained costs use the exact
/// singleton evaluation when available, otherwise the exterior penalty
/// `finite + λ·dist²` over `opts.penalty_schedule` with warm starts.
pub fn solve_doc_constrained(
    prob: &BolzaProblem,
    t0: f64,
    x0: &DiscretePath,
    cells: usize,
    opts: &DocOptions,
) -> Result<(ValueEstimate, DiscretePath)> {
    let TerminalCost::Constrained { target, .. } = &prob.terminal else {
        return solve_doc(prob, t0, x0, cells, opts);
    };
    check_base(prob, t0, x0)?;
    if cells == 0 {
        return Err(Error::domain("cells", 0.0, 1.0, f64::INFINITY));
    }
    let horizon = prob.horizon();
    let l = &prob.lagrangian;

    if !prefix_feasible(target, x0, t0) {
        let mut est = ValueEstimate::exact(ExtendedReal::Infinity, "infeasible_prefix");
        est.metadata.cells = cells;
        return Ok((est, frozen(x0, t0, horizon)?));
    }
    if is_close(t0, horizon) {
        let path = frozen(x0, horizon, horizon)?;
        return Ok((ValueEstimate::exact(prob.terminal.eval(&path), "terminal"), path));
    }

    if let (super::TargetSet::Singleton { path: gamma, .. }, true) = (target, opts.singleton_short_circuit) {
        let d = x0.dim();
        let sample = |n: usize| -> Result<(f64, DiscretePath)> {
            let mut layout = Layout::new(x0, t0, horizon, n, opts.grid, horizon)?;
            let mut values = vec![0.0; layout.times.len() * d];
            values[..layout.prefix_nodes * d].copy_from_slice(&layout.prefix_values);
            for i in layout.prefix_nodes..layout.times.len() {
                gamma(layout.times[i], &mut values[i * d..(i + 1) * d]);
            }
            let path = DiscretePath::new(TimeGrid::new(std::mem::take(&mut layout.times))?, d, values)?;
            let value = action(l, &path, t0, horizon) + prob.terminal.finite_part(&path);
            Ok((value.to_f64(), path))
        };
        let (value, path) = sample(cells)?;
        let allowance = if opts.estimate_allowance && cells >= 2 {
            (value - sample(cells / 2)?.0).abs()
        } else {
            0.0
        };
        let mut est = ValueEstimate::exact(ExtendedReal::from(value), "singleton_target");
        est.discretization_allowance = if allowance.is_finite() { allowance } else { 0.0 };
        est.metadata.cells = cells;
        return Ok((est, path));
    }

    prob.require_solvable()?;
    if opts.penalty_schedule.is_empty() {
        return Err(Error::Precondition("empty penalty schedule".into()));
    }
    if opts.penalty_schedule.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Precondition("penalty schedule must be increasing".into()));
    }
    let h = &prob.terminal;
    let mut warm = opts.warm_start.clone();
    let mut values: Vec<f64> = Vec::new();
    let mut warnings = Vec::new();
    let mut last: Option<ContinuationResult> = None;
    let mut converged = 0;
    for (k, &lambda) in opts.penalty_schedule.iter().enumerate() {
        let step_opts = DocOptions {
            warm_start: warm.clone(),
            // continuation from the previous λ replaces random restarts
            restarts: if k == 0 { opts.restarts } else { 1 },
            ..opts.clone()
        };
        let terminal = |x: &DiscretePath| h.finite_part(x) + lambda * h.dist_sq(x);
        let run = minimize_continuation(l, x0, t0, horizon, cells, &terminal, &step_opts)?;
        if let Some(&prev) = values.last() {
            if run.value < prev - opts.monotonicity_tolerance * (1.0 + prev.abs()) {
                warnings.push(format!(
                    "penalized value decreased from {prev} to {} at λ = {lambda}; penalty scheme not converging",
                    run.value
                ));
            }
        }
        values.push(run.value);
        warm = Some(run.slopes.clone());
        converged += run.converged_restarts;
        last = Some(run);
    }
    let run = last.unwrap();
    let gap = match values.len() {
        0 | 1 => 0.0,
        n => (values[n - 1] - values[n - 2]).abs(),
    };
    let est = ValueEstimate {
        value: ExtendedReal::Finite(run.value),
        discretization_allowance: 0.0,
        mc_standard_error: 0.0,
        penalty_gap: gap,
        metadata: EstimateMetadata {
            method: "penalty".into(),
            cells,
            restarts: opts.restarts,
            converged_restarts: converged,
            seed: opts.seed,
            samples: 0,
            warnings,
        },
    };
    Ok((est, run.path))
}

/// Dynamic-programming residual at one checkpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DppResidual {
    pub t: f64,
    pub action: f64,
    pub value_at_t: ExtendedReal,
    pub residual: f64,
    pub allowance: f64,
}

/// `|v_0(t0, x0) − action(ℓ, x*, t0, t) − v_0(t, x*)|` along a minimizer `x*`,
/// with `v_0(t, ·)` recomputed on a proportional number of cells.
#[allow(clippy::too_many_arguments)]
pub fn dpp_residuals(
    prob: &BolzaProblem,
    t0: f64,
    base: &ValueEstimate,
    minimizer: &DiscretePath,
    checkpoints: &[f64],
    cells: usize,
    opts: &DocOptions,
) -> Result<Vec<DppResidual>> {
    let horizon = prob.horizon();
    let inner = DocOptions {
        estimate_allowance: false,
        warm_start: None,
        ..opts.clone()
    };
    let mut out = Vec::with_capacity(checkpoints.len());
    for &t in checkpoints {
        if t < t0 || t > horizon {
            return Err(Error::domain("checkpoint", t, t0, horizon));
        }
        if t == t0 {
            out.push(DppResidual {
                t,
                action: 0.0,
                value_at_t: base.value,
                residual: 0.0,
                allowance: base.discretization_allowance,
            });
            continue;
        }
        let remaining = ((cells as f64) * (horizon - t) / (horizon - t0)).round().max(1.0) as usize;
        let (v, _) = solve_doc_constrained(prob, t, minimizer, remaining, &inner)?;
        let act = action(&prob.lagrangian, minimizer, t0, t);
        let rhs = act + v.value;
        let residual = match (base.value, rhs) {
            (ExtendedReal::Finite(a), ExtendedReal::Finite(b)) => (a - b).abs(),
            (ExtendedReal::Infinity, ExtendedReal::Infinity) => 0.0,
            _ => f64::INFINITY,
        };
        out.push(DppResidual {
            t,
            action: act.to_f64(),
            value_at_t: v.value,
            residual,
            allowance: base.discretization_allowance,
        });
    }
    Ok(out)
}

/// The zero-velocity competitor `x0(· ∧ t0)` on `[0, T]`.
pub fn rest_path(x0: &DiscretePath, t0: f64, horizon: f64) -> Result<DiscretePath> {
    if x0.horizon() >= horizon {
        return Ok(stop_path(x0, t0));
    }
    frozen(x0, t0, horizon)
}
