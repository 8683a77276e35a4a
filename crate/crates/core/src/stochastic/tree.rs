use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::brownian::check_viscosity;
use crate::bolza::{BolzaProblem, TerminalCost};
use crate::error::{Error, Result};
use crate::lagrangian::Lagrangian;
use crate::paths::{is_close, DiscretePath, TimeGrid};

/// How the finite control set is chosen.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ControlGrid {
    Explicit { points: Vec<Vec<f64>> },
    /// Tensor grid with `points_per_side` positive levels up to `±radius` per
    /// coordinate; `radius` doubles from `initial_radius` while the value
    /// improves by more than `tolerance`.
    Auto {
        points_per_side: usize,
        initial_radius: f64,
        tolerance: f64,
        max_doublings: usize,
    },
}

impl ControlGrid {
    pub fn explicit(points: Vec<Vec<f64>>) -> ControlGrid {
        ControlGrid::Explicit { points }
    }

    /// Scalar grid `{values}` in dimension 1.
    pub fn scalar(values: &[f64]) -> ControlGrid {
        ControlGrid::explicit(values.iter().map(|v| vec![*v]).collect())
    }

    /// Symmetric scalar grid `{−A, …, 0, …, A}` with `2m + 1` points.
    pub fn symmetric(radius: f64, points_per_side: usize) -> ControlGrid {
        ControlGrid::scalar(&symmetric_levels(radius, points_per_side))
    }

    pub fn auto() -> ControlGrid {
        ControlGrid::Auto {
            points_per_side: 3,
            initial_radius: 1.0,
            tolerance: 1e-6,
            max_doublings: 6,
        }
    }
}

fn symmetric_levels(radius: f64, m: usize) -> Vec<f64> {
    let m = m as i64;
    (-m..=m).map(|i| radius * i as f64 / m.max(1) as f64).collect()
}

fn tensor(levels: &[f64], dim: usize) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = vec![Vec::new()];
    for _ in 0..dim {
        out = out
            .into_iter()
            .flat_map(|p| {
                levels.iter().map(move |v| {
                    let mut q = p.clone();
                    q.push(*v);
                    q
                })
            })
            .collect();
    }
    out
}

/// Lexicographically sorted, de-duplicated copy; must contain the origin.
pub(crate) fn normalize_grid(points: &[Vec<f64>], dim: usize) -> Result<Vec<Vec<f64>>> {
    if points.is_empty() {
        return Err(Error::Precondition("control grid is empty".into()));
    }
    if let Some(p) = points.iter().find(|p| p.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: p.len(),
        });
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Precondition("control grid values must be finite".into()));
    }
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    sorted.dedup();
    if !sorted.iter().any(|p| p.iter().all(|v| *v == 0.0)) {
        return Err(Error::Precondition("control grid must contain the zero control".into()));
    }
    Ok(sorted)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub steps: usize,
    pub control_grid: ControlGrid,
    /// Cap on the number of leaves `(|grid|·2^d)^steps`.
    pub node_budget: u64,
}

impl LatticeSpec {
    pub const DEFAULT_BUDGET: u64 = 20_000_000;

    pub fn new(steps: usize, control_grid: ControlGrid) -> LatticeSpec {
        LatticeSpec {
            steps,
            control_grid,
            node_budget: LatticeSpec::DEFAULT_BUDGET,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SocResult {
    pub value: f64,
    /// Optimal first-step control (lexicographically smallest among ties).
    pub root_control: Vec<f64>,
    pub steps: usize,
    pub step: f64,
    pub control_grid: Vec<Vec<f64>>,
    pub node_count: u64,
    pub leaf_count: u64,
    /// `−sup|h| + (T − t0)·min φ`.
    pub lower_bound: f64,
    /// `sup|h| + Σ ℓ(t_k, 0)Δt`, the cost bound of the zero control.
    pub upper_bound: f64,
}

impl SocResult {
    pub fn within_bounds(&self) -> bool {
        let slack = 1e-12 * (1.0 + self.value.abs());
        self.lower_bound - slack <= self.value && self.value <= self.upper_bound + slack
    }
}

struct Tree<'a> {
    h: &'a TerminalCost,
    grid: &'a [Vec<f64>],
    signs: Vec<Vec<f64>>,
    dim: usize,
    anchor: usize,
    steps: usize,
    dt: f64,
    sigma: f64,
    /// `ℓ(midpoint of step k, a_i)·Δt`, indexed `[k][i]`.
    running: Vec<Vec<f64>>,
}

#[derive(Clone, Copy, Default)]
struct LeafStats {
    sup_abs: f64,
}

impl Tree<'_> {
    fn branch(&self, k: usize, ai: usize, buf: &mut DiscretePath, stats: &mut LeafStats) -> f64 {
        let cost = self.running[k][ai];
        if !cost.is_finite() {
            return f64::INFINITY;
        }
        let d = self.dim;
        let a = &self.grid[ai];
        let cur = self.anchor + k;
        let mut acc = 0.0;
        for s in &self.signs {
            {
                let v = buf.values_mut();
                for c in 0..d {
                    v[(cur + 1) * d + c] = v[cur * d + c] + a[c] * self.dt + s[c] * self.sigma;
                }
            }
            acc += self.node(k + 1, buf, stats).0;
        }
        cost + acc / self.signs.len() as f64
    }

    /// Value and argmin index at the node after `k` steps.
    fn node(&self, k: usize, buf: &mut DiscretePath, stats: &mut LeafStats) -> (f64, usize) {
        if k == self.steps {
            let v = self.h.finite_part(buf);
            stats.sup_abs = stats.sup_abs.max(v.abs());
            return (v, 0);
        }
        let mut best = (f64::INFINITY, 0);
        for ai in 0..self.grid.len() {
            let v = self.branch(k, ai, buf, stats);
            if v < best.0 {
                best = (v, ai);
            }
        }
        best
    }
}

fn leaf_count(branching: u128, steps: usize) -> Option<u128> {
    let mut total: u128 = 1;
    for _ in 0..steps {
        total = total.checked_mul(branching)?;
    }
    Some(total)
}

fn solve_on_grid(
    l: &Lagrangian,
    h: &TerminalCost,
    t0: f64,
    x0: &DiscretePath,
    n: f64,
    steps: usize,
    grid: &[Vec<f64>],
    budget: u64,
) -> Result<SocResult> {
    let d = l.dim();
    let horizon = l.horizon();
    let branching = grid.len() as u128 * (1u128 << d);
    let leaves = leaf_count(branching, steps).unwrap_or(u128::MAX);
    if leaves > budget as u128 {
        return Err(Error::NodeBudget {
            required: leaves,
            budget,
        });
    }
    let node_count: u128 = (0..=steps).map(|k| leaf_count(branching, k).unwrap()).sum();

    let dt = (horizon - t0) / steps as f64;
    let (mut times, prefix_values) = x0.prefix(t0);
    let anchor = times.len() - 1;
    for k in 1..=steps {
        times.push(if k == steps { horizon } else { t0 + k as f64 * dt });
    }
    let mut values = vec![0.0; times.len() * d];
    values[..prefix_values.len()].copy_from_slice(&prefix_values);
    let buffer = DiscretePath::new(TimeGrid::new(times)?, d, values)?;

    let running: Vec<Vec<f64>> = (0..steps)
        .map(|k| {
            let mid = t0 + (k as f64 + 0.5) * dt;
            grid.iter().map(|a| l.value(mid, a).scale(dt).to_f64()).collect()
        })
        .collect();
    let zero = vec![0.0; d];
    let rest_cost: f64 = (0..steps)
        .map(|k| l.value(t0 + (k as f64 + 0.5) * dt, &zero).scale(dt).to_f64())
        .sum();
    let signs: Vec<Vec<f64>> = (0..1usize << d)
        .map(|m| (0..d).map(|c| if m >> c & 1 == 1 { -1.0 } else { 1.0 }).collect())
        .collect();
    let tree = Tree {
        h,
        grid,
        signs,
        dim: d,
        anchor,
        steps,
        dt,
        sigma: (dt / n).sqrt(),
        running,
    };

    // subtrees under each root control are independent; reduce in grid order
    let root: Vec<(f64, LeafStats)> = (0..grid.len())
        .into_par_iter()
        .map(|ai| {
            let mut buf = buffer.clone();
            let mut stats = LeafStats::default();
            let v = tree.branch(0, ai, &mut buf, &mut stats);
            (v, stats)
        })
        .collect();
    let mut best = (f64::INFINITY, 0);
    let mut observed = 0.0f64;
    for (ai, (v, stats)) in root.iter().enumerate() {
        observed = observed.max(stats.sup_abs);
        if *v < best.0 {
            best = (*v, ai);
        }
    }
    if !best.0.is_finite() {
        return Err(Error::Numeric("every control leads to an infinite cost".into()));
    }
    let sup_h = h.sup_abs().unwrap_or(observed).max(observed);
    Ok(SocResult {
        value: best.0,
        root_control: grid[best.1].clone(),
        steps,
        step: dt,
        control_grid: grid.to_vec(),
        node_count: node_count.min(u64::MAX as u128) as u64,
        leaf_count: leaves as u64,
        lower_bound: -sup_h + (horizon - t0) * l.minorant_floor(),
        upper_bound: sup_h + rest_cost,
    })
}

/// Stochastic value `v_n(t0, x0)` by exact backward induction on the
/// non-recombining tree with two-point noise `±√(Δt/n)` per coordinate.
///
/// The running cost of a step is `ℓ(step midpoint, a)·Δt`, matching the
/// midpoint rule of [`crate::paths::action`].
pub fn solve_soc_tree(prob: &BolzaProblem, t0: f64, x0: &DiscretePath, n: f64, spec: &LatticeSpec) -> Result<SocResult> {
    check_viscosity(n)?;
    let l = prob.lagrangian();
    let h = prob.terminal();
    if !h.is_finite_kind() {
        return Err(Error::Unsupported("the tree solver needs a finite terminal cost".into()));
    }
    if !l.flags().finite_valued {
        return Err(Error::Unsupported("the tree solver needs a finite-valued running cost".into()));
    }
    l.check_time(t0)?;
    if x0.dim() != l.dim() {
        return Err(Error::DimensionMismatch {
            expected: l.dim(),
            got: x0.dim(),
        });
    }
    if spec.steps == 0 {
        return Err(Error::domain("steps", 0.0, 1.0, f64::INFINITY));
    }
    let d = l.dim();
    let horizon = l.horizon();
    if is_close(t0, horizon) {
        let grid = match &spec.control_grid {
            ControlGrid::Explicit { points } => normalize_grid(points, d)?,
            ControlGrid::Auto { .. } => vec![vec![0.0; d]],
        };
        let (times, values) = x0.prefix(horizon);
        let path = DiscretePath::new(TimeGrid::new(times)?, d, values)?;
        let v = h.finite_part(&path);
        return Ok(SocResult {
            value: v,
            root_control: vec![0.0; d],
            steps: 0,
            step: 0.0,
            control_grid: grid,
            node_count: 1,
            leaf_count: 1,
            lower_bound: -v.abs().max(h.sup_abs().unwrap_or(0.0)),
            upper_bound: v.abs().max(h.sup_abs().unwrap_or(0.0)),
        });
    }
    match &spec.control_grid {
        ControlGrid::Explicit { points } => {
            let grid = normalize_grid(points, d)?;
            solve_on_grid(l, h, t0, x0, n, spec.steps, &grid, spec.node_budget)
        }
        ControlGrid::Auto {
            points_per_side,
            initial_radius,
            tolerance,
            max_doublings,
        } => {
            if *points_per_side == 0 || !(*initial_radius > 0.0) {
                return Err(Error::Precondition("auto control grid needs points and a positive radius".into()));
            }
            let mut radius = *initial_radius;
            let mut best: Option<SocResult> = None;
            for _ in 0..=*max_doublings {
                let grid = normalize_grid(&tensor(&symmetric_levels(radius, *points_per_side), d), d)?;
                let res = solve_on_grid(l, h, t0, x0, n, spec.steps, &grid, spec.node_budget)?;
                let improved = best.as_ref().map_or(f64::INFINITY, |b| b.value - res.value);
                if best.as_ref().is_none_or(|b| res.value < b.value) {
                    best = Some(res);
                }
                if improved <= *tolerance {
                    break;
                }
                radius *= 2.0;
            }
            Ok(best.unwrap())
        }
    }
}
