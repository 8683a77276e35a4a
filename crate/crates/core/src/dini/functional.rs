use dashmap::DashMap;
use serde::{Deserialize, Serialize};

use crate::bolza::{solve_doc_constrained, BolzaProblem, DocOptions, ValueEstimate};
use crate::error::{Error, Result};
use crate::lagrangian::ExtendedReal;
use crate::paths::{is_close, DiscretePath};
use crate::stochastic::{solve_soc_tree, ControlGrid, LatticeSpec, SocResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Analytic,
    BolzaValue,
    SocValue,
}

/// A candidate solution `u(t, ω)` on `[0, T] × C([0, T])`. Only the prefix
/// `ω|[0, t]` may influence `u(t, ω)`.
pub trait PathFunctional: Send + Sync {
    fn eval(&self, t: f64, x: &DiscretePath) -> Result<ExtendedReal>;
    fn provenance(&self) -> Provenance;
    fn horizon(&self) -> f64;
    fn dim(&self) -> usize;

    /// A full path on `[0, T]` extending `x0|[0, t0]` that nearly attains
    /// `u(t0, x0)`; used as the first supersolution witness.
    fn witness(&self, _t0: f64, _x0: &DiscretePath) -> Result<Option<DiscretePath>> {
        Ok(None)
    }

    /// Discretization allowance attached to `u(t, x)`; zero when exact.
    fn allowance(&self, _t: f64, _x: &DiscretePath) -> Result<f64> {
        Ok(0.0)
    }
}

impl<F: PathFunctional + ?Sized> PathFunctional for &F {
    fn eval(&self, t: f64, x: &DiscretePath) -> Result<ExtendedReal> {
        (**self).eval(t, x)
    }
    fn provenance(&self) -> Provenance {
        (**self).provenance()
    }
    fn horizon(&self) -> f64 {
        (**self).horizon()
    }
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn witness(&self, t0: f64, x0: &DiscretePath) -> Result<Option<DiscretePath>> {
        (**self).witness(t0, x0)
    }
    fn allowance(&self, t: f64, x: &DiscretePath) -> Result<f64> {
        (**self).allowance(t, x)
    }
}

fn check_point(horizon: f64, dim: usize, t: f64, x: &DiscretePath) -> Result<()> {
    if !(0.0..=horizon).contains(&t) && !is_close(t, horizon) {
        return Err(Error::domain("t", t, 0.0, horizon));
    }
    if x.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: x.dim(),
        });
    }
    Ok(())
}

/// Exact cache key: the bits of `t` and of the prefix `x|[0, t]`.
fn cache_key(t: f64, x: &DiscretePath) -> Vec<u64> {
    let (times, values) = x.prefix(t);
    let mut key = Vec::with_capacity(1 + times.len() + values.len());
    key.push(t.to_bits());
    key.extend(times.iter().map(|v| v.to_bits()));
    key.extend(values.iter().map(|v| v.to_bits()));
    key
}

type AnalyticFn = dyn Fn(f64, &DiscretePath) -> ExtendedReal + Send + Sync;

/// A closed-form functional.
pub struct Analytic {
    horizon: f64,
    dim: usize,
    f: Box<AnalyticFn>,
}

impl Analytic {
    pub fn new(
        horizon: f64,
        dim: usize,
        f: impl Fn(f64, &DiscretePath) -> ExtendedReal + Send + Sync + 'static,
    ) -> Analytic {
        Analytic {
            horizon,
            dim,
            f: Box::new(f),
        }
    }

    /// `u(t, ω) = c`.
    pub fn constant(horizon: f64, dim: usize, c: f64) -> Analytic {
        Analytic::new(horizon, dim, move |_, _| ExtendedReal::Finite(c))
    }
}

impl PathFunctional for Analytic {
    fn eval(&self, t: f64, x: &DiscretePath) -> Result<ExtendedReal> {
        check_point(self.horizon, self.dim, t, x)?;
        Ok((self.f)(t, x))
    }
    fn provenance(&self) -> Provenance {
        Provenance::Analytic
    }
    fn horizon(&self) -> f64 {
        self.horizon
    }
    fn dim(&self) -> usize {
        self.dim
    }
}

/// The computed deterministic value `v_0(t, x)` with `N·(T − t)/T` cells on
/// `[t, T]` (at least one). Solves are cached on exact inputs.
pub struct BolzaValue {
    prob: BolzaProblem,
    cells: usize,
    opts: DocOptions,
    cache: DashMap<Vec<u64>, (ValueEstimate, DiscretePath)>,
}

impl BolzaValue {
    pub fn new(prob: BolzaProblem, cells: usize, opts: DocOptions) -> Result<BolzaValue> {
        if cells == 0 {
            return Err(Error::domain("cells", 0.0, 1.0, f64::INFINITY));
        }
        Ok(BolzaValue {
            prob,
            cells,
            opts,
            cache: DashMap::new(),
        })
    }

    pub fn problem(&self) -> &BolzaProblem {
        &self.prob
    }

    pub fn cells_at(&self, t: f64) -> usize {
        let horizon = self.prob.horizon();
        ((self.cells as f64) * (horizon - t) / horizon).round().max(1.0) as usize
    }

    /// Estimate and minimizer at `(t, x)`.
    pub fn estimate(&self, t: f64, x: &DiscretePath) -> Result<(ValueEstimate, DiscretePath)> {
        check_point(self.prob.horizon(), self.prob.dim(), t, x)?;
        let key = cache_key(t, x);
        if let Some(hit) = self.cache.get(&key) {
            return Ok(hit.clone());
        }
        let solved = solve_doc_constrained(&self.prob, t, x, self.cells_at(t), &self.opts)?;
        self.cache.insert(key, solved.clone());
        Ok(solved)
    }

    pub fn cached_solves(&self) -> usize {
        self.cache.len()
    }
}

impl PathFunctional for BolzaValue {
    fn eval(&self, t: f64, x: &DiscretePath) -> Result<ExtendedReal> {
        Ok(self.estimate(t, x)?.0.value)
    }
    fn provenance(&self) -> Provenance {
        Provenance::BolzaValue
    }
    fn horizon(&self) -> f64 {
        self.prob.horizon()
    }
    fn dim(&self) -> usize {
        self.prob.dim()
    }
    fn witness(&self, t0: f64, x0: &DiscretePath) -> Result<Option<DiscretePath>> {
        Ok(Some(self.estimate(t0, x0)?.1))
    }
    fn allowance(&self, t: f64, x: &DiscretePath) -> Result<f64> {
        let est = self.estimate(t, x)?.0;
        Ok(est.discretization_allowance + est.penalty_gap)
    }
}

/// The computed stochastic value `v_n(t, x)` on a fixed step `T / steps`:
/// from time `t` the tree uses `round((T − t)/Δ)` steps (at least one
/// before the horizon). Times off the step lattice are rounded to it.
pub struct SocValue {
    prob: BolzaProblem,
    n: f64,
    steps: usize,
    control_grid: ControlGrid,
    node_budget: u64,
    cache: DashMap<Vec<u64>, SocResult>,
}

impl SocValue {
    pub fn new(prob: BolzaProblem, n: f64, steps: usize, control_grid: ControlGrid) -> Result<SocValue> {
        if steps == 0 {
            return Err(Error::domain("steps", 0.0, 1.0, f64::INFINITY));
        }
        if !(n >= 1.0 && n.is_finite()) {
            return Err(Error::domain("n", n, 1.0, f64::INFINITY));
        }
        Ok(SocValue {
            prob,
            n,
            steps,
            control_grid,
            node_budget: LatticeSpec::DEFAULT_BUDGET,
            cache: DashMap::new(),
        })
    }

    pub fn with_node_budget(mut self, budget: u64) -> SocValue {
        self.node_budget = budget;
        self
    }

    pub fn problem(&self) -> &BolzaProblem {
        &self.prob
    }

    pub fn n(&self) -> f64 {
        self.n
    }

    pub fn step(&self) -> f64 {
        self.prob.horizon() / self.steps as f64
    }

    pub fn steps_at(&self, t: f64) -> usize {
        let horizon = self.prob.horizon();
        if is_close(t, horizon) {
            return 1;
        }
        ((horizon - t) / self.step()).round().max(1.0) as usize
    }

    pub fn result(&self, t: f64, x: &DiscretePath) -> Result<SocResult> {
        check_point(self.prob.horizon(), self.prob.dim(), t, x)?;
        let key = cache_key(t, x);
        if let Some(hit) = self.cache.get(&key) {
            return Ok(hit.clone());
        }
        let spec = LatticeSpec {
            steps: self.steps_at(t),
            control_grid: self.control_grid.clone(),
            node_budget: self.node_budget,
        };
        let res = solve_soc_tree(&self.prob, t, x, self.n, &spec)?;
        self.cache.insert(key, res.clone());
        Ok(res)
    }
}

impl PathFunctional for SocValue {
    fn eval(&self, t: f64, x: &DiscretePath) -> Result<ExtendedReal> {
        Ok(ExtendedReal::Finite(self.result(t, x)?.value))
    }
    fn provenance(&self) -> Provenance {
        Provenance::SocValue
    }
    fn horizon(&self) -> f64 {
        self.prob.horizon()
    }
    fn dim(&self) -> usize {
        self.prob.dim()
    }
}

/// `u + offset`, for fault injection.
pub struct Shifted<F> {
    inner: F,
    offset: f64,
}

impl<F: PathFunctional> Shifted<F> {
    pub fn new(inner: F, offset: f64) -> Shifted<F> {
        Shifted { inner, offset }
    }
}

impl<F: PathFunctional> PathFunctional for Shifted<F> {
    fn eval(&self, t: f64, x: &DiscretePath) -> Result<ExtendedReal> {
        Ok(self.inner.eval(t, x)? + self.offset)
    }
    fn provenance(&self) -> Provenance {
        self.inner.provenance()
    }
    fn horizon(&self) -> f64 {
        self.inner.horizon()
    }
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn witness(&self, t0: f64, x0: &DiscretePath) -> Result<Option<DiscretePath>> {
        self.inner.witness(t0, x0)
    }
    fn allowance(&self, t: f64, x: &DiscretePath) -> Result<f64> {
        self.inner.allowance(t, x)
    }
}
