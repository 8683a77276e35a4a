use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::lagrangian::ExtendedReal;
use crate::paths::DiscretePath;

pub type PathCostFn = dyn Fn(&DiscretePath) -> f64 + Send + Sync;
pub type TimeFn = dyn Fn(f64, &mut [f64]) + Send + Sync;

/// Squared distances at or below this count as membership of the target set.
const MEMBERSHIP_TOL: f64 = 1e-20;

/// A target set `K` of paths.
#[derive(Clone)]
pub enum TargetSet {
    /// `K = {γ}` for a known path `γ(t)`.
    Singleton { name: String, path: Arc<TimeFn> },
    /// `K` described only through a squared distance functional.
    General { name: String, dist_sq: Arc<PathCostFn> },
}

impl TargetSet {
    pub fn singleton(name: impl Into<String>, path: impl Fn(f64, &mut [f64]) + Send + Sync + 'static) -> TargetSet {
        TargetSet::Singleton {
            name: name.into(),
            path: Arc::new(path),
        }
    }

    pub fn general(name: impl Into<String>, dist_sq: impl Fn(&DiscretePath) -> f64 + Send + Sync + 'static) -> TargetSet {
        TargetSet::General {
            name: name.into(),
            dist_sq: Arc::new(dist_sq),
        }
    }

    /// Squared distance; for a singleton, the trapezoid-weighted discrete `L²`
    /// distance over the nodes of `x`.
    pub fn dist_sq(&self, x: &DiscretePath) -> f64 {
        match self {
            TargetSet::General { dist_sq, .. } => dist_sq(x),
            TargetSet::Singleton { path, .. } => {
                let times = x.times();
                let d = x.dim();
                let mut g = vec![0.0; d];
                let mut sq = Vec::with_capacity(times.len());
                for (i, &t) in times.iter().enumerate() {
                    path(t, &mut g);
                    sq.push(x.node(i).iter().zip(&g).map(|(a, b)| (a - b) * (a - b)).sum::<f64>());
                }
                times
                    .windows(2)
                    .zip(sq.windows(2))
                    .map(|(t, s)| 0.5 * (t[1] - t[0]) * (s[0] + s[1]))
                    .sum()
            }
        }
    }

    pub fn name(&self) -> &str {
        match self {
            TargetSet::Singleton { name, .. } | TargetSet::General { name, .. } => name,
        }
    }
}

/// Terminal cost `h`: a finite functional, or `finite + ∞·1_{K^c}`.
#[derive(Clone)]
pub enum TerminalCost {
    Finite {
        name: String,
        eval: Arc<PathCostFn>,
        /// Known bound on `sup |h|`, when `h` is bounded.
        sup_abs: Option<f64>,
    },
    Constrained {
        name: String,
        finite: Arc<PathCostFn>,
        target: TargetSet,
    },
}

impl fmt::Debug for TerminalCost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TerminalCost::Finite { name, sup_abs, .. } => f
                .debug_struct("Finite")
                .field("name", name)
                .field("sup_abs", sup_abs)
                .finish(),
            TerminalCost::Constrained { name, target, .. } => f
                .debug_struct("Constrained")
                .field("name", name)
                .field("target", &target.name())
                .finish(),
        }
    }
}

impl TerminalCost {
    pub fn finite(
        name: impl Into<String>,
        eval: impl Fn(&DiscretePath) -> f64 + Send + Sync + 'static,
        sup_abs: Option<f64>,
    ) -> TerminalCost {
        TerminalCost::Finite {
            name: name.into(),
            eval: Arc::new(eval),
            sup_abs,
        }
    }

    pub fn constrained(
        name: impl Into<String>,
        finite: impl Fn(&DiscretePath) -> f64 + Send + Sync + 'static,
        target: TargetSet,
    ) -> TerminalCost {
        TerminalCost::Constrained {
            name: name.into(),
            finite: Arc::new(finite),
            target,
        }
    }

    pub fn name(&self) -> &str {
        match self {
            TerminalCost::Finite { name, .. } | TerminalCost::Constrained { name, .. } => name,
        }
    }

    pub fn is_finite_kind(&self) -> bool {
        matches!(self, TerminalCost::Finite { .. })
    }

    pub fn sup_abs(&self) -> Option<f64> {
        match self {
            TerminalCost::Finite { sup_abs, .. } => *sup_abs,
            TerminalCost::Constrained { .. } => None,
        }
    }

    pub fn target(&self) -> Option<&TargetSet> {
        match self {
            TerminalCost::Finite { .. } => None,
            TerminalCost::Constrained { target, .. } => Some(target),
        }
    }

    /// The finite functional (the whole cost for the finite kind).
    pub fn finite_part(&self, x: &DiscretePath) -> f64 {
        match self {
            TerminalCost::Finite { eval, .. } => eval(x),
            TerminalCost::Constrained { finite, .. } => finite(x),
        }
    }

    pub fn dist_sq(&self, x: &DiscretePath) -> f64 {
        self.target().map_or(0.0, |k| k.dist_sq(x))
    }

    pub fn eval(&self, x: &DiscretePath) -> ExtendedReal {
        match self {
            TerminalCost::Finite { eval, .. } => ExtendedReal::Finite(eval(x)),
            TerminalCost::Constrained { finite, target, .. } => {
                if target.dist_sq(x) <= MEMBERSHIP_TOL {
                    ExtendedReal::Finite(finite(x))
                } else {
                    ExtendedReal::Infinity
                }
            }
        }
    }

    /// Registry: `zero`, `constant:<c>`, `endpoint_quadratic:<c>`, `tanh_endpoint`,
    /// `tanh_max`, `sqrt_target`, `constant_target:<c>`, `endpoint_target:<c>`.
    ///
    /// Multi-dimensional variants act coordinate-wise (sums for quadratics,
    /// averages for the bounded `tanh` costs).
    pub fn from_name(name: &str, dim: usize) -> Result<TerminalCost> {
        let name = name.trim();
        let param = |prefix: &str| -> Result<Option<f64>> {
            match name.strip_prefix(prefix) {
                None => Ok(None),
                Some(v) => v
                    .trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|c| c.is_finite())
                    .map(Some)
                    .ok_or_else(|| Error::Config(format!("bad parameter in terminal cost {name:?}"))),
            }
        };
        let inv_d = 1.0 / dim as f64;
        if name == "zero" {
            return Ok(TerminalCost::finite(name, |_| 0.0, Some(0.0)));
        }
        if let Some(c) = param("constant:")? {
            return Ok(TerminalCost::finite(name, move |_| c, Some(c.abs())));
        }
        if let Some(c) = param("endpoint_quadratic:")? {
            return Ok(TerminalCost::finite(
                name,
                move |x| x.last().iter().map(|v| (v - c) * (v - c)).sum(),
                None,
            ));
        }
        if name == "tanh_endpoint" {
            return Ok(TerminalCost::finite(
                name,
                move |x| x.last().iter().map(|v| v.tanh()).sum::<f64>() * inv_d,
                Some(1.0),
            ));
        }
        if name == "tanh_max" {
            return Ok(TerminalCost::finite(
                name,
                move |x| (0..x.dim()).map(|k| x.max_coordinate(k).tanh()).sum::<f64>() * inv_d,
                Some(1.0),
            ));
        }
        if name == "sqrt_target" {
            return Ok(TerminalCost::constrained(
                name,
                |_| 0.0,
                TargetSet::singleton("sqrt", |t, out| out.fill(t.max(0.0).sqrt())),
            ));
        }
        if let Some(c) = param("constant_target:")? {
            return Ok(TerminalCost::constrained(
                name,
                |_| 0.0,
                TargetSet::singleton(format!("constant {c}"), move |_, out| out.fill(c)),
            ));
        }
        if let Some(c) = param("endpoint_target:")? {
            return Ok(TerminalCost::constrained(
                name,
                |_| 0.0,
                TargetSet::general(format!("endpoint {c}"), move |x| {
                    x.last().iter().map(|v| (v - c) * (v - c)).sum()
                }),
            ));
        }
        Err(Error::Config(format!("unknown terminal cost {name:?}")))
    }
}
