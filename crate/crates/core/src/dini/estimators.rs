use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::functional::PathFunctional;
use crate::error::{Error, Result};
use crate::lagrangian::ExtendedReal;
use crate::paths::{apply_control, is_close, Control, DiscretePath, TimeGrid};
use crate::seed::substream;

/// Step sizes for difference quotients and the rules that turn them into a
/// one-sided limit proxy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiniSchedule {
    /// Strictly decreasing positive step sizes.
    pub deltas: Vec<f64>,
    /// Number of trailing quotients used for the min/max proxy.
    pub tail: usize,
    /// Divergence threshold: `|q_last| > growth · max(|q_first_of_tail|, 1)`.
    pub growth: f64,
}

impl Default for DiniSchedule {
    fn default() -> Self {
        DiniSchedule::geometric(0.1, 0.5, 11, 4, 4.0)
    }
}

impl DiniSchedule {
    pub fn geometric(first: f64, ratio: f64, count: usize, tail: usize, growth: f64) -> DiniSchedule {
        DiniSchedule {
            deltas: (0..count).map(|k| first * ratio.powi(k as i32)).collect(),
            tail,
            growth,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.deltas.is_empty() || self.deltas.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
            return Err(Error::Precondition("step sizes must be positive and finite".into()));
        }
        if self.deltas.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Precondition("step sizes must be strictly decreasing".into()));
        }
        if self.tail == 0 || self.tail > self.deltas.len() {
            return Err(Error::Precondition(format!(
                "tail length {} must lie in 1..={}",
                self.tail,
                self.deltas.len()
            )));
        }
        if !(self.growth > 1.0) {
            return Err(Error::domain("growth", self.growth, 1.0, f64::INFINITY));
        }
        Ok(())
    }

    /// Steps that keep `t0 + δ` inside the horizon.
    fn admissible(&self, t0: f64, horizon: f64) -> Result<Vec<f64>> {
        self.validate()?;
        let deltas: Vec<f64> = self
            .deltas
            .iter()
            .copied()
            .filter(|d| t0 + d <= horizon || is_close(t0 + d, horizon))
            .collect();
        if deltas.len() < self.tail {
            return Err(Error::Precondition(format!(
                "only {} step sizes fit before the horizon from t0 = {t0}; need {}",
                deltas.len(),
                self.tail
            )));
        }
        Ok(deltas)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiniKind {
    Lower,
    Upper,
    StochasticUpper,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiniEstimate {
    pub kind: DiniKind,
    /// `(δ, quotient)` in schedule order; `+∞` when the perturbed value is infinite.
    pub quotients: Vec<(f64, ExtendedReal)>,
    /// Monte-Carlo standard error per quotient (zero for deterministic quotients).
    pub standard_errors: Vec<f64>,
    /// Min (lower) or max (upper) over the tail; `None` when diverged.
    pub extrapolated: Option<f64>,
    pub diverged: bool,
    /// Standard error exceeds `|quotient|` at every step.
    pub inconclusive: bool,
    pub schedule: DiniSchedule,
}

fn summarize(
    kind: DiniKind,
    deltas: &[f64],
    quotients: Vec<ExtendedReal>,
    standard_errors: Vec<f64>,
    schedule: &DiniSchedule,
) -> DiniEstimate {
    let tail = &quotients[quotients.len() - schedule.tail..];
    let finite: Option<Vec<f64>> = tail.iter().map(|q| q.finite()).collect();
    let (extrapolated, diverged) = match finite {
        None => (None, true),
        Some(tail) => {
            let first = tail[0];
            let last = tail[tail.len() - 1];
            if last.abs() > schedule.growth * first.abs().max(1.0) {
                (None, true)
            } else {
                let proxy = match kind {
                    DiniKind::Lower => tail.iter().copied().fold(f64::INFINITY, f64::min),
                    _ => tail.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                };
                (Some(proxy), false)
            }
        }
    };
    let inconclusive = quotients
        .iter()
        .zip(&standard_errors)
        .all(|(q, se)| q.finite().is_some_and(|q| *se > q.abs()));
    DiniEstimate {
        kind,
        quotients: deltas.iter().copied().zip(quotients).collect(),
        standard_errors,
        extrapolated,
        diverged,
        inconclusive,
        schedule: schedule.clone(),
    }
}

fn base_value(u: &dyn PathFunctional, t0: f64, x0: &DiscretePath, a: &[f64]) -> Result<f64> {
    let horizon = u.horizon();
    if !(t0 >= 0.0 && t0 < horizon) || is_close(t0, horizon) {
        return Err(Error::domain("t0", t0, 0.0, horizon));
    }
    if a.len() != u.dim() {
        return Err(Error::DimensionMismatch {
            expected: u.dim(),
            got: a.len(),
        });
    }
    match u.eval(t0, x0)? {
        ExtendedReal::Finite(v) => Ok(v),
        ExtendedReal::Infinity => Err(Error::domain("u(t0, x0)", f64::INFINITY, f64::MIN, f64::MAX)),
    }
}

fn deterministic(
    kind: DiniKind,
    u: &dyn PathFunctional,
    t0: f64,
    x0: &DiscretePath,
    a: &[f64],
    schedule: &DiniSchedule,
) -> Result<DiniEstimate> {
    let base = base_value(u, t0, x0, a)?;
    let deltas = schedule.admissible(t0, u.horizon())?;
    let perturbed = apply_control(&extend_to(x0, u.horizon())?, t0, &Control::constant(a.to_vec()))?;
    let quotients = deltas
        .iter()
        .map(|&d| {
            Ok(match u.eval(t0 + d, &perturbed)? {
                ExtendedReal::Finite(v) => ExtendedReal::Finite((v - base) / d),
                ExtendedReal::Infinity => ExtendedReal::Infinity,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let n = quotients.len();
    Ok(summarize(kind, &deltas, quotients, vec![0.0; n], schedule))
}

/// Extends a path that stops before the horizon by a constant tail.
fn extend_to(x: &DiscretePath, horizon: f64) -> Result<DiscretePath> {
    if x.horizon() >= horizon || is_close(x.horizon(), horizon) {
        return Ok(x.clone());
    }
    let mut times = x.times().to_vec();
    times.push(horizon);
    let mut values = x.values().to_vec();
    values.extend_from_slice(x.last());
    DiscretePath::new(TimeGrid::new(times)?, x.dim(), values)
}

/// Difference quotients `[u(t0+δ, x0(·∧t0) + a(· − t0)⁺) − u(t0, x0)]/δ`
/// with the min over the schedule tail as the liminf proxy.
pub fn lower_dini(
    u: &dyn PathFunctional,
    t0: f64,
    x0: &DiscretePath,
    a: &[f64],
    schedule: &DiniSchedule,
) -> Result<DiniEstimate> {
    deterministic(DiniKind::Lower, u, t0, x0, a, schedule)
}

/// As [`lower_dini`] with the max over the tail as the limsup proxy.
pub fn upper_dini(
    u: &dyn PathFunctional,
    t0: f64,
    x0: &DiscretePath,
    a: &[f64],
    schedule: &DiniSchedule,
) -> Result<DiniEstimate> {
    deterministic(DiniKind::Upper, u, t0, x0, a, schedule)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StochasticDiniOptions {
    pub samples: usize,
    pub seed: u64,
    /// Pair every draw with its mirror image; `samples` counts single paths.
    pub antithetic: bool,
}

impl Default for StochasticDiniOptions {
    fn default() -> Self {
        StochasticDiniOptions {
            samples: 2000,
            seed: 0,
            antithetic: true,
        }
    }
}

/// Quotients `[E u(t0+δ, X) − u(t0, x0)]/δ` where `X` follows `x0` up to `t0`
/// and then `x0(t0) + a(s − t0) + W_s` with `Var W_δ = δ/n` per coordinate.
///
/// The same normal draws are rescaled for every `δ`, so quotients along the
/// schedule share their noise.
pub fn stochastic_upper_dini(
    u: &dyn PathFunctional,
    t0: f64,
    x0: &DiscretePath,
    a: &[f64],
    n: f64,
    schedule: &DiniSchedule,
    opts: &StochasticDiniOptions,
) -> Result<DiniEstimate> {
    if !(n >= 1.0 && n.is_finite()) {
        return Err(Error::domain("n", n, 1.0, f64::INFINITY));
    }
    if opts.samples == 0 || (opts.antithetic && opts.samples % 2 == 1) {
        return Err(Error::Precondition(
            "sample count must be positive (and even with antithetic pairs)".into(),
        ));
    }
    let base = base_value(u, t0, x0, a)?;
    let horizon = u.horizon();
    let deltas = schedule.admissible(t0, horizon)?;
    let d = u.dim();
    let units = if opts.antithetic { opts.samples / 2 } else { opts.samples };
    let mut rng = substream(opts.seed, 0);
    let draws: Vec<f64> = (0..units * d).map(|_| rng.sample(StandardNormal)).collect();
    let (prefix_times, prefix_values) = x0.prefix(t0);
    let anchor: Vec<f64> = prefix_values[prefix_values.len() - d..].to_vec();

    let signs: &[f64] = if opts.antithetic { &[1.0, -1.0] } else { &[1.0] };
    let mut quotients = Vec::with_capacity(deltas.len());
    let mut standard_errors = Vec::with_capacity(deltas.len());
    for &delta in &deltas {
        let t = t0 + delta;
        let sd = (delta / n).sqrt();
        let build = |z: &[f64], sign: f64| -> Result<DiscretePath> {
            let mut times = prefix_times.clone();
            let mut values = prefix_values.clone();
            let end: Vec<f64> = (0..d).map(|k| anchor[k] + a[k] * delta + sign * sd * z[k]).collect();
            times.push(t);
            values.extend_from_slice(&end);
            if !is_close(t, horizon) {
                times.push(horizon);
                values.extend_from_slice(&end);
            }
            DiscretePath::new(TimeGrid::new(times)?, d, values)
        };
        let unit_values: Vec<Result<ExtendedReal>> = (0..units)
            .into_par_iter()
            .map(|i| {
                let z = &draws[i * d..(i + 1) * d];
                let mut acc = ExtendedReal::ZERO;
                for &s in signs {
                    acc = acc + u.eval(t, &build(z, s)?)?;
                }
                Ok(acc.scale(1.0 / signs.len() as f64))
            })
            .collect();
        let values: Vec<ExtendedReal> = unit_values.into_iter().collect::<Result<_>>()?;
        let finite: Option<Vec<f64>> = values.iter().map(|v| v.finite()).collect();
        match finite {
            None => {
                quotients.push(ExtendedReal::Infinity);
                standard_errors.push(f64::INFINITY);
            }
            Some(vs) => {
                let k = vs.len() as f64;
                let mean = vs.iter().sum::<f64>() / k;
                let var = if vs.len() > 1 {
                    vs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0)
                } else {
                    0.0
                };
                quotients.push(ExtendedReal::Finite((mean - base) / delta));
                standard_errors.push((var / k).sqrt() / delta);
            }
        }
    }
    Ok(summarize(DiniKind::StochasticUpper, &deltas, quotients, standard_errors, schedule))
}
