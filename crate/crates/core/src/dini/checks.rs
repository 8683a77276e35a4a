use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::functional::PathFunctional;
use crate::bolza::{minimize_continuation, rest_path, BolzaProblem, DocOptions};
use crate::error::{Error, Result};
use crate::lagrangian::ExtendedReal;
use crate::paths::{action, apply_control, is_close, Control, DiscretePath, TimeGrid};
use crate::seed::substream;

/// One evaluated inequality. Interior entries compare `u(t0, x0)` (left) with
/// a cost-to-go expression (right); terminal entries compare `u(T, x)` with
/// `h(x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckEntry {
    pub sample: usize,
    pub terminal: bool,
    pub t0: f64,
    pub t: f64,
    pub x0_at_t0: Vec<f64>,
    pub control: Option<Vec<f64>>,
    pub left: ExtendedReal,
    pub right: ExtendedReal,
    pub standard_error: f64,
    /// `right − left` when both sides are finite.
    pub slack: Option<f64>,
    pub violation: bool,
    pub note: Option<String>,
    pub error: Option<String>,
}

impl CheckEntry {
    fn new(sample: usize, terminal: bool, t0: f64, t: f64, x0: &DiscretePath) -> CheckEntry {
        CheckEntry {
            sample,
            terminal,
            t0,
            t,
            x0_at_t0: x0.at(t0),
            control: None,
            left: ExtendedReal::ZERO,
            right: ExtendedReal::ZERO,
            standard_error: 0.0,
            slack: None,
            violation: false,
            note: None,
            error: None,
        }
    }

    fn with_sides(mut self, left: ExtendedReal, right: ExtendedReal) -> CheckEntry {
        self.left = left;
        self.right = right;
        self.slack = match (left, right) {
            (ExtendedReal::Finite(l), ExtendedReal::Finite(r)) => Some(r - l),
            _ => None,
        };
        self
    }

    fn failed(mut self, e: Error) -> CheckEntry {
        self.error = Some(e.to_string());
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub check: String,
    pub tolerance: f64,
    pub entries: Vec<CheckEntry>,
    pub violations: usize,
    pub errors: usize,
    /// Caveats on what the check covers.
    pub scope: Option<String>,
}

impl CheckReport {
    fn new(check: &str, tolerance: f64, entries: Vec<CheckEntry>, scope: Option<String>) -> CheckReport {
        CheckReport {
            check: check.into(),
            tolerance,
            violations: entries.iter().filter(|e| e.violation).count(),
            errors: entries.iter().filter(|e| e.error.is_some()).count(),
            entries,
            scope,
        }
    }

    pub fn passed(&self) -> bool {
        self.violations == 0 && self.errors == 0
    }

    /// Largest `left − right` over interior entries with both sides finite.
    pub fn max_excess(&self) -> f64 {
        self.entries
            .iter()
            .filter(|e| !e.terminal)
            .filter_map(|e| e.slack)
            .fold(f64::NEG_INFINITY, |m, s| m.max(-s))
    }
}

/// `left > right + tol`, with `+∞` on the left only exceeding a finite right.
fn exceeds(left: ExtendedReal, right: ExtendedReal, tol: f64) -> bool {
    match (left, right) {
        (ExtendedReal::Finite(l), ExtendedReal::Finite(r)) => l > r + tol,
        (ExtendedReal::Infinity, ExtendedReal::Finite(_)) => true,
        _ => false,
    }
}

fn check_dims(u: &dyn PathFunctional, prob: &BolzaProblem) -> Result<()> {
    if u.dim() != prob.dim() {
        return Err(Error::DimensionMismatch {
            expected: prob.dim(),
            got: u.dim(),
        });
    }
    if !is_close(u.horizon(), prob.horizon()) {
        return Err(Error::Precondition(format!(
            "functional horizon {} differs from problem horizon {}",
            u.horizon(),
            prob.horizon()
        )));
    }
    Ok(())
}

fn check_times(t0: f64, t: f64, horizon: f64) -> Result<()> {
    if !(t0 >= 0.0 && t0 < horizon) {
        return Err(Error::domain("t0", t0, 0.0, horizon));
    }
    if !(t > t0 && (t <= horizon || is_close(t, horizon))) {
        return Err(Error::domain("t", t, t0, horizon));
    }
    Ok(())
}

/// Terminal entry: `u(T, x)` against `h(x)`. A subsolution needs `u ≤ h`, a
/// supersolution `u ≥ h`.
fn terminal_entry(
    u: &dyn PathFunctional,
    prob: &BolzaProblem,
    sample: usize,
    x: &DiscretePath,
    sub: bool,
    tol: f64,
) -> CheckEntry {
    let horizon = prob.horizon();
    let entry = CheckEntry::new(sample, true, horizon, horizon, x);
    match u.eval(horizon, x) {
        Err(e) => entry.failed(e),
        Ok(uv) => {
            let h = prob.terminal().eval(x);
            let mut entry = entry.with_sides(uv, h);
            entry.violation = if sub { exceeds(uv, h, tol) } else { exceeds(h, uv, tol) };
            entry
        }
    }
}

/// One sample `(t0, x0, t, a)` of the stochastic subsolution inequality.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SocSample {
    pub t0: f64,
    pub x0: DiscretePath,
    pub t: f64,
    pub control: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Noise {
    /// Gaussian increments, `samples` paths per check sample.
    Gaussian { samples: usize, seed: u64, antithetic: bool },
    /// Exact expectation over the `2^d` sign patterns `±√((t − t0)/n)`;
    /// matches one step of the tree solver.
    TwoPoint,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SocCheckOptions {
    pub noise: Noise,
    /// Linear cells of the simulated path on `[t0, t]`.
    pub cells: usize,
    /// Added to `3·SE` before a difference counts as a violation.
    pub tolerance: f64,
}

impl Default for SocCheckOptions {
    fn default() -> Self {
        SocCheckOptions {
            noise: Noise::Gaussian {
                samples: 64,
                seed: 0,
                antithetic: true,
            },
            cells: 1,
            tolerance: 1e-6,
        }
    }
}

/// Builds `x0` up to `t0`, then `x0(t0) + a(s − t0) + W_s` on `cells` cells
/// of `[t0, t]`, constant to the horizon. `increments[j*d + k]` is the noise
/// of cell `j` in coordinate `k`.
fn driven_path(
    x0: &DiscretePath,
    t0: f64,
    t: f64,
    horizon: f64,
    a: &[f64],
    increments: &[f64],
    cells: usize,
) -> Result<DiscretePath> {
    let d = a.len();
    let (mut times, mut values) = x0.prefix(t0);
    let mut cur: Vec<f64> = values[values.len() - d..].to_vec();
    let w = (t - t0) / cells as f64;
    for j in 0..cells {
        let s = if j + 1 == cells { t } else { t0 + (j + 1) as f64 * w };
        for k in 0..d {
            cur[k] += a[k] * w + increments[j * d + k];
        }
        times.push(s);
        values.extend_from_slice(&cur);
    }
    if !is_close(t, horizon) {
        times.push(horizon);
        values.extend_from_slice(&cur);
    }
    DiscretePath::new(TimeGrid::new(times)?, d, values)
}

/// Checks `u(t0, x0) ≤ E[∫_{t0}^{t} ℓ(s, a) ds + u(t, X^a)]` for constant
/// controls, where `X^a` is `x0` perturbed by `a(s − t0)` plus scaled
/// Brownian noise of variance `(s − t0)/n`, and `u(T, ·) ≤ h` at each
/// sample's frozen path. The running cost uses the midpoint rule per cell.
pub fn check_subsolution_soc(
    u: &dyn PathFunctional,
    prob: &BolzaProblem,
    n: f64,
    samples: &[SocSample],
    opts: &SocCheckOptions,
) -> Result<CheckReport> {
    check_dims(u, prob)?;
    if !(n >= 1.0 && n.is_finite()) {
        return Err(Error::domain("n", n, 1.0, f64::INFINITY));
    }
    if opts.cells == 0 {
        return Err(Error::domain("cells", 0.0, 1.0, f64::INFINITY));
    }
    if let Noise::Gaussian { samples: m, antithetic, .. } = opts.noise {
        if m == 0 || (antithetic && m % 2 == 1) {
            return Err(Error::Precondition(
                "Monte-Carlo sample count must be positive (and even with antithetic pairs)".into(),
            ));
        }
    }
    let horizon = prob.horizon();
    let l = prob.lagrangian();
    let d = prob.dim();

    let interior = |i: usize, s: &SocSample| -> Result<CheckEntry> {
        check_times(s.t0, s.t, horizon)?;
        if s.control.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: s.control.len(),
            });
        }
        let left = u.eval(s.t0, &s.x0)?;
        let w = (s.t - s.t0) / opts.cells as f64;
        let running: ExtendedReal = (0..opts.cells)
            .map(|j| l.value(s.t0 + (j as f64 + 0.5) * w, &s.control).scale(w))
            .sum();
        let sd = (w / n).sqrt();
        // per-unit averages of u(t, X)
        let units: Vec<ExtendedReal> = match &opts.noise {
            Noise::TwoPoint => {
                let mut acc = ExtendedReal::ZERO;
                let patterns = 1usize << (d * opts.cells);
                for m in 0..patterns {
                    let inc: Vec<f64> = (0..d * opts.cells)
                        .map(|b| if m >> b & 1 == 1 { -sd } else { sd })
                        .collect();
                    acc = acc + u.eval(s.t, &driven_path(&s.x0, s.t0, s.t, horizon, &s.control, &inc, opts.cells)?)?;
                }
                vec![acc.scale(1.0 / patterns as f64)]
            }
            Noise::Gaussian {
                samples: m,
                seed,
                antithetic,
            } => {
                let mut rng = substream(*seed, i as u64);
                let count = if *antithetic { m / 2 } else { *m };
                let z: Vec<f64> = (0..count * d * opts.cells)
                    .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
                    .collect();
                let signs: &[f64] = if *antithetic { &[1.0, -1.0] } else { &[1.0] };
                (0..count)
                    .into_par_iter()
                    .map(|c| {
                        let base = &z[c * d * opts.cells..(c + 1) * d * opts.cells];
                        let mut acc = ExtendedReal::ZERO;
                        for &sign in signs {
                            let inc: Vec<f64> = base.iter().map(|v| sign * v).collect();
                            acc = acc + u.eval(s.t, &driven_path(&s.x0, s.t0, s.t, horizon, &s.control, &inc, opts.cells)?)?;
                        }
                        Ok(acc.scale(1.0 / signs.len() as f64))
                    })
                    .collect::<Result<_>>()?
            }
        };
        let (expectation, se) = match units.iter().map(|v| v.finite()).collect::<Option<Vec<f64>>>() {
            None => (ExtendedReal::Infinity, 0.0),
            Some(vs) => {
                let k = vs.len() as f64;
                let mean = vs.iter().sum::<f64>() / k;
                let se = if vs.len() > 1 {
                    (vs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0) / k).sqrt()
                } else {
                    0.0
                };
                (ExtendedReal::Finite(mean), se)
            }
        };
        let mut entry = CheckEntry::new(i, false, s.t0, s.t, &s.x0).with_sides(left, running + expectation);
        entry.control = Some(s.control.clone());
        entry.standard_error = se;
        entry.violation = exceeds(left, entry.right, opts.tolerance + 3.0 * se);
        Ok(entry)
    };

    let mut entries: Vec<CheckEntry> = samples
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            interior(i, s).unwrap_or_else(|e| CheckEntry::new(i, false, s.t0, s.t, &s.x0).failed(e))
        })
        .collect();
    let terminal: Vec<CheckEntry> = samples
        .par_iter()
        .enumerate()
        .map(|(i, s)| match rest_path(&s.x0, s.t0, horizon) {
            Ok(x) => terminal_entry(u, prob, i, &x, true, opts.tolerance),
            Err(e) => CheckEntry::new(i, true, horizon, horizon, &s.x0).failed(e),
        })
        .collect();
    entries.extend(terminal);
    Ok(CheckReport::new("subsolution_soc", opts.tolerance, entries, None))
}

/// One sample `(t0, x0, t)` of the minimax supersolution inequality.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuperSample {
    pub t0: f64,
    pub x0: DiscretePath,
    pub t: f64,
}

#[derive(Clone, Debug)]
pub struct SuperCheckOptions {
    pub tolerance: f64,
    /// Cells of the fallback continuation search on `[t0, t]`.
    pub search_cells: usize,
    pub search: DocOptions,
}

impl Default for SuperCheckOptions {
    fn default() -> Self {
        SuperCheckOptions {
            tolerance: 1e-6,
            search_cells: 4,
            search: DocOptions {
                restarts: 2,
                estimate_allowance: false,
                ..DocOptions::default()
            },
        }
    }
}

/// Checks that some continuation `x` of `x0` satisfies
/// `u(t0, x0) ≥ ∫_{t0}^{t} ℓ(s, x') ds + u(t, x) − tol`, and `u(T, ·) ≥ h` at
/// each sample's frozen path.
///
/// Candidates in order: the functional's own witness, the zero-velocity
/// continuation, then a piecewise-linear search with `u(t, ·)` as terminal
/// cost. The search is only run when the first two fail.
pub fn check_minimax_super(
    u: &dyn PathFunctional,
    prob: &BolzaProblem,
    samples: &[SuperSample],
    opts: &SuperCheckOptions,
) -> Result<CheckReport> {
    check_dims(u, prob)?;
    let horizon = prob.horizon();
    let l = prob.lagrangian();
    let right_side = |x: &DiscretePath, t0: f64, t: f64| -> Result<ExtendedReal> {
        Ok(action(l, x, t0, t) + u.eval(t, x)?)
    };

    let interior = |i: usize, s: &SuperSample| -> Result<CheckEntry> {
        check_times(s.t0, s.t, horizon)?;
        let left = u.eval(s.t0, &s.x0)?;
        let entry = CheckEntry::new(i, false, s.t0, s.t, &s.x0);
        let ExtendedReal::Finite(lv) = left else {
            let mut entry = entry.with_sides(left, left);
            entry.note = Some("infinite left side".into());
            return Ok(entry);
        };
        let found = |r: ExtendedReal| r.finite().is_some_and(|r| r <= lv + opts.tolerance);
        let mut best: Option<(ExtendedReal, &str)> = None;
        let consider = |best: &mut Option<(ExtendedReal, &'static str)>, r: ExtendedReal, label: &'static str| {
            if best.as_ref().is_none_or(|(b, _)| r < *b) {
                *best = Some((r, label));
            }
        };
        let done = |best: &Option<(ExtendedReal, &str)>| best.as_ref().is_some_and(|(r, _)| found(*r));
        if let Some(w) = u.witness(s.t0, &s.x0)? {
            consider(&mut best, right_side(&w, s.t0, s.t)?, "witness");
        }
        if !done(&best) {
            consider(&mut best, right_side(&rest_path(&s.x0, s.t0, horizon)?, s.t0, s.t)?, "zero_velocity");
        }
        if !done(&best) {
            let terminal = |x: &DiscretePath| u.eval(s.t, x).map_or(f64::INFINITY, |v| v.to_f64());
            let run = minimize_continuation(l, &s.x0, s.t0, s.t, opts.search_cells, &terminal, &opts.search)?;
            consider(&mut best, right_side(&run.path, s.t0, s.t)?, "search");
        }
        let (right, label) = best.expect("at least one candidate");
        let mut entry = entry.with_sides(left, right);
        entry.violation = !found(right);
        entry.note = Some(label.into());
        Ok(entry)
    };

    let mut entries: Vec<CheckEntry> = samples
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            interior(i, s).unwrap_or_else(|e| CheckEntry::new(i, false, s.t0, s.t, &s.x0).failed(e))
        })
        .collect();
    let terminal: Vec<CheckEntry> = samples
        .par_iter()
        .enumerate()
        .map(|(i, s)| match rest_path(&s.x0, s.t0, horizon) {
            Ok(x) => terminal_entry(u, prob, i, &x, false, opts.tolerance),
            Err(e) => CheckEntry::new(i, true, horizon, horizon, &s.x0).failed(e),
        })
        .collect();
    entries.extend(terminal);
    Ok(CheckReport::new(
        "minimax_super",
        opts.tolerance,
        entries,
        Some("witnesses are searched among piecewise-linear continuations only".into()),
    ))
}

/// One sample `(t0, x0, t, x)`: the continuation is `x0` on `[0, t0]` driven
/// by `continuation` afterwards (zero velocity outside its grid).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubSample {
    pub t0: f64,
    pub x0: DiscretePath,
    pub t: f64,
    pub continuation: Control,
}

impl SubSample {
    pub fn path(&self, horizon: f64) -> Result<DiscretePath> {
        apply_control(&rest_path(&self.x0, self.t0, horizon)?, self.t0, &self.continuation)
    }
}

/// Checks `u(t0, x0) ≤ ∫_{t0}^{t} ℓ(s, x') ds + u(t, x) + tol` on the given
/// continuations and `u(T, x) ≤ h(x) + tol` on their full paths.
pub fn check_minimax_sub(
    u: &dyn PathFunctional,
    prob: &BolzaProblem,
    samples: &[SubSample],
    tolerance: f64,
) -> Result<CheckReport> {
    check_dims(u, prob)?;
    let horizon = prob.horizon();
    let l = prob.lagrangian();
    let entries: Vec<Vec<CheckEntry>> = samples
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let x = match check_times(s.t0, s.t, horizon).and_then(|_| s.path(horizon)) {
                Ok(x) => x,
                Err(e) => {
                    return vec![CheckEntry::new(i, false, s.t0, s.t, &s.x0).failed(e)];
                }
            };
            let interior = (|| -> Result<CheckEntry> {
                let left = u.eval(s.t0, &s.x0)?;
                let right = action(l, &x, s.t0, s.t) + u.eval(s.t, &x)?;
                let mut entry = CheckEntry::new(i, false, s.t0, s.t, &s.x0).with_sides(left, right);
                entry.violation = exceeds(left, right, tolerance);
                Ok(entry)
            })()
            .unwrap_or_else(|e| CheckEntry::new(i, false, s.t0, s.t, &s.x0).failed(e));
            vec![interior, terminal_entry(u, prob, i, &x, true, tolerance)]
        })
        .collect();
    let (mut interior, terminal): (Vec<CheckEntry>, Vec<CheckEntry>) =
        entries.into_iter().flatten().partition(|e| !e.terminal);
    interior.extend(terminal);
    Ok(CheckReport::new("minimax_sub", tolerance, interior, None))
}
