use serde::{Deserialize, Serialize};

use super::grid::{dedup_close, is_close, TimeGrid};
use super::path::DiscretePath;
use crate::error::{Error, Result};
use crate::lagrangian::{ExtendedReal, Lagrangian};

/// A control `a(s)`: constant, or piecewise constant on the cells of a grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Control {
    Constant { value: Vec<f64> },
    /// `values[i*d..(i+1)*d]` is the control on cell `i` of `grid`; zero outside the grid.
    Piecewise { grid: TimeGrid, values: Vec<f64> },
}

impl Control {
    pub fn constant(value: Vec<f64>) -> Control {
        Control::Constant { value }
    }

    pub fn piecewise(grid: TimeGrid, dim: usize, values: Vec<f64>) -> Result<Control> {
        let expected = grid.cells() * dim;
        if values.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Precondition("control values must be finite".into()));
        }
        Ok(Control::Piecewise { grid, values })
    }

    pub fn dim(&self) -> usize {
        match self {
            Control::Constant { value } => value.len(),
            Control::Piecewise { grid, values } => values.len() / grid.cells(),
        }
    }

    /// Adds `∫_{t0}^{s} a(r) dr` to `out`.
    fn add_drift(&self, t0: f64, s: f64, out: &mut [f64]) {
        if s <= t0 {
            return;
        }
        match self {
            Control::Constant { value } => {
                for (o, a) in out.iter_mut().zip(value) {
                    *o += a * (s - t0);
                }
            }
            Control::Piecewise { grid, values } => {
                let d = out.len();
                let nodes = grid.nodes();
                for i in 0..grid.cells() {
                    let lo = nodes[i].max(t0);
                    let hi = nodes[i + 1].min(s);
                    if hi > lo {
                        for k in 0..d {
                            out[k] += values[i * d + k] * (hi - lo);
                        }
                    }
                }
            }
        }
    }
}

fn check_dims(a: &DiscretePath, b: &DiscretePath) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    Ok(())
}

fn norm(v: impl Iterator<Item = f64>) -> f64 {
    v.map(|x| x * x).sum::<f64>().sqrt()
}

/// `d_∞((t1, ω1), (t2, ω2)) = |t1 − t2| + sup_s |ω1(s ∧ t1) − ω2(s ∧ t2)|`.
///
/// Both stopped paths are piecewise linear on the union of their node sets
/// (plus `t1`, `t2`), so the supremum is attained at one of those nodes.
pub fn dinf_distance(p1: (f64, &DiscretePath), p2: (f64, &DiscretePath)) -> Result<f64> {
    let (t1, w1) = p1;
    let (t2, w2) = p2;
    check_dims(w1, w2)?;
    let mut nodes: Vec<f64> = w1
        .times()
        .iter()
        .chain(w2.times())
        .copied()
        .chain([t1, t2])
        .collect();
    nodes.sort_by(|a, b| a.total_cmp(b));
    let d = w1.dim();
    let mut a = vec![0.0; d];
    let mut b = vec![0.0; d];
    let mut sup = 0.0_f64;
    for s in nodes {
        w1.value_at(s.min(t1), &mut a);
        w2.value_at(s.min(t2), &mut b);
        sup = sup.max(norm(a.iter().zip(&b).map(|(x, y)| x - y)));
    }
    Ok((t1 - t2).abs() + sup)
}

/// `x(· ∧ t)`: equal to `x` on `[0, t]`, constant `x(t)` afterwards; `t` becomes a node.
pub fn stop_path(x: &DiscretePath, t: f64) -> DiscretePath {
    let t = t.clamp(x.start(), x.horizon());
    let grid = x.grid().with_node(t);
    let d = x.dim();
    let stopped = x.at(t);
    let mut values = vec![0.0; grid.nodes().len() * d];
    for (s, chunk) in grid.nodes().iter().zip(values.chunks_mut(d)) {
        if *s <= t {
            x.value_at(*s, chunk);
        } else {
            chunk.copy_from_slice(&stopped);
        }
    }
    DiscretePath::from_parts_unchecked(grid, d, values)
}

/// `x0(· ∧ t0) + A^a − A^a(t0)` with `A^a(s) = ∫_0^s a`.
pub fn apply_control(x0: &DiscretePath, t0: f64, control: &Control) -> Result<DiscretePath> {
    let d = x0.dim();
    if control.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: control.dim(),
        });
    }
    let stopped = stop_path(x0, t0);
    let t0 = t0.clamp(x0.start(), x0.horizon());
    let grid = match control {
        Control::Constant { .. } => stopped.grid().clone(),
        Control::Piecewise { grid, .. } => {
            let inner: Vec<f64> = grid
                .nodes()
                .iter()
                .copied()
                .filter(|&s| s > t0 && s < x0.horizon())
                .collect();
            if inner.is_empty() {
                stopped.grid().clone()
            } else {
                let mut all: Vec<f64> = stopped.times().iter().copied().chain(inner).collect();
                all.sort_by(|a, b| a.total_cmp(b));
                TimeGrid::new(dedup_close(all))?
            }
        }
    };
    let base = stopped.resample(&grid);
    let mut values = base.values().to_vec();
    for (s, chunk) in grid.nodes().iter().zip(values.chunks_mut(d)) {
        control.add_drift(t0, *s, chunk);
    }
    DiscretePath::new(grid, d, values)
}

fn require_unit_horizon(x: &DiscretePath, what: &str) -> Result<()> {
    if x.start() != 0.0 || !is_close(x.horizon(), 1.0) {
        return Err(Error::Precondition(format!(
            "{what} must live on [0, 1], got [{}, {}]",
            x.start(),
            x.horizon()
        )));
    }
    Ok(())
}

/// `(ω1 ⊙_t ω2)(s) = ω1(s ∧ t) + √(1−t)·ω2((s−t)/(1−t))·1_{[t,1]}(s)` on `T = 1`;
/// `t = 1` returns `ω1`.
pub fn concat_scaled(w1: &DiscretePath, t: f64, w2: &DiscretePath) -> Result<DiscretePath> {
    require_unit_horizon(w1, "left path")?;
    require_unit_horizon(w2, "right path")?;
    check_dims(w1, w2)?;
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::domain("t", t, 0.0, 1.0));
    }
    if norm(w2.node(0).iter().copied()) > 1e-12 {
        return Err(Error::Precondition(format!(
            "right path must start at 0, starts at {:?}",
            w2.node(0)
        )));
    }
    if t >= 1.0 {
        return Ok(w1.clone());
    }
    let d = w1.dim();
    let scale = (1.0 - t).sqrt();
    let anchor = w1.at(t);
    let mut times = Vec::with_capacity(w1.len() + w2.len());
    let mut values = Vec::with_capacity((w1.len() + w2.len()) * d);
    for (i, &s) in w1.times().iter().enumerate() {
        if s < t && !is_close(s, t) {
            times.push(s);
            values.extend_from_slice(w1.node(i));
        }
    }
    times.push(t);
    values.extend_from_slice(&anchor);
    let n2 = w2.len();
    for (j, &tau) in w2.times().iter().enumerate().skip(1) {
        let s = if j == n2 - 1 { 1.0 } else { t + (1.0 - t) * tau };
        if s <= *times.last().unwrap() {
            continue;
        }
        times.push(s);
        values.extend(anchor.iter().zip(w2.node(j)).map(|(a, b)| a + scale * b));
    }
    DiscretePath::new(TimeGrid::new(times)?, d, values)
}

/// `ω^{(t)}(s) = (ω(t + s(1−t)) − ω(t))/√(1−t)` on `T = 1`; `t = 1` returns the zero path.
pub fn rescale_path(w: &DiscretePath, t: f64) -> Result<DiscretePath> {
    require_unit_horizon(w, "path")?;
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::domain("t", t, 0.0, 1.0));
    }
    let d = w.dim();
    if t >= 1.0 {
        return DiscretePath::zero(1.0, d);
    }
    let scale = (1.0 - t).sqrt();
    let anchor = w.at(t);
    let mut times = vec![0.0];
    let mut values = vec![0.0; d];
    let n = w.len();
    for (i, &s) in w.times().iter().enumerate() {
        if s <= t || is_close(s, t) {
            continue;
        }
        let tau = if i == n - 1 { 1.0 } else { (s - t) / (1.0 - t) };
        if tau <= *times.last().unwrap() {
            continue;
        }
        times.push(tau);
        values.extend(w.node(i).iter().zip(&anchor).map(|(x, a)| (x - a) / scale));
    }
    DiscretePath::new(TimeGrid::new(times)?, d, values)
}

/// `ℓ^{(t0)}(t, a) = (1−t0)·ℓ(t0 + t(1−t0), a/√(1−t0))` on `T = 1`; `t0 = 1` gives `ℓ ≡ 0`.
pub fn rescale_lagrangian(l: &Lagrangian, t0: f64) -> Result<Lagrangian> {
    if !is_close(l.horizon(), 1.0) {
        return Err(Error::Precondition(format!(
            "rescaling needs horizon 1, got {}",
            l.horizon()
        )));
    }
    if !(0.0..=1.0).contains(&t0) {
        return Err(Error::domain("t0", t0, 0.0, 1.0));
    }
    if t0 >= 1.0 {
        return Lagrangian::zero(l.dim(), 1.0);
    }
    let c = 1.0 - t0;
    let s = c.sqrt();
    let eval = l.eval_fn();
    let phi = l.minorant_fn();
    let d = l.dim();
    let mut out = Lagrangian::custom(
        format!("{}^({t0})", l.name()),
        d,
        1.0,
        move |t, a| {
            let b: Vec<f64> = a.iter().map(|v| v / s).collect();
            eval(t0 + t * c, &b).scale(c)
        },
        // ℓ ≥ φ(|a|) carries over as c·φ(r/√c)
        move |r| c * phi(r / s),
        c * l.minorant_floor(),
        l.flags(),
    )?;
    if let Some(g) = l.gradient_fn() {
        out = out.with_gradient(move |t, a, o| {
            let b: Vec<f64> = a.iter().map(|v| v / s).collect();
            g(t0 + t * c, &b, o);
            o.iter_mut().for_each(|v| *v *= s);
        });
    }
    if let Some(h) = l.conjugate_fn() {
        // inf_a [a·p + c ℓ(·, a/√c)] = c · H(·, p/√c)
        out = out.with_conjugate(move |t, p| {
            let q: Vec<f64> = p.iter().map(|v| v / s).collect();
            c * h(t0 + t * c, &q)
        });
    }
    Ok(out)
}

/// Midpoint-in-time quadrature of `∫_{t0}^{t1} ℓ(s, x'(s)) ds` using the exact
/// cell slopes of the piecewise-linear path. Cells cut by `t0` or `t1` keep
/// their slope and contribute their covered length.
pub fn action(l: &Lagrangian, x: &DiscretePath, t0: f64, t1: f64) -> ExtendedReal {
    let times = x.times();
    let d = x.dim();
    let lo = t0.max(x.start());
    let hi = t1.min(x.horizon());
    if !(hi > lo) {
        return ExtendedReal::ZERO;
    }
    let mut slope = vec![0.0; d];
    let mut total = ExtendedReal::ZERO;
    let first = x.grid().cell_of(lo);
    for i in first..times.len() - 1 {
        let (a, b) = (times[i], times[i + 1]);
        if a >= hi {
            break;
        }
        let (ca, cb) = (a.max(lo), b.min(hi));
        if cb <= ca {
            continue;
        }
        let h = b - a;
        for k in 0..d {
            slope[k] = (x.values()[(i + 1) * d + k] - x.values()[i * d + k]) / h;
        }
        total = total + l.value(0.5 * (ca + cb), &slope).scale(cb - ca);
        if total.is_infinite() {
            break;
        }
    }
    total
}
