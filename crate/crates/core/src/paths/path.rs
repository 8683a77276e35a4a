use serde::{Deserialize, Serialize};

use super::grid::{is_close, TimeGrid};
use crate::error::{Error, Result};

/// A piecewise-linear path in `R^d` given by its values at grid nodes.
///
/// Values are stored row-major: node `i` occupies `values[i*d .. (i+1)*d]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscretePath {
    grid: TimeGrid,
    dim: usize,
    values: Vec<f64>,
}

impl DiscretePath {
    pub fn new(grid: TimeGrid, dim: usize, values: Vec<f64>) -> Result<DiscretePath> {
        if dim == 0 {
            return Err(Error::Precondition("path dimension must be at least 1".into()));
        }
        let expected = grid.nodes().len() * dim;
        if values.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Precondition("path values must be finite".into()));
        }
        Ok(DiscretePath { grid, dim, values })
    }

    pub(crate) fn from_parts_unchecked(grid: TimeGrid, dim: usize, values: Vec<f64>) -> DiscretePath {
        debug_assert_eq!(values.len(), grid.nodes().len() * dim);
        DiscretePath { grid, dim, values }
    }

    /// Samples `f(t, out)` at every grid node.
    pub fn from_fn(grid: TimeGrid, dim: usize, mut f: impl FnMut(f64, &mut [f64])) -> Result<DiscretePath> {
        let mut values = vec![0.0; grid.nodes().len() * dim];
        for (t, chunk) in grid.nodes().iter().zip(values.chunks_mut(dim)) {
            f(*t, chunk);
        }
        DiscretePath::new(grid, dim, values)
    }

    pub fn constant(grid: TimeGrid, point: &[f64]) -> Result<DiscretePath> {
        let dim = point.len();
        DiscretePath::from_fn(grid, dim, |_, out| out.copy_from_slice(point))
    }

    /// The zero path on `[0, horizon]` with a single cell.
    pub fn zero(horizon: f64, dim: usize) -> Result<DiscretePath> {
        DiscretePath::constant(TimeGrid::new(vec![0.0, horizon])?, &vec![0.0; dim])
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn times(&self) -> &[f64] {
        self.grid.nodes()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.grid.nodes().len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn start(&self) -> f64 {
        self.grid.start()
    }

    pub fn horizon(&self) -> f64 {
        self.grid.end()
    }

    pub fn last(&self) -> &[f64] {
        self.node(self.len() - 1)
    }

    /// Linear interpolation at `s`; constant extrapolation outside the grid.
    pub fn value_at(&self, s: f64, out: &mut [f64]) {
        let times = self.grid.nodes();
        let n = times.len();
        if s <= times[0] {
            out.copy_from_slice(self.node(0));
            return;
        }
        if s >= times[n - 1] {
            out.copy_from_slice(self.node(n - 1));
            return;
        }
        let i = self.grid.cell_of(s);
        let (t0, t1) = (times[i], times[i + 1]);
        let w = (s - t0) / (t1 - t0);
        let (a, b) = (self.node(i), self.node(i + 1));
        for k in 0..self.dim {
            out[k] = if w == 0.0 { a[k] } else if w == 1.0 { b[k] } else { a[k] + w * (b[k] - a[k]) };
        }
    }

    pub fn at(&self, s: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.value_at(s, &mut out);
        out
    }

    /// The same piecewise-linear function sampled on `grid`.
    pub fn resample(&self, grid: &TimeGrid) -> DiscretePath {
        let mut values = vec![0.0; grid.nodes().len() * self.dim];
        for (t, chunk) in grid.nodes().iter().zip(values.chunks_mut(self.dim)) {
            self.value_at(*t, chunk);
        }
        DiscretePath::from_parts_unchecked(grid.clone(), self.dim, values)
    }

    /// Node times and values on `[start, t]`, with `t` appended as a node when
    /// it is not already one.
    pub(crate) fn prefix(&self, t: f64) -> (Vec<f64>, Vec<f64>) {
        let times = self.grid.nodes();
        let mut ts = Vec::new();
        let mut vs = Vec::new();
        for (i, &s) in times.iter().enumerate() {
            if s < t && !is_close(s, t) {
                ts.push(s);
                vs.extend_from_slice(self.node(i));
            }
        }
        ts.push(t);
        vs.extend_from_slice(&self.at(t));
        (ts, vs)
    }

    /// Maximum of coordinate `k` over the path (attained at a node).
    pub fn max_coordinate(&self, k: usize) -> f64 {
        self.values
            .iter()
            .skip(k)
            .step_by(self.dim)
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}
