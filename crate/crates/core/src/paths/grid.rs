use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Strictly increasing time nodes `τ_0 < … < τ_N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    nodes: Vec<f64>,
}

/// How to lay out cells on an interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GridSpec {
    Uniform,
    /// Cell widths grow by `ratio` away from the left endpoint; refines toward a
    /// singular start such as `t ↦ √t` at 0.
    Geometric { ratio: f64 },
}

impl GridSpec {
    pub fn build(self, t0: f64, t1: f64, cells: usize) -> Result<TimeGrid> {
        match self {
            GridSpec::Uniform => TimeGrid::uniform(t0, t1, cells),
            GridSpec::Geometric { ratio } => TimeGrid::geometric(t0, t1, cells, ratio),
        }
    }

    /// Parses `"uniform"` or `"geometric:<ratio>"`.
    pub fn parse(s: &str) -> Result<GridSpec> {
        let s = s.trim();
        if s == "uniform" {
            return Ok(GridSpec::Uniform);
        }
        if let Some(r) = s.strip_prefix("geometric:") {
            let ratio: f64 = r
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad geometric ratio in grid {s:?}")))?;
            if !(ratio >= 1.0 && ratio.is_finite()) {
                return Err(Error::Config(format!("geometric ratio must be ≥ 1, got {ratio}")));
            }
            return Ok(GridSpec::Geometric { ratio });
        }
        Err(Error::Config(format!(
            "unknown grid {s:?}; expected \"uniform\" or \"geometric:<ratio>\""
        )))
    }
}

impl TimeGrid {
    pub fn new(nodes: Vec<f64>) -> Result<TimeGrid> {
        if nodes.len() < 2 {
            return Err(Error::Precondition("a time grid needs at least two nodes".into()));
        }
        if nodes.iter().any(|t| !t.is_finite()) {
            return Err(Error::Precondition("time grid nodes must be finite".into()));
        }
        if let Some(w) = nodes.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::Precondition(format!(
                "time grid not strictly increasing at {} → {}",
                w[0], w[1]
            )));
        }
        Ok(TimeGrid { nodes })
    }

    pub fn uniform(t0: f64, t1: f64, cells: usize) -> Result<TimeGrid> {
        if cells == 0 {
            return Err(Error::domain("cells", 0.0, 1.0, f64::INFINITY));
        }
        if !(t1 > t0) {
            return Err(Error::domain("interval end", t1, t0, f64::INFINITY));
        }
        let h = (t1 - t0) / cells as f64;
        let mut nodes: Vec<f64> = (0..cells).map(|i| t0 + i as f64 * h).collect();
        nodes.push(t1);
        TimeGrid::new(nodes)
    }

    pub fn geometric(t0: f64, t1: f64, cells: usize, ratio: f64) -> Result<TimeGrid> {
        if (ratio - 1.0).abs() < 1e-15 {
            return TimeGrid::uniform(t0, t1, cells);
        }
        if cells == 0 {
            return Err(Error::domain("cells", 0.0, 1.0, f64::INFINITY));
        }
        if !(t1 > t0) {
            return Err(Error::domain("interval end", t1, t0, f64::INFINITY));
        }
        // widths w_i = w_0 r^i summing to t1 − t0
        let total = ratio.powi(cells as i32) - 1.0;
        if !total.is_finite() {
            return Err(Error::Precondition(format!(
                "geometric grid with ratio {ratio} over {cells} cells overflows"
            )));
        }
        let mut nodes = Vec::with_capacity(cells + 1);
        nodes.push(t0);
        for i in 1..cells {
            let frac = (ratio.powi(i as i32) - 1.0) / total;
            let t = t0 + (t1 - t0) * frac;
            if t > *nodes.last().unwrap() {
                nodes.push(t);
            }
        }
        nodes.push(t1);
        TimeGrid::new(nodes)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn start(&self) -> f64 {
        self.nodes[0]
    }

    pub fn end(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    pub fn cells(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Union of node sets; nodes within `1e-14` (relative) of an existing node are merged.
    pub fn union(&self, other: &TimeGrid) -> TimeGrid {
        let mut all: Vec<f64> = self.nodes.iter().chain(&other.nodes).copied().collect();
        all.sort_by(|a, b| a.total_cmp(b));
        TimeGrid {
            nodes: dedup_close(all),
        }
    }

    /// Grid with `t` inserted (no-op when `t` is already a node or out of range).
    pub fn with_node(&self, t: f64) -> TimeGrid {
        if t < self.start() || t > self.end() {
            return self.clone();
        }
        let mut nodes = self.nodes.clone();
        match nodes.binary_search_by(|x| x.total_cmp(&t)) {
            Ok(_) => {}
            Err(i) => {
                if !is_close(nodes[i - 1], t) && !(i < nodes.len() && is_close(nodes[i], t)) {
                    nodes.insert(i, t);
                }
            }
        }
        TimeGrid { nodes }
    }

    /// Index `i` of the cell `[τ_i, τ_{i+1}]` containing `s` (clamped to the grid).
    pub fn cell_of(&self, s: f64) -> usize {
        let n = self.nodes.len();
        if s <= self.nodes[0] {
            return 0;
        }
        if s >= self.nodes[n - 1] {
            return n - 2;
        }
        match self.nodes.binary_search_by(|x| x.total_cmp(&s)) {
            Ok(i) => i.min(n - 2),
            Err(i) => i - 1,
        }
    }
}

pub(crate) fn is_close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-14 * a.abs().max(b.abs()).max(1.0)
}

pub(crate) fn dedup_close(sorted: Vec<f64>) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::with_capacity(sorted.len());
    for t in sorted {
        match out.last() {
            Some(&last) if is_close(last, t) => {}
            _ => out.push(t),
        }
    }
    out
}
