use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::paths::{is_close, DiscretePath, TimeGrid};
use crate::seed::substream;

pub(crate) fn check_viscosity(n: f64) -> Result<()> {
    if !(n >= 1.0 && n.is_finite()) {
        return Err(Error::domain("n", n, 1.0, f64::INFINITY));
    }
    Ok(())
}

/// Node layout of a sampled path: the prefix of `x0` on `[0, t0]`, then the
/// nodes of `grid` strictly after `t0`.
pub(crate) struct SampleLayout {
    pub times: Vec<f64>,
    pub prefix_values: Vec<f64>,
    /// Index of the node at `t0`.
    pub anchor: usize,
    pub widths: Vec<f64>,
}

impl SampleLayout {
    pub fn new(x0: &DiscretePath, t0: f64, grid: &TimeGrid) -> Result<SampleLayout> {
        if grid.start() > t0 && !is_close(grid.start(), t0) {
            return Err(Error::Precondition(format!(
                "simulation grid starts at {} after t0 = {t0}",
                grid.start()
            )));
        }
        let (mut times, prefix_values) = x0.prefix(t0);
        let anchor = times.len() - 1;
        for &s in grid.nodes() {
            if s > t0 && !is_close(s, t0) {
                times.push(s);
            }
        }
        let widths = times[anchor..].windows(2).map(|w| w[1] - w[0]).collect();
        Ok(SampleLayout {
            times,
            prefix_values,
            anchor,
            widths,
        })
    }

    pub fn buffer(&self, dim: usize) -> Result<DiscretePath> {
        let mut values = vec![0.0; self.times.len() * dim];
        values[..self.prefix_values.len()].copy_from_slice(&self.prefix_values);
        DiscretePath::new(TimeGrid::new(self.times.clone())?, dim, values)
    }
}

/// Piecewise-linear sample of `X` under the scaled Wiener measure: frozen to
/// `x0` on `[0, t0]`, independent `N(0, Δt/n)` increments per coordinate on
/// the cells of `grid` after `t0`.
pub fn simulate_scaled_brownian(t0: f64, x0: &DiscretePath, n: f64, grid: &TimeGrid, seed: u64) -> Result<DiscretePath> {
    check_viscosity(n)?;
    let layout = SampleLayout::new(x0, t0, grid)?;
    let d = x0.dim();
    let mut path = layout.buffer(d)?;
    let mut rng = substream(seed, 0);
    let values = path.values_mut();
    for (j, w) in layout.widths.iter().enumerate() {
        let sd = (w / n).sqrt();
        let i = layout.anchor + j;
        for k in 0..d {
            let z: f64 = rng.sample(StandardNormal);
            values[(i + 1) * d + k] = values[i * d + k] + sd * z;
        }
    }
    Ok(path)
}
