use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::checks::{SocSample, SubSample, SuperSample};
use crate::error::{Error, Result};
use crate::paths::{Control, DiscretePath, TimeGrid};
use crate::seed::substream;

/// Random base points on a time lattice `k·T/steps`, with random-walk
/// prefixes and bounded controls.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleSpace {
    pub horizon: f64,
    pub dim: usize,
    /// Lattice of admissible `t0` and `t`.
    pub steps: usize,
    /// Cells of the random prefix on `[0, t0]`.
    pub prefix_cells: usize,
    /// Standard deviation of the prefix start point and of its slopes.
    pub spread: f64,
    /// Controls and continuation slopes are uniform on `[−radius, radius]^d`.
    pub radius: f64,
    /// Cells of random continuations on `[t0, t]`.
    pub continuation_cells: usize,
}

impl SampleSpace {
    pub fn new(horizon: f64, dim: usize, steps: usize) -> SampleSpace {
        SampleSpace {
            horizon,
            dim,
            steps,
            prefix_cells: 4,
            spread: 0.5,
            radius: 1.0,
            continuation_cells: 3,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.steps == 0 || self.dim == 0 || self.prefix_cells == 0 || self.continuation_cells == 0 {
            return Err(Error::Precondition("sample space sizes must be positive".into()));
        }
        if !(self.horizon > 0.0 && self.spread >= 0.0 && self.radius >= 0.0) {
            return Err(Error::Precondition("sample space scales must be non-negative".into()));
        }
        Ok(())
    }

    fn lattice(&self, k: usize) -> f64 {
        if k == self.steps {
            self.horizon
        } else {
            self.horizon * k as f64 / self.steps as f64
        }
    }

    /// Random-walk path on `[0, t0]`, constant on `[t0, T]`.
    pub fn prefix(&self, rng: &mut ChaCha8Rng, t0: f64) -> Result<DiscretePath> {
        let d = self.dim;
        let normal = Normal::new(0.0, self.spread).map_err(|e| Error::Precondition(e.to_string()))?;
        let mut cur: Vec<f64> = (0..d).map(|_| normal.sample(rng)).collect();
        let mut times = vec![0.0];
        let mut values = cur.clone();
        if t0 > 0.0 {
            let w = t0 / self.prefix_cells as f64;
            for j in 1..=self.prefix_cells {
                for c in cur.iter_mut() {
                    *c += normal.sample(rng) * w;
                }
                times.push(if j == self.prefix_cells { t0 } else { j as f64 * w });
                values.extend_from_slice(&cur);
            }
        }
        if t0 < self.horizon {
            times.push(self.horizon);
            values.extend_from_slice(&cur);
        }
        DiscretePath::new(TimeGrid::new(times)?, d, values)
    }

    fn control(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..self.dim).map(|_| rng.random_range(-1.0..=1.0) * self.radius).collect()
    }

    /// `t0 = k·Δ` for `k < steps`, `t = t0 + Δ`.
    pub fn soc_samples(&self, count: usize, seed: u64) -> Result<Vec<SocSample>> {
        self.validate()?;
        let mut rng = substream(seed, 11);
        (0..count)
            .map(|_| {
                let k = rng.random_range(0..self.steps);
                let t0 = self.lattice(k);
                let x0 = self.prefix(&mut rng, t0)?;
                Ok(SocSample {
                    t0,
                    x0,
                    t: self.lattice(k + 1),
                    control: self.control(&mut rng),
                })
            })
            .collect()
    }

    /// `t0 = k·Δ`, `t = j·Δ` with `k < j ≤ steps`.
    pub fn super_samples(&self, count: usize, seed: u64) -> Result<Vec<SuperSample>> {
        self.validate()?;
        let mut rng = substream(seed, 12);
        (0..count)
            .map(|_| {
                let k = rng.random_range(0..self.steps);
                let j = rng.random_range(k + 1..=self.steps);
                let t0 = self.lattice(k);
                Ok(SuperSample {
                    t0,
                    x0: self.prefix(&mut rng, t0)?,
                    t: self.lattice(j),
                })
            })
            .collect()
    }

    /// As [`SampleSpace::super_samples`] with piecewise-constant random
    /// velocities on `continuation_cells` cells of `[t0, t]`.
    pub fn sub_samples(&self, count: usize, seed: u64) -> Result<Vec<SubSample>> {
        self.validate()?;
        let mut rng = substream(seed, 13);
        (0..count)
            .map(|_| {
                let k = rng.random_range(0..self.steps);
                let j = rng.random_range(k + 1..=self.steps);
                let (t0, t) = (self.lattice(k), self.lattice(j));
                let x0 = self.prefix(&mut rng, t0)?;
                let grid = TimeGrid::uniform(t0, t, self.continuation_cells)?;
                let values: Vec<f64> = (0..self.continuation_cells).flat_map(|_| self.control(&mut rng)).collect();
                Ok(SubSample {
                    t0,
                    x0,
                    t,
                    continuation: Control::piecewise(grid, self.dim, values)?,
                })
            })
            .collect()
    }
}
