use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::brownian::{check_viscosity, SampleLayout};
use crate::bolza::{BolzaProblem, EstimateMetadata, ValueEstimate};
use crate::error::{Error, Result};
use crate::lagrangian::ExtendedReal;
use crate::paths::{DiscretePath, TimeGrid};
use crate::seed::substream;

#[derive(Clone, Debug)]
pub struct OracleOptions {
    pub samples: usize,
    pub seed: u64,
    /// Importance-sampling drift: samples are drawn with the slopes of this
    /// path added to each cell and reweighted by the exact likelihood ratio.
    pub drift: Option<DiscretePath>,
    /// Pair every draw with its mirror image; `samples` counts single paths.
    pub antithetic: bool,
    pub chunk_size: usize,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            samples: 100_000,
            seed: 0,
            drift: None,
            antithetic: false,
            chunk_size: 4096,
        }
    }
}

/// Running sums of `w = exp(−n (y − y_min))` relative to the chunk minimum.
#[derive(Clone, Copy)]
struct Moments {
    y_min: f64,
    s1: f64,
    s2: f64,
    count: usize,
}

impl Moments {
    fn from_values(ys: &[f64], n: f64) -> Moments {
        let y_min = ys.iter().copied().fold(f64::INFINITY, f64::min);
        let (mut s1, mut s2) = (0.0, 0.0);
        for y in ys {
            let w = (-n * (y - y_min)).exp();
            s1 += w;
            s2 += w * w;
        }
        Moments {
            y_min,
            s1,
            s2,
            count: ys.len(),
        }
    }

    fn merge(self, other: Moments, n: f64) -> Moments {
        let y_min = self.y_min.min(other.y_min);
        let a = (-n * (self.y_min - y_min)).exp();
        let b = (-n * (other.y_min - y_min)).exp();
        Moments {
            y_min,
            s1: self.s1 * a + other.s1 * b,
            s2: self.s2 * a * a + other.s2 * b * b,
            count: self.count + other.count,
        }
    }
}

/// `v_n(t0, x0) = −(1/n) log E[exp(−n h(X))]` for `ℓ = |a|²/2`, by Monte Carlo
/// over scaled Brownian paths on `grid`, with a delta-method standard error.
///
/// Weights are computed relative to the smallest sampled cost, so they never
/// all underflow.
pub fn estimate_vn_quadratic_oracle(
    prob: &BolzaProblem,
    n: f64,
    t0: f64,
    x0: &DiscretePath,
    grid: &TimeGrid,
    opts: &OracleOptions,
) -> Result<ValueEstimate> {
    check_viscosity(n)?;
    if prob.lagrangian().name() != "quadratic" {
        return Err(Error::Unsupported(format!(
            "the exponential oracle needs the quadratic running cost, got {:?}",
            prob.lagrangian().name()
        )));
    }
    let h = prob.terminal();
    if !h.is_finite_kind() {
        return Err(Error::Unsupported("the exponential oracle needs a finite terminal cost".into()));
    }
    prob.lagrangian().check_time(t0)?;
    if opts.samples == 0 || opts.chunk_size == 0 {
        return Err(Error::Precondition("samples and chunk size must be positive".into()));
    }
    if opts.antithetic && opts.samples % 2 == 1 {
        return Err(Error::Precondition("antithetic sampling needs an even sample count".into()));
    }
    let d = x0.dim();
    if d != prob.dim() {
        return Err(Error::DimensionMismatch {
            expected: prob.dim(),
            got: d,
        });
    }
    let layout = SampleLayout::new(x0, t0, grid)?;
    let cells = layout.widths.len();
    let drift: Vec<f64> = match &opts.drift {
        None => vec![0.0; cells * d],
        Some(p) => {
            let mut out = Vec::with_capacity(cells * d);
            let times = &layout.times[layout.anchor..];
            for w in times.windows(2) {
                let (a, b) = (p.at(w[0]), p.at(w[1]));
                out.extend(a.iter().zip(&b).map(|(x, y)| (y - x) / (w[1] - w[0])));
            }
            out
        }
    };
    let drift_cost: f64 = (0..cells)
        .map(|j| 0.5 * layout.widths[j] * drift[j * d..(j + 1) * d].iter().map(|b| b * b).sum::<f64>())
        .sum();

    // one "unit" is a single path, or an antithetic pair
    let per_unit = if opts.antithetic { 2 } else { 1 };
    let units = opts.samples / per_unit;
    let chunk_units = (opts.chunk_size / per_unit).max(1);
    let n_chunks = units.div_ceil(chunk_units);
    let buffer = layout.buffer(d)?;

    let chunks: Vec<Result<Moments>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = substream(opts.seed, c as u64);
            let mut path = buffer.clone();
            let mut z = vec![0.0; cells * d];
            let count = chunk_units.min(units - c * chunk_units);
            let mut ys = Vec::with_capacity(count);
            for _ in 0..count {
                z.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
                let mut unit_y = Vec::with_capacity(2);
                for sign in if opts.antithetic { &[1.0, -1.0][..] } else { &[1.0][..] } {
                    // y = h(X) + Σ b·ξ + ½Σ|b|²Δt, so that exp(−n y) = exp(−n h)·dP/dQ
                    let mut cross = 0.0;
                    {
                        let vals = path.values_mut();
                        for j in 0..cells {
                            let sd = (layout.widths[j] / n).sqrt();
                            let i = layout.anchor + j;
                            for k in 0..d {
                                let xi = sign * sd * z[j * d + k];
                                let b = drift[j * d + k];
                                cross += b * xi;
                                vals[(i + 1) * d + k] = vals[i * d + k] + b * layout.widths[j] + xi;
                            }
                        }
                    }
                    unit_y.push(h.finite_part(&path) + cross + drift_cost);
                }
                if unit_y.iter().any(|y| !y.is_finite()) {
                    return Err(Error::Numeric(
                        "degenerate sample: non-finite weight; rescale n·h or check the terminal cost".into(),
                    ));
                }
                if unit_y.len() == 1 {
                    ys.push(unit_y[0]);
                } else {
                    // pair weight (w1 + w2)/2 expressed as an effective cost
                    let m = unit_y[0].min(unit_y[1]);
                    let unit = m - (0.5 * ((-n * (unit_y[0] - m)).exp() + (-n * (unit_y[1] - m)).exp())).ln() / n;
                    ys.push(unit);
                }
            }
            Ok(Moments::from_values(&ys, n))
        })
        .collect();

    let mut total: Option<Moments> = None;
    for c in chunks {
        let c = c?;
        total = Some(match total {
            None => c,
            Some(t) => t.merge(c, n),
        });
    }
    let m = total.unwrap();
    let k = m.count as f64;
    let mean = m.s1 / k;
    if !(mean > 0.0 && mean.is_finite()) {
        return Err(Error::Numeric(
            "degenerate sample: all weights underflow; rescale n·h".into(),
        ));
    }
    let value = m.y_min - mean.ln() / n;
    let var = if m.count > 1 {
        ((m.s2 / k - mean * mean) * k / (k - 1.0)).max(0.0)
    } else {
        0.0
    };
    let se = (var / k).sqrt() / (mean * n);
    Ok(ValueEstimate {
        value: ExtendedReal::Finite(value),
        discretization_allowance: 0.0,
        mc_standard_error: se,
        penalty_gap: 0.0,
        metadata: EstimateMetadata {
            method: if opts.drift.is_some() {
                "exponential_oracle_drifted".into()
            } else {
                "exponential_oracle".into()
            },
            cells,
            restarts: 0,
            converged_restarts: 0,
            seed: opts.seed,
            samples: opts.samples,
            warnings: Vec::new(),
        },
    })
}
