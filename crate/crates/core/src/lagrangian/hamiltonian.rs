use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{norm_sq, Lagrangian};
use crate::error::{Error, Result};
use crate::seed::substream;

#[derive(Clone, Debug)]
pub struct HamiltonianOptions {
    /// Absolute-plus-relative stopping tolerance on the minimized value.
    pub tolerance: f64,
    /// Ignore a closed-form conjugate and minimize numerically.
    pub force_numeric: bool,
    /// Random restarts for the non-separable projected-gradient path.
    pub restarts: usize,
    pub seed: u64,
    /// Cap on bracket doublings before reporting divergence.
    pub max_doublings: u32,
}

impl Default for HamiltonianOptions {
    fn default() -> Self {
        HamiltonianOptions {
            tolerance: 1e-12,
            force_numeric: false,
            restarts: 20,
            seed: 0,
            max_doublings: 64,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    ClosedForm,
    Numeric,
}

#[derive(Clone, Debug)]
pub struct HamiltonianValue {
    pub value: f64,
    /// Minimizing velocity; `None` for closed-form evaluations.
    pub minimizer: Option<Vec<f64>>,
    pub provenance: Provenance,
    /// Search radius used by the numeric path.
    pub radius: Option<f64>,
}

/// `H(t, p) = inf_a [a·p + ℓ(t, a)]`.
pub fn hamiltonian(l: &Lagrangian, t: f64, p: &[f64], opts: &HamiltonianOptions) -> Result<f64> {
    hamiltonian_detailed(l, t, p, opts).map(|h| h.value)
}

pub fn hamiltonian_detailed(
    l: &Lagrangian,
    t: f64,
    p: &[f64],
    opts: &HamiltonianOptions,
) -> Result<HamiltonianValue> {
    l.check_time(t)?;
    if p.len() != l.dim() {
        return Err(Error::DimensionMismatch {
            expected: l.dim(),
            got: p.len(),
        });
    }
    if !l.flags().convex_in_a {
        return Err(Error::Unsupported(format!(
            "Hamiltonian of non-convex Lagrangian {:?}",
            l.name()
        )));
    }
    if !opts.force_numeric {
        if let Some(value) = l.closed_form_hamiltonian(t, p) {
            return Ok(HamiltonianValue {
                value,
                minimizer: None,
                provenance: Provenance::ClosedForm,
                radius: None,
            });
        }
    }

    let objective = |a: &[f64]| -> f64 {
        let dot: f64 = a.iter().zip(p).map(|(x, y)| x * y).sum();
        dot + l.value(t, a).to_f64()
    };
    let zero = vec![0.0; l.dim()];
    let center = objective(&zero);
    if !center.is_finite() {
        return Err(Error::Unsupported(
            "numeric Hamiltonian needs ℓ(t, 0) finite".into(),
        ));
    }
    let radius = bracket_radius(l, p, center, opts.max_doublings)?;

    let (value, minimizer) = if l.flags().separable {
        coordinate_descent(&objective, l.dim(), radius, opts.tolerance)
    } else {
        projected_gradient_restarts(l, t, p, &objective, radius, opts)
    };
    Ok(HamiltonianValue {
        value,
        minimizer: Some(minimizer),
        provenance: Provenance::Numeric,
        radius: Some(radius),
    })
}

/// Smallest doubling radius with `φ(R) ≥ (|p| + 1)·R`, then doubled until
/// `φ(R) − R|p|` (a lower bound for the objective on the sphere of radius R)
/// exceeds the value at the origin. Convexity then places the minimizer inside.
fn bracket_radius(l: &Lagrangian, p: &[f64], center: f64, max_doublings: u32) -> Result<f64> {
    let pn = norm_sq(p).sqrt();
    let mut r = 1.0_f64;
    for _ in 0..=max_doublings {
        let phi = l.minorant(r);
        if phi >= (pn + 1.0) * r && phi - r * pn > center {
            return Ok(r);
        }
        r *= 2.0;
    }
    Err(Error::Divergence(format!(
        "no radius up to {r:e} with φ(R) ≥ (|p|+1)R for |p| = {pn}; minorant is not superlinear"
    )))
}

fn golden_section(mut g: impl FnMut(f64) -> f64, mut lo: f64, mut hi: f64) -> (f64, f64) {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = g(x1);
    let mut f2 = g(x2);
    for _ in 0..400 {
        if hi - lo <= 1e-15 * (1.0 + lo.abs().max(hi.abs())) {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = g(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = g(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

fn coordinate_descent(f: &dyn Fn(&[f64]) -> f64, dim: usize, radius: f64, tol: f64) -> (f64, Vec<f64>) {
    let mut x = vec![0.0; dim];
    let mut best = f(&x);
    for _ in 0..200 {
        let before = best;
        for i in 0..dim {
            let mut trial = x.clone();
            let (xi, fi) = golden_section(
                |v| {
                    trial[i] = v;
                    f(&trial)
                },
                -radius,
                radius,
            );
            if fi <= best {
                x[i] = xi;
                best = fi;
            }
        }
        if before - best <= tol * (1.0 + best.abs()) {
            break;
        }
    }
    (best, x)
}

fn projected_gradient_restarts(
    l: &Lagrangian,
    t: f64,
    p: &[f64],
    f: &dyn Fn(&[f64]) -> f64,
    radius: f64,
    opts: &HamiltonianOptions,
) -> (f64, Vec<f64>) {
    let dim = l.dim();
    let grad = |x: &[f64], g: &mut [f64]| {
        if l.gradient(t, x, g) {
            g.iter_mut().zip(p).for_each(|(gi, pi)| *gi += pi);
        } else {
            let mut y = x.to_vec();
            for i in 0..dim {
                let h = 1e-7 * (1.0 + x[i].abs());
                y[i] = x[i] + h;
                let fp = f(&y);
                y[i] = x[i] - h;
                let fm = f(&y);
                y[i] = x[i];
                g[i] = (fp - fm) / (2.0 * h);
            }
        }
    };

    let mut runs: Vec<(f64, Vec<f64>)> = Vec::with_capacity(opts.restarts.max(1));
    for k in 0..opts.restarts.max(1) {
        let start = if k == 0 {
            vec![0.0; dim]
        } else {
            let mut rng = substream(opts.seed, k as u64);
            (0..dim).map(|_| rng.random_range(-radius..=radius)).collect()
        };
        runs.push(projected_gradient(f, &grad, start, radius, opts.tolerance));
    }
    let best = runs.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
    let within = opts.tolerance.max(1e-9) * (1.0 + best.abs());
    // Values enter downstream formulas; among near-ties report the lexicographically smallest minimizer.
    let argmin = runs
        .iter()
        .filter(|r| r.0 <= best + within)
        .map(|r| r.1.clone())
        .min_by(|a, b| {
            a.iter()
                .zip(b)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
        .unwrap_or_else(|| vec![0.0; dim]);
    (best, argmin)
}

fn projected_gradient(
    f: &dyn Fn(&[f64]) -> f64,
    grad: &dyn Fn(&[f64], &mut [f64]),
    mut x: Vec<f64>,
    radius: f64,
    tol: f64,
) -> (f64, Vec<f64>) {
    let dim = x.len();
    let mut fx = f(&x);
    let mut g = vec![0.0; dim];
    let mut trial = vec![0.0; dim];
    let mut step = 1.0;
    let mut quiet = 0;
    for _ in 0..20_000 {
        grad(&x, &mut g);
        let mut accepted = false;
        while step > 1e-30 {
            for i in 0..dim {
                trial[i] = (x[i] - step * g[i]).clamp(-radius, radius);
            }
            let decrease: f64 = (0..dim).map(|i| g[i] * (x[i] - trial[i])).sum();
            let ft = f(&trial);
            if ft <= fx - 1e-4 * decrease {
                let improvement = fx - ft;
                x.copy_from_slice(&trial);
                fx = ft;
                accepted = true;
                quiet = if improvement <= tol * (1.0 + fx.abs()) { quiet + 1 } else { 0 };
                step *= 2.0;
                break;
            }
            step *= 0.5;
        }
        if !accepted || quiet >= 3 {
            break;
        }
    }
    (fx, x)
}

/// The Hamiltonian of a Lagrangian as a map `(t, p) ↦ H(t, p)`.
#[derive(Clone, Debug)]
pub struct Hamiltonian {
    lagrangian: Lagrangian,
    opts: HamiltonianOptions,
}

impl Hamiltonian {
    pub fn new(lagrangian: Lagrangian, opts: HamiltonianOptions) -> Hamiltonian {
        Hamiltonian { lagrangian, opts }
    }

    pub fn eval(&self, t: f64, p: &[f64]) -> Result<f64> {
        hamiltonian(&self.lagrangian, t, p, &self.opts)
    }

    pub fn provenance(&self) -> Provenance {
        if self.lagrangian.closed_form_hamiltonian(0.0, &vec![0.0; self.lagrangian.dim()]).is_some()
            && !self.opts.force_numeric
        {
            Provenance::ClosedForm
        } else {
            Provenance::Numeric
        }
    }
}
