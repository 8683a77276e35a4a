//! Running costs `ℓ(t, a)` with their Tonelli-Nagumo minorant, Hamiltonians
//! `H(t, p) = inf_a [a·p + ℓ(t, a)]`, and numeric hypothesis checks.

mod extended;
mod hamiltonian;
mod hypotheses;

use std::fmt;
use std::sync::Arc;

pub use extended::ExtendedReal;
pub use hamiltonian::{hamiltonian, hamiltonian_detailed, Hamiltonian, HamiltonianOptions, HamiltonianValue, Provenance};
pub use hypotheses::{check_hypotheses, HypothesisReport, SampleSpec, Violation};

use crate::error::{Error, Result};

pub(crate) type EvalFn = dyn Fn(f64, &[f64]) -> ExtendedReal + Send + Sync;
pub(crate) type GradFn = dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync;
pub(crate) type ConjugateFn = dyn Fn(f64, &[f64]) -> f64 + Send + Sync;
pub(crate) type MinorantFn = dyn Fn(f64) -> f64 + Send + Sync;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LagrangianFlags {
    pub convex_in_a: bool,
    pub continuous: bool,
    pub finite_valued: bool,
    /// `ℓ(t, a) = Σ_i g(t, a_i)`; enables coordinate-wise Hamiltonian minimization.
    pub separable: bool,
}

impl LagrangianFlags {
    pub const REGULAR: LagrangianFlags = LagrangianFlags {
        convex_in_a: true,
        continuous: true,
        finite_valued: true,
        separable: false,
    };
}

/// A running cost on `[0, T] × R^d` with a radial minorant `φ(|a|) ≤ ℓ(t, a)`.
#[derive(Clone)]
pub struct Lagrangian {
    name: String,
    dim: usize,
    horizon: f64,
    eval: Arc<EvalFn>,
    gradient: Option<Arc<GradFn>>,
    minorant: Arc<MinorantFn>,
    minorant_floor: f64,
    flags: LagrangianFlags,
    conjugate: Option<Arc<ConjugateFn>>,
}

impl fmt::Debug for Lagrangian {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Lagrangian")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("horizon", &self.horizon)
            .field("flags", &self.flags)
            .field("closed_form_conjugate", &self.conjugate.is_some())
            .finish()
    }
}

impl Lagrangian {
    /// Builds a Lagrangian from an evaluation map and minorant.
    ///
    /// `minorant_floor` must be a lower bound of `φ` on `[0, ∞)`.
    pub fn custom<E, M>(
        name: impl Into<String>,
        dim: usize,
        horizon: f64,
        eval: E,
        minorant: M,
        minorant_floor: f64,
        flags: LagrangianFlags,
    ) -> Result<Lagrangian>
    where
        E: Fn(f64, &[f64]) -> ExtendedReal + Send + Sync + 'static,
        M: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if dim == 0 {
            return Err(Error::Precondition("dimension must be at least 1".into()));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::domain("horizon", horizon, 0.0, f64::INFINITY));
        }
        Ok(Lagrangian {
            name: name.into(),
            dim,
            horizon,
            eval: Arc::new(eval),
            gradient: None,
            minorant: Arc::new(minorant),
            minorant_floor,
            flags,
            conjugate: None,
        })
    }

    /// Attaches `∇_a ℓ(t, a)`, written into the output slice.
    pub fn with_gradient<G>(mut self, gradient: G) -> Lagrangian
    where
        G: Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        self.gradient = Some(Arc::new(gradient));
        self
    }

    /// Attaches a closed-form Hamiltonian `p ↦ inf_a [a·p + ℓ(t, a)]`.
    pub fn with_conjugate<C>(mut self, conjugate: C) -> Lagrangian
    where
        C: Fn(f64, &[f64]) -> f64 + Send + Sync + 'static,
    {
        self.conjugate = Some(Arc::new(conjugate));
        self
    }

    /// `ℓ(t, a) = |a|²/2`, minorant `φ(r) = r²/2`.
    pub fn quadratic(dim: usize, horizon: f64) -> Result<Lagrangian> {
        let flags = LagrangianFlags {
            separable: true,
            ..LagrangianFlags::REGULAR
        };
        Ok(Lagrangian::custom(
            "quadratic",
            dim,
            horizon,
            |_, a| ExtendedReal::Finite(0.5 * norm_sq(a)),
            |r| 0.5 * r * r,
            0.0,
            flags,
        )?
        .with_gradient(|_, a, g| g.copy_from_slice(a))
        .with_conjugate(|_, p| -0.5 * norm_sq(p)))
    }

    /// `ℓ(t, a) = |a|^p` (Euclidean norm) for `p > 1`, minorant `φ(r) = r^p`.
    pub fn power(exponent: f64, dim: usize, horizon: f64) -> Result<Lagrangian> {
        if !(exponent > 1.0 && exponent.is_finite()) {
            return Err(Error::Precondition(format!(
                "power Lagrangian needs an exponent > 1 for convexity and superlinearity, got {exponent}"
            )));
        }
        let flags = LagrangianFlags {
            separable: dim == 1,
            ..LagrangianFlags::REGULAR
        };
        let q = exponent / (exponent - 1.0);
        Ok(Lagrangian::custom(
            format!("power:{exponent}"),
            dim,
            horizon,
            move |_, a| ExtendedReal::Finite(norm_sq(a).sqrt().powf(exponent)),
            move |r| r.powf(exponent),
            0.0,
            flags,
        )?
        .with_gradient(move |_, a, g| {
            let r = norm_sq(a).sqrt();
            let c = if r > 0.0 { exponent * r.powf(exponent - 2.0) } else { 0.0 };
            for (gi, ai) in g.iter_mut().zip(a) {
                *gi = c * ai;
            }
        })
        // inf_a [a·p + |a|^e] = −(e − 1)(|p|/e)^{e/(e−1)}
        .with_conjugate(move |_, p| -(exponent - 1.0) * (norm_sq(p).sqrt() / exponent).powf(q)))
    }

    /// `ℓ ≡ 0`; the rescaled Lagrangian at the terminal time.
    pub fn zero(dim: usize, horizon: f64) -> Result<Lagrangian> {
        let flags = LagrangianFlags {
            separable: true,
            ..LagrangianFlags::REGULAR
        };
        Ok(
            Lagrangian::custom("zero", dim, horizon, |_, _| ExtendedReal::ZERO, |_| 0.0, 0.0, flags)?
                .with_gradient(|_, _, g| g.fill(0.0)),
        )
    }

    /// Registry lookup: `"quadratic"` or `"power:<p>"`.
    pub fn from_name(name: &str, dim: usize, horizon: f64) -> Result<Lagrangian> {
        let name = name.trim();
        if name == "quadratic" {
            return Lagrangian::quadratic(dim, horizon);
        }
        if let Some(p) = name.strip_prefix("power:") {
            let p: f64 = p
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad power exponent in lagrangian {name:?}")))?;
            return Lagrangian::power(p, dim, horizon);
        }
        Err(Error::Config(format!(
            "unknown lagrangian {name:?}; expected \"quadratic\" or \"power:<p>\""
        )))
    }

    /// `(t, a) ↦ c·ℓ(t, a)` for `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Lagrangian> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::domain("scale", c, 0.0, f64::INFINITY));
        }
        let inner = self.clone();
        let inner_phi = self.minorant.clone();
        let mut out = Lagrangian::custom(
            format!("{}*{c}", self.name),
            self.dim,
            self.horizon,
            move |t, a| inner.value(t, a).scale(c),
            move |r| c * inner_phi(r),
            c * self.minorant_floor,
            self.flags,
        )?;
        if let Some(g) = self.gradient.clone() {
            out = out.with_gradient(move |t, a, out| {
                g(t, a, out);
                out.iter_mut().for_each(|v| *v *= c);
            });
        }
        if let Some(h) = self.conjugate.clone() {
            // inf_a [a·p + c ℓ] = c · H(t, p/c)
            out = out.with_conjugate(move |t, p| {
                let q: Vec<f64> = p.iter().map(|v| v / c).collect();
                c * h(t, &q)
            });
        }
        Ok(out)
    }

    /// Same Lagrangian with the closed-form conjugate removed; forces the numeric Hamiltonian.
    pub fn without_conjugate(&self) -> Lagrangian {
        Lagrangian {
            conjugate: None,
            ..self.clone()
        }
    }

    /// Evaluates `ℓ(t, a)` with domain and dimension checks.
    pub fn eval(&self, t: f64, a: &[f64]) -> Result<ExtendedReal> {
        self.check_time(t)?;
        if a.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: a.len(),
            });
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::Precondition("velocity must be finite".into()));
        }
        Ok(self.value(t, a))
    }

    /// Unchecked evaluation for inner loops.
    #[inline]
    pub(crate) fn value(&self, t: f64, a: &[f64]) -> ExtendedReal {
        (self.eval)(t, a)
    }

    pub(crate) fn check_time(&self, t: f64) -> Result<()> {
        let slack = 1e-12 * self.horizon.max(1.0);
        if !(t >= -slack && t <= self.horizon + slack) {
            return Err(Error::domain("t", t, 0.0, self.horizon));
        }
        Ok(())
    }

    pub fn minorant(&self, r: f64) -> f64 {
        (self.minorant)(r)
    }

    /// Lower bound of the minorant on `[0, ∞)`.
    pub fn minorant_floor(&self) -> f64 {
        self.minorant_floor
    }

    /// Writes `∇_a ℓ(t, a)` into `out`; returns `false` when no analytic gradient is attached.
    pub fn gradient(&self, t: f64, a: &[f64], out: &mut [f64]) -> bool {
        match &self.gradient {
            Some(g) => {
                g(t, a, out);
                true
            }
            None => false,
        }
    }

    pub fn has_gradient(&self) -> bool {
        self.gradient.is_some()
    }

    pub fn closed_form_hamiltonian(&self, t: f64, p: &[f64]) -> Option<f64> {
        self.conjugate.as_ref().map(|h| h(t, p))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn flags(&self) -> LagrangianFlags {
        self.flags
    }

    pub(crate) fn minorant_fn(&self) -> Arc<MinorantFn> {
        self.minorant.clone()
    }

    pub(crate) fn eval_fn(&self) -> Arc<EvalFn> {
        self.eval.clone()
    }

    pub(crate) fn gradient_fn(&self) -> Option<Arc<GradFn>> {
        self.gradient.clone()
    }

    pub(crate) fn conjugate_fn(&self) -> Option<Arc<ConjugateFn>> {
        self.conjugate.clone()
    }
}

pub(crate) fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}
