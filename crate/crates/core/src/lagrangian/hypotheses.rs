use serde::{Deserialize, Serialize};

use super::{norm_sq, ExtendedReal, Lagrangian};

/// Sampling grids for [`check_hypotheses`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SampleSpec {
    pub times: Vec<f64>,
    pub velocities: Vec<Vec<f64>>,
    /// Radii at which growth ratios `φ(r)/r` and `ℓ(t, r e)/r` are inspected.
    pub radii: Vec<f64>,
    /// Growth ratio required at the largest radius (superlinearity smoke test).
    pub growth_threshold: f64,
    pub convexity_tolerance: f64,
}

impl SampleSpec {
    /// 11 times on `[0, T]`, velocities on the integer lattice `[−5, 5]^d`
    /// (`d ≤ 2`; coordinate axes beyond that), radii up to `10^4`.
    pub fn default_for(l: &Lagrangian) -> SampleSpec {
        let horizon = l.horizon();
        let times = (0..=10).map(|i| horizon * i as f64 / 10.0).collect();
        let d = l.dim();
        let velocities = if d <= 2 {
            let axis: Vec<f64> = (-5..=5).map(f64::from).collect();
            let mut out: Vec<Vec<f64>> = axis.iter().map(|&x| vec![x]).collect();
            if d == 2 {
                out = axis
                    .iter()
                    .flat_map(|&x| axis.iter().map(move |&y| vec![x, y]))
                    .collect();
            }
            out
        } else {
            let mut out = vec![vec![0.0; d]];
            for i in 0..d {
                for s in [-5.0, -2.0, -1.0, 1.0, 2.0, 5.0] {
                    let mut v = vec![0.0; d];
                    v[i] = s;
                    out.push(v);
                }
            }
            out
        };
        SampleSpec {
            times,
            velocities,
            radii: vec![10.0, 100.0, 1e3, 1e4],
            growth_threshold: 10.0,
            convexity_tolerance: 1e-9,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    /// `ℓ(t, a) < φ(|a|)`.
    MinorantExceeded { t: f64, a: Vec<f64>, value: f64, minorant: f64 },
    /// Midpoint convexity fails on the segment `[a, b]`.
    NotConvex { t: f64, a: Vec<f64>, b: Vec<f64>, gap: f64 },
    /// `φ(r)/r` below the growth threshold at the largest sampled radius.
    MinorantNotSuperlinear { r: f64, ratio: f64 },
    /// `ℓ(t, r e_1)/r` below the growth threshold at the largest sampled radius.
    LagrangianNotSuperlinear { t: f64, r: f64, ratio: f64 },
    /// The running cost at rest has an infinite quadrature sum.
    RestCostNotIntegrable,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub violations: Vec<Violation>,
    /// Midpoint-rule proxy for `∫_0^T ℓ(t, 0) dt`; `None` when infinite.
    pub rest_cost_integral: Option<f64>,
}

impl HypothesisReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks the minorant bound, midpoint convexity, superlinear growth and
/// integrability of `ℓ(·, 0)` on the sample grids.
pub fn check_hypotheses(l: &Lagrangian, spec: &SampleSpec) -> HypothesisReport {
    let mut violations = Vec::new();
    let tol = spec.convexity_tolerance;

    for &t in &spec.times {
        for a in &spec.velocities {
            if let ExtendedReal::Finite(v) = l.value(t, a) {
                let phi = l.minorant(norm_sq(a).sqrt());
                if v < phi - tol * (1.0 + phi.abs()) {
                    violations.push(Violation::MinorantExceeded {
                        t,
                        a: a.clone(),
                        value: v,
                        minorant: phi,
                    });
                }
            }
        }
        if l.flags().convex_in_a {
            for (i, a) in spec.velocities.iter().enumerate() {
                for b in &spec.velocities[i + 1..] {
                    let mid: Vec<f64> = a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect();
                    let (fa, fb, fm) = (l.value(t, a), l.value(t, b), l.value(t, &mid));
                    if let (ExtendedReal::Finite(fa), ExtendedReal::Finite(fb)) = (fa, fb) {
                        let chord = 0.5 * (fa + fb);
                        let gap = fm.to_f64() - chord;
                        if gap > tol * (1.0 + chord.abs()) {
                            violations.push(Violation::NotConvex {
                                t,
                                a: a.clone(),
                                b: b.clone(),
                                gap,
                            });
                        }
                    }
                }
            }
        }
    }

    if let Some(&r) = spec.radii.iter().max_by(|a, b| a.total_cmp(b)) {
        let ratio = l.minorant(r) / r;
        if !(ratio >= spec.growth_threshold) {
            violations.push(Violation::MinorantNotSuperlinear { r, ratio });
        }
        let mut e = vec![0.0; l.dim()];
        for &t in &spec.times {
            for sign in [1.0, -1.0] {
                e[0] = sign * r;
                let ratio = l.value(t, &e).to_f64() / r;
                if !(ratio >= spec.growth_threshold) {
                    violations.push(Violation::LagrangianNotSuperlinear { t, r, ratio });
                }
            }
        }
    }

    let zero = vec![0.0; l.dim()];
    let mut times = spec.times.clone();
    times.sort_by(|a, b| a.total_cmp(b));
    let mut integral = ExtendedReal::ZERO;
    for w in times.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        integral = integral + l.value(mid, &zero).scale(w[1] - w[0]);
    }
    if integral.is_infinite() {
        violations.push(Violation::RestCostNotIntegrable);
    }

    HypothesisReport {
        violations,
        rest_cost_integral: integral.finite(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lagrangian::LagrangianFlags;

    #[test]
    fn builtins_are_clean() {
        for l in [
            Lagrangian::quadratic(1, 1.0).unwrap(),
            Lagrangian::quadratic(2, 1.0).unwrap(),
            Lagrangian::power(1.5, 1, 1.0).unwrap(),
            Lagrangian::power(1.5, 2, 1.0).unwrap(),
        ] {
            let report = check_hypotheses(&l, &SampleSpec::default_for(&l));
            assert!(report.is_clean(), "{}: {:?}", l.name(), report.violations);
            assert_eq!(report.rest_cost_integral, Some(0.0));
        }
    }

    #[test]
    fn linear_growth_is_flagged() {
        let l = Lagrangian::custom(
            "abs",
            1,
            1.0,
            |_, a| ExtendedReal::Finite(a[0].abs()),
            |r| r * r,
            0.0,
            LagrangianFlags::REGULAR,
        )
        .unwrap();
        let report = check_hypotheses(&l, &SampleSpec::default_for(&l));
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::LagrangianNotSuperlinear { .. })));
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::MinorantExceeded { .. })));
    }

    #[test]
    fn non_convexity_and_infinite_rest_cost_are_flagged() {
        let l = Lagrangian::custom(
            "bumpy",
            1,
            1.0,
            |t, a| {
                if t < 0.06 {
                    ExtendedReal::Infinity
                } else {
                    ExtendedReal::Finite(a[0] * a[0] + (3.0 * a[0]).cos())
                }
            },
            |r| r * r - 1.0,
            -1.0,
            LagrangianFlags::REGULAR,
        )
        .unwrap();
        let report = check_hypotheses(&l, &SampleSpec::default_for(&l));
        assert!(report.violations.iter().any(|v| matches!(v, Violation::NotConvex { .. })));
        assert!(report.violations.contains(&Violation::RestCostNotIntegrable));
        assert_eq!(report.rest_cost_integral, None);
    }
}
