use serde::{Deserialize, Serialize};

use super::tree::{normalize_grid, solve_soc_tree, ControlGrid, LatticeSpec};
use crate::bolza::{rest_path, BolzaProblem, TerminalCost};
use crate::error::{Error, Result};
use crate::lagrangian::Lagrangian;
use crate::paths::{concat_scaled, is_close, rescale_lagrangian, DiscretePath};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RescalingReport {
    pub t0: f64,
    pub steps: usize,
    /// Tree value of the original problem from `(t0, x0)`.
    pub left: f64,
    /// Tree value of the rescaled problem from `(0, 0)`.
    pub right: f64,
    pub gap: f64,
    pub left_grid: Vec<Vec<f64>>,
    pub right_grid: Vec<Vec<f64>>,
}

/// Compares `v_1(t0, x0)` with the value of the rescaled problem
/// `(ℓ^{(t0)}, ω ↦ h(x0 ⊙_{t0} ω))` started at the zero path, both on trees
/// with `spec.steps` steps and `n = 1`.
///
/// The right-hand control grid is the left grid scaled by `√(1 − t0)`, which
/// maps the left tree onto the right one node for node.
pub fn check_rescaling_identity(
    l: &Lagrangian,
    h: &TerminalCost,
    t0: f64,
    x0: &DiscretePath,
    spec: &LatticeSpec,
) -> Result<RescalingReport> {
    if !is_close(l.horizon(), 1.0) {
        return Err(Error::Precondition(format!(
            "the rescaling identity is stated on [0, 1], horizon is {}",
            l.horizon()
        )));
    }
    if !(0.0..=1.0).contains(&t0) {
        return Err(Error::domain("t0", t0, 0.0, 1.0));
    }
    let left_prob = BolzaProblem::new(l.clone(), h.clone());
    let left = solve_soc_tree(&left_prob, t0, x0, 1.0, spec)?;

    let scale = (1.0 - t0).max(0.0).sqrt();
    let scaled: Vec<Vec<f64>> = left
        .control_grid
        .iter()
        .map(|a| a.iter().map(|v| v * scale).collect())
        .collect();
    let right_grid = normalize_grid(&scaled, l.dim())?;
    let right_spec = LatticeSpec {
        control_grid: ControlGrid::explicit(right_grid.clone()),
        ..spec.clone()
    };

    let base = rest_path(x0, t0, 1.0)?;
    let inner = h.clone();
    let glued = TerminalCost::finite(
        format!("{}∘concat", h.name()),
        move |w| match concat_scaled(&base, t0, w) {
            Ok(x) => inner.finite_part(&x),
            Err(_) => f64::NAN,
        },
        h.sup_abs(),
    );
    let right_prob = BolzaProblem::new(rescale_lagrangian(l, t0)?, glued);
    let zero = DiscretePath::zero(1.0, l.dim())?;
    let right = solve_soc_tree(&right_prob, 0.0, &zero, 1.0, &right_spec)?;

    Ok(RescalingReport {
        t0,
        steps: spec.steps,
        left: left.value,
        right: right.value,
        gap: (left.value - right.value).abs(),
        left_grid: left.control_grid,
        right_grid,
    })
}
