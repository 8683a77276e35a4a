//! Deterministic Bolza value `v_0(t0, x0) = inf_x ∫_{t0}^T ℓ(t, x'(t)) dt + h(x)`
//! by direct transcription over cell slopes, exterior penalties for
//! constraint-encoding terminal costs, and dynamic-programming diagnostics.

mod solver;
mod terminal;

pub use solver::{
    dpp_residuals, minimize_continuation, rest_path, solve_doc, solve_doc_constrained, BolzaProblem,
    ContinuationResult, DocOptions, DppResidual, EstimateMetadata, ValueEstimate,
};
pub use terminal::{PathCostFn, TargetSet, TerminalCost, TimeFn};
