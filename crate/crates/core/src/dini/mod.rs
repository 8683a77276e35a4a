//! Dini derivative estimators and checks of the sub/supersolution
//! inequalities for candidate value functionals.
//!
//! Limits along `δ → 0` are replaced by finite schedules: the lower (upper)
//! estimate is the min (max) over the last few quotients, and a direction
//! whose quotients blow up or hit `+∞` is flagged as diverged instead of
//! producing an error. Checks return reports and never fail on violations.

mod checks;
mod estimators;
mod functional;
mod samples;

pub use checks::{
    check_minimax_sub, check_minimax_super, check_subsolution_soc, CheckEntry, CheckReport, Noise, SocCheckOptions,
    SocSample, SubSample, SuperCheckOptions, SuperSample,
};
pub use estimators::{
    lower_dini, stochastic_upper_dini, upper_dini, DiniEstimate, DiniKind, DiniSchedule, StochasticDiniOptions,
};
pub use functional::{Analytic, BolzaValue, PathFunctional, Provenance, Shifted, SocValue};
pub use samples::SampleSpace;
