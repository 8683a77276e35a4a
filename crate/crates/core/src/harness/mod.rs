//! Experiment orchestration: configuration, the convergence study, the
//! verification suite, the single-purpose runners and result emission.

mod config;
mod convergence;
mod emit;
mod runners;
mod verify;

pub use config::{
    ControlGridSetting, ExperimentConfig, InitialDatum, LegendreConfig, OutputConfig, OutputFormat, ProblemConfig,
    SolverConfig, Tolerances, VerifyConfig,
};
pub use convergence::{check_row_integrity, run_convergence, ConvergenceRow, ConvergenceTable, SupGap, TrendCheck};
pub use emit::{config_hash, emit_results, load_convergence_csv, Manifest, RunOutput, CONVERGENCE_COLUMNS, MANIFEST_FILE};
pub use runners::{
    brute_force_hamiltonian, run_bolza, run_legendre, run_soc, BolzaRow, BolzaRun, LegendreRow, LegendreTable, SocRow,
    SocRun,
};
pub use verify::{run_verify, CheckStatus, DiniProbe, Outcome, VerificationBundle};
