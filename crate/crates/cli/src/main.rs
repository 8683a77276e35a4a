//! `pdhjb legendre|bolza|soc|converge|verify --config <file> [--seed k] [--out dir]`
//!
//! Exit status: 0 when every check passes, 1 on violations or failed rows,
//! 2 on configuration errors, 3 on I/O and resource errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use pdhjb::harness::{
    emit_results, run_bolza, run_convergence, run_legendre, run_soc, run_verify, ExperimentConfig, RunOutput,
};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Command {
    /// Hamiltonian by closed form, numeric minimization and grid search.
    Legendre,
    /// Deterministic value and minimizer at every initial datum.
    Bolza,
    /// Stochastic value by tree and exponential oracle.
    Soc,
    /// Vanishing-viscosity gap table over the n schedule.
    Converge,
    /// Subsolution, minimax, dynamic-programming and rescaling checks.
    Verify,
}

#[derive(Debug, Parser)]
#[command(name = "pdhjb", version, about = "Path-dependent value functions and their verification")]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// TOML experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run(cli: &Cli) -> pdhjb::Result<bool> {
    let mut config = ExperimentConfig::load(&cli.config)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(out) = &cli.out {
        config.output.dir = out.clone();
    }
    let output = match cli.command {
        Command::Legendre => RunOutput::Legendre(run_legendre(&config)?),
        Command::Bolza => RunOutput::Bolza(run_bolza(&config)?),
        Command::Soc => RunOutput::Soc(run_soc(&config)?),
        Command::Converge => RunOutput::Convergence(run_convergence(&config)?),
        Command::Verify => RunOutput::Verify(run_verify(&config)?),
    };
    let manifest = emit_results(&output, &config, &config.output.dir)?;
    if let RunOutput::Verify(bundle) = &output {
        let summaries = [
            &bundle.subsolution_soc.summary,
            &bundle.minimax_super.summary,
            &bundle.minimax_sub.summary,
            &bundle.dpp.summary,
            &bundle.rescaling.summary,
            &bundle.dini.summary,
        ];
        for ((name, status), summary) in bundle.statuses().into_iter().zip(summaries) {
            println!("{name:<16} {:<13} {summary}", format!("{status:?}").to_lowercase());
        }
    }
    for f in &manifest.failures {
        eprintln!("failure: {f}");
    }
    println!(
        "{} {} -> {} ({} files)",
        manifest.command,
        if manifest.passed { "passed" } else { "FAILED" },
        config.output.dir.display(),
        manifest.files.len() + 1
    );
    Ok(manifest.passed)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
