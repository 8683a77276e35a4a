//! Python module `pdhjb_py`. Paths cross the boundary as a list of times
//! and a flat row-major list of values; reports come back as JSON strings.

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: pdhjb::Error) -> PyErr {
    match e.exit_code() {
        2 => PyValueError::new_err(e.to_string()),
        3 => PyIOError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn to_json<T: serde::Serialize>(v: &T) -> PyResult<String> {
    serde_json::to_string(v).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

#[pymodule]
mod pdhjb_py {
    use pdhjb::bolza::{solve_doc_constrained, BolzaProblem, DocOptions, TerminalCost};
    use pdhjb::harness::{
        emit_results, run_bolza, run_convergence, run_legendre, run_soc, run_verify, ExperimentConfig, RunOutput,
    };
    use pdhjb::lagrangian::{hamiltonian as hamiltonian_core, HamiltonianOptions};
    use pdhjb::stochastic::{solve_soc_tree, ControlGrid, LatticeSpec};
    use pdhjb::{DiscretePath, Lagrangian, TimeGrid};
    use pyo3::prelude::*;

    use super::{to_json, to_py};

    fn path(times: Vec<f64>, values: Vec<f64>, dim: usize) -> PyResult<DiscretePath> {
        let grid = TimeGrid::new(times).map_err(to_py)?;
        DiscretePath::new(grid, dim, values).map_err(to_py)
    }

    fn problem(lagrangian: &str, terminal: &str, dim: usize, horizon: f64) -> PyResult<BolzaProblem> {
        let l = Lagrangian::from_name(lagrangian, dim, horizon).map_err(to_py)?;
        let h = TerminalCost::from_name(terminal, dim).map_err(to_py)?;
        Ok(BolzaProblem::new(l, h))
    }

    /// `inf_a [a·p + ℓ(t, a)]` for a registry running cost.
    #[pyfunction]
    #[pyo3(signature = (lagrangian, p, t = 0.0, horizon = 1.0, numeric = false))]
    fn hamiltonian(lagrangian: &str, p: Vec<f64>, t: f64, horizon: f64, numeric: bool) -> PyResult<f64> {
        let l = Lagrangian::from_name(lagrangian, p.len(), horizon).map_err(to_py)?;
        let opts = HamiltonianOptions {
            force_numeric: numeric,
            ..HamiltonianOptions::default()
        };
        hamiltonian_core(&l, t, &p, &opts).map_err(to_py)
    }

    /// Deterministic value at `(t0, x0)`; returns the estimate as JSON and
    /// the minimizer as `(times, values)`.
    #[pyfunction]
    #[pyo3(signature = (lagrangian, terminal, t0, times, values, dim = 1, horizon = 1.0, cells = 64, restarts = 20, seed = 0))]
    #[allow(clippy::too_many_arguments)]
    fn bolza_value(
        lagrangian: &str,
        terminal: &str,
        t0: f64,
        times: Vec<f64>,
        values: Vec<f64>,
        dim: usize,
        horizon: f64,
        cells: usize,
        restarts: usize,
        seed: u64,
    ) -> PyResult<(String, Vec<f64>, Vec<f64>)> {
        let prob = problem(lagrangian, terminal, dim, horizon)?;
        let x0 = path(times, values, dim)?;
        let opts = DocOptions {
            restarts,
            seed,
            ..DocOptions::default()
        };
        let (est, minimizer) = solve_doc_constrained(&prob, t0, &x0, cells, &opts).map_err(to_py)?;
        Ok((to_json(&est)?, minimizer.times().to_vec(), minimizer.values().to_vec()))
    }

    /// Stochastic value by backward induction on a two-point lattice with a
    /// symmetric control grid; returns the result as JSON.
    #[pyfunction]
    #[pyo3(signature = (lagrangian, terminal, t0, times, values, n, steps = 4, radius = 2.0, per_side = 6, dim = 1, horizon = 1.0))]
    #[allow(clippy::too_many_arguments)]
    fn soc_value(
        lagrangian: &str,
        terminal: &str,
        t0: f64,
        times: Vec<f64>,
        values: Vec<f64>,
        n: f64,
        steps: usize,
        radius: f64,
        per_side: usize,
        dim: usize,
        horizon: f64,
    ) -> PyResult<String> {
        let prob = problem(lagrangian, terminal, dim, horizon)?;
        let x0 = path(times, values, dim)?;
        let spec = LatticeSpec::new(steps, ControlGrid::symmetric(radius, per_side));
        to_json(&solve_soc_tree(&prob, t0, &x0, n, &spec).map_err(to_py)?)
    }

    /// Runs a subcommand from a TOML configuration and returns
    /// `(passed, manifest_json)`.
    #[pyfunction]
    #[pyo3(signature = (command, config, seed = None, out = None))]
    fn run(command: &str, config: std::path::PathBuf, seed: Option<u64>, out: Option<std::path::PathBuf>) -> PyResult<(bool, String)> {
        let mut cfg = ExperimentConfig::load(&config).map_err(to_py)?;
        if let Some(s) = seed {
            cfg.seed = s;
        }
        if let Some(o) = out {
            cfg.output.dir = o;
        }
        let output = match command {
            "legendre" => RunOutput::Legendre(run_legendre(&cfg).map_err(to_py)?),
            "bolza" => RunOutput::Bolza(run_bolza(&cfg).map_err(to_py)?),
            "soc" => RunOutput::Soc(run_soc(&cfg).map_err(to_py)?),
            "converge" => RunOutput::Convergence(run_convergence(&cfg).map_err(to_py)?),
            "verify" => RunOutput::Verify(run_verify(&cfg).map_err(to_py)?),
            other => {
                return Err(pyo3::exceptions::PyValueError::new_err(format!("unknown command {other:?}")));
            }
        };
        let manifest = emit_results(&output, &cfg, &cfg.output.dir).map_err(to_py)?;
        Ok((manifest.passed, to_json(&manifest)?))
    }
}
