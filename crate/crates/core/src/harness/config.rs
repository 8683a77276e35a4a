use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bolza::{BolzaProblem, DocOptions, TerminalCost};
use crate::error::{Error, Result};
use crate::lagrangian::Lagrangian;
use crate::paths::{load_path, DiscretePath, GridSpec, TimeGrid};
use crate::stochastic::ControlGrid;

/// Declarative experiment description, read from TOML. Unknown keys are
/// rejected at every level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    pub problem: ProblemConfig,
    #[serde(default = "default_data")]
    pub initial_data: Vec<InitialDatum>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default)]
    pub legendre: LegendreConfig,
    #[serde(default)]
    pub output: OutputConfig,
    /// Directory that relative data files are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    /// Running-cost registry name, e.g. `quadratic` or `power:1.5`.
    pub lagrangian: String,
    /// Terminal-cost registry name, e.g. `endpoint_quadratic:1` or `tanh_max`.
    pub terminal: String,
    #[serde(default = "one")]
    pub horizon: f64,
    #[serde(default = "one_usize")]
    pub dim: usize,
}

/// An initial datum `(t0, x0)`. `kind` selects the generator:
/// `zero`, `constant` (uses `value`), `linear` (`value + slope·t`),
/// `sqrt` (`√t` in every coordinate) or `file` (path CSV at `file`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialDatum {
    pub id: String,
    #[serde(default)]
    pub t0: f64,
    pub kind: String,
    #[serde(default)]
    pub value: Option<f64>,
    #[serde(default)]
    pub slope: Option<f64>,
    #[serde(default)]
    pub file: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ControlGridSetting {
    /// `auto` or `symmetric:<radius>:<points_per_side>`.
    Named(String),
    /// Explicit scalar levels (dimension 1, or the same levels per coordinate).
    Levels(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Transcription cells `N` on `[0, T]`.
    pub cells: usize,
    /// `uniform` or `geometric:<ratio>`.
    pub grid: String,
    pub restarts: usize,
    /// Tree steps on `[t0, T]`.
    pub steps: usize,
    pub control_grid: ControlGridSetting,
    pub node_budget: u64,
    /// Monte-Carlo paths `M` for the quadratic oracle.
    pub samples: usize,
    /// Simulation cells on `[t0, T]` for the quadratic oracle.
    pub mc_cells: usize,
    pub n_schedule: Vec<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            cells: 64,
            grid: "uniform".into(),
            restarts: 20,
            steps: 6,
            control_grid: ControlGridSetting::Named("auto".into()),
            node_budget: 20_000_000,
            samples: 100_000,
            mc_cells: 64,
            n_schedule: vec![1.0, 4.0, 16.0, 64.0, 256.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Added to every inequality check.
    pub check: f64,
    /// Multiplier on the discretization allowance for dynamic-programming tightness.
    pub dpp_factor: f64,
    /// Rescaling-identity gap away from the exact endpoints `t0 ∈ {0, 1}`.
    pub rescaling: f64,
    /// Rescaling-identity gap at `t0 ∈ {0, 1}`.
    pub rescaling_exact: f64,
    /// Numeric against closed-form Hamiltonian.
    pub legendre: f64,
    /// Numeric Hamiltonian against the brute-force grid search.
    pub brute_force: f64,
    /// Largest admissible sup-gap at the last viscosity index.
    pub final_gap: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            check: 1e-6,
            dpp_factor: 2.0,
            rescaling: 0.02,
            rescaling_exact: 1e-12,
            legendre: 1e-6,
            brute_force: 1e-6,
            final_gap: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifyConfig {
    /// Viscosity index of the stochastic value under test.
    pub n: f64,
    pub soc_steps: usize,
    pub soc_control_grid: ControlGridSetting,
    pub soc_samples: usize,
    /// Gaussian paths per stochastic subsolution sample.
    pub mc_paths: usize,
    pub minimax_samples: usize,
    /// Lattice `T/k` for sampled times of the minimax checks.
    pub sample_steps: usize,
    pub rescaling_steps: usize,
    /// Constant added to every value functional before checking (fault injection).
    pub offset: f64,
    /// Directions of the Dini probes at the first datum.
    pub dini_directions: Vec<f64>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            n: 4.0,
            soc_steps: 4,
            soc_control_grid: ControlGridSetting::Named("symmetric:2:6".into()),
            soc_samples: 50,
            mc_paths: 64,
            minimax_samples: 100,
            sample_steps: 8,
            rescaling_steps: 4,
            offset: 0.0,
            dini_directions: vec![-1.0, 0.0, 1.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LegendreConfig {
    pub p_min: f64,
    pub p_max: f64,
    pub points: usize,
    pub time: f64,
    /// Half-width of the brute-force velocity grid.
    pub brute_force_radius: f64,
}

impl Default for LegendreConfig {
    fn default() -> Self {
        LegendreConfig {
            p_min: -5.0,
            p_max: 5.0,
            points: 11,
            time: 0.0,
            brute_force_radius: 50.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Json,
    Both,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub format: OutputFormat,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("results"),
            format: OutputFormat::Both,
        }
    }
}

fn one() -> f64 {
    1.0
}

fn one_usize() -> usize {
    1
}

fn default_data() -> Vec<InitialDatum> {
    vec![InitialDatum {
        id: "zero".into(),
        t0: 0.0,
        kind: "zero".into(),
        value: None,
        slope: None,
        file: None,
    }]
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl ControlGridSetting {
    pub fn build(&self, dim: usize) -> Result<ControlGrid> {
        match self {
            ControlGridSetting::Levels(levels) => {
                if levels.is_empty() || levels.iter().any(|v| !v.is_finite()) {
                    return Err(config_err("control grid levels must be finite and non-empty"));
                }
                let mut points: Vec<Vec<f64>> = vec![Vec::new()];
                for _ in 0..dim {
                    points = points
                        .into_iter()
                        .flat_map(|p| {
                            levels.iter().map(move |&v| {
                                let mut q = p.clone();
                                q.push(v);
                                q
                            })
                        })
                        .collect();
                }
                Ok(ControlGrid::explicit(points))
            }
            ControlGridSetting::Named(name) => {
                let name = name.trim();
                if name == "auto" {
                    return Ok(ControlGrid::auto());
                }
                if let Some(rest) = name.strip_prefix("symmetric:") {
                    let mut parts = rest.split(':');
                    let radius: Option<f64> = parts.next().and_then(|r| r.trim().parse().ok());
                    let per_side: Option<usize> = parts.next().and_then(|r| r.trim().parse().ok());
                    if let (Some(r), Some(k), None) = (radius, per_side, parts.next()) {
                        if r > 0.0 && r.is_finite() && k > 0 {
                            let levels = (-(k as i64)..=k as i64).map(|i| r * i as f64 / k as f64).collect();
                            return ControlGridSetting::Levels(levels).build(dim);
                        }
                    }
                }
                Err(config_err(format!(
                    "unknown control grid {name:?}; expected \"auto\", \"symmetric:<radius>:<points_per_side>\" or a list of levels"
                )))
            }
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str, base_dir: impl Into<PathBuf>) -> Result<ExperimentConfig> {
        let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        cfg.base_dir = base_dir.into();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        ExperimentConfig::from_toml_str(&text, base)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| config_err(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.problem;
        if !(p.horizon > 0.0 && p.horizon.is_finite()) {
            return Err(config_err(format!("horizon must be positive, got {}", p.horizon)));
        }
        if p.dim == 0 {
            return Err(config_err("dimension must be at least 1"));
        }
        self.lagrangian()?;
        self.terminal()?;
        GridSpec::parse(&self.solver.grid)?;
        self.solver.control_grid.build(p.dim)?;
        self.verify.soc_control_grid.build(p.dim)?;
        if self.initial_data.is_empty() {
            return Err(config_err("at least one initial datum is required"));
        }
        let mut ids: Vec<&str> = self.initial_data.iter().map(|d| d.id.as_str()).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(config_err("initial datum ids must be unique"));
        }
        for d in &self.initial_data {
            if !(d.t0 >= 0.0 && d.t0 < p.horizon) {
                return Err(config_err(format!("datum {:?}: t0 = {} outside [0, T)", d.id, d.t0)));
            }
            if d.id.is_empty() || d.id.contains([',', '/', '\\', '"']) {
                return Err(config_err(format!("datum id {:?} must be non-empty without , / \\ \"", d.id)));
            }
            match d.kind.as_str() {
                "zero" | "sqrt" => {}
                "constant" if d.value.is_some() => {}
                "linear" if d.slope.is_some() => {}
                "file" if d.file.is_some() => {}
                other => {
                    return Err(config_err(format!(
                        "datum {:?}: kind {other:?} is unknown or misses its parameter",
                        d.id
                    )))
                }
            }
        }
        let s = &self.solver;
        if s.cells == 0 || s.restarts == 0 || s.steps == 0 || s.samples == 0 || s.mc_cells == 0 || s.node_budget == 0 {
            return Err(config_err("solver sizes must be positive"));
        }
        if s.n_schedule.is_empty() || s.n_schedule.iter().any(|n| !(*n >= 1.0 && n.is_finite())) {
            return Err(config_err("n_schedule must be a non-empty list of values ≥ 1"));
        }
        let t = &self.tolerances;
        let all = [
            ("check", t.check),
            ("dpp_factor", t.dpp_factor),
            ("rescaling", t.rescaling),
            ("rescaling_exact", t.rescaling_exact),
            ("legendre", t.legendre),
            ("brute_force", t.brute_force),
            ("final_gap", t.final_gap),
        ];
        if let Some((name, v)) = all.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
            return Err(config_err(format!("tolerance {name} must be positive, got {v}")));
        }
        let v = &self.verify;
        if !(v.n >= 1.0 && v.n.is_finite()) {
            return Err(config_err("verify.n must be ≥ 1"));
        }
        if v.soc_steps == 0 || v.soc_samples == 0 || v.minimax_samples == 0 || v.sample_steps == 0 || v.rescaling_steps == 0 {
            return Err(config_err("verify sizes must be positive"));
        }
        if v.mc_paths < 2 || v.mc_paths % 2 == 1 {
            return Err(config_err("verify.mc_paths must be even and at least 2"));
        }
        if !v.offset.is_finite() || v.dini_directions.iter().any(|a| !a.is_finite()) {
            return Err(config_err("verify offset and directions must be finite"));
        }
        let l = &self.legendre;
        if !(l.p_min <= l.p_max && l.points >= 1 && l.brute_force_radius > 0.0) {
            return Err(config_err("legendre grid needs p_min ≤ p_max, points ≥ 1 and a positive radius"));
        }
        Ok(())
    }

    pub fn lagrangian(&self) -> Result<Lagrangian> {
        Lagrangian::from_name(&self.problem.lagrangian, self.problem.dim, self.problem.horizon)
            .map_err(|e| config_err(format!("problem.lagrangian: {e}")))
    }

    pub fn terminal(&self) -> Result<TerminalCost> {
        TerminalCost::from_name(&self.problem.terminal, self.problem.dim)
            .map_err(|e| config_err(format!("problem.terminal: {e}")))
    }

    pub fn problem(&self) -> Result<BolzaProblem> {
        Ok(BolzaProblem::new(self.lagrangian()?, self.terminal()?))
    }

    pub fn doc_options(&self) -> Result<DocOptions> {
        Ok(DocOptions {
            grid: GridSpec::parse(&self.solver.grid)?,
            restarts: self.solver.restarts,
            seed: self.seed,
            ..DocOptions::default()
        })
    }

    /// Cells on `[t0, T]`, proportional to the remaining time.
    pub fn cells_from(&self, t0: f64) -> usize {
        let horizon = self.problem.horizon;
        ((self.solver.cells as f64) * (horizon - t0) / horizon).round().max(1.0) as usize
    }

    /// The initial path of a datum on `[0, T]` (generators use 64 uniform
    /// cells with `t0` added as a node).
    pub fn initial_path(&self, datum: &InitialDatum) -> Result<DiscretePath> {
        let horizon = self.problem.horizon;
        let d = self.problem.dim;
        let grid = TimeGrid::uniform(0.0, horizon, 64)?.with_node(datum.t0);
        let path = match datum.kind.as_str() {
            "zero" => DiscretePath::from_fn(grid, d, |_, o| o.fill(0.0))?,
            "constant" => {
                let c = datum.value.unwrap_or(0.0);
                DiscretePath::from_fn(grid, d, |_, o| o.fill(c))?
            }
            "linear" => {
                let (c, s) = (datum.value.unwrap_or(0.0), datum.slope.unwrap_or(0.0));
                DiscretePath::from_fn(grid, d, |t, o| o.fill(c + s * t))?
            }
            "sqrt" => DiscretePath::from_fn(grid, d, |t, o| o.fill(t.sqrt()))?,
            "file" => {
                let file = datum.file.as_ref().ok_or_else(|| config_err("file datum without path"))?;
                let path = load_path(&self.base_dir.join(file))?;
                if path.dim() != d {
                    return Err(config_err(format!(
                        "datum {:?}: file has dimension {}, problem has {d}",
                        datum.id,
                        path.dim()
                    )));
                }
                if path.start() > 0.0 || path.horizon() < datum.t0 {
                    return Err(config_err(format!(
                        "datum {:?}: file path must cover [0, t0]",
                        datum.id
                    )));
                }
                path
            }
            other => return Err(config_err(format!("unknown datum kind {other:?}"))),
        };
        Ok(path)
    }
}
