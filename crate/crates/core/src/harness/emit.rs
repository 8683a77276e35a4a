use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{ExperimentConfig, OutputFormat};
use super::convergence::{check_row_integrity, ConvergenceRow, ConvergenceTable};
use super::runners::{BolzaRun, LegendreTable, SocRun};
use super::verify::{CheckStatus, VerificationBundle};
use crate::error::{Error, Result};
use crate::paths::{format_f64, save_path};

/// Result of one subcommand, ready for emission.
#[allow(clippy::large_enum_variant)]
#[derive(Clone, Debug)]
pub enum RunOutput {
    Legendre(LegendreTable),
    Bolza(BolzaRun),
    Soc(SocRun),
    Convergence(ConvergenceTable),
    Verify(VerificationBundle),
}

impl RunOutput {
    pub fn command(&self) -> &'static str {
        match self {
            RunOutput::Legendre(_) => "legendre",
            RunOutput::Bolza(_) => "bolza",
            RunOutput::Soc(_) => "soc",
            RunOutput::Convergence(_) => "converge",
            RunOutput::Verify(_) => "verify",
        }
    }

    /// Human-readable failure reasons; empty means the run passed.
    pub fn failures(&self) -> Vec<String> {
        match self {
            RunOutput::Legendre(t) => t
                .rows
                .iter()
                .filter(|r| !r.passed)
                .map(|r| format!("p = {}: numeric error {:?}, grid error {:?}", r.p, r.numeric_error, r.brute_force_error))
                .collect(),
            RunOutput::Bolza(b) => b
                .rows
                .iter()
                .filter_map(|r| r.failure.as_ref().map(|f| format!("{}: {f}", r.datum)))
                .collect(),
            RunOutput::Soc(s) => s
                .rows
                .iter()
                .flat_map(|r| {
                    let mut out = Vec::new();
                    if let Some(f) = &r.tree_failure {
                        out.push(format!("{} n = {}: tree: {f}", r.datum, r.n));
                    }
                    if let Some(f) = &r.oracle_failure {
                        out.push(format!("{} n = {}: oracle: {f}", r.datum, r.n));
                    }
                    if r.tree.as_ref().is_some_and(|t| !t.within_bounds()) {
                        out.push(format!("{} n = {}: tree value outside its a priori bounds", r.datum, r.n));
                    }
                    out
                })
                .collect(),
            RunOutput::Convergence(c) => {
                let mut out: Vec<String> = c
                    .rows
                    .iter()
                    .filter_map(|r| r.failure.as_ref().map(|f| format!("{} n = {}: {f}", r.datum, r.n)))
                    .collect();
                if !c.trend.monotone_within_noise {
                    out.push("sup-gap is not non-increasing within noise".into());
                }
                if !c.trend.final_gap_ok {
                    out.push(format!(
                        "final sup-gap {:?} not below {}",
                        c.trend.final_gap, c.trend.final_gap_tolerance
                    ));
                }
                out
            }
            RunOutput::Verify(v) => v
                .statuses()
                .into_iter()
                .filter(|(_, s)| *s == CheckStatus::Fail)
                .map(|(name, _)| format!("{name} failed"))
                .collect(),
        }
    }

    pub fn passed(&self) -> bool {
        self.failures().is_empty()
    }
}

/// Commit record written after every other file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub tool_version: String,
    pub seed: u64,
    /// SHA-256 of the canonical TOML form of the effective configuration,
    /// output directory excluded.
    pub config_sha256: String,
    /// Output files relative to the output directory.
    pub files: Vec<String>,
    pub passed: bool,
    pub failures: Vec<String>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn config_hash(config: &ExperimentConfig) -> Result<String> {
    let mut canonical = config.clone();
    canonical.output.dir = PathBuf::new();
    let digest = Sha256::digest(canonical.to_toml()?.as_bytes());
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

fn opt(v: Option<f64>) -> String {
    v.map(format_f64).unwrap_or_default()
}

struct Sink {
    dir: PathBuf,
    files: Vec<String>,
}

impl Sink {
    fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.dir.join(name)
    }

    fn csv(&mut self, name: &str, header: &[&str], rows: Vec<Vec<String>>) -> Result<()> {
        let path = self.path(name);
        let f = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = csv::Writer::from_writer(f);
        w.write_record(header)?;
        for r in rows {
            w.write_record(&r)?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let path = self.path(name);
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }
}

pub const CONVERGENCE_COLUMNS: [&str; 10] =
    ["n", "datum", "t0", "vn", "vn_se", "vn_method", "v0", "v0_allowance", "gap", "failure"];

fn convergence_records(rows: &[ConvergenceRow]) -> Vec<Vec<String>> {
    rows.iter()
        .map(|r| {
            vec![
                format_f64(r.n),
                r.datum.clone(),
                format_f64(r.t0),
                opt(r.vn),
                format_f64(r.vn_se),
                r.vn_method.clone(),
                opt(r.v0),
                format_f64(r.v0_allowance),
                opt(r.gap),
                r.failure.clone().unwrap_or_default(),
            ]
        })
        .collect()
}

/// Writes `output` under `dir` in the configured formats and then the
/// manifest. Files are written one at a time from the calling thread.
pub fn emit_results(output: &RunOutput, config: &ExperimentConfig, dir: &Path) -> Result<Manifest> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut sink = Sink {
        dir: dir.to_path_buf(),
        files: Vec::new(),
    };
    let format = config.output.format;
    let csv = matches!(format, OutputFormat::Csv | OutputFormat::Both);
    let json = matches!(format, OutputFormat::Json | OutputFormat::Both);
    match output {
        RunOutput::Legendre(t) => {
            if csv {
                let rows = t
                    .rows
                    .iter()
                    .map(|r| {
                        vec![
                            format_f64(r.p),
                            opt(r.closed_form),
                            format_f64(r.numeric),
                            opt(r.brute_force),
                            opt(r.numeric_error),
                            opt(r.brute_force_error),
                            r.passed.to_string(),
                        ]
                    })
                    .collect();
                sink.csv(
                    "legendre.csv",
                    &["p", "closed_form", "numeric", "brute_force", "numeric_error", "brute_force_error", "passed"],
                    rows,
                )?;
            }
            if json {
                sink.json("legendre.json", t)?;
            }
        }
        RunOutput::Bolza(b) => {
            // Minimizer paths are always written; the tables point at them.
            let mut path_files = Vec::new();
            for r in &b.rows {
                match &r.minimizer {
                    Some(p) => {
                        let name = format!("bolza_path_{}.csv", r.datum);
                        let file = sink.path(&name);
                        save_path(p, &file)?;
                        path_files.push(Some(name));
                    }
                    None => path_files.push(None),
                }
            }
            if csv {
                let rows = b
                    .rows
                    .iter()
                    .zip(&path_files)
                    .map(|(r, pf)| {
                        let e = r.estimate.as_ref();
                        vec![
                            r.datum.clone(),
                            format_f64(r.t0),
                            e.map(|e| format_f64(e.value.to_f64())).unwrap_or_default(),
                            opt(e.map(|e| e.discretization_allowance)),
                            opt(e.map(|e| e.penalty_gap)),
                            e.map(|e| e.metadata.method.clone()).unwrap_or_default(),
                            pf.clone().unwrap_or_default(),
                            r.failure.clone().unwrap_or_default(),
                        ]
                    })
                    .collect();
                sink.csv(
                    "bolza.csv",
                    &["datum", "t0", "value", "discretization_allowance", "penalty_gap", "method", "path_file", "failure"],
                    rows,
                )?;
            }
            if json {
                #[derive(Serialize)]
                struct Entry<'a> {
                    #[serde(flatten)]
                    row: &'a super::runners::BolzaRow,
                    path_file: &'a Option<String>,
                }
                let entries: Vec<Entry> = b.rows.iter().zip(&path_files).map(|(row, path_file)| Entry { row, path_file }).collect();
                sink.json("bolza.json", &entries)?;
            }
        }
        RunOutput::Soc(s) => {
            if csv {
                let rows = s
                    .rows
                    .iter()
                    .map(|r| {
                        let t = r.tree.as_ref();
                        vec![
                            r.datum.clone(),
                            format_f64(r.t0),
                            format_f64(r.n),
                            opt(t.map(|t| t.value)),
                            t.map(|t| t.node_count.to_string()).unwrap_or_default(),
                            opt(t.map(|t| t.lower_bound)),
                            opt(t.map(|t| t.upper_bound)),
                            opt(r.oracle),
                            opt(r.oracle_se),
                            [r.tree_failure.as_deref(), r.oracle_failure.as_deref()]
                                .iter()
                                .flatten()
                                .cloned()
                                .collect::<Vec<_>>()
                                .join("; "),
                        ]
                    })
                    .collect();
                sink.csv(
                    "soc.csv",
                    &["datum", "t0", "n", "tree_value", "node_count", "lower_bound", "upper_bound", "oracle_value", "oracle_se", "failure"],
                    rows,
                )?;
            }
            if json {
                sink.json("soc.json", s)?;
            }
        }
        RunOutput::Convergence(c) => {
            if csv {
                sink.csv("convergence.csv", &CONVERGENCE_COLUMNS, convergence_records(&c.rows))?;
                let gaps = c
                    .sup_gaps
                    .iter()
                    .map(|g| {
                        vec![
                            format_f64(g.n),
                            opt(g.sup_gap),
                            format_f64(g.se),
                            format_f64(g.allowance),
                            g.failed_rows.to_string(),
                        ]
                    })
                    .collect();
                sink.csv("sup_gaps.csv", &["n", "sup_gap", "se", "allowance", "failed_rows"], gaps)?;
            }
            if json {
                sink.json("convergence.json", c)?;
            }
        }
        RunOutput::Verify(v) => {
            if csv {
                let mut rows = Vec::new();
                for (name, outcome) in [
                    ("subsolution_soc", &v.subsolution_soc),
                    ("minimax_super", &v.minimax_super),
                    ("minimax_sub", &v.minimax_sub),
                ] {
                    for e in outcome.detail.iter().flat_map(|r| &r.entries) {
                        rows.push(vec![
                            name.to_string(),
                            e.sample.to_string(),
                            e.terminal.to_string(),
                            format_f64(e.t0),
                            format_f64(e.t),
                            format_f64(e.left.to_f64()),
                            format_f64(e.right.to_f64()),
                            format_f64(e.standard_error),
                            e.violation.to_string(),
                            e.note.clone().unwrap_or_default(),
                            e.error.clone().unwrap_or_default(),
                        ]);
                    }
                }
                sink.csv(
                    "verify_entries.csv",
                    &["check", "sample", "terminal", "t0", "t", "left", "right", "standard_error", "violation", "note", "error"],
                    rows,
                )?;
                let summary = v
                    .statuses()
                    .into_iter()
                    .map(|(name, s)| vec![name.to_string(), serde_json::to_value(s).map(|j| j.as_str().unwrap_or_default().to_string()).unwrap_or_default()])
                    .collect();
                sink.csv("verify_summary.csv", &["check", "status"], summary)?;
            }
            if json {
                sink.json("verify.json", v)?;
            }
        }
    }
    let manifest = Manifest {
        command: output.command().to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        seed: config.seed,
        config_sha256: config_hash(config)?,
        files: sink.files.clone(),
        passed: output.passed(),
        failures: output.failures(),
    };
    let path = dir.join(MANIFEST_FILE);
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    let mut f = File::create(&path).map_err(|e| Error::io(&path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(&path, e))?;
    f.sync_all().map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

fn parse_opt(field: &str, what: &str) -> Result<Option<f64>> {
    if field.is_empty() {
        Ok(None)
    } else {
        parse(field, what).map(Some)
    }
}

fn parse(field: &str, what: &str) -> Result<f64> {
    field
        .parse()
        .map_err(|_| Error::Integrity(format!("column {what}: {field:?} is not a number")))
}

/// Reads `convergence.csv` back and recomputes every gap.
pub fn load_convergence_csv(path: &Path) -> Result<Vec<ConvergenceRow>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(f);
    if r.headers()?.iter().ne(CONVERGENCE_COLUMNS) {
        return Err(Error::Integrity(format!("{}: unexpected columns", path.display())));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != CONVERGENCE_COLUMNS.len() {
            return Err(Error::Integrity(format!("{}: short record", path.display())));
        }
        let text = |i: usize| rec[i].to_string();
        rows.push(ConvergenceRow {
            n: parse(&rec[0], "n")?,
            datum: text(1),
            t0: parse(&rec[2], "t0")?,
            vn: parse_opt(&rec[3], "vn")?,
            vn_se: parse(&rec[4], "vn_se")?,
            vn_method: text(5),
            v0: parse_opt(&rec[6], "v0")?,
            v0_allowance: parse(&rec[7], "v0_allowance")?,
            gap: parse_opt(&rec[8], "gap")?,
            failure: Some(text(9)).filter(|s| !s.is_empty()),
        });
    }
    check_row_integrity(&rows)?;
    Ok(rows)
}
