//! Subcommand implementations. `main` only parses flags and maps
//! [`CliError`] to an exit code.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::config::{self, ConfigError, LoadedConfig};
use crate::error::Error;
use crate::harness::{run_experiment, sweep, InputSpec, ORACLE_TOL};
use crate::protocol::{run_pipeline, STAGES, STAGE_FINAL};
use crate::validate::run_suite;

pub const DEFAULT_REPORT: &str = "report.json";

#[derive(Debug)]
pub enum CliError {
    /// Bad config or arguments. Exit code 2.
    Config(String),
    /// Invariant violation, failed check, or I/O failure. Exit code 1.
    Failure(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Failure(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) | CliError::Failure(m) => f.write_str(m),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        if e.is_config_error() {
            CliError::Config(e.to_string())
        } else {
            CliError::Failure(e.to_string())
        }
    }
}

fn io_failure(what: &str, path: &Path, e: std::io::Error) -> CliError {
    CliError::Failure(format!("{}: cannot {what}: {e}", path.display()))
}

fn stdout_failure(e: std::io::Error) -> CliError {
    CliError::Failure(format!("cannot write output: {e}"))
}

fn load(path: &Path) -> Result<LoadedConfig, CliError> {
    Ok(config::load(path)?)
}

/// Runs the Monte Carlo experiment and writes the JSON report.
pub fn cmd_run(
    config_path: &Path,
    output: Option<&Path>,
    jobs: Option<usize>,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let cfg = load(config_path)?;
    if cfg.spec.sweep.is_some() {
        return Err(CliError::Config(format!(
            "{}: run.sweep: config has a sweep section; use the `sweep` subcommand",
            config_path.display()
        )));
    }
    let report = run_experiment(&cfg.spec, jobs)?;
    let path: PathBuf = output
        .map(Path::to_path_buf)
        .or(cfg.output)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_REPORT));
    std::fs::write(&path, report.to_json()).map_err(|e| io_failure("write report", &path, e))?;

    let fidelity = report
        .mean_fidelity_kept
        .map_or("n/a".to_string(), |f| format!("{:.12}", f.mean));
    let oracle = report
        .oracle_max_deviation
        .map_or("off".to_string(), |d| format!("{d:.3e}"));
    writeln!(
        out,
        "success_probability {:.12} (se {:.3e})  mean_fidelity_kept {fidelity}  oracle_max_deviation {oracle}  -> {}",
        report.success_probability.mean,
        report.success_probability.standard_error,
        path.display()
    )
    .map_err(stdout_failure)?;

    if let Some(d) = report.oracle_max_deviation {
        if d.is_nan() || d > ORACLE_TOL {
            return Err(CliError::Failure(format!(
                "oracle deviation {d:e} exceeds {ORACLE_TOL:e}"
            )));
        }
    }
    Ok(())
}

/// Prints the amplitude table of one traced stage.
pub fn cmd_trace(config_path: &Path, stage: &str, out: &mut dyn Write) -> Result<(), CliError> {
    if !STAGES.contains(&stage) {
        return Err(CliError::Config(format!(
            "unknown stage `{stage}`; valid stages: {}",
            STAGES.join(", ")
        )));
    }
    let cfg = load(config_path)?;
    let spec = &cfg.spec;
    let reject = |m: &str| Err(CliError::Config(format!("{}: {m}", config_path.display())));
    if spec.sweep.is_some() {
        return reject("run.sweep: trace needs a config without a sweep section");
    }
    if spec.trials != 1 {
        return reject("run.trials: trace needs trials = 1");
    }
    if !spec.noise.is_deterministic() {
        return reject("noise.kind: trace needs a fixed noise matrix, not haar");
    }
    let InputSpec::Pure(q) = spec.input else {
        return reject("input: trace needs a single pure input, not an ensemble");
    };
    let run = run_pipeline(&q, &spec.noise.sample(0), &spec.decoder)?;
    let state = run
        .stage(stage)
        .ok_or_else(|| CliError::Failure(format!("stage `{stage}` missing from trace")))?;

    let mut rows: Vec<(String, String, num_complex::Complex64)> = state
        .iter()
        .map(|((r, s), a)| (r.to_string(), s.to_string(), a))
        .collect();
    rows.sort_by(|a, b| (&a.0, &a.1).cmp(&(&b.0, &b.1)));
    let write = |out: &mut dyn Write| -> std::io::Result<()> {
        writeln!(
            out,
            "# stage {stage}: {} terms, squared norm {:.12}",
            rows.len(),
            state.squared_norm()
        )?;
        for (r, s, a) in &rows {
            writeln!(out, "r={r}  s={s}  {:+.12} {:+.12}i", a.re, a.im)?;
        }
        Ok(())
    };
    write(out).map_err(stdout_failure)
}

pub const DEFAULT_TRACE_STAGE: &str = STAGE_FINAL;

/// Runs every sweep point and writes one CSV row per value.
/// Writes to `output` (or `run.output`) if set, otherwise to `out`.
pub fn cmd_sweep(
    config_path: &Path,
    output: Option<&Path>,
    jobs: Option<usize>,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let cfg = load(config_path)?;
    let Some(sw) = &cfg.spec.sweep else {
        return Err(CliError::Config(format!(
            "{}: run.sweep: missing; the sweep subcommand needs a sweep section",
            config_path.display()
        )));
    };
    let parameter = sw.parameter.name();
    let points = sweep(&cfg.spec, jobs)?;

    let mut csv = csv::Writer::from_writer(Vec::new());
    let header = [
        "parameter",
        "success_mean",
        "success_stderr",
        "fidelity_mean",
    ];
    let csv_failure = |e: csv::Error| CliError::Failure(format!("cannot format CSV: {e}"));
    csv.write_record(header).map_err(csv_failure)?;
    for (value, report) in &points {
        let fidelity = report
            .mean_fidelity_kept
            .map_or(String::new(), |f| f.mean.to_string());
        csv.write_record([
            value.to_string(),
            report.success_probability.mean.to_string(),
            report.success_probability.standard_error.to_string(),
            fidelity,
        ])
        .map_err(csv_failure)?;
    }
    let bytes = csv
        .into_inner()
        .map_err(|e| CliError::Failure(format!("cannot format CSV: {e}")))?;

    match output.map(Path::to_path_buf).or(cfg.output) {
        Some(path) => {
            std::fs::write(&path, &bytes).map_err(|e| io_failure("write CSV", &path, e))?;
            writeln!(
                out,
                "{} points of {parameter} -> {}",
                points.len(),
                path.display()
            )
            .map_err(stdout_failure)
        }
        None => out.write_all(&bytes).map_err(stdout_failure),
    }
}

/// Runs the built-in invariant suite and prints the manifest.
pub fn cmd_validate(out: &mut dyn Write) -> Result<(), CliError> {
    let checks = run_suite();
    for c in &checks {
        writeln!(
            out,
            "[{}] {}: observed {:e} (bound {})",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.observed,
            c.bound
        )
        .map_err(stdout_failure)?;
    }
    let failed: Vec<&str> = checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.name)
        .collect();
    if failed.is_empty() {
        writeln!(out, "{} checks passed", checks.len()).map_err(stdout_failure)?;
        Ok(())
    } else {
        Err(CliError::Failure(format!(
            "{} of {} checks failed: {}",
            failed.len(),
            checks.len(),
            failed.join("; ")
        )))
    }
}
