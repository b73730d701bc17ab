//! Writers for `series.csv`, `report.json` and `terminal_field.csv`.
//!
//! Floats are written as `{:.16e}`, i.e. with 17 significant digits, so every
//! value round-trips exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use polarsim_core::driver::Terminal;
use polarsim_core::DiagnosticsRecord;
use serde::Serialize;

use crate::error::CliError;
use crate::runner::RunResult;

pub const SERIES_HEADER: &str =
    "t,mass,trace,J,I,J_alpha,entropy,rel_entropy,lyapunov,dissipation,max_density,boundary_mass_fraction";

pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_float).unwrap_or_default()
}

/// One CSV row in the order of [`SERIES_HEADER`]; inapplicable columns are empty.
pub fn series_row(r: &DiagnosticsRecord) -> String {
    [
        fmt_float(r.t),
        fmt_float(r.mass),
        fmt_float(r.trace),
        fmt_float(r.j),
        fmt_float(r.i),
        fmt_opt(r.j_alpha),
        fmt_float(r.entropy),
        fmt_opt(r.rel_entropy),
        fmt_opt(r.lyapunov),
        fmt_opt(r.dissipation),
        fmt_float(r.max_density),
        fmt_float(r.boundary_mass_fraction),
    ]
    .join(",")
}

pub fn series_csv(records: &[DiagnosticsRecord]) -> String {
    let mut out = String::with_capacity(records.len() * 256);
    out.push_str(SERIES_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&series_row(r));
        out.push('\n');
    }
    out
}

/// `z,value` rows for 1D runs, `y,z,value` rows (z outer, y inner) for 2D runs.
pub fn terminal_csv(terminal: &Terminal<f64>) -> String {
    let mut out = String::new();
    match terminal {
        Terminal::OneD { field, .. } => {
            out.push_str("z,value\n");
            for (i, v) in field.values().iter().enumerate() {
                let _ = writeln!(out, "{},{}", fmt_float(field.grid().center(i)), fmt_float(*v));
            }
        }
        Terminal::TwoD { field } => {
            out.push_str("y,z,value\n");
            let g = field.grid();
            for i in 0..g.nz() {
                for j in 0..g.ny() {
                    let _ = writeln!(
                        out,
                        "{},{},{}",
                        fmt_float(g.y_center(j)),
                        fmt_float(g.z_center(i)),
                        fmt_float(field.at(j, i))
                    );
                }
            }
        }
    }
    out
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize to JSON");
    s.push('\n');
    s
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

pub fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })
}

/// Writes the three run artifacts into `dir`.
pub fn write_run(dir: &Path, result: &RunResult) -> Result<(), CliError> {
    create_dir(dir)?;
    write_file(&dir.join("series.csv"), &series_csv(&result.output.records))?;
    write_file(&dir.join("report.json"), &to_json(&result.report()))?;
    write_file(&dir.join("terminal_field.csv"), &terminal_csv(&result.output.terminal))
}
