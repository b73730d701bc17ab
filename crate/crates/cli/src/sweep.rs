//! Parameter sweeps and critical-mass bisection. Runs are independent and may
//! execute concurrently; results are always collected in input order.

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::{create_dir, fmt_float, series_row, to_json, write_file, SERIES_HEADER};
use crate::runner::{run, RunResult};

/// Parameters a sweep may vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SweepParam {
    #[serde(rename = "mass")]
    Mass,
    #[serde(rename = "alpha")]
    Alpha,
    #[serde(rename = "L")]
    Length,
    #[serde(rename = "gamma")]
    Gamma,
    #[serde(rename = "C_2d")]
    C2d,
    #[serde(rename = "j0_scale")]
    J0Scale,
}

impl SweepParam {
    /// Accepts the config key names; `J0-scale` is an alias of `j0_scale`.
    pub fn parse(name: &str) -> Result<Self, CliError> {
        Ok(match name {
            "mass" => SweepParam::Mass,
            "alpha" => SweepParam::Alpha,
            "L" => SweepParam::Length,
            "gamma" => SweepParam::Gamma,
            "C_2d" => SweepParam::C2d,
            "j0_scale" | "J0-scale" => SweepParam::J0Scale,
            other => {
                return Err(CliError::Config {
                    key: "param".into(),
                    message: format!("cannot sweep `{other}`; expected mass, alpha, L, gamma, C_2d or j0_scale"),
                })
            }
        })
    }

    /// `base` with this parameter set to `value`.
    pub fn apply(self, base: &RunConfig, value: f64) -> RunConfig {
        let mut c = base.clone();
        match self {
            SweepParam::Mass => c.mass = value,
            SweepParam::Alpha => c.alpha = Some(value),
            SweepParam::Length => c.length = Some(value),
            SweepParam::Gamma => c.gamma = Some(value),
            SweepParam::C2d => c.c_2d = Some(value),
            SweepParam::J0Scale => c.j0_scale = Some(value),
        }
        c
    }
}

/// One row of a sweep table: the blow-up outcome and the last record.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub result: RunResult,
}

impl SweepRow {
    pub fn detected(&self) -> bool {
        self.result.output.blowup.detected
    }
}

pub const SWEEP_HEADER_PREFIX: &str = "value,detected,t_detect,criterion,";

fn check_values(values: &[f64]) -> Result<(), CliError> {
    match values.iter().find(|v| !v.is_finite()) {
        Some(v) => {
            Err(CliError::Config { key: "values".into(), message: format!("sweep values must be finite, got {v}") })
        }
        None => Ok(()),
    }
}

/// Runs `base` once per value, concurrently; rows keep the order of `values`.
pub fn sweep(base: &RunConfig, param: SweepParam, values: &[f64]) -> Result<Vec<SweepRow>, CliError> {
    check_values(values)?;
    values.par_iter().map(|&value| run(&param.apply(base, value)).map(|result| SweepRow { value, result })).collect()
}

/// Same as [`sweep`] but one run at a time.
pub fn sweep_serial(base: &RunConfig, param: SweepParam, values: &[f64]) -> Result<Vec<SweepRow>, CliError> {
    check_values(values)?;
    values.iter().map(|&value| run(&param.apply(base, value)).map(|result| SweepRow { value, result })).collect()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = format!("{SWEEP_HEADER_PREFIX}{SERIES_HEADER}\n");
    for row in rows {
        let b = &row.result.output.blowup;
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt_float(row.value),
            b.detected,
            b.t_detect.map(fmt_float).unwrap_or_default(),
            row.result.criterion.map(|c| c.to_string()).unwrap_or_default(),
            series_row(row.result.output.final_record()),
        ));
    }
    out
}

/// Writes `sweep.csv` and one run directory per value (`run_000`, ...).
pub fn write_sweep(dir: &Path, rows: &[SweepRow]) -> Result<(), CliError> {
    create_dir(dir)?;
    write_file(&dir.join("sweep.csv"), &sweep_csv(rows))?;
    for (k, row) in rows.iter().enumerate() {
        crate::output::write_run(&dir.join(format!("run_{k:03}")), &row.result)?;
    }
    Ok(())
}

/// Probes per bisection batch; each batch shrinks the bracket fourfold.
pub const PROBES_PER_BATCH: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Probe {
    pub mass: f64,
    pub detected: bool,
    pub t_detect: Option<f64>,
    pub batch: usize,
}

/// Result of a critical-mass bisection: an estimate with its bracket, never
/// an exact threshold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Bisection {
    pub estimate: f64,
    pub bracket: (f64, f64),
    pub tol: f64,
    /// Probe batches after the initial bracket check.
    pub batches: usize,
    pub probes: Vec<Probe>,
    /// Set when a batch was not monotone in mass (a global run above a blow-up).
    pub non_monotone: bool,
}

fn probe_batch(base: &RunConfig, masses: &[f64], batch: usize) -> Result<Vec<Probe>, CliError> {
    masses
        .par_iter()
        .map(|&mass| {
            let r = run(&SweepParam::Mass.apply(base, mass))?;
            Ok(Probe { mass, detected: r.output.blowup.detected, t_detect: r.output.blowup.t_detect, batch })
        })
        .collect()
}

/// Bisection on the mass with the blow-up flag as predicate.
pub fn bisect_critical_mass(base: &RunConfig, m_lo: f64, m_hi: f64, tol: f64) -> Result<Bisection, CliError> {
    let bad = |key: &str, message: String| CliError::Config { key: key.into(), message };
    if !(m_lo > 0.0 && m_lo.is_finite()) {
        return Err(bad("m_lo", format!("must be positive, got {m_lo}")));
    }
    if !(m_hi > m_lo && m_hi.is_finite()) {
        return Err(bad("m_hi", format!("must exceed m_lo = {m_lo}, got {m_hi}")));
    }
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(bad("tol", format!("must be positive, got {tol}")));
    }
    let mut probes = probe_batch(base, &[m_lo, m_hi], 0)?;
    if probes[0].detected || !probes[1].detected {
        return Err(CliError::Bracket { m_lo, lo_detected: probes[0].detected, m_hi, hi_detected: probes[1].detected });
    }
    let (mut lo, mut hi) = (m_lo, m_hi);
    let mut batches = 0;
    let mut non_monotone = false;
    while hi - lo > tol {
        batches += 1;
        let step = (hi - lo) / (PROBES_PER_BATCH + 1) as f64;
        let masses: Vec<f64> = (1..=PROBES_PER_BATCH).map(|k| lo + step * k as f64).collect();
        let batch = probe_batch(base, &masses, batches)?;
        let first_blowup = batch.iter().position(|p| p.detected);
        if let Some(k) = first_blowup {
            non_monotone |= batch[k..].iter().any(|p| !p.detected);
        }
        let k = first_blowup.unwrap_or(PROBES_PER_BATCH);
        if k > 0 {
            lo = masses[k - 1];
        }
        if k < PROBES_PER_BATCH {
            hi = masses[k];
        }
        probes.extend(batch);
    }
    Ok(Bisection { estimate: 0.5 * (lo + hi), bracket: (lo, hi), tol, batches, probes, non_monotone })
}

pub fn write_bisection(dir: &Path, b: &Bisection) -> Result<(), CliError> {
    create_dir(dir)?;
    write_file(&dir.join("bisect.json"), &to_json(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_names() {
        assert_eq!(SweepParam::parse("L").unwrap(), SweepParam::Length);
        assert_eq!(SweepParam::parse("J0-scale").unwrap(), SweepParam::J0Scale);
        assert!(matches!(SweepParam::parse("t_end"), Err(CliError::Config { key, .. }) if key == "param"));
    }

    #[test]
    fn empty_sweep_is_an_empty_table() {
        let base = RunConfig::minimal(crate::config::Model::Bks1d, 0.5, 1.0);
        assert!(sweep(&base, SweepParam::Mass, &[]).unwrap().is_empty());
        assert_eq!(sweep_csv(&[]).lines().count(), 1);
    }

    #[test]
    fn bracket_arguments_are_checked() {
        let base = RunConfig::minimal(crate::config::Model::Bks1d, 0.5, 1.0);
        assert!(
            matches!(bisect_critical_mass(&base, 1.0, 0.5, 0.1), Err(CliError::Config { key, .. }) if key == "m_hi")
        );
        assert!(
            matches!(bisect_critical_mass(&base, 0.5, 1.0, 0.0), Err(CliError::Config { key, .. }) if key == "tol")
        );
    }
}
