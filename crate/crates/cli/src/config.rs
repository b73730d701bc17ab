//! Run configuration: a flat JSON object with snake_case keys, validated and
//! completed with defaults before a run.

use std::path::{Path, PathBuf};

use polarsim_core::initial::read_table;
use polarsim_core::Profile;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CliError;

/// Which model a run integrates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Model {
    Bks1d,
    Rescaled1d,
    Exchange1d,
    Interval1d,
    Range1d,
    Transversal2d,
    Potential2d,
}

impl Model {
    pub const ALL: [Model; 7] = [
        Model::Bks1d,
        Model::Rescaled1d,
        Model::Exchange1d,
        Model::Interval1d,
        Model::Range1d,
        Model::Transversal2d,
        Model::Potential2d,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Model::Bks1d => "bks1d",
            Model::Rescaled1d => "rescaled1d",
            Model::Exchange1d => "exchange1d",
            Model::Interval1d => "interval1d",
            Model::Range1d => "range1d",
            Model::Transversal2d => "transversal2d",
            Model::Potential2d => "potential2d",
        }
    }

    pub fn is_2d(self) -> bool {
        matches!(self, Model::Transversal2d | Model::Potential2d)
    }
}

pub const DEFAULT_CFL: f64 = 0.45;
pub const DEFAULT_GAMMA: f64 = 1.0;
pub const DEFAULT_N_CELLS: usize = 400;
pub const DEFAULT_N_2D: usize = 64;
pub const DEFAULT_DT_FLOOR: f64 = 1e-12;
/// Outputs per run when `output_every` is not given.
pub const DEFAULT_OUTPUTS: f64 = 200.0;
/// The 1D box is `30 / M` long unless `z_max` is given.
pub const DEFAULT_LENGTH_TIMES_MASS: f64 = 30.0;
pub const DEFAULT_Z_MAX_2D: f64 = 10.0;
pub const DEFAULT_Y_HALF_WIDTH_2D: f64 = 10.0;

/// A run configuration as written by the user. Keys that do not apply to the
/// chosen model are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: Model,
    pub mass: f64,
    pub t_end: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_cells: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ny: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nz: Option<usize>,
    /// Shape of the initial density in `z`; exponential with rate one by default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<Profile>,
    /// Two-column `z value` file used instead of `initial`, relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_table: Option<PathBuf>,
    /// Width of the Gaussian transverse profile (2D).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_center: Option<f64>,
    /// Relative amplitude of the multiplicative random perturbation of the initial data.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// Initial boundary concentration of the exchange model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu0: Option<f64>,
    /// Range parameter of the finite-range model.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Length of the interval model.
    #[serde(rename = "L", default, skip_serializing_if = "Option::is_none")]
    pub length: Option<f64>,
    /// Constant of the 2D concentration criterion `I0 <= C M^3`.
    #[serde(rename = "C_2d", default, skip_serializing_if = "Option::is_none")]
    pub c_2d: Option<f64>,
    /// Stretch of the initial profile in `z`; scales the first moment.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j0_scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cfl: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_floor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_every: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub density_cap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace_cap: Option<f64>,
}

/// Geometry of a resolved run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dim")]
pub enum GridSpec {
    #[serde(rename = "1d")]
    OneD { z_max: f64, n_cells: usize },
    #[serde(rename = "2d")]
    TwoD { y_min: f64, y_max: f64, z_max: f64, ny: usize, nz: usize },
}

/// A validated configuration with every default filled in; this is what
/// `report.json` echoes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedConfig {
    pub model: Model,
    pub mass: f64,
    pub t_end: f64,
    pub grid: GridSpec,
    pub initial: Profile,
    pub j0_scale: f64,
    pub noise: f64,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y_sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y_center: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(rename = "L", skip_serializing_if = "Option::is_none")]
    pub length: Option<f64>,
    #[serde(rename = "C_2d", skip_serializing_if = "Option::is_none")]
    pub c_2d: Option<f64>,
    pub cfl: f64,
    pub dt_floor: f64,
    pub output_every: f64,
    /// Filled by the runner when not given, since the default depends on the grid.
    pub density_cap: Option<f64>,
    /// Filled by the runner when not given, since the default depends on the initial trace.
    pub trace_cap: Option<f64>,
}

fn config_error(key: &str, message: impl Into<String>) -> CliError {
    CliError::Config { key: key.to_string(), message: message.into() }
}

/// The key named in a serde error message (the first backquoted word).
fn key_of(message: &str) -> String {
    message.split('`').nth(1).unwrap_or("config").to_string()
}

/// Parses a configuration from JSON text. Relative `initial_table` paths are
/// resolved against `base_dir`.
pub fn parse_config_str(text: &str, base_dir: Option<&Path>) -> Result<RunConfig, CliError> {
    let value: Value =
        serde_json::from_str(text).map_err(|e| config_error("config", format!("not valid JSON: {e}")))?;
    let object = value.as_object().ok_or_else(|| config_error("config", "expected a JSON object"))?;
    if let Some(model) = object.get("model") {
        let known = model.as_str().is_some_and(|m| Model::ALL.iter().any(|k| k.name() == m));
        if !known {
            let names: Vec<&str> = Model::ALL.iter().map(|m| m.name()).collect();
            return Err(config_error("model", format!("unknown model {model}, expected one of {}", names.join(", "))));
        }
    }
    let mut config: RunConfig = serde_json::from_value(value).map_err(|e| {
        let message = e.to_string();
        config_error(&key_of(&message), message)
    })?;
    if let (Some(dir), Some(table)) = (base_dir, config.initial_table.as_ref()) {
        if table.is_relative() {
            config.initial_table = Some(dir.join(table));
        }
    }
    config.resolve()?;
    Ok(config)
}

/// Reads and validates a configuration file.
pub fn parse_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| config_error("config", format!("cannot read {}: {e}", path.display())))?;
    parse_config_str(&text, path.parent())
}

fn positive(key: &str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(config_error(key, format!("must be positive and finite, got {v}")))
    }
}

fn nonnegative(key: &str, v: f64) -> Result<f64, CliError> {
    if v >= 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(config_error(key, format!("must be nonnegative and finite, got {v}")))
    }
}

fn cells(key: &str, n: usize) -> Result<usize, CliError> {
    if n >= polarsim_core::grid::MIN_CELLS {
        Ok(n)
    } else {
        Err(config_error(key, format!("needs at least {} cells, got {n}", polarsim_core::grid::MIN_CELLS)))
    }
}

impl RunConfig {
    /// A configuration with only the required keys set.
    pub fn minimal(model: Model, mass: f64, t_end: f64) -> Self {
        Self {
            model,
            mass,
            t_end,
            n_cells: None,
            z_max: None,
            y_min: None,
            y_max: None,
            ny: None,
            nz: None,
            initial: None,
            initial_table: None,
            y_sigma: None,
            y_center: None,
            noise: None,
            seed: None,
            gamma: None,
            mu0: None,
            alpha: None,
            length: None,
            c_2d: None,
            j0_scale: None,
            cfl: None,
            dt_floor: None,
            output_every: None,
            density_cap: None,
            trace_cap: None,
        }
    }

    /// Keys that are set but meaningless for the model.
    fn stray_key(&self) -> Option<&'static str> {
        let m = self.model;
        let one_d = !m.is_2d();
        let checks: [(&'static str, bool, bool); 11] = [
            ("n_cells", self.n_cells.is_some(), one_d),
            ("z_max", self.z_max.is_some(), m != Model::Interval1d),
            ("y_min", self.y_min.is_some(), m.is_2d()),
            ("y_max", self.y_max.is_some(), m.is_2d()),
            ("ny", self.ny.is_some(), m.is_2d()),
            ("nz", self.nz.is_some(), m.is_2d()),
            ("y_sigma", self.y_sigma.is_some(), m.is_2d()),
            ("y_center", self.y_center.is_some(), m.is_2d()),
            ("L", self.length.is_some(), m == Model::Interval1d),
            ("alpha", self.alpha.is_some(), m == Model::Range1d),
            ("C_2d", self.c_2d.is_some(), m.is_2d()),
        ];
        if let Some((key, _, _)) = checks.iter().find(|(_, set, allowed)| *set && !*allowed) {
            return Some(key);
        }
        if (self.gamma.is_some() || self.mu0.is_some()) && m != Model::Exchange1d {
            return Some(if self.gamma.is_some() { "gamma" } else { "mu0" });
        }
        None
    }

    /// Validates the configuration and fills in defaults.
    pub fn resolve(&self) -> Result<ResolvedConfig, CliError> {
        if let Some(key) = self.stray_key() {
            return Err(config_error(key, format!("does not apply to model {}", self.model.name())));
        }
        let mass = positive("mass", self.mass)?;
        let t_end = positive("t_end", self.t_end)?;
        let model = self.model;

        let gamma = match model {
            Model::Exchange1d => Some(positive("gamma", self.gamma.unwrap_or(DEFAULT_GAMMA))?),
            _ => None,
        };
        let mu0 = match model {
            Model::Exchange1d => {
                let mu0 = nonnegative("mu0", self.mu0.unwrap_or(0.0))?;
                if mu0 >= mass {
                    return Err(config_error(
                        "mu0",
                        format!("must leave positive free mass: mu0 = {mu0} >= mass = {mass}"),
                    ));
                }
                Some(mu0)
            }
            _ => None,
        };
        if model == Model::Rescaled1d && mass >= 1.0 {
            return Err(config_error("mass", format!("the rescaled frame needs mass below 1, got {mass}")));
        }
        let length = match model {
            Model::Interval1d => {
                Some(positive("L", self.length.ok_or_else(|| config_error("L", "interval1d requires L"))?)?)
            }
            _ => None,
        };
        let alpha = match model {
            Model::Range1d => {
                Some(positive("alpha", self.alpha.ok_or_else(|| config_error("alpha", "range1d requires alpha"))?)?)
            }
            _ => None,
        };
        let c_2d = self.c_2d.map(|c| positive("C_2d", c)).transpose()?;

        let grid = if model.is_2d() {
            let y_min = self.y_min.unwrap_or(-DEFAULT_Y_HALF_WIDTH_2D);
            let y_max = self.y_max.unwrap_or(DEFAULT_Y_HALF_WIDTH_2D);
            if !(y_min.is_finite() && y_max.is_finite() && y_max > y_min) {
                return Err(config_error("y_max", format!("needs y_min < y_max, got [{y_min}, {y_max}]")));
            }
            GridSpec::TwoD {
                y_min,
                y_max,
                z_max: positive("z_max", self.z_max.unwrap_or(DEFAULT_Z_MAX_2D))?,
                ny: cells("ny", self.ny.unwrap_or(DEFAULT_N_2D))?,
                nz: cells("nz", self.nz.unwrap_or(DEFAULT_N_2D))?,
            }
        } else {
            let z_max = match length {
                Some(l) => l,
                None => positive("z_max", self.z_max.unwrap_or(DEFAULT_LENGTH_TIMES_MASS / mass))?,
            };
            GridSpec::OneD { z_max, n_cells: cells("n_cells", self.n_cells.unwrap_or(DEFAULT_N_CELLS))? }
        };

        let initial = match (&self.initial, &self.initial_table) {
            (Some(_), Some(_)) => return Err(config_error("initial_table", "give either initial or initial_table")),
            (Some(p), None) => p.clone(),
            (None, Some(path)) => {
                Profile::Table { points: read_table(path).map_err(|e| config_error("initial_table", e.to_string()))? }
            }
            (None, None) => Profile::Exponential { rate: 1.0 },
        };
        initial.validate().map_err(|e| {
            config_error(if self.initial_table.is_some() { "initial_table" } else { "initial" }, e.to_string())
        })?;

        let j0_scale = positive("j0_scale", self.j0_scale.unwrap_or(1.0))?;
        let noise = nonnegative("noise", self.noise.unwrap_or(0.0))?;
        if noise >= 1.0 {
            return Err(config_error("noise", format!("must be below 1, got {noise}")));
        }
        let (y_sigma, y_center) = if model.is_2d() {
            let c = self.y_center.unwrap_or(0.0);
            if !c.is_finite() {
                return Err(config_error("y_center", "must be finite"));
            }
            (Some(positive("y_sigma", self.y_sigma.unwrap_or(1.0))?), Some(c))
        } else {
            (None, None)
        };

        let cfl = self.cfl.unwrap_or(DEFAULT_CFL);
        if !(cfl > 0.0 && cfl <= 1.0) {
            return Err(config_error("cfl", format!("must lie in (0, 1], got {cfl}")));
        }
        let output_every = positive("output_every", self.output_every.unwrap_or(t_end / DEFAULT_OUTPUTS))?;
        let dt_floor = nonnegative("dt_floor", self.dt_floor.unwrap_or(DEFAULT_DT_FLOOR))?;
        let density_cap = self.density_cap.map(|c| positive("density_cap", c)).transpose()?;
        let trace_cap = self.trace_cap.map(|c| positive("trace_cap", c)).transpose()?;

        Ok(ResolvedConfig {
            model,
            mass,
            t_end,
            grid,
            initial,
            j0_scale,
            noise,
            seed: self.seed.unwrap_or(0),
            y_sigma,
            y_center,
            gamma,
            mu0,
            alpha,
            length,
            c_2d,
            cfl,
            dt_floor,
            output_every,
            density_cap,
            trace_cap,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key_of_error(text: &str) -> String {
        match parse_config_str(text, None) {
            Err(CliError::Config { key, .. }) => key,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config_str(r#"{"model": "bks1d", "mass": 0.9, "t_end": 10}"#, None).unwrap();
        let r = c.resolve().unwrap();
        assert_eq!(r.cfl, 0.45);
        assert_eq!(r.output_every, 0.05);
        assert_eq!(r.dt_floor, 1e-12);
        assert_eq!(r.grid, GridSpec::OneD { z_max: 30.0 / 0.9, n_cells: 400 });
        assert_eq!(r.initial, Profile::Exponential { rate: 1.0 });
        assert_eq!(r.gamma, None);
        let e = parse_config_str(r#"{"model": "exchange1d", "mass": 2, "t_end": 1}"#, None).unwrap();
        assert_eq!(e.resolve().unwrap().gamma, Some(1.0));
    }

    #[test]
    fn errors_name_the_key() {
        assert_eq!(key_of_error(r#"{"model": "interval1d", "mass": 2, "t_end": 1}"#), "L");
        assert_eq!(key_of_error(r#"{"model": "bks1d", "mass": -1, "t_end": 1}"#), "mass");
        assert_eq!(key_of_error(r#"{"model": "bks2d", "mass": 1, "t_end": 1}"#), "model");
        assert_eq!(key_of_error(r#"{"model": "bks1d", "t_end": 1}"#), "mass");
        assert_eq!(key_of_error(r#"{"model": "bks1d", "mass": 1, "t_end": 1, "bogus": 3}"#), "bogus");
        assert_eq!(key_of_error(r#"{"model": "bks1d", "mass": 1, "t_end": 1, "L": 3}"#), "L");
        assert_eq!(key_of_error(r#"{"model": "range1d", "mass": 1, "t_end": 1}"#), "alpha");
        assert_eq!(key_of_error(r#"{"model": "rescaled1d", "mass": 1.2, "t_end": 1}"#), "mass");
        assert_eq!(key_of_error(r#"{"model": "bks1d", "mass": 1, "t_end": 1, "cfl": 2}"#), "cfl");
        assert_eq!(
            key_of_error(r#"{"model": "bks1d", "mass": 1, "t_end": 1, "initial": {"kind": "step", "width": -1}}"#),
            "initial"
        );
        assert_eq!(key_of_error(r#"{"model": "exchange1d", "mass": 1, "t_end": 1, "mu0": 1}"#), "mu0");
        assert_eq!(key_of_error("[1, 2]"), "config");
    }

    #[test]
    fn round_trips_through_json() {
        let text = r#"{"model": "interval1d", "mass": 2, "t_end": 1, "L": 10,
                       "initial": {"kind": "step", "width": 1}, "n_cells": 200}"#;
        let c = parse_config_str(text, None).unwrap();
        let again = parse_config_str(&serde_json::to_string(&c).unwrap(), None).unwrap();
        assert_eq!(c, again);
        assert_eq!(c.resolve().unwrap().grid, GridSpec::OneD { z_max: 10.0, n_cells: 200 });
    }
}
