//! Builds the initial data for a configuration and dispatches to the solvers.

use polarsim_core::diagnostics::Monitors;
use polarsim_core::initial::project_initial;
use polarsim_core::solver2d::{run_2d, second_moment_2d, trace_row, VelocityCase};
use polarsim_core::variants1d::{blowup_criterion_interval, blowup_criterion_range};
use polarsim_core::{
    exchange1d, field, rescaled1d, solver1d, variants1d, BlowupCaps, DensityField, ExchangeState, Field2D, Grid1D,
    Grid2D, InitialCondition, RunControl, RunOutput,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{GridSpec, Model, ResolvedConfig, RunConfig};
use crate::error::CliError;

/// Tolerances of the inequality monitors checked after every run.
pub const TRACE_MONITOR_TOL: f64 = 1e-9;
pub const CARLEMAN_MONITOR_TOL: f64 = 1e-9;
pub const CSISZAR_KULLBACK_MONITOR_TOL: f64 = 1e-8;
pub const EXCHANGE_DISSIPATION_TOL: f64 = 1e-9;

/// Everything a run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    /// Configuration with every default, including the blow-up caps, filled in.
    pub config: ResolvedConfig,
    pub output: RunOutput,
    /// Model-specific sufficient blow-up condition evaluated on the initial data.
    pub criterion: Option<bool>,
    /// Largest relative drift of the conserved mass (the budget `m + mu` for
    /// the exchange model).
    pub mass_drift: f64,
    /// `y`-marginals at each record (2D runs).
    pub marginals: Option<Vec<Vec<f64>>>,
}

/// Summary written to `report.json`.
#[derive(Debug, Clone, Serialize)]
pub struct Report<'a> {
    pub config: &'a ResolvedConfig,
    pub blowup: &'a polarsim_core::BlowUpReport,
    pub criterion: Option<bool>,
    pub steps: u64,
    pub records: usize,
    pub relative_mass_drift: f64,
    pub monitors: &'a Monitors<f64>,
    pub notes: &'a [String],
}

impl RunResult {
    pub fn report(&self) -> Report<'_> {
        Report {
            config: &self.config,
            blowup: &self.output.blowup,
            criterion: self.criterion,
            steps: self.output.steps,
            records: self.output.records.len(),
            relative_mass_drift: self.mass_drift,
            monitors: &self.output.monitors,
            notes: &self.output.notes,
        }
    }
}

/// Multiplies every value by `1 + noise U(-1, 1)` and restores the mass.
fn perturb(values: &mut [f64], noise: f64, seed: u64) {
    if noise == 0.0 {
        return;
    }
    let before: f64 = values.iter().sum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for v in values.iter_mut() {
        *v *= 1.0 + noise * rng.gen_range(-1.0..1.0);
    }
    let after: f64 = values.iter().sum();
    if after > 0.0 {
        for v in values.iter_mut() {
            *v *= before / after;
        }
    }
}

/// Initial density of a 1D run with the given mass.
pub fn initial_field_1d(c: &ResolvedConfig, mass: f64) -> Result<DensityField, CliError> {
    let GridSpec::OneD { z_max, n_cells } = c.grid else { unreachable!("1D models resolve to a 1D grid") };
    let grid = Grid1D::new(z_max, n_cells).map_err(CliError::solver("grid"))?;
    let ic = InitialCondition::new(c.initial.stretched(c.j0_scale), mass);
    let f = project_initial(&ic, &grid).map_err(CliError::solver("initial data"))?;
    let mut values = f.into_values();
    perturb(&mut values, c.noise, c.seed);
    DensityField::new(grid, values, 0.0).map_err(CliError::solver("initial data"))
}

/// Initial density of a 2D run: Gaussian in `y` times the configured `z` profile.
pub fn initial_field_2d(c: &ResolvedConfig) -> Result<Field2D, CliError> {
    let GridSpec::TwoD { y_min, y_max, z_max, ny, nz } = c.grid else { unreachable!("2D models resolve to a 2D grid") };
    let grid = Grid2D::new(y_min, y_max, z_max, ny, nz).map_err(CliError::solver("grid"))?;
    let (sigma, centre) = (c.y_sigma.unwrap_or(1.0), c.y_center.unwrap_or(0.0));
    let ic = InitialCondition::new(c.initial.stretched(c.j0_scale), 1.0);
    let f = Field2D::separable(grid, |y| (-0.5 * ((y - centre) / sigma).powi(2)).exp(), &ic, c.mass)
        .map_err(CliError::solver("initial data"))?;
    let mut values = f.values().to_vec();
    perturb(&mut values, c.noise, c.seed);
    Field2D::new(grid, values, 0.0).map_err(CliError::solver("initial data"))
}

fn check_monitors(m: &Monitors<f64>, context: &str) -> Result<(), CliError> {
    let checks = [
        ("trace inequality", m.trace_inequality_min, TRACE_MONITOR_TOL),
        ("Carleman bound", m.carleman_min, CARLEMAN_MONITOR_TOL),
        ("Csiszar-Kullback", m.csiszar_kullback_min, CSISZAR_KULLBACK_MONITOR_TOL),
        ("exchange dissipation", m.exchange_dissipation_min, EXCHANGE_DISSIPATION_TOL),
    ];
    for (name, value, tol) in checks {
        if let Some(v) = value {
            if v < -tol {
                return Err(CliError::Monitor {
                    context: context.to_string(),
                    detail: format!("{name} minimum {v:e}"),
                });
            }
        }
    }
    Ok(())
}

fn fill_caps(c: &mut ResolvedConfig, defaults: BlowupCaps) -> BlowupCaps {
    let caps = BlowupCaps {
        density_cap: Some(c.density_cap.unwrap_or_else(|| defaults.density_cap.expect("defaults set every cap"))),
        trace_cap: Some(c.trace_cap.unwrap_or_else(|| defaults.trace_cap.expect("defaults set every cap"))),
        dt_floor: c.dt_floor,
    };
    c.density_cap = caps.density_cap;
    c.trace_cap = caps.trace_cap;
    caps
}

/// Runs a validated configuration.
pub fn run(config: &RunConfig) -> Result<RunResult, CliError> {
    let mut c = config.resolve()?;
    let context = format!("{} run with M = {}", c.model.name(), c.mass);
    let control =
        |c: &ResolvedConfig, caps| RunControl { t_end: c.t_end, cfl: c.cfl, output_every: c.output_every, caps };
    let mut criterion = None;
    let mut marginals = None;

    let output = if c.model.is_2d() {
        let f = initial_field_2d(&c)?;
        let tr0 = trace_row(&f).into_iter().fold(0.0, f64::max);
        let defaults = BlowupCaps::defaults_2d(c.mass, f.grid(), tr0);
        let caps = fill_caps(&mut c, defaults);
        if let Some(cc) = c.c_2d {
            criterion = Some(polarsim_core::solver2d::blowup_criterion_2d(second_moment_2d(&f), c.mass, cc));
        }
        let case = if c.model == Model::Transversal2d { VelocityCase::Transversal } else { VelocityCase::Potential };
        let run = run_2d(f, case, &control(&c, caps)).map_err(CliError::solver(&context))?;
        marginals = Some(run.marginals);
        run.output
    } else {
        let field_mass = c.mass - c.mu0.unwrap_or(0.0);
        let f = initial_field_1d(&c, field_mass)?;
        let defaults = BlowupCaps::defaults_1d(field_mass, f.grid().z_max(), f.dz(), f.trace());
        let caps = fill_caps(&mut c, defaults);
        let ctl = control(&c, caps);
        let solve = CliError::solver(&context);
        match c.model {
            Model::Bks1d => {
                criterion = Some(c.mass > 1.0 && f.is_non_increasing(1e-12));
                solver1d::run_bks(f, &ctl)
            }
            Model::Rescaled1d => rescaled1d::run_rescaled(f, &ctl),
            Model::Exchange1d => {
                let gamma = c.gamma.expect("exchange runs resolve gamma");
                let mu0 = c.mu0.expect("exchange runs resolve mu0");
                criterion = Some(false);
                ExchangeState::new(f, mu0, gamma).and_then(|s| exchange1d::run_exchange(s, &ctl))
            }
            Model::Interval1d => {
                let length = c.length.expect("interval runs resolve L");
                criterion = Some(blowup_criterion_interval(c.mass, f.first_moment(), length));
                variants1d::run_interval(f, &ctl)
            }
            Model::Range1d => {
                let alpha = c.alpha.expect("range runs resolve alpha");
                f.weighted_integral(&field::Weight::Exp(alpha))
                    .and_then(|ja| blowup_criterion_range(c.mass, ja, alpha))
                    .map(|flag| criterion = Some(flag))
                    .map_err(CliError::solver(&context))?;
                variants1d::run_range(f, alpha, &ctl)
            }
            Model::Transversal2d | Model::Potential2d => unreachable!("handled above"),
        }
        .map_err(solve)?
    };

    check_monitors(&output.monitors, &context)?;
    let mass_drift = match c.model {
        Model::Exchange1d => {
            let budget = |r: &polarsim_core::DiagnosticsRecord| r.mass + r.mu.unwrap_or(0.0);
            let b0 = budget(&output.records[0]);
            output.records.iter().map(|r| ((budget(r) - b0) / b0).abs()).fold(0.0, f64::max)
        }
        _ => output.relative_mass_drift(),
    };
    Ok(RunResult { config: c, output, criterion, mass_drift, marginals })
}
