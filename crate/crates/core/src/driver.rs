//! Shared time loop: adaptive explicit steps, outputs on a fixed time lattice,
//! and blow-up detection.

use serde::{Deserialize, Serialize};

use crate::diagnostics::{DiagnosticsRecord, Monitors};
use crate::error::{invalid, Result};
use crate::field::DensityField;
use crate::solver2d::Field2D;
use crate::Real;

/// A model state that can be advanced by explicit steps.
pub trait Evolution<T: Real> {
    fn time(&self) -> T;
    /// Overwrites the clock; used to land exactly on output times.
    fn set_time(&mut self, t: T);
    /// Largest admissible step at the current state for the given CFL number.
    fn stable_step(&self, cfl: T) -> T;
    fn advance(&mut self, dt: T) -> Result<()>;
    /// Boundary trace used for the runaway detector (row maximum in 2D).
    fn trace(&self) -> T;
    fn max_density(&self) -> T;
}

/// Callbacks invoked by [`integrate`].
pub trait Observer<T: Real, S> {
    /// Called with the state *before* each step of length `dt`.
    fn on_step(&mut self, _state: &S, _dt: T) {}
    /// Called at `t = 0`, at every output time and at detection.
    fn on_output(&mut self, state: &S) -> Result<()>;
}

/// Why a run was declared blown up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlowUpCriterion {
    DensityCap,
    DtFloor,
    TraceRunaway,
}

/// Outcome of the blow-up detectors for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowUpReport<T> {
    pub detected: bool,
    pub t_detect: Option<T>,
    pub criterion: Option<BlowUpCriterion>,
    /// Upper bound on the blow-up time when one is known for the data.
    pub analytic_bound: Option<T>,
}

impl<T> BlowUpReport<T> {
    pub fn none() -> Self {
        Self { detected: false, t_detect: None, criterion: None, analytic_bound: None }
    }
}

/// Detector thresholds; `None` disables a detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlowupCaps<T> {
    pub density_cap: Option<T>,
    pub trace_cap: Option<T>,
    pub dt_floor: T,
}

impl<T: Real> BlowupCaps<T> {
    /// Defaults for a 1D run of mass `mass` on a grid of length `z_max` and
    /// spacing `dz`, starting from boundary value `trace0`: density cap
    /// `1e6 M / z_max`, trace cap `max(M / (4 dz), 4 trace0)`, dt floor `1e-12`.
    ///
    /// Explicit steps never reach a true singularity: concentrating solutions
    /// saturate at a grid-scale spike with `trace * dz = O(M)`, so the trace cap
    /// is what flags them. The `4 trace0` floor keeps initially tall data from
    /// tripping the detector before it evolves.
    pub fn defaults_1d(mass: T, z_max: T, dz: T, trace0: T) -> Self {
        Self {
            density_cap: Some(T::lit(1e6) * mass / z_max),
            trace_cap: Some((T::lit(0.25) * mass / dz).max(T::lit(4.0) * trace0)),
            dt_floor: T::lit(1e-12),
        }
    }

    /// No detectors except the dt floor.
    pub fn disabled() -> Self {
        Self { density_cap: None, trace_cap: None, dt_floor: T::zero() }
    }
}

/// Time-loop parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunControl<T> {
    pub t_end: T,
    pub cfl: T,
    pub output_every: T,
    pub caps: BlowupCaps<T>,
}

impl<T: Real> RunControl<T> {
    pub fn new(t_end: T, output_every: T, caps: BlowupCaps<T>) -> Self {
        Self { t_end, cfl: T::lit(0.45), output_every, caps }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_end > T::zero()) || !self.t_end.is_finite() {
            return Err(invalid(format!("t_end must be positive, got {}", self.t_end)));
        }
        if !(self.cfl > T::zero() && self.cfl <= T::one()) {
            return Err(invalid(format!("cfl must lie in (0, 1], got {}", self.cfl)));
        }
        if !(self.output_every > T::zero()) || !self.output_every.is_finite() {
            return Err(invalid(format!("output_every must be positive, got {}", self.output_every)));
        }
        if !(self.caps.dt_floor >= T::zero()) {
            return Err(invalid("dt_floor must be nonnegative"));
        }
        Ok(())
    }
}

fn tripped<T: Real, S: Evolution<T>>(state: &S, caps: &BlowupCaps<T>) -> Option<BlowUpCriterion> {
    if caps.density_cap.is_some_and(|c| !(state.max_density() <= c)) {
        return Some(BlowUpCriterion::DensityCap);
    }
    if caps.trace_cap.is_some_and(|c| !(state.trace() <= c)) {
        return Some(BlowUpCriterion::TraceRunaway);
    }
    None
}

/// Advances `state` to `t_end`, reporting outputs at `t0 + k * output_every`
/// (and at `t_end`). Returns the detection time and criterion if a detector
/// fired; the observer then also sees the state at detection.
pub fn integrate<T: Real, S: Evolution<T>, O: Observer<T, S>>(
    state: &mut S,
    ctl: &RunControl<T>,
    observer: &mut O,
) -> Result<Option<(T, BlowUpCriterion)>> {
    ctl.validate()?;
    let t0 = state.time();
    observer.on_output(state)?;
    if let Some(c) = tripped(state, &ctl.caps) {
        return Ok(Some((t0, c)));
    }
    let mut k: u64 = 1;
    let mut last_output = t0;
    while state.time() < ctl.t_end {
        let target = (t0 + T::of_usize(k as usize) * ctl.output_every).min(ctl.t_end);
        let stable = state.stable_step(ctl.cfl);
        if !(stable >= ctl.caps.dt_floor) {
            return finish(state, observer, last_output, BlowUpCriterion::DtFloor);
        }
        let remaining = target - state.time();
        let landing = stable >= remaining;
        let dt = if landing { remaining } else { stable };
        observer.on_step(state, dt);
        state.advance(dt)?;
        if landing {
            state.set_time(target);
        }
        if let Some(c) = tripped(state, &ctl.caps) {
            return finish(state, observer, last_output, c);
        }
        if landing {
            observer.on_output(state)?;
            last_output = target;
            k += 1;
        }
    }
    Ok(None)
}

fn finish<T: Real, S: Evolution<T>, O: Observer<T, S>>(
    state: &S,
    observer: &mut O,
    last_output: T,
    criterion: BlowUpCriterion,
) -> Result<Option<(T, BlowUpCriterion)>> {
    if state.time() > last_output {
        observer.on_output(state)?;
    }
    Ok(Some((state.time(), criterion)))
}

/// Time integrals accumulated step by step, sampled at each output.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StepIntegrals<T> {
    /// `int trace dt`
    pub trace: T,
    /// `int trace^2 dt`
    pub trace_sq: T,
    /// `int fisher dt` (1D models)
    pub fisher: T,
    /// `int D dt` for the model's dissipation, when it has one
    pub dissipation: T,
    /// `int (predicted rate of the model's moment) dt`
    pub moment_rate: T,
}

impl<T: Real> StepIntegrals<T> {
    pub fn zero() -> Self {
        Self {
            trace: T::zero(),
            trace_sq: T::zero(),
            fisher: T::zero(),
            dissipation: T::zero(),
            moment_rate: T::zero(),
        }
    }
}

/// Final state of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dim", rename_all = "snake_case")]
pub enum Terminal<T> {
    OneD { field: DensityField<T>, mu: Option<T> },
    TwoD { field: Field2D<T> },
}

/// Everything a run produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutput<T> {
    pub records: Vec<DiagnosticsRecord<T>>,
    /// Step integrals at each record, aligned with `records`.
    pub integrals: Vec<StepIntegrals<T>>,
    pub blowup: BlowUpReport<T>,
    pub terminal: Terminal<T>,
    pub monitors: Monitors<T>,
    pub steps: u64,
    pub notes: Vec<String>,
}

impl<T: Real> RunOutput<T> {
    /// Relative drift of the mass column over the run.
    pub fn relative_mass_drift(&self) -> T {
        let m0 = self.records[0].mass;
        self.records.iter().map(|r| ((r.mass - m0) / m0).abs()).fold(T::zero(), T::max)
    }

    pub fn final_record(&self) -> &DiagnosticsRecord<T> {
        self.records.last().expect("a run always records its initial state")
    }
}
