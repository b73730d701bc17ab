//! Boundary Keller-Segel equation `d_t n = d_z (d_z n + n(t, 0) n)` on a
//! truncated half-line with zero flux at both ends.

use serde::{Deserialize, Serialize};

use crate::diagnostics::{
    check_csiszar_kullback, drift_dissipation, fisher_dissipation, relative_entropy, DiagnosticsRecord, Monitors,
    ReferenceProfile,
};
use crate::driver::{integrate, BlowUpReport, Evolution, Observer, RunControl, RunOutput, StepIntegrals, Terminal};
use crate::error::{invalid, Error, Result};
use crate::field::DensityField;
use crate::flux::{apply_divergence, interior_fluxes, positivity_dt};
use crate::Real;

pub use crate::driver::{BlowUpCriterion, BlowupCaps};

/// Masses within this distance of one are treated as critical.
pub const CRITICAL_MASS_TOL: f64 = 1e-9;

/// Boundary value `n(t, 0)` used to close the model.
pub fn trace_value<T: Real>(f: &DensityField<T>) -> T {
    f.trace()
}

/// `cfl * dz^2 / (2 + a dz)`.
pub fn stable_dt<T: Real>(f: &DensityField<T>, a: T, cfl: T) -> T {
    cfl * positivity_dt(f.dz(), a)
}

/// Rejects steps beyond the positivity bound (no silent substepping).
pub(crate) fn check_cfl<T: Real>(dt: T, limit: T) -> Result<()> {
    if !(dt > T::zero()) || !dt.is_finite() {
        return Err(invalid(format!("time step must be positive, got {dt}")));
    }
    if dt > limit * (T::one() + T::lit(1e-12)) {
        return Err(Error::CflViolation { dt: dt.as_f64(), limit: limit.as_f64() });
    }
    Ok(())
}

/// One conservative explicit step of `d_t n = d_z (d_z n + a n)` with face
/// drifts `drift(k)` bounded in magnitude by `speed`.
pub(crate) fn explicit_step<T: Real>(
    f: &DensityField<T>,
    dt: T,
    speed: T,
    drift: impl Fn(usize) -> T,
) -> Result<DensityField<T>> {
    check_cfl(dt, positivity_dt(f.dz(), speed))?;
    let fluxes = interior_fluxes(f.values(), f.dz(), drift);
    let values = apply_divergence(f.values(), &fluxes, dt, f.dz())?;
    Ok(DensityField::from_parts(*f.grid(), values, f.time() + dt))
}

/// Solver state: the density and the number of steps taken.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bks1dState<T> {
    pub field: DensityField<T>,
    pub step_count: u64,
}

impl<T: Real> Bks1dState<T> {
    pub fn new(field: DensityField<T>) -> Self {
        Self { field, step_count: 0 }
    }

    pub fn time(&self) -> T {
        self.field.time()
    }
}

/// One explicit step; the drift is the trace of the incoming state.
pub fn step_bks<T: Real>(s: &Bks1dState<T>, dt: T) -> Result<Bks1dState<T>> {
    let a = trace_value(&s.field);
    let field = explicit_step(&s.field, dt, a, |_| a)?;
    Ok(Bks1dState { field, step_count: s.step_count + 1 })
}

/// Upper bound `J0^2 / ((M - 1) M^2)` on the blow-up time for non-increasing
/// data of mass `M > 1` and first moment `J0`.
pub fn blowup_time_bound<T: Real>(mass: T, j0: T) -> Result<T> {
    if !(mass > T::one()) {
        return Err(invalid(format!("no blow-up bound for M = {mass} <= 1")));
    }
    if !(j0 > T::zero()) {
        return Err(invalid(format!("first moment must be positive, got {j0}")));
    }
    Ok(j0 * j0 / ((mass - T::one()) * mass * mass))
}

impl<T: Real> Evolution<T> for Bks1dState<T> {
    fn time(&self) -> T {
        self.field.time()
    }
    fn set_time(&mut self, t: T) {
        self.field.set_time(t);
    }
    fn stable_step(&self, cfl: T) -> T {
        stable_dt(&self.field, trace_value(&self.field), cfl)
    }
    fn advance(&mut self, dt: T) -> Result<()> {
        *self = step_bks(self, dt)?;
        Ok(())
    }
    fn trace(&self) -> T {
        trace_value(&self.field)
    }
    fn max_density(&self) -> T {
        self.field.max_density()
    }
}

/// Collects records, audits and step integrals for a half-line run.
pub(crate) struct Recorder1d<T: Real> {
    pub mass: T,
    pub records: Vec<DiagnosticsRecord<T>>,
    pub integrals: Vec<StepIntegrals<T>>,
    pub running: StepIntegrals<T>,
    pub monitors: Monitors<T>,
    /// `h_alpha` with `1/alpha` the initial first moment, for critical mass.
    pub reference: Option<ReferenceProfile<T>>,
}

impl<T: Real> Recorder1d<T> {
    pub fn new(mass: T) -> Self {
        Self {
            mass,
            records: Vec::new(),
            integrals: Vec::new(),
            running: StepIntegrals::zero(),
            monitors: Monitors::default(),
            reference: None,
        }
    }

    /// Standard record plus the trace and Carleman audits.
    pub fn base_record(&mut self, f: &DensityField<T>) -> DiagnosticsRecord<T> {
        let tr = trace_value(f);
        self.monitors.observe_field(f, tr);
        DiagnosticsRecord::of_field(f, tr)
    }

    pub fn push(&mut self, rec: DiagnosticsRecord<T>) {
        self.records.push(rec);
        self.integrals.push(self.running);
    }

    /// Accumulates the integrals shared by all half-line models.
    pub fn accumulate_common(&mut self, f: &DensityField<T>, dt: T) {
        let tr = trace_value(f);
        self.running.trace = self.running.trace + tr * dt;
        self.running.trace_sq = self.running.trace_sq + tr * tr * dt;
        self.running.fisher = self.running.fisher + fisher_dissipation(f) * dt;
    }
}

impl<T: Real> Observer<T, Bks1dState<T>> for Recorder1d<T> {
    fn on_step(&mut self, s: &Bks1dState<T>, dt: T) {
        let f = &s.field;
        self.accumulate_common(f, dt);
        let tr = trace_value(f);
        self.running.moment_rate = self.running.moment_rate + (T::one() - self.mass) * tr * dt;
        if self.reference.is_some() {
            self.running.dissipation = self.running.dissipation + drift_dissipation(f, |_| tr) * dt;
        }
    }

    fn on_output(&mut self, s: &Bks1dState<T>) -> Result<()> {
        let f = &s.field;
        let mut rec = self.base_record(f);
        if let Some(h) = &self.reference {
            let rel = relative_entropy(f, h)?;
            rec.rel_entropy = Some(rel);
            rec.lyapunov = Some(rel);
            rec.dissipation = Some(drift_dissipation(f, |_| rec.trace));
            self.monitors.observe_csiszar_kullback(check_csiszar_kullback(f, h)?);
        }
        self.push(rec);
        Ok(())
    }
}

/// Integrates the boundary Keller-Segel model from `initial`.
///
/// At critical mass the run also records the relative entropy to `h_alpha`
/// with `alpha^{-1} = J(0)`, which is then the Lyapunov functional. When the
/// mass exceeds one and the data are non-increasing the report carries the
/// analytic blow-up time bound.
pub fn run_bks<T: Real>(initial: DensityField<T>, ctl: &RunControl<T>) -> Result<RunOutput<T>> {
    let mass = initial.mass();
    let j0 = initial.first_moment();
    let monotone = initial.is_non_increasing(T::lit(1e-12));
    let mut notes = Vec::new();
    let mut rec = Recorder1d::new(mass);
    if (mass - T::one()).abs() <= T::lit(CRITICAL_MASS_TOL) {
        let alpha = T::one() / j0;
        rec.reference = Some(ReferenceProfile::exp_halfline(alpha, *initial.grid())?.normalized_to(mass));
        notes.push(format!("critical mass: relative entropy against h_alpha with alpha = {alpha:.16e}"));
    }
    let analytic_bound = if mass > T::one() && monotone {
        Some(blowup_time_bound(mass, j0)?)
    } else {
        if mass > T::one() {
            notes.push("initial data not non-increasing: no analytic blow-up time bound".to_string());
        }
        None
    };
    let mut state = Bks1dState::new(initial);
    let detected = integrate(&mut state, ctl, &mut rec)?;
    let blowup = BlowUpReport {
        detected: detected.is_some(),
        t_detect: detected.map(|d| d.0),
        criterion: detected.map(|d| d.1),
        analytic_bound,
    };
    Ok(RunOutput {
        records: rec.records,
        integrals: rec.integrals,
        blowup,
        terminal: Terminal::OneD { field: state.field, mu: None },
        monitors: rec.monitors,
        steps: state.step_count,
        notes,
    })
}
