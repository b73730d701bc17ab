//! Dynamic boundary exchange: the drift is the boundary concentration `mu`,
//! fed by the trace and relaxed at rate `gamma`,
//!
//! ```text
//! d_t n = d_z (d_z n + mu n),   d_z n + mu n = dmu/dt at z = 0,   dmu/dt = n(t, 0) - gamma mu,
//! ```
//!
//! so that `int n + mu = M` is conserved. The drift never exceeds `M`.

use serde::{Deserialize, Serialize};

use crate::diagnostics::{
    check_csiszar_kullback, exchange_dissipation, lyapunov_exchange, relative_entropy, ReferenceProfile,
};
use crate::driver::{integrate, BlowUpReport, BlowupCaps, Evolution, Observer, RunControl, RunOutput, Terminal};
use crate::error::{invalid, Error, Result};
use crate::field::DensityField;
use crate::flux::{apply_divergence, interior_fluxes, positivity_dt};
use crate::solver1d::{check_cfl, trace_value, Recorder1d};
use crate::Real;

/// Cytoplasmic density `n`, boundary concentration `mu` and detachment rate `gamma`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExchangeState<T> {
    pub field: DensityField<T>,
    pub mu: T,
    pub gamma: T,
    pub step_count: u64,
}

impl<T: Real> ExchangeState<T> {
    pub fn new(field: DensityField<T>, mu: T, gamma: T) -> Result<Self> {
        if !(mu >= T::zero()) || !mu.is_finite() {
            return Err(invalid(format!("mu must be nonnegative, got {mu}")));
        }
        if !(gamma > T::zero()) || !gamma.is_finite() {
            return Err(invalid(format!("gamma must be positive, got {gamma}")));
        }
        Ok(Self { field, mu, gamma, step_count: 0 })
    }

    pub fn time(&self) -> T {
        self.field.time()
    }

    /// Free mass `m = int n`.
    pub fn free_mass(&self) -> T {
        self.field.mass()
    }

    /// Conserved budget `m + mu`.
    pub fn budget(&self) -> T {
        self.free_mass() + self.mu
    }

    /// Largest step allowed by positivity of `n` and of `mu`.
    pub fn stable_dt(&self, cfl: T) -> T {
        cfl * positivity_dt(self.field.dz(), self.mu).min(T::one() / self.gamma)
    }
}

/// One explicit step. The boundary face carries exactly the increment of `mu`,
/// so the budget is conserved to round-off.
pub fn step_exchange<T: Real>(s: &ExchangeState<T>, dt: T) -> Result<ExchangeState<T>> {
    let limit = T::one() / s.gamma;
    if dt > limit {
        return Err(Error::CflViolation { dt: dt.as_f64(), limit: limit.as_f64() });
    }
    let h = s.field.dz();
    check_cfl(dt, positivity_dt(h, s.mu))?;
    let tr = trace_value(&s.field);
    let rate = tr - s.gamma * s.mu;
    let mu = s.mu;
    let mut fluxes = interior_fluxes(s.field.values(), h, |_| mu);
    fluxes[0] = rate;
    let values = apply_divergence(s.field.values(), &fluxes, dt, h)?;
    let field = DensityField::from_parts(*s.field.grid(), values, s.field.time() + dt);
    Ok(ExchangeState { field, mu: s.mu + dt * rate, gamma: s.gamma, step_count: s.step_count + 1 })
}

/// Polarised equilibrium for total mass `M > gamma`: `nu = M - gamma` and the
/// profile `gamma nu exp(-nu z)` (free mass `gamma`, trace `gamma nu`, `mu = nu`).
pub fn equilibrium_exchange<T: Real>(
    total: T,
    gamma: T,
    grid: crate::grid::Grid1D<T>,
) -> Result<(T, ReferenceProfile<T>)> {
    if !(gamma > T::zero()) {
        return Err(invalid(format!("gamma must be positive, got {gamma}")));
    }
    if !(total > gamma) {
        return Err(Error::NoPolarisedEquilibrium { mass: total.as_f64(), gamma: gamma.as_f64() });
    }
    let nu = total - gamma;
    Ok((nu, ReferenceProfile::exchange(nu, gamma, grid)?))
}

impl<T: Real> Evolution<T> for ExchangeState<T> {
    fn time(&self) -> T {
        self.field.time()
    }
    fn set_time(&mut self, t: T) {
        self.field.set_time(t);
    }
    fn stable_step(&self, cfl: T) -> T {
        self.stable_dt(cfl)
    }
    fn advance(&mut self, dt: T) -> Result<()> {
        *self = step_exchange(self, dt)?;
        Ok(())
    }
    fn trace(&self) -> T {
        trace_value(&self.field)
    }
    fn max_density(&self) -> T {
        self.field.max_density()
    }
}

struct ExchangeObserver<T: Real> {
    rec: Recorder1d<T>,
    total: T,
    gamma: T,
    /// `nu exp(-nu z)` with unit mass, when `M > gamma`.
    profile: Option<ReferenceProfile<T>>,
}

impl<T: Real> Observer<T, ExchangeState<T>> for ExchangeObserver<T> {
    fn on_step(&mut self, s: &ExchangeState<T>, dt: T) {
        self.rec.accumulate_common(&s.field, dt);
        if self.profile.is_some() {
            if let Ok(d) = exchange_dissipation(&s.field, s.mu, self.total, self.gamma) {
                self.rec.running.dissipation = self.rec.running.dissipation + d.total() * dt;
            }
        }
    }

    fn on_output(&mut self, s: &ExchangeState<T>) -> Result<()> {
        let f = &s.field;
        let mut rec = self.rec.base_record(f);
        rec.mu = Some(s.mu);
        if let Some(h) = &self.profile {
            let m = f.mass();
            if m > T::zero() {
                rec.rel_entropy = Some(relative_entropy(f, &h.normalized_to(m))?);
                rec.lyapunov = Some(lyapunov_exchange(f, s.mu, self.total, self.gamma)?);
                if s.mu > T::zero() {
                    let d = exchange_dissipation(f, s.mu, self.total, self.gamma)?;
                    self.rec.monitors.observe_exchange(&d);
                    rec.dissipation = Some(d.total());
                }
            }
            self.rec.monitors.observe_csiszar_kullback(check_csiszar_kullback(f, h)?);
        }
        self.rec.push(rec);
        Ok(())
    }
}

/// Integrates the exchange model; no blow-up detection is performed since the
/// drift is bounded by the budget. The Lyapunov functional is recorded when a
/// polarised equilibrium exists (`M > gamma`).
pub fn run_exchange<T: Real>(initial: ExchangeState<T>, ctl: &RunControl<T>) -> Result<RunOutput<T>> {
    let total = initial.budget();
    let gamma = initial.gamma;
    let mut notes = vec![format!("budget M = m + mu = {total:.16e}; mass column is the free mass m")];
    let profile = if total > gamma {
        let nu = total - gamma;
        notes.push(format!("polarised equilibrium: nu = {nu:.16e}"));
        Some(ReferenceProfile::exp_halfline(nu, *initial.field.grid())?.normalized_to(T::one()))
    } else {
        notes.push("M <= gamma: no polarised equilibrium, no Lyapunov functional".to_string());
        None
    };
    let mut obs = ExchangeObserver { rec: Recorder1d::new(initial.free_mass()), total, gamma, profile };
    let ctl = RunControl { caps: BlowupCaps { dt_floor: T::zero(), ..BlowupCaps::disabled() }, ..*ctl };
    let mut state = initial;
    integrate(&mut state, &ctl, &mut obs)?;
    Ok(RunOutput {
        records: obs.rec.records,
        integrals: obs.rec.integrals,
        blowup: BlowUpReport::none(),
        terminal: Terminal::OneD { field: state.field, mu: Some(state.mu) },
        monitors: obs.rec.monitors,
        steps: state.step_count,
        notes,
    })
}
