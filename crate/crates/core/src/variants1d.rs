//! Two variants of the boundary model.
//!
//! * Finite interval `(0, L)`: `d_t n = d_z (d_z n + (n(t, 0) - n(t, L)) n)`
//!   with zero flux at both ends; the drift is signed.
//! * Finite-range interaction: the drift decays as `n(t, 0) exp(-alpha z)`.

use serde::{Deserialize, Serialize};

use crate::diagnostics::DiagnosticsRecord;
use crate::driver::{integrate, BlowUpReport, Evolution, Observer, RunControl, RunOutput, Terminal};
use crate::error::{invalid, Result};
use crate::field::{DensityField, Weight};
use crate::flux::positivity_dt;
use crate::solver1d::{explicit_step, trace_value, Bks1dState, Recorder1d};
use crate::Real;

/// Solver state on `(0, L)`; the grid's `z_max` is `L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalState<T> {
    pub field: DensityField<T>,
    pub step_count: u64,
}

impl<T: Real> IntervalState<T> {
    pub fn new(field: DensityField<T>) -> Self {
        Self { field, step_count: 0 }
    }

    /// Signed drift `n(t, 0) - n(t, L)`.
    pub fn drift(&self) -> T {
        self.field.trace() - self.field.far_trace()
    }
}

/// One explicit step with the signed drift; both end fluxes vanish.
pub fn step_interval<T: Real>(s: &IntervalState<T>, dt: T) -> Result<IntervalState<T>> {
    let a = s.drift();
    let field = explicit_step(&s.field, dt, a.abs(), |_| a)?;
    Ok(IntervalState { field, step_count: s.step_count + 1 })
}

/// Stationary state `h(z) = alpha exp(-(alpha - beta) z)` on `(0, L)`, with
/// `beta = alpha exp(-(alpha - beta) L)`; non-constant members have unit mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalEquilibrium<T> {
    pub alpha: T,
    pub beta: T,
    pub length: T,
}

impl<T: Real> IntervalEquilibrium<T> {
    /// `beta - alpha exp(-(alpha - beta) L)`.
    pub fn residual(&self) -> T {
        self.beta - self.alpha * (-(self.alpha - self.beta) * self.length).exp()
    }

    pub fn is_constant(&self) -> bool {
        self.alpha == self.beta
    }

    pub fn mass(&self) -> T {
        let k = self.alpha - self.beta;
        if k == T::zero() {
            self.alpha * self.length
        } else {
            self.alpha * (-(-k * self.length).exp_m1()) / k
        }
    }
}

/// The non-trivial root `beta` of `g(beta) = beta - alpha exp(-(alpha - beta) L)`.
///
/// `g` is concave with `g(alpha) = 0` and its maximum at
/// `beta* = alpha - log(alpha L) / L`, so the second root lies above `alpha`
/// when `alpha L < 1`, below it when `alpha L > 1`, and merges with `alpha`
/// when `alpha L = 1`.
pub fn solve_interval_equilibrium<T: Real>(alpha: T, length: T) -> Result<IntervalEquilibrium<T>> {
    if !(alpha > T::zero()) || !alpha.is_finite() {
        return Err(invalid(format!("alpha must be positive, got {alpha}")));
    }
    if !(length > T::zero()) || !length.is_finite() {
        return Err(invalid(format!("L must be positive, got {length}")));
    }
    let g = |b: T| b - alpha * (-(alpha - b) * length).exp();
    let al = alpha * length;
    if (al - T::one()).abs() <= T::lit(4.0) * T::epsilon() {
        return Ok(IntervalEquilibrium { alpha, beta: alpha, length });
    }
    let peak = alpha - al.ln() / length;
    // bracket [pos, neg] with g(pos) > 0 >= g(neg)
    let (pos, neg) = if al < T::one() {
        let mut step = peak - alpha;
        let mut hi = peak + step;
        while g(hi) > T::zero() {
            step = step * T::lit(2.0);
            hi = peak + step;
        }
        (peak, hi)
    } else {
        (peak, T::zero())
    };
    let (mut p, mut n) = (pos, neg);
    for _ in 0..400 {
        let mid = (p + n) * T::lit(0.5);
        if mid == p || mid == n {
            break;
        }
        if g(mid) > T::zero() {
            p = mid;
        } else {
            n = mid;
        }
    }
    let beta = if g(p).abs() < g(n).abs() { p } else { n };
    Ok(IntervalEquilibrium { alpha, beta, length })
}

/// Sufficient condition for blow-up on `(0, L)`: `M > 1` and `4 J0 < L M`.
pub fn blowup_criterion_interval<T: Real>(mass: T, j0: T, length: T) -> bool {
    mass > T::one() && T::lit(4.0) * j0 < length * mass
}

/// Sufficient condition for blow-up with finite range `alpha`:
/// `M > 1` and `(J_a / M)^4 (1 - M^2 / J_a^2) < M - 1`, where `J_a >= M` is the
/// initial exponential moment.
pub fn blowup_criterion_range<T: Real>(mass: T, j_alpha0: T, alpha: T) -> Result<bool> {
    if !(alpha > T::zero()) {
        return Err(invalid(format!("alpha must be positive, got {alpha}")));
    }
    if !(j_alpha0 >= mass) {
        return Err(invalid(format!("exponential moment {j_alpha0} cannot be below the mass {mass}")));
    }
    if !(mass > T::one()) {
        return Ok(false);
    }
    let r2 = (j_alpha0 / mass).powi(2);
    Ok(r2 * r2 - r2 < mass - T::one())
}

/// One explicit step with face drift `n(t, 0) exp(-alpha z_face)`.
/// For `alpha = 0` this is exactly [`crate::solver1d::step_bks`].
pub fn step_finite_range<T: Real>(s: &Bks1dState<T>, dt: T, alpha: T) -> Result<Bks1dState<T>> {
    if !(alpha >= T::zero()) {
        return Err(invalid(format!("alpha must be nonnegative, got {alpha}")));
    }
    let tr = trace_value(&s.field);
    let grid = *s.field.grid();
    let field = explicit_step(&s.field, dt, tr, |k| tr * (-alpha * grid.face(k)).exp())?;
    Ok(Bks1dState { field, step_count: s.step_count + 1 })
}

impl<T: Real> Evolution<T> for IntervalState<T> {
    fn time(&self) -> T {
        self.field.time()
    }
    fn set_time(&mut self, t: T) {
        self.field.set_time(t);
    }
    fn stable_step(&self, cfl: T) -> T {
        cfl * positivity_dt(self.field.dz(), self.drift())
    }
    fn advance(&mut self, dt: T) -> Result<()> {
        *self = step_interval(self, dt)?;
        Ok(())
    }
    fn trace(&self) -> T {
        self.field.trace()
    }
    fn max_density(&self) -> T {
        self.field.max_density()
    }
}

impl<T: Real> Observer<T, IntervalState<T>> for Recorder1d<T> {
    fn on_step(&mut self, s: &IntervalState<T>, dt: T) {
        self.accumulate_common(&s.field, dt);
    }

    fn on_output(&mut self, s: &IntervalState<T>) -> Result<()> {
        let rec = self.base_record(&s.field);
        self.push(rec);
        Ok(())
    }
}

fn report<T>(detected: Option<(T, crate::driver::BlowUpCriterion)>) -> BlowUpReport<T> {
    match detected {
        Some((t, c)) => BlowUpReport { detected: true, t_detect: Some(t), criterion: Some(c), analytic_bound: None },
        None => BlowUpReport::none(),
    }
}

/// Integrates the interval model. The notes record the blow-up criterion and
/// whether the data were non-increasing, which the criterion presumes.
pub fn run_interval<T: Real>(initial: DensityField<T>, ctl: &RunControl<T>) -> Result<RunOutput<T>> {
    let mass = initial.mass();
    let j0 = initial.first_moment();
    let length = initial.grid().z_max();
    let monotone = initial.is_non_increasing(T::lit(1e-12));
    let notes = vec![
        format!("interval criterion (M > 1 and 4 J0 < L M): {}", blowup_criterion_interval(mass, j0, length)),
        format!("initial data non-increasing: {monotone} (the criterion presumes non-increasing data)"),
    ];
    let mut rec = Recorder1d::new(mass);
    let mut state = IntervalState::new(initial);
    let detected = integrate(&mut state, ctl, &mut rec)?;
    Ok(RunOutput {
        records: rec.records,
        integrals: rec.integrals,
        blowup: report(detected),
        terminal: Terminal::OneD { field: state.field, mu: None },
        monitors: rec.monitors,
        steps: state.step_count,
        notes,
    })
}

/// Finite-range state: the half-line state plus the range parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeState<T> {
    pub inner: Bks1dState<T>,
    pub alpha: T,
}

impl<T: Real> Evolution<T> for RangeState<T> {
    fn time(&self) -> T {
        self.inner.field.time()
    }
    fn set_time(&mut self, t: T) {
        self.inner.field.set_time(t);
    }
    fn stable_step(&self, cfl: T) -> T {
        cfl * positivity_dt(self.inner.field.dz(), trace_value(&self.inner.field))
    }
    fn advance(&mut self, dt: T) -> Result<()> {
        self.inner = step_finite_range(&self.inner, dt, self.alpha)?;
        Ok(())
    }
    fn trace(&self) -> T {
        trace_value(&self.inner.field)
    }
    fn max_density(&self) -> T {
        self.inner.field.max_density()
    }
}

struct RangeObserver<T: Real> {
    rec: Recorder1d<T>,
    alpha: T,
}

impl<T: Real> Observer<T, RangeState<T>> for RangeObserver<T> {
    fn on_step(&mut self, s: &RangeState<T>, dt: T) {
        let f = &s.inner.field;
        self.rec.accumulate_common(f, dt);
        // J_alpha was finite at the previous output and the run aborts otherwise
        let ja = f.weighted_integral(&Weight::Exp(self.alpha)).unwrap_or(T::nan());
        let a = self.alpha;
        let rate = a * a * ja + a * trace_value(f) * (T::one() - self.rec.mass);
        self.rec.running.moment_rate = self.rec.running.moment_rate + rate * dt;
    }

    fn on_output(&mut self, s: &RangeState<T>) -> Result<()> {
        let f = &s.inner.field;
        let mut rec: DiagnosticsRecord<T> = self.rec.base_record(f);
        rec.j_alpha = Some(f.weighted_integral(&Weight::Exp(self.alpha))?);
        self.rec.push(rec);
        Ok(())
    }
}

/// Integrates the finite-range model; records carry `J_alpha`.
pub fn run_range<T: Real>(initial: DensityField<T>, alpha: T, ctl: &RunControl<T>) -> Result<RunOutput<T>> {
    if !(alpha > T::zero()) {
        return Err(invalid(format!("alpha must be positive, got {alpha}")));
    }
    let mass = initial.mass();
    let ja0 = initial.weighted_integral(&Weight::Exp(alpha))?;
    let monotone = {
        let g = initial.grid();
        let w: Vec<T> = initial.values().iter().enumerate().map(|(i, &v)| v * (-alpha * g.center(i)).exp()).collect();
        w.windows(2).all(|p| p[1] <= p[0])
    };
    let notes = vec![
        format!("finite-range criterion: {}", blowup_criterion_range(mass, ja0, alpha)?),
        format!("exp(-alpha z) n non-increasing initially: {monotone}"),
    ];
    let mut obs = RangeObserver { rec: Recorder1d::new(mass), alpha };
    let mut state = RangeState { inner: Bks1dState::new(initial), alpha };
    let detected = integrate(&mut state, ctl, &mut obs)?;
    Ok(RunOutput {
        records: obs.rec.records,
        integrals: obs.rec.integrals,
        blowup: report(detected),
        terminal: Terminal::OneD { field: state.inner.field, mu: None },
        monitors: obs.rec.monitors,
        steps: state.inner.step_count,
        notes,
    })
}
