//! Self-similar frame `tau = log sqrt(1 + 2t)`, `y = z / sqrt(1 + 2t)`, where
//! the model reads `d_tau u = d_y (d_y u + (y + u(tau, 0)) u)` and subcritical
//! solutions relax to `G_alpha(y) = alpha exp(-alpha y - y^2 / 2)`.

use serde::{Deserialize, Serialize};

use crate::diagnostics::{check_csiszar_kullback, lyapunov_rescaled_with, rescaled_dissipation, ReferenceProfile};
use crate::driver::{integrate, BlowUpReport, Evolution, Observer, RunControl, RunOutput, Terminal};
use crate::error::{invalid, Result};
use crate::field::DensityField;
use crate::flux::positivity_dt;
use crate::grid::Grid1D;
use crate::quadrature::adaptive_simpson;
use crate::solver1d::{explicit_step, trace_value, Recorder1d};
use crate::Real;

/// Target accuracy of `P(alpha) = M` in [`solve_alpha`].
pub const ALPHA_TOL: f64 = 1e-10;

/// `P(alpha) = int_0^inf exp(-y - y^2 / (2 alpha^2)) dy`, the mass of `G_alpha`.
///
/// The integral is truncated where the integrand drops below `1e-16`.
pub fn mass_map_p<T: Real>(alpha: T) -> Result<T> {
    if !(alpha > T::zero()) || !alpha.is_finite() {
        return Err(invalid(format!("alpha must be positive, got {alpha}")));
    }
    // y + y^2 / (2 alpha^2) = c  =>  y = alpha^2 (sqrt(1 + 2c / alpha^2) - 1)
    let c = T::lit(16.0) * T::LN_10();
    let a2 = alpha * alpha;
    let y_end = if a2 > T::lit(1e8) { c } else { a2 * ((T::one() + T::lit(2.0) * c / a2).sqrt() - T::one()) };
    let half_inv = T::lit(0.5) / a2;
    let f = |y: T| (-y - y * y * half_inv).exp();
    Ok(adaptive_simpson(&f, T::zero(), y_end, T::lit(1e-14)))
}

/// The unique `alpha` with `P(alpha) = M`, for `0 < M < 1`.
pub fn solve_alpha<T: Real>(mass: T) -> Result<T> {
    if !(mass > T::zero() && mass < T::one()) {
        return Err(invalid(format!("solve_alpha needs 0 < M < 1, got {mass}")));
    }
    let (mut lo, mut hi) = (T::one(), T::one());
    for _ in 0..200 {
        if mass_map_p(lo)? < mass {
            break;
        }
        lo = lo * T::lit(0.5);
    }
    for _ in 0..200 {
        if mass_map_p(hi)? > mass {
            break;
        }
        hi = hi * T::lit(2.0);
    }
    if !(mass_map_p(lo)? < mass && mass_map_p(hi)? > mass) {
        return Err(invalid(format!("could not bracket P(alpha) = {mass}")));
    }
    let tol = T::lit(ALPHA_TOL);
    loop {
        let mid = (lo + hi) * T::lit(0.5);
        if mid <= lo || mid >= hi {
            return Ok(mid);
        }
        let p = mass_map_p(mid)?;
        if (p - mass).abs() <= tol * T::lit(0.01) {
            return Ok(mid);
        }
        if p < mass {
            lo = mid;
        } else {
            hi = mid;
        }
    }
}

/// `G_alpha` as cell averages on `grid`.
pub fn profile_g<T: Real>(alpha: T, grid: Grid1D<T>) -> Result<ReferenceProfile<T>> {
    ReferenceProfile::rescaled_g(alpha, grid)
}

/// Solver state in the rescaled frame; the field's time is `tau`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RescaledState<T> {
    pub field: DensityField<T>,
    pub alpha: T,
    pub step_count: u64,
}

impl<T: Real> RescaledState<T> {
    /// State with `alpha` solved from the field's mass (which must be below one).
    pub fn new(field: DensityField<T>) -> Result<Self> {
        let alpha = solve_alpha(field.mass())?;
        Ok(Self { field, alpha, step_count: 0 })
    }

    pub fn tau(&self) -> T {
        self.field.time()
    }

    /// Drift bound `y_max + u(0)` entering the step restriction.
    fn speed(&self) -> T {
        self.field.grid().z_max() + trace_value(&self.field)
    }
}

/// One explicit step with face drift `y_face + u(0)`.
pub fn step_rescaled<T: Real>(s: &RescaledState<T>, dtau: T) -> Result<RescaledState<T>> {
    let tr = trace_value(&s.field);
    let grid = *s.field.grid();
    let field = explicit_step(&s.field, dtau, s.speed(), |k| grid.face(k) + tr)?;
    Ok(RescaledState { field, alpha: s.alpha, step_count: s.step_count + 1 })
}

/// Maps `n(t, .)` to `u(tau, .)`: the grid shrinks by `sqrt(1 + 2t)` and
/// values grow by the same factor, so cell masses are unchanged.
pub fn frame_transform<T: Real>(n: &DensityField<T>) -> Result<DensityField<T>> {
    let t = n.time();
    if !(t >= T::zero()) {
        return Err(invalid(format!("frame transform needs t >= 0, got {t}")));
    }
    let s = (T::one() + T::lit(2.0) * t).sqrt();
    let grid = n.grid().scaled(T::one() / s)?;
    let values = n.values().iter().map(|&v| v * s).collect();
    Ok(DensityField::from_parts(grid, values, s.ln()))
}

/// Inverse of [`frame_transform`].
pub fn inverse_frame_transform<T: Real>(u: &DensityField<T>) -> Result<DensityField<T>> {
    let s = u.time().exp();
    let t = (s * s - T::one()) * T::lit(0.5);
    let grid = u.grid().scaled(s)?;
    let values = u.values().iter().map(|&v| v / s).collect();
    Ok(DensityField::from_parts(grid, values, t))
}

impl<T: Real> Evolution<T> for RescaledState<T> {
    fn time(&self) -> T {
        self.field.time()
    }
    fn set_time(&mut self, t: T) {
        self.field.set_time(t);
    }
    fn stable_step(&self, cfl: T) -> T {
        cfl * positivity_dt(self.field.dz(), self.speed())
    }
    fn advance(&mut self, dt: T) -> Result<()> {
        *self = step_rescaled(self, dt)?;
        Ok(())
    }
    fn trace(&self) -> T {
        trace_value(&self.field)
    }
    fn max_density(&self) -> T {
        self.field.max_density()
    }
}

struct RescaledObserver<T: Real> {
    rec: Recorder1d<T>,
    g: ReferenceProfile<T>,
    alpha: T,
}

impl<T: Real> Observer<T, RescaledState<T>> for RescaledObserver<T> {
    fn on_step(&mut self, s: &RescaledState<T>, dt: T) {
        let f = &s.field;
        let m = self.rec.mass;
        self.rec.accumulate_common(f, dt);
        let r = &mut self.rec.running;
        r.moment_rate = r.moment_rate + ((T::one() - m) * trace_value(f) - f.first_moment()) * dt;
        // mass < 1 was checked when the run started
        let d = rescaled_dissipation(f, m).unwrap_or(T::nan());
        r.dissipation = r.dissipation + d * dt;
    }

    fn on_output(&mut self, s: &RescaledState<T>) -> Result<()> {
        let f = &s.field;
        let mut rec = self.rec.base_record(f);
        let (l, parts) = lyapunov_rescaled_with(f, &self.g, self.alpha, self.rec.mass)?;
        rec.rel_entropy = Some(parts.h);
        rec.lyapunov = Some(l);
        rec.dissipation = Some(rescaled_dissipation(f, self.rec.mass)?);
        self.rec.monitors.observe_csiszar_kullback(check_csiszar_kullback(f, &self.g)?);
        self.rec.push(rec);
        Ok(())
    }
}

/// Integrates the rescaled equation from `initial` (already in the `(tau, y)`
/// frame, mass below one). Records carry `H(u | G_alpha)`, the Lyapunov
/// functional and its dissipation; the time column is `tau`.
pub fn run_rescaled<T: Real>(initial: DensityField<T>, ctl: &RunControl<T>) -> Result<RunOutput<T>> {
    let mass = initial.mass();
    let state0 = RescaledState::new(initial)?;
    let alpha = state0.alpha;
    let g = profile_g(alpha, *state0.field.grid())?.normalized_to(mass);
    let mut obs = RescaledObserver { rec: Recorder1d::new(mass), g, alpha };
    let mut state = state0;
    let detected = integrate(&mut state, ctl, &mut obs)?;
    Ok(RunOutput {
        records: obs.rec.records,
        integrals: obs.rec.integrals,
        blowup: BlowUpReport {
            detected: detected.is_some(),
            t_detect: detected.map(|d| d.0),
            criterion: detected.map(|d| d.1),
            analytic_bound: None,
        },
        terminal: Terminal::OneD { field: state.field, mu: None },
        monitors: obs.rec.monitors,
        steps: state.step_count,
        notes: vec![format!("rescaled frame: time column is tau, alpha = {alpha:.16e}")],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::grid::make_grid_1d;
    use crate::initial::{project_initial, InitialCondition};
    use proptest::prelude::*;

    /// Independent oracle for `P`: fine trapezoid on `[0, 60]` with the
    /// Euler-Maclaurin endpoint correction `-h^2/12 (f'(b) - f'(0))`, where
    /// `f'(0) = -1` and `f'(b)` underflows.
    fn p_oracle(alpha: f64) -> f64 {
        let (n, b) = (600_000, 60.0);
        let h = b / n as f64;
        let f = |y: f64| (-y - y * y / (2.0 * alpha * alpha)).exp();
        h * (0.5 * (f(0.0) + f(b)) + (1..n).map(|k| f(k as f64 * h)).sum::<f64>()) - h * h / 12.0
    }

    #[test]
    fn mass_map_limits_and_monotonicity() {
        let big: f64 = mass_map_p(1e6).unwrap();
        assert!(big < 1.0 && big > 1.0 - 1e-9, "{big}");
        let small: f64 = mass_map_p(1e-6).unwrap();
        // P(alpha) ~ alpha sqrt(pi / 2) as alpha -> 0
        assert!((small / (1e-6 * (std::f64::consts::PI / 2.0).sqrt()) - 1.0).abs() < 1e-5);
        let mut last = 0.0;
        for k in -20..=20 {
            let p: f64 = mass_map_p(2f64.powf(k as f64 / 2.0)).unwrap();
            assert!(p > last);
            last = p;
        }
        assert!(mass_map_p(0.0_f64).is_err());
    }

    #[test]
    fn mass_map_matches_quadrature_oracle() {
        for alpha in [0.1, 0.5, 1.0, 3.0, 20.0] {
            let p: f64 = mass_map_p(alpha).unwrap();
            assert!((p - p_oracle(alpha)).abs() < 1e-10, "alpha {alpha}: {p} vs {}", p_oracle(alpha));
        }
    }

    #[test]
    fn solve_alpha_examples() {
        let a: f64 = solve_alpha(0.5).unwrap();
        assert!((p_oracle(a) - 0.5).abs() < 1e-10);
        // independent bisection on the oracle
        let (mut lo, mut hi) = (0.01, 100.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if p_oracle(mid) < 0.5 {
                lo = mid
            } else {
                hi = mid
            }
        }
        assert!((a - lo).abs() < 1e-8, "{a} vs {lo}");
        assert!(solve_alpha(0.999_f64).unwrap() > 10.0);
        for m in [1.0_f64, 0.0, -0.5, 1.5] {
            assert!(matches!(solve_alpha(m), Err(Error::InvalidArgument(_))));
        }
    }

    #[test]
    fn profile_examples() {
        let alpha: f64 = 0.8;
        let mut errs = vec![];
        for n in [200, 400] {
            let g = profile_g(alpha, make_grid_1d(20.0, n).unwrap()).unwrap();
            let f = g.to_field();
            assert!((f.trace() - alpha).abs() < 2.0 * f.dz() * f.dz());
            errs.push((g.mass() - mass_map_p(alpha).unwrap()).abs());
        }
        // cell averages are exact integrals, so only round-off remains
        assert!(errs.iter().all(|e| *e < 1e-12), "{errs:?}");
    }

    #[test]
    fn profile_is_discretely_stationary() {
        let alpha: f64 = 1.3;
        for n in [200, 400] {
            let g = make_grid_1d(12.0, n).unwrap();
            let s = RescaledState { field: profile_g(alpha, g).unwrap().to_field(), alpha, step_count: 0 };
            let dtau = s.stable_step(0.45);
            let next = step_rescaled(&s, dtau).unwrap();
            let change =
                s.field.values().iter().zip(next.field.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(change / dtau < 2.0 * g.dz(), "n {n}: {}", change / dtau);
        }
    }

    #[test]
    fn ornstein_uhlenbeck_step_conserves_mass() {
        let g = make_grid_1d(8.0_f64, 80).unwrap();
        let f = project_initial(&InitialCondition::step(3.0, 0.7), &g).unwrap();
        let next = explicit_step(&f, 0.45 * positivity_dt(g.dz(), 8.0), 8.0, |k| g.face(k)).unwrap();
        assert!((next.mass() - f.mass()).abs() < 1e-15);
    }

    #[test]
    fn frame_transform_examples() {
        let g = make_grid_1d(30.0_f64, 300).unwrap();
        let n0 = project_initial(&InitialCondition::exponential(1.0, 0.6), &g).unwrap();
        let u0 = frame_transform(&n0).unwrap();
        assert_eq!(u0.values(), n0.values());
        assert_eq!(u0.grid().z_max(), 30.0);
        assert_eq!(u0.time(), 0.0);
        let n = n0.with_time(3.0);
        let u = frame_transform(&n).unwrap();
        assert!((u.time() - 7f64.sqrt().ln()).abs() < 1e-15);
        assert!((u.grid().z_max() - 30.0 / 7f64.sqrt()).abs() < 1e-12);
        assert!((u.mass() - n.mass()).abs() < 1e-10);
        let back = inverse_frame_transform(&u).unwrap();
        assert!((back.time() - 3.0).abs() < 1e-12);
        for (a, b) in back.values().iter().zip(n.values()) {
            assert!((a - b).abs() < 1e-13);
        }
        assert!(frame_transform(&u0.with_time(-1.0)).is_err());
    }

    #[test]
    fn subcritical_run_decreases_the_lyapunov_functional() {
        let g = make_grid_1d(12.0_f64, 200).unwrap();
        let u = project_initial(&InitialCondition::step(2.0, 0.5), &g).unwrap();
        let ctl = RunControl::new(2.0, 0.25, crate::driver::BlowupCaps::disabled());
        let out = run_rescaled(u, &ctl).unwrap();
        let l: Vec<f64> = out.records.iter().map(|r| r.lyapunov.unwrap()).collect();
        let tol = 1e-6 + 10.0 * g.dz() * g.dz();
        assert!(l.windows(2).all(|w| w[1] <= w[0] + tol), "{l:?}");
        assert!(l.last().unwrap() < &(0.2 * l[0]));
        assert!(out.monitors.csiszar_kullback_min.unwrap() >= -1e-12);
    }

    proptest! {
        #[test]
        fn rescaled_steps_stay_positive(v in prop::collection::vec(0.0..2.0f64, 8..60), m in 0.05..0.95f64) {
            let n = v.len();
            let f = DensityField::new(make_grid_1d(6.0, n).unwrap(), v, 0.0).unwrap();
            prop_assume!(f.mass() > 1e-6);
            let f = f.scaled(m / f.mass());
            let s = RescaledState::new(f).unwrap();
            let next = step_rescaled(&s, s.stable_step(0.9)).unwrap();
            prop_assert!(next.field.values().iter().all(|x| *x >= 0.0));
            prop_assert!((next.field.mass() - s.field.mass()).abs() < 1e-13);
        }
    }
}
