//! Functionals, identities and inequalities evaluated on solver states.
//!
//! All integrals are midpoint sums over cells. Cells with density below
//! [`VACUUM`] count as exactly zero, so `0 log 0 = 0` throughout.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::DensityField;
use crate::flux::face_flux;
use crate::grid::Grid1D;
use crate::quadrature::cell_average;
use crate::variants1d::IntervalEquilibrium;
use crate::Real;

/// Densities below this are treated as vacuum.
pub const VACUUM: f64 = 1e-300;

/// Exponents at which the Carleman-type bound is audited.
pub const CARLEMAN_ALPHAS: [f64; 3] = [0.5, 1.0, 2.0];

/// Relative mass mismatch tolerated by [`relative_entropy`].
pub const MASS_MATCH_RTOL: f64 = 1e-6;

/// One output row of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord<T> {
    pub t: T,
    pub mass: T,
    pub trace: T,
    #[serde(rename = "J")]
    pub j: T,
    #[serde(rename = "I")]
    pub i: T,
    #[serde(rename = "J_alpha")]
    pub j_alpha: Option<T>,
    pub entropy: T,
    pub rel_entropy: Option<T>,
    pub lyapunov: Option<T>,
    pub dissipation: Option<T>,
    pub max_density: T,
    pub boundary_mass_fraction: T,
    /// Boundary concentration of the exchange model (not part of the series columns).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<T>,
}

impl<T: Real> DiagnosticsRecord<T> {
    /// Record with the functionals every 1D model shares.
    pub fn of_field(f: &DensityField<T>, trace: T) -> Self {
        Self {
            t: f.time(),
            mass: f.mass(),
            trace,
            j: f.first_moment(),
            i: f.half_second_moment(),
            j_alpha: None,
            entropy: entropy(f),
            rel_entropy: None,
            lyapunov: None,
            dissipation: None,
            max_density: f.max_density(),
            boundary_mass_fraction: f.boundary_mass_fraction(),
            mu: None,
        }
    }
}

/// Which closed-form profile a [`ReferenceProfile`] samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReferenceKind<T> {
    /// `alpha exp(-alpha z)`, unit mass on the half-line.
    ExpHalfline { alpha: T },
    /// `alpha exp(-alpha y - y^2/2)`, mass `P(alpha)`.
    RescaledG { alpha: T },
    /// `alpha exp(-(alpha - beta) z)` on `(0, length)`.
    Interval { alpha: T, beta: T, length: T },
    /// `gamma nu exp(-nu z)`: partial mass `gamma`, trace `gamma nu`.
    Exchange { nu: T, gamma: T },
    /// Arbitrary sampled cell values.
    Sampled,
}

impl<T: Real> ReferenceKind<T> {
    fn log_density(&self, z: T) -> T {
        match *self {
            ReferenceKind::ExpHalfline { alpha } => alpha.ln() - alpha * z,
            ReferenceKind::RescaledG { alpha } => alpha.ln() - alpha * z - T::lit(0.5) * z * z,
            ReferenceKind::Interval { alpha, beta, .. } => alpha.ln() - (alpha - beta) * z,
            ReferenceKind::Exchange { nu, gamma } => (gamma * nu).ln() - nu * z,
            ReferenceKind::Sampled => unreachable!("sampled profiles have no closed form"),
        }
    }

    /// Log of the average over `[a, b]`, computed relative to the value at the centre.
    fn log_cell_average(&self, a: T, b: T) -> T {
        let c = (a + b) * T::lit(0.5);
        let lc = self.log_density(c);
        lc + cell_average(|z| (self.log_density(z) - lc).exp(), a, b).ln()
    }
}

/// A strictly positive reference density sampled as cell averages.
///
/// Log-values are kept alongside the values so that relative entropies stay
/// finite where the profile underflows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceProfile<T> {
    kind: ReferenceKind<T>,
    grid: Grid1D<T>,
    values: Vec<T>,
    log_values: Vec<T>,
}

impl<T: Real> ReferenceProfile<T> {
    pub fn new(kind: ReferenceKind<T>, grid: Grid1D<T>) -> Result<Self> {
        let positive = |name: &str, v: T| {
            if v > T::zero() && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(format!("{name} must be positive, got {v}")))
            }
        };
        match kind {
            ReferenceKind::ExpHalfline { alpha } | ReferenceKind::RescaledG { alpha } => positive("alpha", alpha)?,
            ReferenceKind::Interval { alpha, beta, length } => {
                positive("alpha", alpha)?;
                positive("beta", beta)?;
                positive("length", length)?;
            }
            ReferenceKind::Exchange { nu, gamma } => {
                positive("nu", nu)?;
                positive("gamma", gamma)?;
            }
            ReferenceKind::Sampled => return Err(invalid("use ReferenceProfile::from_values for sampled profiles")),
        }
        let log_values: Vec<T> =
            (0..grid.n_cells()).map(|i| kind.log_cell_average(grid.face(i), grid.face(i + 1))).collect();
        let values = log_values.iter().map(|l| l.exp()).collect();
        Ok(Self { kind, grid, values, log_values })
    }

    /// Profile from explicit cell values; zeros are allowed and mark the support.
    pub fn from_values(grid: Grid1D<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.n_cells() {
            return Err(invalid("reference length does not match the grid"));
        }
        if values.iter().any(|v| !(*v >= T::zero()) || !v.is_finite()) {
            return Err(invalid("reference values must be finite and nonnegative"));
        }
        let log_values = values.iter().map(|&v| if v > T::zero() { v.ln() } else { T::neg_infinity() }).collect();
        Ok(Self { kind: ReferenceKind::Sampled, grid, values, log_values })
    }

    pub fn exp_halfline(alpha: T, grid: Grid1D<T>) -> Result<Self> {
        Self::new(ReferenceKind::ExpHalfline { alpha }, grid)
    }

    pub fn rescaled_g(alpha: T, grid: Grid1D<T>) -> Result<Self> {
        Self::new(ReferenceKind::RescaledG { alpha }, grid)
    }

    pub fn interval(eq: &IntervalEquilibrium<T>, grid: Grid1D<T>) -> Result<Self> {
        Self::new(ReferenceKind::Interval { alpha: eq.alpha, beta: eq.beta, length: eq.length }, grid)
    }

    pub fn exchange(nu: T, gamma: T, grid: Grid1D<T>) -> Result<Self> {
        Self::new(ReferenceKind::Exchange { nu, gamma }, grid)
    }

    pub fn kind(&self) -> &ReferenceKind<T> {
        &self.kind
    }

    pub fn grid(&self) -> &Grid1D<T> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn log_values(&self) -> &[T] {
        &self.log_values
    }

    pub fn mass(&self) -> T {
        self.values.iter().copied().sum::<T>() * self.grid.dz()
    }

    /// Same profile rescaled to discrete mass `mass`.
    pub fn normalized_to(&self, mass: T) -> Self {
        let shift = (mass / self.mass()).ln();
        let log_values: Vec<T> = self.log_values.iter().map(|&l| l + shift).collect();
        let values = log_values.iter().map(|l| l.exp()).collect();
        Self { kind: self.kind, grid: self.grid, values, log_values }
    }

    /// The sampled profile as a density field at time 0.
    pub fn to_field(&self) -> DensityField<T> {
        DensityField::from_parts(self.grid, self.values.clone(), T::zero())
    }
}

#[inline]
fn is_vacuum<T: Real>(v: T) -> bool {
    v <= T::lit(VACUUM)
}

/// `int n log n`.
pub fn entropy<T: Real>(f: &DensityField<T>) -> T {
    f.values().iter().filter(|v| !is_vacuum(**v)).map(|&v| v * v.ln()).sum::<T>() * f.dz()
}

/// `sum [f log(f/g) - f + g] dz`; equals `sum f log(f/g) dz` when the masses
/// agree, and is nonnegative term by term.
fn bregman_entropy<T: Real>(f: &[T], g: &[T], log_g: &[T], dz: T) -> Result<T> {
    let mut sum = T::zero();
    for (i, ((&fi, &gi), &lg)) in f.iter().zip(g).zip(log_g).enumerate() {
        if is_vacuum(fi) {
            sum = sum + gi;
        } else if lg == T::neg_infinity() {
            return Err(Error::SupportMismatch { cell: i });
        } else {
            sum = sum + fi * (fi.ln() - lg) - fi + gi;
        }
    }
    Ok(sum * dz)
}

fn check_same_grid<T: Real>(f: &DensityField<T>, g: &ReferenceProfile<T>) -> Result<()> {
    if f.values().len() != g.values().len() || f.dz() != g.grid().dz() {
        return Err(invalid("density and reference live on different grids"));
    }
    Ok(())
}

/// `H = int f log(f / g)` for densities of equal mass.
pub fn relative_entropy<T: Real>(f: &DensityField<T>, g: &ReferenceProfile<T>) -> Result<T> {
    check_same_grid(f, g)?;
    let (mf, mg) = (f.mass(), g.mass());
    if (mf - mg).abs() > T::lit(MASS_MATCH_RTOL) * mf.max(mg) {
        return Err(invalid(format!("relative entropy needs equal masses, got {mf} and {mg}")));
    }
    bregman_entropy(f.values(), g.values(), g.log_values(), f.dz())
}

/// Fisher information `int n (d_z log n)^2 = 4 int (d_z sqrt n)^2`.
///
/// Interior faces contribute `4 (sqrt n_{i+1} - sqrt n_i)^2 / dz`. The half
/// cell between `z = 0` and the first centre contributes
/// `4 (tr - n_0)^2 / (2 n_0 dz)` with `tr` the extrapolated trace, which is the
/// weighted square-root difference that makes the discrete trace inequality
/// `(tr - n_last)^2 <= mass * fisher` exact.
pub fn fisher_dissipation<T: Real>(f: &DensityField<T>) -> T {
    let v = f.values();
    let dz = f.dz();
    let interior: T = v
        .windows(2)
        .map(|w| {
            let d = w[1].sqrt() - w[0].sqrt();
            d * d
        })
        .sum::<T>()
        / dz;
    let n0 = v[0];
    let boundary = if is_vacuum(n0) {
        T::zero()
    } else {
        let d = f.trace() - n0;
        d * d / (T::lit(2.0) * n0 * dz)
    };
    T::lit(4.0) * (interior + boundary)
}

/// `mass * fisher - (trace - n_far)_+^2`, nonnegative for every field.
///
/// On the truncated box the boundary value is compared with the last cell,
/// which is the half-line inequality `n(0)^2 <= M int n (d_z log n)^2` once the
/// far value vanishes.
pub fn check_trace_inequality<T: Real>(f: &DensityField<T>, trace: T) -> T {
    let last = *f.values().last().expect("grid has cells");
    let excess = (trace - last).max(T::zero());
    f.mass() * fisher_dissipation(f) - excess * excess
}

/// `RHS - LHS` of `int f (log f)_+ <= int f (log f + alpha z) + 1 / (alpha e)`.
pub fn check_carleman_bound<T: Real>(f: &DensityField<T>, alpha: T) -> T {
    let g = f.grid();
    let s: T = f
        .values()
        .iter()
        .enumerate()
        .filter(|(_, v)| !is_vacuum(**v))
        .map(|(i, &v)| {
            let az = alpha * g.center(i);
            if v <= T::one() {
                v * (v.ln() + az)
            } else {
                v * az
            }
        })
        .sum();
    s * f.dz() + T::one() / (alpha * T::E())
}

/// `4 H(f|g) - ||f - g||_1^2` after normalising both densities to unit mass.
pub fn check_csiszar_kullback<T: Real>(f: &DensityField<T>, g: &ReferenceProfile<T>) -> Result<T> {
    check_same_grid(f, g)?;
    let (mf, mg) = (f.mass(), g.mass());
    if !(mf > T::zero()) || !(mg > T::zero()) {
        return Err(invalid("Csiszar-Kullback check needs positive masses"));
    }
    let fh: Vec<T> = f.values().iter().map(|&v| v / mf).collect();
    let gh: Vec<T> = g.values().iter().map(|&v| v / mg).collect();
    let lg: Vec<T> = g.log_values().iter().map(|&l| l - mg.ln()).collect();
    let h = bregman_entropy(&fh, &gh, &lg, f.dz())?;
    let l1 = fh.iter().zip(&gh).map(|(&a, &b)| (a - b).abs()).sum::<T>() * f.dz();
    Ok(T::lit(4.0) * h - l1 * l1)
}

/// `||f - g||_1` on a shared grid.
pub fn l1_distance<T: Real>(f: &[T], g: &[T], dz: T) -> T {
    f.iter().zip(g).map(|(&a, &b)| (a - b).abs()).sum::<T>() * dz
}

/// `sum_faces F^2 / nbar dz` for the flux `F = d_z n + a n`, i.e. the midpoint
/// value of `int n (d_z log n + a)^2`. Faces at vacuum are skipped.
pub fn drift_dissipation<T: Real>(f: &DensityField<T>, drift: impl Fn(usize) -> T) -> T {
    let v = f.values();
    let dz = f.dz();
    (1..v.len())
        .map(|k| {
            let mean = (v[k - 1] + v[k]) * T::lit(0.5);
            if is_vacuum(mean) {
                T::zero()
            } else {
                let flux = face_flux(v[k - 1], v[k], drift(k), dz);
                flux * flux / mean
            }
        })
        .sum::<T>()
        * dz
}

/// The two pieces of the rescaled Lyapunov functional.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovParts<T> {
    #[serde(rename = "H")]
    pub h: T,
    pub moment_term: T,
}

fn check_subcritical<T: Real>(mass: T) -> Result<()> {
    if mass > T::zero() && mass < T::one() {
        Ok(())
    } else {
        Err(invalid(format!("rescaled functionals need 0 < M < 1, got {mass}")))
    }
}

/// `L = H(u | G_alpha) + (J - alpha (1 - M))^2 / (2 (1 - M))` in the rescaled frame.
pub fn lyapunov_rescaled<T: Real>(u: &DensityField<T>, alpha: T, mass: T) -> Result<(T, LyapunovParts<T>)> {
    check_subcritical(mass)?;
    let g = ReferenceProfile::rescaled_g(alpha, *u.grid())?;
    lyapunov_rescaled_with(u, &g, alpha, mass)
}

/// [`lyapunov_rescaled`] with a precomputed `G_alpha`.
pub fn lyapunov_rescaled_with<T: Real>(
    u: &DensityField<T>,
    g: &ReferenceProfile<T>,
    alpha: T,
    mass: T,
) -> Result<(T, LyapunovParts<T>)> {
    check_subcritical(mass)?;
    let h = relative_entropy(u, g)?;
    let gap = T::one() - mass;
    let dev = u.first_moment() - alpha * gap;
    let moment_term = dev * dev / (T::lit(2.0) * gap);
    Ok((h + moment_term, LyapunovParts { h, moment_term }))
}

/// `D = int u (d_y log u + y + u(0))^2 + (dJ/dtau)^2 / (1 - M)` with
/// `dJ/dtau = (1 - M) u(0) - J`.
pub fn rescaled_dissipation<T: Real>(u: &DensityField<T>, mass: T) -> Result<T> {
    check_subcritical(mass)?;
    let tr = u.trace();
    let grid = *u.grid();
    let local = drift_dissipation(u, |k| grid.face(k) + tr);
    let gap = T::one() - mass;
    let rate = gap * tr - u.first_moment();
    Ok(local + rate * rate / gap)
}

/// Terms of the exchange-model dissipation; each is nonnegative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExchangeDissipation<T> {
    /// `int n (d_z log n + n(0)/m)^2`
    pub drift: T,
    /// `m (n(0)/m - mu)^2`
    pub mismatch: T,
    /// `(n(0) - gamma mu) log(n(0) / (gamma mu))`
    pub exchange: T,
    /// `mu (mu - nu)^2`
    pub relaxation: T,
}

impl<T: Real> ExchangeDissipation<T> {
    pub fn total(&self) -> T {
        self.drift + self.mismatch + self.exchange + self.relaxation
    }

    pub fn min_term(&self) -> T {
        self.drift.min(self.mismatch).min(self.exchange).min(self.relaxation)
    }
}

fn check_exchange_budget<T: Real>(n: &DensityField<T>, mu: T, total: T, gamma: T) -> Result<T> {
    if !(gamma > T::zero()) {
        return Err(invalid(format!("gamma must be positive, got {gamma}")));
    }
    if !(total > gamma) {
        return Err(Error::NoPolarisedEquilibrium { mass: total.as_f64(), gamma: gamma.as_f64() });
    }
    if !(mu >= T::zero()) {
        return Err(invalid(format!("boundary concentration must be nonnegative, got {mu}")));
    }
    let m = n.mass();
    if !(m > T::zero()) {
        return Err(invalid("free mass must be positive"));
    }
    if (m + mu - total).abs() > T::lit(MASS_MATCH_RTOL) * total {
        return Err(invalid(format!("mass budget violated: m + mu = {} but M = {total}", m + mu)));
    }
    Ok(m)
}

/// `L = m H + (mu - nu)^2 / 2 + mu log(mu / nu) + m log(m / gamma)`, `nu = M - gamma`,
/// with `H` the entropy of `n / m` relative to the unit-mass profile `nu exp(-nu z)`.
/// For `gamma = 1` this is the functional of the unit-rate exchange model.
/// At `mu = 0` the term `mu log(mu / nu)` takes its limit zero.
pub fn lyapunov_exchange<T: Real>(n: &DensityField<T>, mu: T, total: T, gamma: T) -> Result<T> {
    let m = check_exchange_budget(n, mu, total, gamma)?;
    let nu = total - gamma;
    let h = ReferenceProfile::exp_halfline(nu, *n.grid())?.normalized_to(m);
    let m_h = bregman_entropy(n.values(), h.values(), h.log_values(), n.dz())?;
    let d = mu - nu;
    let exchange = if mu > T::zero() { mu * (mu / nu).ln() } else { T::zero() };
    Ok(m_h + T::lit(0.5) * d * d + exchange + m * (m / gamma).ln())
}

/// Term-by-term dissipation of [`lyapunov_exchange`]; requires `mu > 0`.
pub fn exchange_dissipation<T: Real>(n: &DensityField<T>, mu: T, total: T, gamma: T) -> Result<ExchangeDissipation<T>> {
    let m = check_exchange_budget(n, mu, total, gamma)?;
    if !(mu > T::zero()) {
        return Err(invalid(format!("boundary concentration must be positive, got {mu}")));
    }
    let nu = total - gamma;
    let tr = n.trace();
    let drift = drift_dissipation(n, |_| tr / m);
    let mis = tr / m - mu;
    let gm = gamma * mu;
    let exchange = if tr == gm {
        T::zero()
    } else if tr > T::zero() {
        (tr - gm) * (tr / gm).ln()
    } else {
        T::infinity()
    };
    let d = mu - nu;
    Ok(ExchangeDissipation { drift, mismatch: m * mis * mis, exchange, relaxation: mu * d * d })
}

/// Running minima of the inequality audits over a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monitors<T> {
    pub trace_inequality_min: Option<T>,
    pub carleman_min: Option<T>,
    pub csiszar_kullback_min: Option<T>,
    pub exchange_dissipation_min: Option<T>,
    pub samples: usize,
}

impl<T> Default for Monitors<T> {
    fn default() -> Self {
        Self {
            trace_inequality_min: None,
            carleman_min: None,
            csiszar_kullback_min: None,
            exchange_dissipation_min: None,
            samples: 0,
        }
    }
}

fn fold_min<T: Real>(slot: &mut Option<T>, v: T) {
    *slot = Some(match *slot {
        Some(s) => s.min(v),
        None => v,
    });
}

impl<T: Real> Monitors<T> {
    /// Trace and Carleman audits on a 1D state.
    pub fn observe_field(&mut self, f: &DensityField<T>, trace: T) {
        self.samples += 1;
        fold_min(&mut self.trace_inequality_min, check_trace_inequality(f, trace));
        for a in CARLEMAN_ALPHAS {
            fold_min(&mut self.carleman_min, check_carleman_bound(f, T::lit(a)));
        }
    }

    pub fn observe_csiszar_kullback(&mut self, residual: T) {
        fold_min(&mut self.csiszar_kullback_min, residual);
    }

    pub fn observe_exchange(&mut self, d: &ExchangeDissipation<T>) {
        fold_min(&mut self.exchange_dissipation_min, d.min_term());
    }

    /// Merges another set of minima into this one.
    pub fn merge(&mut self, other: &Self) {
        for (slot, v) in [
            (&mut self.trace_inequality_min, other.trace_inequality_min),
            (&mut self.carleman_min, other.carleman_min),
            (&mut self.csiszar_kullback_min, other.csiszar_kullback_min),
            (&mut self.exchange_dissipation_min, other.exchange_dissipation_min),
        ] {
            if let Some(v) = v {
                fold_min(slot, v);
            }
        }
        self.samples += other.samples;
    }
}
