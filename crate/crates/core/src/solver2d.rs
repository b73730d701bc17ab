//! Half-plane model `d_t n = Laplacian n - div(n u)` on the box
//! `(y_min, y_max) x (0, z_max)` with zero normal flux on every edge, for two
//! boundary-driven fields:
//!
//! * transversal: `u = -n(t, y, 0) e_z`;
//! * potential: `u(y, z) = -int (y - y', z) / ((y - y')^2 + z^2) n(t, y', 0) dy'`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{DiagnosticsRecord, Monitors, VACUUM};
use crate::driver::{
    integrate, BlowUpReport, BlowupCaps, Evolution, Observer, RunControl, RunOutput, StepIntegrals, Terminal,
};
use crate::error::{invalid, Error, Result};
use crate::flux::face_flux;
use crate::grid::Grid2D;
use crate::initial::{project_initial, InitialCondition};
use crate::quadrature::cell_average;
use crate::Real;

/// Nonnegative cell averages on a [`Grid2D`], flat index `i * ny + j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field2D<T> {
    grid: Grid2D<T>,
    values: Vec<T>,
    time: T,
}

impl<T: Real> Field2D<T> {
    pub fn new(grid: Grid2D<T>, values: Vec<T>, time: T) -> Result<Self> {
        if values.len() != grid.n_cells() {
            return Err(invalid(format!("expected {} values, got {}", grid.n_cells(), values.len())));
        }
        if values.iter().any(|v| !(*v >= T::zero()) || !v.is_finite()) {
            return Err(invalid("2D density values must be finite and nonnegative"));
        }
        Ok(Self { grid, values, time })
    }

    pub fn zeros(grid: Grid2D<T>) -> Self {
        Self { grid, values: vec![T::zero(); grid.n_cells()], time: T::zero() }
    }

    pub fn constant(grid: Grid2D<T>, c: T) -> Result<Self> {
        Self::new(grid, vec![c; grid.n_cells()], T::zero())
    }

    /// `M g(y) h(z) / (mass of g h)`, with `g` averaged over `y` cells by
    /// Gauss-Legendre and `h` projected like 1D initial data.
    pub fn separable(grid: Grid2D<T>, g: impl Fn(T) -> T, h: &InitialCondition<T>, mass: T) -> Result<Self> {
        if !(mass > T::zero()) || !mass.is_finite() {
            return Err(invalid(format!("mass must be positive, got {mass}")));
        }
        let gy: Vec<T> = (0..grid.ny()).map(|j| cell_average(&g, grid.y_face(j), grid.y_face(j + 1))).collect();
        let gmass = gy.iter().copied().sum::<T>() * grid.dy();
        if !(gmass > T::zero()) {
            return Err(invalid("transverse profile has zero mass on the grid"));
        }
        let hz = project_initial(&InitialCondition::new(h.profile.clone(), T::one()), &grid.z_grid())?;
        let scale = mass / gmass;
        let mut values = Vec::with_capacity(grid.n_cells());
        for i in 0..grid.nz() {
            for gj in &gy {
                values.push(*gj * scale * hz.values()[i]);
            }
        }
        Self::new(grid, values, T::zero())
    }

    pub fn grid(&self) -> &Grid2D<T> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn time(&self) -> T {
        self.time
    }

    pub fn at(&self, j: usize, i: usize) -> T {
        self.values[self.grid.index(j, i)]
    }

    pub fn mass(&self) -> T {
        self.values.iter().copied().sum::<T>() * self.grid.cell_area()
    }

    pub fn max_density(&self) -> T {
        self.values.iter().copied().fold(T::zero(), T::max)
    }

    /// `int n log n dy dz`.
    pub fn entropy(&self) -> T {
        self.values.iter().filter(|v| **v > T::lit(VACUUM)).map(|&v| v * v.ln()).sum::<T>() * self.grid.cell_area()
    }

    /// `int z n dy dz`.
    pub fn first_moment_z(&self) -> T {
        let g = &self.grid;
        (0..g.nz()).map(|i| g.z_center(i) * self.row_sum(i)).sum::<T>() * g.cell_area()
    }

    /// Mass in the top tenth of the `z` rows, as a fraction of the total.
    pub fn boundary_mass_fraction(&self) -> T {
        let g = &self.grid;
        let first = g.nz() - (g.nz() / 10).max(1);
        let total = self.mass();
        if !(total > T::zero()) {
            return T::zero();
        }
        (first..g.nz()).map(|i| self.row_sum(i)).sum::<T>() * g.cell_area() / total
    }

    fn row_sum(&self, i: usize) -> T {
        let ny = self.grid.ny();
        self.values[i * ny..(i + 1) * ny].iter().copied().sum()
    }
}

/// Per-column boundary value `n(t, y_j, 0)`, `(3 n_0 - n_1) / 2` clipped at zero.
pub fn trace_row<T: Real>(f: &Field2D<T>) -> Vec<T> {
    let g = f.grid();
    (0..g.ny()).map(|j| ((T::lit(3.0) * f.at(j, 0) - f.at(j, 1)) * T::lit(0.5)).max(T::zero())).collect()
}

/// Face-normal velocities.
///
/// `uy[i * (ny + 1) + j]` sits on the `y`-face `j` of row `i`;
/// `uz[i * ny + j]` sits on the `z`-face `i` (`0..=nz`) of column `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Velocity2D<T> {
    pub ny: usize,
    pub nz: usize,
    pub uy: Vec<T>,
    pub uz: Vec<T>,
}

impl<T: Real> Velocity2D<T> {
    pub fn zeros(ny: usize, nz: usize) -> Self {
        Self { ny, nz, uy: vec![T::zero(); (ny + 1) * nz], uz: vec![T::zero(); ny * (nz + 1)] }
    }

    pub fn uy_at(&self, j: usize, i: usize) -> T {
        self.uy[i * (self.ny + 1) + j]
    }

    pub fn uz_at(&self, j: usize, i: usize) -> T {
        self.uz[i * self.ny + j]
    }

    pub fn max_abs_uy(&self) -> T {
        self.uy.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn max_abs_uz(&self) -> T {
        self.uz.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }
}

/// `u = -tr(y) e_z` on every `z`-face of each column.
pub fn velocity_transversal<T: Real>(tr: &[T], nz: usize) -> Velocity2D<T> {
    let ny = tr.len();
    let mut v = Velocity2D::zeros(ny, nz);
    for i in 0..=nz {
        for (j, &t) in tr.iter().enumerate() {
            v.uz[i * ny + j] = -t;
        }
    }
    v
}

/// Direct quadrature of the boundary-sourced field at face centres.
///
/// Sources sit at the column centres with weight `tr_j dy`. Interior faces
/// have `z >= dz / 2`, so the kernel is never evaluated at its singularity;
/// the `z = 0` faces take the limit `-pi tr(y)` (their flux is zero anyway).
/// Each face sums its sources in a fixed order, so the result does not depend
/// on the thread count.
pub fn velocity_potential<T: Real>(tr: &[T], grid: &Grid2D<T>) -> Velocity2D<T> {
    let (ny, nz) = (grid.ny(), grid.nz());
    assert_eq!(tr.len(), ny, "trace row length must match ny");
    let dy = grid.dy();
    let centres: Vec<T> = (0..ny).map(|j| grid.y_center(j)).collect();
    let ys = &centres[..];
    let kernel = |y: T, z: T| -> (T, T) {
        let mut sy = T::zero();
        let mut sz = T::zero();
        for (&yp, &t) in ys.iter().zip(tr) {
            if t == T::zero() {
                continue;
            }
            let d = y - yp;
            let w = t / (d * d + z * z);
            sy = sy + d * w;
            sz = sz + z * w;
        }
        (-sy * dy, -sz * dy)
    };
    let uy: Vec<T> = (0..nz)
        .into_par_iter()
        .flat_map_iter(|i| {
            let z = grid.z_center(i);
            (0..=ny).map(move |j| kernel(grid.y_face(j), z).0).collect::<Vec<_>>()
        })
        .collect();
    let uz: Vec<T> = (0..=nz)
        .into_par_iter()
        .flat_map_iter(|i| {
            let z = grid.z_face(i);
            (0..ny).map(move |j| if i == 0 { -T::PI() * tr[j] } else { kernel(ys[j], z).1 }).collect::<Vec<_>>()
        })
        .collect();
    Velocity2D { ny, nz, uy, uz }
}

/// Discrete divergence `(uy_{j+1} - uy_j) / dy + (uz_{i+1} - uz_i) / dz` per cell.
pub fn divergence<T: Real>(u: &Velocity2D<T>, grid: &Grid2D<T>) -> Vec<T> {
    let (ny, nz) = (grid.ny(), grid.nz());
    let mut out = Vec::with_capacity(ny * nz);
    for i in 0..nz {
        for j in 0..ny {
            out.push((u.uy_at(j + 1, i) - u.uy_at(j, i)) / grid.dy() + (u.uz_at(j, i + 1) - u.uz_at(j, i)) / grid.dz());
        }
    }
    out
}

/// Largest `|div u|` over cells whose centres lie in `[y_lo, y_hi] x [z_lo, z_hi]`.
pub fn max_divergence_in<T: Real>(u: &Velocity2D<T>, grid: &Grid2D<T>, y: (T, T), z: (T, T)) -> T {
    let div = divergence(u, grid);
    let mut m = T::zero();
    for i in 0..grid.nz() {
        let zc = grid.z_center(i);
        if zc < z.0 || zc > z.1 {
            continue;
        }
        for j in 0..grid.ny() {
            let yc = grid.y_center(j);
            if yc >= y.0 && yc <= y.1 {
                m = m.max(div[grid.index(j, i)].abs());
            }
        }
    }
    m
}

/// Step restriction `cfl / (2/dy^2 + 2/dz^2 + 2 max|u_y| / dy + max|u_z| / dz)`.
///
/// The `y` velocity of the potential field changes sign, so a cell can lose
/// mass through both `y`-faces at once; hence the factor two on that term.
pub fn stable_dt_2d<T: Real>(grid: &Grid2D<T>, u: &Velocity2D<T>, cfl: T) -> T {
    let (dy, dz) = (grid.dy(), grid.dz());
    let two = T::lit(2.0);
    cfl / (two / (dy * dy) + two / (dz * dz) + two * u.max_abs_uy() / dy + u.max_abs_uz() / dz)
}

/// One explicit conservative step with exponentially fitted fluxes in each
/// direction and zero flux through every edge of the box.
pub fn step_2d<T: Real>(s: &Field2D<T>, u: &Velocity2D<T>, dt: T) -> Result<Field2D<T>> {
    let g = *s.grid();
    let (ny, nz) = (g.ny(), g.nz());
    if u.ny != ny || u.nz != nz {
        return Err(invalid("velocity does not match the grid"));
    }
    let limit = stable_dt_2d(&g, u, T::one());
    if !(dt > T::zero()) || dt > limit * (T::one() + T::lit(1e-12)) {
        return Err(Error::CflViolation { dt: dt.as_f64(), limit: limit.as_f64() });
    }
    let (dy, dz) = (g.dy(), g.dz());
    let n = &s.values;
    // drift in the flux convention d_t n = d_x (d_x n + a n) is a = -u
    let mut fy = vec![T::zero(); (ny + 1) * nz];
    for i in 0..nz {
        for j in 1..ny {
            fy[i * (ny + 1) + j] = face_flux(n[g.index(j - 1, i)], n[g.index(j, i)], -u.uy_at(j, i), dy);
        }
    }
    let mut fz = vec![T::zero(); ny * (nz + 1)];
    for i in 1..nz {
        for j in 0..ny {
            fz[i * ny + j] = face_flux(n[g.index(j, i - 1)], n[g.index(j, i)], -u.uz_at(j, i), dz);
        }
    }
    let (ry, rz) = (dt / dy, dt / dz);
    let slack = T::lit(64.0) * T::epsilon();
    let mut values = Vec::with_capacity(ny * nz);
    for i in 0..nz {
        for j in 0..ny {
            let (yl, yr) = (fy[i * (ny + 1) + j], fy[i * (ny + 1) + j + 1]);
            let (zl, zr) = (fz[i * ny + j], fz[(i + 1) * ny + j]);
            let v = n[g.index(j, i)];
            let next = v + ry * (yr - yl) + rz * (zr - zl);
            if next >= T::zero() {
                values.push(next);
            } else if -next <= slack * (v + ry * (yl.abs() + yr.abs()) + rz * (zl.abs() + zr.abs())) {
                values.push(T::zero());
            } else {
                return Err(Error::NegativeDensity { cell: g.index(j, i), value: next.as_f64() });
            }
        }
    }
    Ok(Field2D { grid: g, values, time: s.time + dt })
}

/// `nu(y) = int n(y, z) dz` per column.
pub fn marginal_y<T: Real>(f: &Field2D<T>) -> Vec<T> {
    let g = f.grid();
    (0..g.ny()).map(|j| (0..g.nz()).map(|i| f.at(j, i)).sum::<T>() * g.dz()).collect()
}

/// `I = 1/2 int (y^2 + z^2) n`.
pub fn second_moment_2d<T: Real>(f: &Field2D<T>) -> T {
    let g = f.grid();
    let mut s = T::zero();
    for i in 0..g.nz() {
        let z = g.z_center(i);
        for j in 0..g.ny() {
            let y = g.y_center(j);
            s = s + (y * y + z * z) * f.at(j, i);
        }
    }
    T::lit(0.5) * s * g.cell_area()
}

/// `I0 <= C M^3`: the concentration condition for blow-up in the half-plane.
pub fn blowup_criterion_2d<T: Real>(i0: T, mass: T, c: T) -> bool {
    i0 <= c * mass.powi(3)
}

/// `(sum n^p dy dz)^(1/p)`.
pub fn lp_norm<T: Real>(f: &Field2D<T>, p: T) -> Result<T> {
    if !(p >= T::one()) {
        return Err(invalid(format!("p must be at least 1, got {p}")));
    }
    Ok((f.values().iter().map(|&v| v.powf(p)).sum::<T>() * f.grid().cell_area()).powf(T::one() / p))
}

/// Which boundary-driven field advects the density.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VelocityCase {
    Transversal,
    Potential,
}

impl<T: Real> BlowupCaps<T> {
    /// Defaults for a 2D run: density cap `1e6 M / area`, trace cap
    /// `max(M / (4 dy dz), 4 trace0)` with `trace0` the largest initial
    /// boundary value, dt floor `1e-12`.
    pub fn defaults_2d(mass: T, grid: &Grid2D<T>, trace0: T) -> Self {
        let area = (grid.y_max() - grid.y_min()) * grid.z_max();
        Self {
            density_cap: Some(T::lit(1e6) * mass / area),
            trace_cap: Some((T::lit(0.25) * mass / grid.cell_area()).max(T::lit(4.0) * trace0)),
            dt_floor: T::lit(1e-12),
        }
    }
}

/// 2D solver state; the velocity is rebuilt from the trace before every step.
#[derive(Debug, Clone, PartialEq)]
pub struct State2D<T> {
    pub field: Field2D<T>,
    pub case: VelocityCase,
    pub step_count: u64,
    velocity: Velocity2D<T>,
}

impl<T: Real> State2D<T> {
    pub fn new(field: Field2D<T>, case: VelocityCase) -> Self {
        let velocity = Self::velocity_for(&field, case);
        Self { field, case, step_count: 0, velocity }
    }

    fn velocity_for(f: &Field2D<T>, case: VelocityCase) -> Velocity2D<T> {
        let tr = trace_row(f);
        match case {
            VelocityCase::Transversal => velocity_transversal(&tr, f.grid().nz()),
            VelocityCase::Potential => velocity_potential(&tr, f.grid()),
        }
    }

    pub fn velocity(&self) -> &Velocity2D<T> {
        &self.velocity
    }
}

impl<T: Real> Evolution<T> for State2D<T> {
    fn time(&self) -> T {
        self.field.time
    }
    fn set_time(&mut self, t: T) {
        self.field.time = t;
    }
    fn stable_step(&self, cfl: T) -> T {
        stable_dt_2d(self.field.grid(), &self.velocity, cfl)
    }
    fn advance(&mut self, dt: T) -> Result<()> {
        self.field = step_2d(&self.field, &self.velocity, dt)?;
        self.velocity = Self::velocity_for(&self.field, self.case);
        self.step_count += 1;
        Ok(())
    }
    fn trace(&self) -> T {
        trace_row(&self.field).into_iter().fold(T::zero(), T::max)
    }
    fn max_density(&self) -> T {
        self.field.max_density()
    }
}

/// Records of a 2D run: `trace` is the row maximum, `J = int z n`, `I` the
/// half second moment; `moment_rate` integrates `2M - int z n(y, 0) n(y, z)`.
struct Recorder2D<T: Real> {
    mass: T,
    records: Vec<DiagnosticsRecord<T>>,
    integrals: Vec<StepIntegrals<T>>,
    running: StepIntegrals<T>,
    /// Marginal `nu(y)` at each record.
    marginals: Vec<Vec<T>>,
}

impl<T: Real> Observer<T, State2D<T>> for Recorder2D<T> {
    fn on_step(&mut self, s: &State2D<T>, dt: T) {
        let f = &s.field;
        let g = f.grid();
        let tr = trace_row(f);
        let mut coupling = T::zero();
        for i in 0..g.nz() {
            let z = g.z_center(i);
            for (j, &t) in tr.iter().enumerate() {
                coupling = coupling + z * t * f.at(j, i);
            }
        }
        coupling = coupling * g.cell_area();
        let tmax = tr.iter().copied().fold(T::zero(), T::max);
        let r = &mut self.running;
        r.trace = r.trace + tmax * dt;
        r.trace_sq = r.trace_sq + tmax * tmax * dt;
        r.moment_rate = r.moment_rate + (T::lit(2.0) * self.mass - coupling) * dt;
    }

    fn on_output(&mut self, s: &State2D<T>) -> Result<()> {
        let f = &s.field;
        self.records.push(DiagnosticsRecord {
            t: f.time(),
            mass: f.mass(),
            trace: s.trace(),
            j: f.first_moment_z(),
            i: second_moment_2d(f),
            j_alpha: None,
            entropy: f.entropy(),
            rel_entropy: None,
            lyapunov: None,
            dissipation: None,
            max_density: f.max_density(),
            boundary_mass_fraction: f.boundary_mass_fraction(),
            mu: None,
        });
        self.integrals.push(self.running);
        self.marginals.push(marginal_y(f));
        Ok(())
    }
}

/// A 2D run plus the `y`-marginal at each record.
#[derive(Debug, Clone, PartialEq)]
pub struct Run2DOutput<T> {
    pub output: RunOutput<T>,
    pub marginals: Vec<Vec<T>>,
}

/// Integrates the half-plane model with the chosen field.
pub fn run_2d<T: Real>(initial: Field2D<T>, case: VelocityCase, ctl: &RunControl<T>) -> Result<Run2DOutput<T>> {
    let mass = initial.mass();
    let mut notes = vec![format!("velocity field: {case:?}")];
    notes.push(format!("initial L2 norm: {:.16e}", lp_norm(&initial, T::lit(2.0))?));
    let mut rec = Recorder2D {
        mass,
        records: Vec::new(),
        integrals: Vec::new(),
        running: StepIntegrals::zero(),
        marginals: Vec::new(),
    };
    let mut state = State2D::new(initial, case);
    let detected = integrate(&mut state, ctl, &mut rec)?;
    notes.push(format!("terminal L2 norm: {:.16e}", lp_norm(&state.field, T::lit(2.0))?));
    let output = RunOutput {
        records: rec.records,
        integrals: rec.integrals,
        blowup: BlowUpReport {
            detected: detected.is_some(),
            t_detect: detected.map(|d| d.0),
            criterion: detected.map(|d| d.1),
            analytic_bound: None,
        },
        terminal: Terminal::TwoD { field: state.field },
        monitors: Monitors::default(),
        steps: state.step_count,
        notes,
    };
    Ok(Run2DOutput { output, marginals: rec.marginals })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::driver::BlowupCaps;
    use proptest::prelude::*;

    fn grid(ny: usize, nz: usize) -> Grid2D<f64> {
        Grid2D::new(-3.0, 3.0, 3.0, ny, nz).unwrap()
    }

    fn gaussian(sigma: f64) -> impl Fn(f64) -> f64 {
        move |y: f64| (-y * y / (2.0 * sigma * sigma)).exp()
    }

    #[test]
    fn trace_row_examples() {
        let g = grid(8, 4);
        assert_eq!(trace_row(&Field2D::constant(g, 1.5).unwrap()), vec![1.5; 8]);
        assert_eq!(trace_row(&Field2D::zeros(g)), vec![0.0; 8]);
        // separable g(y) e^{-z}: every column's trace error falls ~4x per z-halving
        let errs: Vec<f64> = [200, 400, 800]
            .iter()
            .map(|&nz| {
                let g2 = Grid2D::new(-3.0_f64, 3.0, 30.0, 6, nz).unwrap();
                let f = Field2D::separable(g2, |_| 1.0, &InitialCondition::exponential(1.0, 1.0), 6.0).unwrap();
                trace_row(&f).iter().map(|t| (t - 1.0).abs()).fold(0.0, f64::max)
            })
            .collect();
        for w in errs.windows(2) {
            assert!((w[0] / w[1]).log2() > 1.8, "{errs:?}");
        }
    }

    #[test]
    fn transversal_field_examples() {
        let z = velocity_transversal(&[0.0; 5], 4);
        assert_eq!(z, Velocity2D::zeros(5, 4));
        let tr = [0.0, 0.0, 2.0, 0.0, 0.0];
        let u = velocity_transversal(&tr, 4);
        assert!(divergence(&u, &grid(5, 4)).iter().all(|d| *d == 0.0));
        for i in 0..=4 {
            for j in 0..5 {
                assert_eq!(u.uz_at(j, i), if j == 2 { -2.0 } else { 0.0 });
            }
        }
        assert_eq!(u.max_abs_uy(), 0.0);
    }

    #[test]
    fn potential_field_of_one_source_matches_the_kernel() {
        let g = grid(9, 6);
        let (j0, m) = (4, 1.7);
        let mut tr = vec![0.0; 9];
        tr[j0] = m;
        let u = velocity_potential(&tr, &g);
        assert_eq!(velocity_potential(&[0.0; 9], &g), Velocity2D::zeros(9, 6));
        let y0 = g.y_center(j0);
        // closed form for a point source of weight m dy at (y0, 0)
        let exact = |y: f64, z: f64| {
            let r2 = (y - y0).powi(2) + z * z;
            (-m * g.dy() * (y - y0) / r2, -m * g.dy() * z / r2)
        };
        for i in 0..6 {
            for j in 0..=9 {
                let e = exact(g.y_face(j), g.z_center(i)).0;
                assert!((u.uy_at(j, i) - e).abs() < 1e-14);
            }
            // odd about the source column
            for k in 0..=4 {
                assert!((u.uy_at(4 - k, i) + u.uy_at(5 + k, i)).abs() < 1e-14);
            }
        }
        for i in 1..=6 {
            let z = g.z_face(i);
            assert!((u.uz_at(j0, i) - exact(y0, z).1).abs() < 1e-14);
            assert!((u.uz_at(j0, i) + m * g.dy() / z).abs() < 1e-14);
            assert!(u.uz_at(j0, i) < 0.0);
        }
    }

    #[test]
    fn potential_field_is_nearly_divergence_free() {
        let mut d = vec![];
        for n in [32, 64] {
            let g = grid(n, n);
            let tr: Vec<f64> = (0..n).map(|j| gaussian(0.5)(g.y_center(j))).collect();
            let u = velocity_potential(&tr, &g);
            d.push(max_divergence_in(&u, &g, (-1.5, 1.5), (0.5, 2.0)));
        }
        assert!(d[1] < d[0] / 3.0, "{d:?}");
    }

    #[test]
    fn heat_step_keeps_separable_data_separable() {
        let g = grid(24, 24);
        let f = Field2D::separable(g, gaussian(0.8), &InitialCondition::exponential(2.0, 1.0), 1.0).unwrap();
        let u = Velocity2D::zeros(24, 24);
        let dt = stable_dt_2d(&g, &u, 0.45);
        let next = step_2d(&f, &u, dt).unwrap();
        // product of independent 1D heat steps; differs by dt^2 Lap_y g Lap_z h
        let heat = |v: &[f64], h: f64| -> Vec<f64> {
            (0..v.len())
                .map(|k| {
                    let l = if k == 0 { 0.0 } else { v[k - 1] - v[k] };
                    let r = if k + 1 == v.len() { 0.0 } else { v[k + 1] - v[k] };
                    v[k] + dt * (l + r) / (h * h)
                })
                .collect()
        };
        let lap = |v: &[f64], h: f64| -> Vec<f64> { heat(v, h).iter().zip(v).map(|(a, b)| (a - b) / dt).collect() };
        let col: Vec<f64> = (0..24).map(|i| f.at(0, i)).collect();
        let row: Vec<f64> = (0..24).map(|j| f.at(j, 0) / col[0]).collect();
        let (hy, hz) = (heat(&row, g.dy()), heat(&col, g.dz()));
        let (ly, lz) = (lap(&row, g.dy()), lap(&col, g.dz()));
        for i in 0..24 {
            for j in 0..24 {
                let bound = dt * dt * (ly[j] * lz[i]).abs() * (1.0 + 1e-9) + 1e-13;
                assert!((next.at(j, i) - hy[j] * hz[i]).abs() <= bound);
            }
        }
    }

    #[test]
    fn transversal_marginal_follows_the_heat_step() {
        let g = grid(20, 16);
        let f = Field2D::separable(g, gaussian(0.7), &InitialCondition::step(1.0, 1.0), 2.0).unwrap();
        let u = velocity_transversal(&trace_row(&f), 16);
        let dt = stable_dt_2d(&g, &u, 0.45);
        let next = step_2d(&f, &u, dt).unwrap();
        let nu = marginal_y(&f);
        let r = dt / (g.dy() * g.dy());
        for (j, got) in marginal_y(&next).iter().enumerate() {
            let l = if j == 0 { 0.0 } else { nu[j - 1] - nu[j] };
            let rr = if j + 1 == nu.len() { 0.0 } else { nu[j + 1] - nu[j] };
            assert!((got - (nu[j] + r * (l + rr))).abs() < 1e-13);
        }
    }

    #[test]
    fn marginal_and_moment_examples() {
        let g = grid(10, 6);
        assert!(marginal_y(&Field2D::constant(g, 2.0).unwrap()).iter().all(|m| (m - 6.0).abs() < 1e-14));
        assert!(marginal_y(&Field2D::zeros(g)).iter().all(|m| *m == 0.0));
        assert_eq!(second_moment_2d(&Field2D::zeros(g)), 0.0);

        let f = Field2D::separable(g, gaussian(1.0), &InitialCondition::exponential(1.0, 1.0), 1.0).unwrap();
        let gy: Vec<f64> = (0..10).map(|j| f.at(j, 0)).collect();
        let hz: Vec<f64> = (0..6).map(|i| f.at(0, i) / gy[0]).collect();
        let hmass: f64 = hz.iter().sum::<f64>() * g.dz();
        for (m, gj) in marginal_y(&f).iter().zip(&gy) {
            assert!((m - gj * hmass).abs() < 1e-14);
        }
        // product of 1D midpoint moments
        let sum1 = |v: &[f64], c: &dyn Fn(usize) -> f64, h: f64, p: i32| -> f64 {
            v.iter().enumerate().map(|(k, x)| x * c(k).powi(p)).sum::<f64>() * h
        };
        let yc = |j: usize| g.y_center(j);
        let zc = |i: usize| g.z_center(i);
        let oracle = 0.5
            * (sum1(&gy, &yc, g.dy(), 2) * sum1(&hz, &zc, g.dz(), 0)
                + sum1(&gy, &yc, g.dy(), 0) * sum1(&hz, &zc, g.dz(), 2));
        assert!((second_moment_2d(&f) - oracle).abs() < 1e-12);

        // point mass at a cell centre
        let mut v = vec![0.0; g.n_cells()];
        v[g.index(7, 2)] = 3.0 / g.cell_area();
        let p = Field2D::new(g, v, 0.0).unwrap();
        let (y0, z0) = (g.y_center(7), g.z_center(2));
        assert!((second_moment_2d(&p) - 1.5 * (y0 * y0 + z0 * z0)).abs() < 1e-12);
    }

    #[test]
    fn criterion_and_norm_examples() {
        assert!(blowup_criterion_2d(0.0, 0.3, 1.0));
        assert!(!blowup_criterion_2d(1e12, 2.0, 1.0));
        assert!(blowup_criterion_2d(8.0, 2.0, 1.0));
        let unit = Grid2D::new(0.0, 1.0, 1.0, 4, 4).unwrap();
        let c = Field2D::constant(unit, 2.5).unwrap();
        for p in [1.0_f64, 2.0, 3.5] {
            assert!((lp_norm(&c, p).unwrap() - 2.5).abs() < 1e-14);
        }
        let f = Field2D::separable(grid(8, 8), gaussian(1.0), &InitialCondition::exponential(1.0, 1.0), 2.0).unwrap();
        let scaled = Field2D::new(*f.grid(), f.values().iter().map(|v| 3.0 * v).collect(), 0.0).unwrap();
        assert!((lp_norm(&scaled, 2.0).unwrap() - 3.0 * lp_norm(&f, 2.0).unwrap()).abs() < 1e-13);
        assert!((lp_norm(&f, 1.0).unwrap() - f.mass()).abs() < 1e-14);
        assert!(lp_norm(&f, 0.5).is_err());
    }

    #[test]
    fn oversized_steps_are_rejected() {
        let g = grid(8, 8);
        let f = Field2D::constant(g, 1.0).unwrap();
        let u = velocity_potential(&trace_row(&f), &g);
        let dt = stable_dt_2d(&g, &u, 1.0);
        assert!(matches!(step_2d(&f, &u, 1.01 * dt), Err(Error::CflViolation { .. })));
        assert!(step_2d(&f, &Velocity2D::zeros(7, 8), dt).is_err());
    }

    #[test]
    fn small_transversal_run_conserves_mass() {
        let g = grid(24, 24);
        let f = Field2D::separable(g, gaussian(0.6), &InitialCondition::exponential(1.0, 1.0), 1.0).unwrap();
        let tr0 = trace_row(&f).into_iter().fold(0.0, f64::max);
        let caps = BlowupCaps::defaults_2d(1.0, &g, tr0);
        let run = run_2d(f, VelocityCase::Transversal, &RunControl::new(0.2, 0.05, caps)).unwrap();
        assert!(!run.output.blowup.detected);
        assert_eq!(run.marginals.len(), run.output.records.len());
        assert!(run.output.relative_mass_drift() < 1e-12 * run.output.steps as f64);
    }

    proptest! {
        #[test]
        fn steps_conserve_mass_and_positivity(
            v in prop::collection::vec(0.0..3.0f64, 36),
            potential in any::<bool>(),
            cfl in 0.05..1.0f64,
        ) {
            let g = grid(6, 6);
            let f = Field2D::new(g, v, 0.0).unwrap();
            let tr = trace_row(&f);
            let u = if potential { velocity_potential(&tr, &g) } else { velocity_transversal(&tr, 6) };
            let next = step_2d(&f, &u, stable_dt_2d(&g, &u, cfl)).unwrap();
            prop_assert!((next.mass() - f.mass()).abs() <= 1e-12 * f.mass().max(1.0));
            prop_assert!(next.values().iter().all(|x| *x >= 0.0));
        }
    }
}
