//! Cell-averaged densities on a 1D grid and their moments.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::Grid1D;
use crate::Real;

/// Nonnegative cell averages of a density, tagged with the time they hold at.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityField<T> {
    grid: Grid1D<T>,
    values: Vec<T>,
    time: T,
}

/// Weight selector for [`DensityField::weighted_integral`].
#[derive(Debug, Clone, PartialEq)]
pub enum Weight<T> {
    One,
    Z,
    /// `z^2 / 2`
    HalfZ2,
    /// `exp(alpha z)`
    Exp(T),
    /// One weight per cell centre.
    Sampled(Vec<T>),
}

impl<T: Real> DensityField<T> {
    pub fn new(grid: Grid1D<T>, values: Vec<T>, time: T) -> Result<Self> {
        if values.len() != grid.n_cells() {
            return Err(invalid(format!("field has {} values for a grid of {} cells", values.len(), grid.n_cells())));
        }
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(**v >= T::zero()) || !v.is_finite()) {
            return Err(invalid(format!("value {v} in cell {i} is negative or not finite")));
        }
        if !(time >= T::zero()) {
            return Err(invalid(format!("time must be nonnegative, got {time}")));
        }
        Ok(Self { grid, values, time })
    }

    /// Constant density `c` on `grid`.
    pub fn constant(grid: Grid1D<T>, c: T) -> Result<Self> {
        Self::new(grid, vec![c; grid.n_cells()], T::zero())
    }

    /// Builds a field from values already known to be valid (solver internals).
    pub(crate) fn from_parts(grid: Grid1D<T>, values: Vec<T>, time: T) -> Self {
        debug_assert_eq!(values.len(), grid.n_cells());
        Self { grid, values, time }
    }

    pub fn grid(&self) -> &Grid1D<T> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn time(&self) -> T {
        self.time
    }

    pub(crate) fn set_time(&mut self, time: T) {
        self.time = time;
    }

    pub fn with_time(mut self, time: T) -> Self {
        self.time = time;
        self
    }

    pub fn dz(&self) -> T {
        self.grid.dz()
    }

    /// Midpoint mass `sum n_i dz`.
    pub fn mass(&self) -> T {
        self.values.iter().copied().sum::<T>() * self.grid.dz()
    }

    pub fn max_density(&self) -> T {
        self.values.iter().copied().fold(T::zero(), T::max)
    }

    /// Boundary value `n(t, 0)` by one-sided quadratic extrapolation
    /// `(3 n_0 - n_1) / 2`, clipped at zero.
    pub fn trace(&self) -> T {
        let v = &self.values;
        ((T::lit(3.0) * v[0] - v[1]) * T::lit(0.5)).max(T::zero())
    }

    /// Value at the far end `z = z_max`, extrapolated like [`Self::trace`].
    pub fn far_trace(&self) -> T {
        let v = &self.values;
        let n = v.len();
        ((T::lit(3.0) * v[n - 1] - v[n - 2]) * T::lit(0.5)).max(T::zero())
    }

    /// Midpoint rule `sum w(z_i) n_i dz`.
    pub fn weighted_integral(&self, weight: &Weight<T>) -> Result<T> {
        let g = &self.grid;
        let dz = g.dz();
        let sum = match weight {
            Weight::One => self.values.iter().copied().sum::<T>(),
            Weight::Z => self.values.iter().enumerate().map(|(i, &n)| g.center(i) * n).sum(),
            Weight::HalfZ2 => self
                .values
                .iter()
                .enumerate()
                .map(|(i, &n)| {
                    let z = g.center(i);
                    T::lit(0.5) * z * z * n
                })
                .sum(),
            Weight::Exp(alpha) => {
                let top = (*alpha * g.center(g.n_cells() - 1)).exp();
                if !top.is_finite() {
                    return Err(Error::NumericOverflow { alpha: alpha.as_f64(), z_max: g.z_max().as_f64() });
                }
                self.values.iter().enumerate().map(|(i, &n)| (*alpha * g.center(i)).exp() * n).sum()
            }
            Weight::Sampled(w) => {
                if w.len() != self.values.len() {
                    return Err(invalid("sampled weight length does not match the grid"));
                }
                if let Some(i) = w.iter().position(|x| !x.is_finite()) {
                    return Err(invalid(format!("sampled weight is not finite at cell {i}")));
                }
                w.iter().zip(&self.values).map(|(&w, &n)| w * n).sum()
            }
        };
        Ok(sum * dz)
    }

    /// First moment `J = int z n`.
    pub fn first_moment(&self) -> T {
        self.weighted_integral(&Weight::Z).expect("polynomial weights are finite")
    }

    /// Half second moment `I = int z^2/2 n`.
    pub fn half_second_moment(&self) -> T {
        self.weighted_integral(&Weight::HalfZ2).expect("polynomial weights are finite")
    }

    /// Fraction of the mass held by the last 10% of the cells.
    pub fn boundary_mass_fraction(&self) -> T {
        let n = self.values.len();
        let start = n - (n / 10).max(1);
        let tail: T = self.values[start..].iter().copied().sum();
        let total: T = self.values.iter().copied().sum();
        if total > T::zero() {
            tail / total
        } else {
            T::zero()
        }
    }

    /// Cells non-increasing in `z` (up to a relative slack).
    pub fn is_non_increasing(&self, rel_tol: T) -> bool {
        let scale = self.max_density();
        self.values.windows(2).all(|w| w[1] <= w[0] + rel_tol * scale)
    }

    /// Same values multiplied by `factor`.
    pub fn scaled(&self, factor: T) -> Self {
        Self::from_parts(self.grid, self.values.iter().map(|&v| v * factor).collect(), self.time)
    }
}
