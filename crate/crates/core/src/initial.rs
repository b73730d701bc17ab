//! Initial-condition families and their projection onto a grid.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::DensityField;
use crate::grid::Grid1D;
use crate::quadrature::cell_average;
use crate::Real;

/// Shape of the initial density, before mass normalisation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile<T> {
    /// `exp(-rate z)`
    Exponential { rate: T },
    /// `exp(-(z - shift)^2 / (2 sigma^2))`
    HalfGaussian { sigma: T, shift: T },
    /// Indicator of `(0, width)`.
    Step { width: T },
    /// Piecewise-linear table of `(z, value)` points, clamped to the end values outside its range.
    Table { points: Vec<(T, T)> },
}

impl<T: Real> Profile<T> {
    /// Checks the shape parameters (positive widths and rates, well-formed tables).
    pub fn validate(&self) -> Result<()> {
        let pos = |name: &str, v: T| {
            if v > T::zero() && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(format!("{name} must be positive, got {v}")))
            }
        };
        match self {
            Profile::Exponential { rate } => pos("rate", *rate),
            Profile::HalfGaussian { sigma, shift } => {
                pos("sigma", *sigma)?;
                if shift.is_finite() {
                    Ok(())
                } else {
                    Err(invalid("shift must be finite"))
                }
            }
            Profile::Step { width } => pos("width", *width),
            Profile::Table { points } => validate_table(points),
        }
    }

    /// Stretches the profile in `z` by `factor`, which scales its first moment.
    pub fn stretched(&self, factor: T) -> Self {
        match self {
            Profile::Exponential { rate } => Profile::Exponential { rate: *rate / factor },
            Profile::HalfGaussian { sigma, shift } => {
                Profile::HalfGaussian { sigma: *sigma * factor, shift: *shift * factor }
            }
            Profile::Step { width } => Profile::Step { width: *width * factor },
            Profile::Table { points } => {
                Profile::Table { points: points.iter().map(|&(z, v)| (z * factor, v)).collect() }
            }
        }
    }

    /// Whether the continuous profile is non-increasing in `z`.
    pub fn is_non_increasing(&self) -> bool {
        match self {
            Profile::Exponential { .. } | Profile::Step { .. } => true,
            Profile::HalfGaussian { shift, .. } => *shift <= T::zero(),
            Profile::Table { points } => points.windows(2).all(|w| w[1].1 <= w[0].1),
        }
    }

    /// Pointwise value of the profile.
    pub fn value(&self, z: T) -> T {
        match self {
            Profile::Exponential { rate } => (-*rate * z).exp(),
            Profile::HalfGaussian { sigma, shift } => {
                let s = (z - *shift) / *sigma;
                (-T::lit(0.5) * s * s).exp()
            }
            Profile::Step { width } => {
                if z < *width {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Profile::Table { points } => interpolate(points, z),
        }
    }

    fn cell_value(&self, grid: &Grid1D<T>, i: usize) -> T {
        let a = grid.face(i);
        let b = grid.face(i + 1);
        let dz = grid.dz();
        match self {
            Profile::Exponential { rate } => {
                let x = *rate * dz;
                (-*rate * a).exp() * (-(-x).exp_m1()) / x
            }
            Profile::Step { width } => ((b.min(*width) - a) / dz).max(T::zero()).min(T::one()),
            Profile::HalfGaussian { .. } => cell_average(|z| self.value(z), a, b),
            Profile::Table { points } => interpolate(points, grid.center(i)),
        }
    }
}

fn validate_table<T: Real>(points: &[(T, T)]) -> Result<()> {
    if points.len() < 2 {
        return Err(Error::Input("table needs at least two points".into()));
    }
    if let Some((z, v)) = points.iter().find(|(z, v)| !z.is_finite() || !v.is_finite() || *v < T::zero()) {
        return Err(Error::Input(format!("table entry ({z}, {v}) is negative or not finite")));
    }
    if points.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err(Error::Input("table z column must be strictly increasing".into()));
    }
    Ok(())
}

fn interpolate<T: Real>(points: &[(T, T)], z: T) -> T {
    let first = points[0];
    let last = points[points.len() - 1];
    if z <= first.0 {
        return first.1;
    }
    if z >= last.0 {
        return last.1;
    }
    let k = points.partition_point(|p| p.0 <= z);
    let (z0, v0) = points[k - 1];
    let (z1, v1) = points[k];
    let s = (z - z0) / (z1 - z0);
    v0 + s * (v1 - v0)
}

/// Parses a two-column `z value` table; `#` starts a comment.
pub fn parse_table<T: Real>(text: &str) -> Result<Vec<(T, T)>> {
    let mut points = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 2 {
            return Err(Error::Input(format!("line {}: expected two columns, got {}", lineno + 1, cols.len())));
        }
        let parse = |s: &str| {
            s.parse::<f64>().map(T::lit).map_err(|e| Error::Input(format!("line {}: {s:?}: {e}", lineno + 1)))
        };
        points.push((parse(cols[0])?, parse(cols[1])?));
    }
    validate_table(&points)?;
    Ok(points)
}

pub fn read_table<T: Real>(path: impl AsRef<Path>) -> Result<Vec<(T, T)>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
    parse_table(&text)
}

/// Initial data: a profile normalised to `target_mass`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialCondition<T> {
    pub profile: Profile<T>,
    pub target_mass: T,
}

impl<T: Real> InitialCondition<T> {
    pub fn new(profile: Profile<T>, target_mass: T) -> Self {
        Self { profile, target_mass }
    }

    pub fn exponential(rate: T, mass: T) -> Self {
        Self::new(Profile::Exponential { rate }, mass)
    }

    pub fn step(width: T, mass: T) -> Self {
        Self::new(Profile::Step { width }, mass)
    }

    pub fn half_gaussian(sigma: T, shift: T, mass: T) -> Self {
        Self::new(Profile::HalfGaussian { sigma, shift }, mass)
    }

    pub fn table_file(path: impl AsRef<Path>, mass: T) -> Result<Self> {
        Ok(Self::new(Profile::Table { points: read_table(path)? }, mass))
    }
}

/// Rescales `values` so that `sum v dz == mass`.
pub(crate) fn normalise_mass<T: Real>(values: &mut [T], dz: T, mass: T) -> Result<()> {
    let current = values.iter().copied().sum::<T>() * dz;
    if !(current > T::zero()) {
        return Err(invalid("profile has zero mass on the grid"));
    }
    let factor = mass / current;
    if (factor - T::one()).abs() > T::lit(4.0) * T::epsilon() {
        values.iter_mut().for_each(|v| *v = *v * factor);
    }
    Ok(())
}

/// Cell averages of the profile, rescaled to the target mass; time 0.
pub fn project_initial<T: Real>(ic: &InitialCondition<T>, grid: &Grid1D<T>) -> Result<DensityField<T>> {
    ic.profile.validate()?;
    if !(ic.target_mass > T::zero()) || !ic.target_mass.is_finite() {
        return Err(invalid(format!("target mass must be positive, got {}", ic.target_mass)));
    }
    let mut values: Vec<T> = (0..grid.n_cells()).map(|i| ic.profile.cell_value(grid, i)).collect();
    normalise_mass(&mut values, grid.dz(), ic.target_mass)?;
    DensityField::new(*grid, values, T::zero())
}

/// Table of `(z_i, n_i)` pairs for a field, suitable for re-projection.
pub fn field_table<T: Real>(field: &DensityField<T>) -> Vec<(T, T)> {
    field.values().iter().enumerate().map(|(i, &v)| (field.grid().center(i), v)).collect()
}
