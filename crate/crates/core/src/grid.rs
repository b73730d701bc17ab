//! Uniform cell-centred meshes on truncated half-line and half-plane boxes.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::Real;

/// Minimum number of cells per direction.
pub const MIN_CELLS: usize = 4;

/// Uniform grid on `(0, z_max)` with `n_cells` cells of width `dz`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D<T> {
    z_max: T,
    n_cells: usize,
    dz: T,
}

impl<T: Real> Grid1D<T> {
    pub fn new(z_max: T, n_cells: usize) -> Result<Self> {
        if !(z_max > T::zero()) || !z_max.is_finite() {
            return Err(invalid(format!("z_max must be positive and finite, got {z_max}")));
        }
        if n_cells < MIN_CELLS {
            return Err(invalid(format!("n_cells must be at least {MIN_CELLS}, got {n_cells}")));
        }
        Ok(Self { z_max, n_cells, dz: z_max / T::of_usize(n_cells) })
    }

    pub fn z_max(&self) -> T {
        self.z_max
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn dz(&self) -> T {
        self.dz
    }

    /// Centre of cell `i`, `(i + 1/2) dz`.
    #[inline]
    pub fn center(&self, i: usize) -> T {
        (T::of_usize(i) + T::lit(0.5)) * self.dz
    }

    /// Position of face `k`; face `k` is the left face of cell `k`.
    #[inline]
    pub fn face(&self, k: usize) -> T {
        T::of_usize(k) * self.dz
    }

    pub fn centers(&self) -> Vec<T> {
        (0..self.n_cells).map(|i| self.center(i)).collect()
    }

    /// Same cell count on a box stretched by `factor`.
    pub fn scaled(&self, factor: T) -> Result<Self> {
        Self::new(self.z_max * factor, self.n_cells)
    }
}

/// `make_grid_1d(z_max, n_cells)`.
pub fn make_grid_1d<T: Real>(z_max: T, n_cells: usize) -> Result<Grid1D<T>> {
    Grid1D::new(z_max, n_cells)
}

/// Uniform grid on the box `(y_min, y_max) x (0, z_max)`.
///
/// Cell `(j, i)` has centre `(y_min + (j + 1/2) dy, (i + 1/2) dz)`; storage is
/// row-major in `z`, so the flat index is `i * ny + j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid2D<T> {
    y_min: T,
    y_max: T,
    z_max: T,
    ny: usize,
    nz: usize,
    dy: T,
    dz: T,
}

impl<T: Real> Grid2D<T> {
    pub fn new(y_min: T, y_max: T, z_max: T, ny: usize, nz: usize) -> Result<Self> {
        if !(y_max > y_min) || !y_min.is_finite() || !y_max.is_finite() {
            return Err(invalid(format!("need y_min < y_max, got ({y_min}, {y_max})")));
        }
        if !(z_max > T::zero()) || !z_max.is_finite() {
            return Err(invalid(format!("z_max must be positive and finite, got {z_max}")));
        }
        if ny < MIN_CELLS || nz < MIN_CELLS {
            return Err(invalid(format!("ny and nz must be at least {MIN_CELLS}, got ({ny}, {nz})")));
        }
        Ok(Self { y_min, y_max, z_max, ny, nz, dy: (y_max - y_min) / T::of_usize(ny), dz: z_max / T::of_usize(nz) })
    }

    pub fn y_min(&self) -> T {
        self.y_min
    }
    pub fn y_max(&self) -> T {
        self.y_max
    }
    pub fn z_max(&self) -> T {
        self.z_max
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn nz(&self) -> usize {
        self.nz
    }
    pub fn dy(&self) -> T {
        self.dy
    }
    pub fn dz(&self) -> T {
        self.dz
    }
    pub fn n_cells(&self) -> usize {
        self.ny * self.nz
    }
    pub fn cell_area(&self) -> T {
        self.dy * self.dz
    }

    #[inline]
    pub fn index(&self, j: usize, i: usize) -> usize {
        i * self.ny + j
    }

    #[inline]
    pub fn y_center(&self, j: usize) -> T {
        self.y_min + (T::of_usize(j) + T::lit(0.5)) * self.dy
    }

    #[inline]
    pub fn z_center(&self, i: usize) -> T {
        (T::of_usize(i) + T::lit(0.5)) * self.dz
    }

    #[inline]
    pub fn y_face(&self, j: usize) -> T {
        self.y_min + T::of_usize(j) * self.dy
    }

    #[inline]
    pub fn z_face(&self, i: usize) -> T {
        T::of_usize(i) * self.dz
    }

    /// The `z` direction as a 1D grid.
    pub fn z_grid(&self) -> Grid1D<T> {
        Grid1D { z_max: self.z_max, n_cells: self.nz, dz: self.dz }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacing_and_first_center() {
        let g = make_grid_1d(10.0_f64, 100).unwrap();
        assert!((g.dz() - 0.1).abs() < 1e-15);
        assert!((g.center(0) - 0.05).abs() < 1e-15);
    }

    #[test]
    fn unit_box_with_four_cells() {
        let g = make_grid_1d(1.0_f64, 4).unwrap();
        assert_eq!(g.centers(), vec![0.125, 0.375, 0.625, 0.875]);
    }

    #[test]
    fn rejects_too_few_cells_and_bad_length() {
        assert!(matches!(make_grid_1d(10.0_f64, 3), Err(crate::Error::InvalidArgument(_))));
        assert!(make_grid_1d(0.0_f64, 10).is_err());
        assert!(make_grid_1d(-1.0, 10).is_err());
        assert!(make_grid_1d(f64::NAN, 10).is_err());
    }

    #[test]
    fn centers_strictly_interior_and_increasing() {
        let g = make_grid_1d(3.0f32, 7).unwrap();
        let c = g.centers();
        assert!(c.windows(2).all(|w| w[0] < w[1]));
        assert!(c[0] > 0.0 && *c.last().unwrap() < 3.0);
    }

    #[test]
    fn grid_2d_layout() {
        let g = Grid2D::new(-1.0_f64, 1.0, 2.0, 4, 8).unwrap();
        assert!((g.dy() - 0.5).abs() < 1e-15);
        assert!((g.dz() - 0.25).abs() < 1e-15);
        assert_eq!(g.index(3, 1), 7);
        assert!((g.y_center(0) + 0.75).abs() < 1e-15);
        assert!(Grid2D::new(1.0, 1.0, 2.0, 4, 4).is_err());
        assert!(Grid2D::new(0.0, 1.0, 2.0, 3, 4).is_err());
    }
}
