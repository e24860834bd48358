//! Grid geometry and a dense row-major cell container.
//!
//! The grid is axis-aligned with the world frame and centred on the ego
//! vehicle. `origin_offset` is the world position of the corner of cell
//! `(0, 0)` relative to the ego position; it carries the sub-cell residual left
//! over by integer realignment so cell boundaries stay on a fixed world
//! lattice.

use crate::error::{DogmError, Result};
use crate::geometry::Vec2;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub width_cells: usize,
    pub height_cells: usize,
    /// Cell edge length in meters.
    pub resolution: f64,
    pub origin_offset: Vec2,
}

impl Default for GridSpec {
    /// 500 × 500 cells at 0.2 m: a 100 m × 100 m ego-centred grid.
    fn default() -> Self {
        Self::centered(500, 500, 0.2)
    }
}

impl GridSpec {
    pub fn centered(width_cells: usize, height_cells: usize, resolution: f64) -> Self {
        let mut spec = Self {
            width_cells,
            height_cells,
            resolution,
            origin_offset: Vec2::zeros(),
        };
        spec.origin_offset = spec.nominal_offset();
        spec
    }

    pub fn validate(&self) -> Result<()> {
        if self.width_cells == 0 || self.height_cells == 0 {
            return Err(DogmError::param("grid", "dimensions must be positive"));
        }
        if !(self.resolution > 0.0 && self.resolution.is_finite()) {
            return Err(DogmError::param("grid.resolution", "must be positive"));
        }
        Ok(())
    }

    pub fn cell_count(&self) -> usize {
        self.width_cells * self.height_cells
    }

    /// Grid extent in meters (x, y).
    pub fn extent(&self) -> Vec2 {
        Vec2::new(
            self.width_cells as f64 * self.resolution,
            self.height_cells as f64 * self.resolution,
        )
    }

    /// The offset that puts the ego exactly at the grid centre.
    pub fn nominal_offset(&self) -> Vec2 {
        -self.extent() / 2.0
    }

    /// Same spec with the cell lattice snapped to integer multiples of the
    /// resolution in world coordinates, for an ego at `ego`.
    pub fn anchored_at(&self, ego: Vec2) -> Self {
        let corner = (ego + self.nominal_offset()) / self.resolution;
        let corner = Vec2::new(corner.x.round(), corner.y.round()) * self.resolution;
        Self {
            origin_offset: corner - ego,
            ..*self
        }
    }

    /// True when both specs describe the same lattice shape (size and resolution).
    pub fn same_shape(&self, other: &GridSpec) -> bool {
        self.width_cells == other.width_cells
            && self.height_cells == other.height_cells
            && self.resolution == other.resolution
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.width_cells + i
    }

    /// World corner of cell (0, 0) for an ego at `ego`.
    pub fn corner(&self, ego: Vec2) -> Vec2 {
        ego + self.origin_offset
    }

    pub fn cell_center(&self, ego: Vec2, i: usize, j: usize) -> Vec2 {
        self.corner(ego)
            + Vec2::new(
                (i as f64 + 0.5) * self.resolution,
                (j as f64 + 0.5) * self.resolution,
            )
    }

    /// Signed (possibly out-of-range) cell coordinates of a world point.
    pub fn world_to_cell_signed(&self, ego: Vec2, p: Vec2) -> (i64, i64) {
        let local = (p - self.corner(ego)) / self.resolution;
        (local.x.floor() as i64, local.y.floor() as i64)
    }

    pub fn world_to_cell(&self, ego: Vec2, p: Vec2) -> Option<(usize, usize)> {
        let (i, j) = self.world_to_cell_signed(ego, p);
        self.contains_cell(i, j).then_some((i as usize, j as usize))
    }

    pub fn contains_cell(&self, i: i64, j: i64) -> bool {
        i >= 0 && j >= 0 && (i as usize) < self.width_cells && (j as usize) < self.height_cells
    }
}

/// Dense row-major 2D container; cell `(i, j)` is column `i`, row `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid<T> {
    width: usize,
    height: usize,
    cells: Vec<T>,
}

impl<T: Clone> Grid<T> {
    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Self {
            width,
            height,
            cells: vec![value; width * height],
        }
    }
}

impl<T> Grid<T> {
    pub fn from_vec(width: usize, height: usize, cells: Vec<T>) -> Result<Self> {
        if cells.len() != width * height {
            return Err(DogmError::SpecMismatch(format!(
                "{} cells for a {}x{} grid",
                cells.len(),
                width,
                height
            )));
        }
        Ok(Self {
            width,
            height,
            cells,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn same_dims<U>(&self, other: &Grid<U>) -> bool {
        self.width == other.width && self.height == other.height
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> &T {
        &self.cells[j * self.width + i]
    }

    #[inline]
    pub fn get_mut(&mut self, i: usize, j: usize) -> &mut T {
        &mut self.cells[j * self.width + i]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.cells
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.cells
    }

    pub fn into_vec(self) -> Vec<T> {
        self.cells
    }

    pub fn iter(&self) -> std::slice::Iter<'_, T> {
        self.cells.iter()
    }

    pub fn map<U>(&self, f: impl Fn(&T) -> U) -> Grid<U> {
        Grid {
            width: self.width,
            height: self.height,
            cells: self.cells.iter().map(f).collect(),
        }
    }
}

impl<T: Sync> Grid<T> {
    /// Parallel per-cell map; output order is independent of the thread count.
    pub fn par_map<U: Send>(&self, f: impl Fn(&T) -> U + Sync + Send) -> Grid<U> {
        use rayon::prelude::*;
        Grid {
            width: self.width,
            height: self.height,
            cells: self.cells.par_iter().map(f).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn default_is_hundred_meters() {
        let spec = GridSpec::default();
        assert_eq!(spec.width_cells, 500);
        assert_eq!(spec.height_cells, 500);
        assert_eq!(spec.extent(), Vec2::new(100.0, 100.0));
        assert_eq!(spec.origin_offset, Vec2::new(-50.0, -50.0));
    }

    #[test]
    fn out_of_range_points_have_no_cell() {
        let spec = GridSpec::centered(10, 10, 1.0);
        assert_eq!(spec.world_to_cell(Vec2::zeros(), Vec2::new(5.1, 0.0)), None);
        assert_eq!(
            spec.world_to_cell(Vec2::zeros(), Vec2::new(4.9, -5.0)),
            Some((9, 0))
        );
    }

    proptest! {
        #[test]
        fn cell_world_round_trip(
            i in 0usize..500, j in 0usize..500,
            ex in -100.0f64..100.0, ey in -100.0f64..100.0,
        ) {
            let ego = Vec2::new(ex, ey);
            let spec = GridSpec::default().anchored_at(ego);
            let c = spec.cell_center(ego, i, j);
            prop_assert_eq!(spec.world_to_cell(ego, c), Some((i, j)));
            let back = spec.cell_center(ego, i, j);
            prop_assert!((back - c).abs().max() <= spec.resolution / 2.0);
        }

        #[test]
        fn anchored_offset_stays_within_half_cell(ex in -1e3f64..1e3, ey in -1e3f64..1e3) {
            let spec = GridSpec::default();
            let a = spec.anchored_at(Vec2::new(ex, ey));
            let d = a.origin_offset - spec.nominal_offset();
            prop_assert!(d.x.abs() <= spec.resolution / 2.0 + 1e-9);
            prop_assert!(d.y.abs() <= spec.resolution / 2.0 + 1e-9);
        }
    }
}
