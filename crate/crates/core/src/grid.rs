//! Geometry and indexing of the periodic rectangular grid.
//!
//! The domain `[0, A] x [0, B]` is split into `M` columns and `N` rows of
//! identical cells. Opposite edges are identified, so every index is taken
//! modulo `M` (columns) or `N` (rows). Cells are stacked row-wise: cell
//! `(i, j)` has linear index `j * M + i`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// Column `i` and row `j` of a cell. Negative or overflowing values are
/// allowed and are wrapped periodically by the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CellCoord {
    pub i: i64,
    pub j: i64,
}

impl CellCoord {
    pub const fn new(i: i64, j: i64) -> Self {
        Self { i, j }
    }
}

/// Face centres of one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaceCenters {
    pub right: Point,
    pub top: Point,
    pub left: Point,
    pub bottom: Point,
}

/// Regular periodic `M x N` grid on `[0, A] x [0, B]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    width: f64,
    height: f64,
    cells_x: usize,
    cells_y: usize,
}

impl GridSpec {
    /// Smallest admissible number of cells in each direction; with two
    /// columns the left and right neighbours of a cell would coincide.
    pub const MIN_CELLS: usize = 3;

    pub fn new(width: f64, height: f64, cells_x: usize, cells_y: usize) -> Result<Self> {
        if !(width.is_finite() && width > 0.0 && height.is_finite() && height > 0.0) {
            return Err(Error::InvalidGrid(format!("domain sides must be positive, got A={width}, B={height}")));
        }
        if cells_x < Self::MIN_CELLS || cells_y < Self::MIN_CELLS {
            return Err(Error::InvalidGrid(format!(
                "need at least {} cells per direction, got {cells_x} x {cells_y}",
                Self::MIN_CELLS
            )));
        }
        if cells_x.checked_mul(cells_y).is_none_or(|n| n > u32::MAX as usize) {
            return Err(Error::InvalidGrid("too many cells".into()));
        }
        Ok(Self { width, height, cells_x, cells_y })
    }

    /// Square domain `[0, side]^2` with `cells x cells` cells.
    pub fn square(side: f64, cells: usize) -> Result<Self> {
        Self::new(side, side, cells, cells)
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    /// Number of columns `M`.
    pub fn cells_x(&self) -> usize {
        self.cells_x
    }

    /// Number of rows `N`.
    pub fn cells_y(&self) -> usize {
        self.cells_y
    }

    pub fn num_cells(&self) -> usize {
        self.cells_x * self.cells_y
    }

    pub fn step_x(&self) -> f64 {
        self.width / self.cells_x as f64
    }

    pub fn step_y(&self) -> f64 {
        self.height / self.cells_y as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.step_x() * self.step_y()
    }

    pub fn wrap_i(&self, i: i64) -> usize {
        i.rem_euclid(self.cells_x as i64) as usize
    }

    pub fn wrap_j(&self, j: i64) -> usize {
        j.rem_euclid(self.cells_y as i64) as usize
    }

    pub fn linear_index(&self, c: CellCoord) -> usize {
        self.wrap_j(c.j) * self.cells_x + self.wrap_i(c.i)
    }

    /// Inverse of [`GridSpec::linear_index`] for indices in `0..M*N`.
    pub fn coord_of(&self, index: usize) -> CellCoord {
        debug_assert!(index < self.num_cells());
        CellCoord::new((index % self.cells_x) as i64, (index / self.cells_x) as i64)
    }

    pub fn cell_center(&self, c: CellCoord) -> Point {
        let i = self.wrap_i(c.i) as f64;
        let j = self.wrap_j(c.j) as f64;
        Point::new((i + 0.5) * self.step_x(), (j + 0.5) * self.step_y())
    }

    /// Centres of the right, top, left and bottom faces, wrapped into
    /// `[0, A) x [0, B)`.
    pub fn face_centers(&self, c: CellCoord) -> FaceCenters {
        let i = self.wrap_i(c.i);
        let j = self.wrap_j(c.j);
        FaceCenters {
            right: self.vertical_face_center(i + 1, j),
            top: self.horizontal_face_center(i, j + 1),
            left: self.vertical_face_center(i, j),
            bottom: self.horizontal_face_center(i, j),
        }
    }

    /// Centre of the face parallel to the y-axis at `x = i * h_x`, row `j`.
    pub fn vertical_face_center(&self, i: usize, j: usize) -> Point {
        let i = i % self.cells_x;
        let j = j % self.cells_y;
        Point::new(i as f64 * self.step_x(), (j as f64 + 0.5) * self.step_y())
    }

    /// Centre of the face parallel to the x-axis at `y = j * h_y`, column `i`.
    pub fn horizontal_face_center(&self, i: usize, j: usize) -> Point {
        let i = i % self.cells_x;
        let j = j % self.cells_y;
        Point::new((i as f64 + 0.5) * self.step_x(), j as f64 * self.step_y())
    }

    /// Wrap an arbitrary point into `[0, A) x [0, B)`.
    pub fn wrap_point(&self, p: Point) -> Point {
        let mut x = p.x.rem_euclid(self.width);
        let mut y = p.y.rem_euclid(self.height);
        // rem_euclid can round up to the modulus for tiny negative inputs
        if x >= self.width {
            x = 0.0;
        }
        if y >= self.height {
            y = 0.0;
        }
        Point::new(x, y)
    }

    pub fn contains(&self, p: Point) -> bool {
        p.x >= 0.0 && p.x < self.width && p.y >= 0.0 && p.y < self.height
    }

    /// Cell whose centre is closest to `p` (after wrapping).
    pub fn nearest_cell(&self, p: Point) -> CellCoord {
        let p = self.wrap_point(p);
        let i = (p.x / self.step_x()).floor() as i64;
        let j = (p.y / self.step_y()).floor() as i64;
        CellCoord::new(self.wrap_i(i) as i64, self.wrap_j(j) as i64)
    }

    /// Iterate all cells in linear-index order.
    pub fn cells(&self) -> impl Iterator<Item = CellCoord> + '_ {
        (0..self.num_cells()).map(move |k| self.coord_of(k))
    }
}
