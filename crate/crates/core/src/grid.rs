//! Rectangular scan grids over the floor plane.
//!
//! Cells are indexed row-major, rows along +y and columns along +x:
//! `index = row * cols + col`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::scene::Room;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    /// Lower-left corner `(x0, y0)` of the covered rectangle.
    pub origin: (f64, f64),
    pub cell: f64,
    pub rows: usize,
    pub cols: usize,
    /// Refinement depth, 0 for the coarse pass.
    pub level: u32,
}

impl Grid {
    pub fn new(origin: (f64, f64), cell: f64, rows: usize, cols: usize, level: u32) -> Result<Self> {
        let g = Grid { origin, cell, rows, cols, level };
        if !(cell > 0.0 && cell.is_finite()) {
            return Err(invalid("grid.cell", "must be positive"));
        }
        if rows == 0 || cols == 0 {
            return Err(invalid("grid.rows/cols", "must be positive"));
        }
        if !(origin.0.is_finite() && origin.1.is_finite()) {
            return Err(invalid("grid.origin", "must be finite"));
        }
        Ok(g)
    }

    /// Whole-room grid of square cells. If the room is not a multiple of the
    /// cell size, the grid is centered and the leftover margin is not scanned.
    pub fn covering(room: &Room, cell: f64, level: u32) -> Result<Self> {
        let count = |extent: f64| {
            let n = extent / cell;
            if (n - n.round()).abs() < 1e-9 {
                n.round() as usize
            } else {
                n.floor() as usize
            }
        };
        let (cols, rows) = (count(room.dx).max(1), count(room.dy).max(1));
        let x0 = (room.dx - cols as f64 * cell) / 2.0;
        let y0 = (room.dy - rows as f64 * cell) / 2.0;
        Grid::new((x0, y0), cell, rows, cols, level)
    }

    /// Square window of side about `span` centered on `(cx, cy)`, shifted as
    /// needed to stay inside the room.
    pub fn window(room: &Room, center: (f64, f64), cell: f64, span: f64, level: u32) -> Result<Self> {
        if !(span > 0.0) {
            return Err(invalid("grid.span", "must be positive"));
        }
        let n = ((span / cell).round() as usize).max(1);
        let side = n as f64 * cell;
        let place = |c: f64, extent: f64| {
            if side >= extent {
                (extent - side) / 2.0
            } else {
                (c - side / 2.0).clamp(0.0, extent - side)
            }
        };
        Grid::new((place(center.0, room.dx), place(center.1, room.dy)), cell, n, n, level)
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn row_col(&self, index: usize) -> (usize, usize) {
        (index / self.cols, index % self.cols)
    }

    pub fn center(&self, index: usize) -> (f64, f64) {
        let (r, c) = self.row_col(index);
        (self.origin.0 + (c as f64 + 0.5) * self.cell, self.origin.1 + (r as f64 + 0.5) * self.cell)
    }

    pub fn centers(&self) -> Vec<(f64, f64)> {
        (0..self.len()).map(|i| self.center(i)).collect()
    }

    /// Cell containing `(x, y)`, if any. Points on a shared edge belong to the
    /// cell with the larger index.
    pub fn cell_of(&self, x: f64, y: f64) -> Option<usize> {
        let c = ((x - self.origin.0) / self.cell).floor();
        let r = ((y - self.origin.1) / self.cell).floor();
        if c < 0.0 || r < 0.0 || c >= self.cols as f64 || r >= self.rows as f64 {
            return None;
        }
        Some(r as usize * self.cols + c as usize)
    }

    /// True when the whole grid lies on the room floor.
    pub fn inside(&self, room: &Room) -> bool {
        let eps = 1e-9;
        self.origin.0 >= -eps
            && self.origin.1 >= -eps
            && self.origin.0 + self.cols as f64 * self.cell <= room.dx + eps
            && self.origin.1 + self.rows as f64 * self.cell <= room.dy + eps
    }
}
