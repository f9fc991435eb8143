//! Grid storage: geometry, argmax-collapsed semantic grids, per-class score
//! grids and boolean masks.

use serde::{Deserialize, Serialize};

use crate::class::{SemanticClass, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Spatial layout shared by every grid of a pipeline.
///
/// Rows grow towards the agent's back: forward (+z) is up, right (+x) is
/// towards larger column indices.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub width: usize,
    pub height: usize,
    /// Meters per cell.
    pub cell_size: f32,
    pub agent_col: usize,
    pub agent_row: usize,
}

impl GridGeometry {
    /// Square grid covering `extent` meters with the agent in the center cell.
    pub fn square(cells: usize, extent: f32) -> Self {
        Self {
            width: cells,
            height: cells,
            cell_size: extent / cells as f32,
            agent_col: cells / 2,
            agent_row: cells / 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidArgument("empty grid".into()));
        }
        if !(self.cell_size.is_finite() && self.cell_size > 0.0) {
            return Err(Error::InvalidArgument(format!("cell size {} must be positive", self.cell_size)));
        }
        if self.agent_col >= self.width || self.agent_row >= self.height {
            return Err(Error::InvalidArgument("agent cell out of bounds".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, col: usize, row: usize) -> usize {
        row * self.width + col
    }

    /// Cell containing the agent-frame ground point `(x, z)`, if in bounds.
    #[inline]
    pub fn cell_of(&self, x: f64, z: f64) -> Option<(usize, usize)> {
        let cs = self.cell_size as f64;
        let col = self.agent_col as f64 + (x / cs).round();
        let row = self.agent_row as f64 - (z / cs).round();
        if col >= 0.0 && row >= 0.0 && col < self.width as f64 && row < self.height as f64 {
            Some((col as usize, row as usize))
        } else {
            None
        }
    }

    /// Agent-frame `(x, z)` of a cell center.
    #[inline]
    pub fn cell_center(&self, col: usize, row: usize) -> (f64, f64) {
        let cs = self.cell_size as f64;
        ((col as f64 - self.agent_col as f64) * cs, (self.agent_row as f64 - row as f64) * cs)
    }
}

impl Default for GridGeometry {
    /// 128 × 128 cells over 100 m.
    fn default() -> Self {
        Self::square(128, 100.0)
    }
}

/// Egocentric semantic grid, one class per cell, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SemanticGrid {
    pub geometry: GridGeometry,
    pub cells: Vec<SemanticClass>,
    pub timestamp: f64,
}

impl SemanticGrid {
    /// All-unknown grid.
    pub fn unknown(geometry: GridGeometry, timestamp: f64) -> Self {
        Self { geometry, cells: vec![SemanticClass::Unknown; geometry.len()], timestamp }
    }

    pub fn filled(geometry: GridGeometry, class: SemanticClass, timestamp: f64) -> Self {
        Self { geometry, cells: vec![class; geometry.len()], timestamp }
    }

    pub fn from_cells(geometry: GridGeometry, cells: Vec<SemanticClass>, timestamp: f64) -> Result<Self> {
        if cells.len() != geometry.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} cells for a {}x{} grid",
                cells.len(),
                geometry.width,
                geometry.height
            )));
        }
        Ok(Self { geometry, cells, timestamp })
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.geometry.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.geometry.height
    }

    #[inline]
    pub fn get(&self, col: usize, row: usize) -> SemanticClass {
        self.cells[self.geometry.index(col, row)]
    }

    #[inline]
    pub fn set(&mut self, col: usize, row: usize, class: SemanticClass) {
        let i = self.geometry.index(col, row);
        self.cells[i] = class;
    }

    pub fn count(&self, class: SemanticClass) -> usize {
        self.cells.iter().filter(|&&c| c == class).count()
    }

    pub fn ensure_same_geometry(&self, other: &SemanticGrid) -> Result<()> {
        if self.geometry != other.geometry {
            return Err(Error::GeometryMismatch(format!("{:?} vs {:?}", self.geometry, other.geometry)));
        }
        Ok(())
    }
}

/// Per-cell class scores, `F = NUM_CLASSES` values per cell, cell-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilisticGrid<T> {
    pub geometry: GridGeometry,
    pub features: Vec<T>,
}

impl<T: Scalar> ProbabilisticGrid<T> {
    pub fn new(geometry: GridGeometry, features: Vec<T>) -> Result<Self> {
        if features.len() != geometry.len() * NUM_CLASSES {
            return Err(Error::DimensionMismatch(format!("{} features for {} cells", features.len(), geometry.len())));
        }
        Ok(Self { geometry, features })
    }

    /// One-hot expansion of a semantic grid.
    pub fn one_hot(grid: &SemanticGrid) -> Self {
        let mut features = vec![T::zero(); grid.cells.len() * NUM_CLASSES];
        for (i, c) in grid.cells.iter().enumerate() {
            features[i * NUM_CLASSES + c.index()] = T::one();
        }
        Self { geometry: grid.geometry, features }
    }

    /// Uniform scores `1/F` in every cell.
    pub fn uniform(geometry: GridGeometry) -> Self {
        let v = T::one() / T::of(NUM_CLASSES as f64);
        Self { geometry, features: vec![v; geometry.len() * NUM_CLASSES] }
    }

    #[inline]
    pub fn cell(&self, i: usize) -> &[T] {
        &self.features[i * NUM_CLASSES..(i + 1) * NUM_CLASSES]
    }

    /// Collapse to the highest-scoring class per cell; ties go to the lower id.
    pub fn argmax(&self, timestamp: f64) -> SemanticGrid {
        let cells = (0..self.geometry.len())
            .map(|i| {
                let s = self.cell(i);
                let mut best = 0;
                for k in 1..NUM_CLASSES {
                    if s[k] > s[best] {
                        best = k;
                    }
                }
                SemanticClass::ALL[best]
            })
            .collect();
        SemanticGrid { geometry: self.geometry, cells, timestamp }
    }
}

/// Boolean cell mask in the same row-major layout as grids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask {
    pub width: usize,
    pub height: usize,
    pub bits: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize, value: bool) -> Self {
        Self { width, height, bits: vec![value; width * height] }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for row in 0..height {
            for col in 0..width {
                bits.push(f(col, row));
            }
        }
        Self { width, height, bits }
    }

    #[inline]
    pub fn get(&self, col: usize, row: usize) -> bool {
        self.bits[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, col: usize, row: usize, v: bool) {
        self.bits[row * self.width + col] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn any(&self) -> bool {
        self.bits.iter().any(|&b| b)
    }
}
