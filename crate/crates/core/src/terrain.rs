//! Orchard tree map: elevation rasters, row extrapolation and tree records.

use crate::geometry::WorldPoint;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TerrainError {
    #[error("point ({x}, {y}) is outside the grid extent")]
    OutOfExtent { x: f64, y: f64 },
    #[error("point ({x}, {y}) needs NODATA cell at row {row}, col {col}")]
    NoDataCell { x: f64, y: f64, row: usize, col: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OrchardError {
    #[error("row {row}: spacing must be positive, got {spacing}")]
    BadSpacing { row: u32, spacing: f64 },
    #[error("row {row} is listed more than once")]
    DuplicateRow { row: u32 },
    #[error("tree {tree_id} at ({x}, {y}): {surface} lookup failed: {source}")]
    Sampling {
        tree_id: String,
        x: f64,
        y: f64,
        surface: &'static str,
        #[source]
        source: TerrainError,
    },
    #[error("tree {tree_id} at ({x}, {y}): surface {top} is below terrain {base}")]
    TopBelowBase {
        tree_id: String,
        x: f64,
        y: f64,
        base: f64,
        top: f64,
    },
}

/// Georeferenced elevation raster (DTM or DSM).
///
/// `values` is row-major with the first row northernmost, as in ESRI ASCII grids.
/// Values are attached to cell centers.
#[derive(Debug, Clone, PartialEq)]
pub struct TerrainGrid {
    pub ncols: usize,
    pub nrows: usize,
    pub xll: f64,
    pub yll: f64,
    pub cellsize: f64,
    pub nodata: Option<f64>,
    pub values: Vec<f64>,
}

impl TerrainGrid {
    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.ncols + col]
    }

    pub fn is_nodata(&self, v: f64) -> bool {
        match self.nodata {
            Some(nd) => v == nd || v.is_nan(),
            None => v.is_nan(),
        }
    }

    /// World coordinates of the center of cell `(row, col)`.
    pub fn cell_center(&self, row: usize, col: usize) -> (f64, f64) {
        (
            self.xll + (col as f64 + 0.5) * self.cellsize,
            self.yll + (self.nrows as f64 - row as f64 - 0.5) * self.cellsize,
        )
    }

    pub fn extent(&self) -> (f64, f64, f64, f64) {
        (
            self.xll,
            self.yll,
            self.xll + self.ncols as f64 * self.cellsize,
            self.yll + self.nrows as f64 * self.cellsize,
        )
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (x0, y0, x1, y1) = self.extent();
        x >= x0 && x <= x1 && y >= y0 && y <= y1
    }

    /// Build a grid by evaluating `f` at every cell center.
    pub fn from_fn(
        ncols: usize,
        nrows: usize,
        xll: f64,
        yll: f64,
        cellsize: f64,
        f: impl Fn(f64, f64) -> f64,
    ) -> Self {
        let mut grid = TerrainGrid {
            ncols,
            nrows,
            xll,
            yll,
            cellsize,
            nodata: None,
            values: Vec::with_capacity(ncols * nrows),
        };
        for r in 0..nrows {
            for c in 0..ncols {
                let (x, y) = grid.cell_center(r, c);
                grid.values.push(f(x, y));
            }
        }
        grid
    }
}

/// Bilinear interpolation between the four surrounding cell centers.
///
/// Inside the half-cell border the stencil collapses onto the edge centers.
/// Only cells with non-zero weight must hold data.
pub fn sample_terrain(grid: &TerrainGrid, x: f64, y: f64) -> Result<f64, TerrainError> {
    if !x.is_finite() || !y.is_finite() || !grid.contains(x, y) {
        return Err(TerrainError::OutOfExtent { x, y });
    }
    let top = grid.yll + grid.nrows as f64 * grid.cellsize;
    let fc = ((x - grid.xll) / grid.cellsize - 0.5).clamp(0.0, (grid.ncols - 1) as f64);
    let fr = ((top - y) / grid.cellsize - 0.5).clamp(0.0, (grid.nrows - 1) as f64);
    let c0 = (fc.floor() as usize).min(grid.ncols.saturating_sub(2));
    let r0 = (fr.floor() as usize).min(grid.nrows.saturating_sub(2));
    let tx = fc - c0 as f64;
    let ty = fr - r0 as f64;

    let mut acc = 0.0;
    for (dr, wy) in [(0usize, 1.0 - ty), (1, ty)] {
        for (dc, wx) in [(0usize, 1.0 - tx), (1, tx)] {
            let w = wx * wy;
            if w == 0.0 {
                continue;
            }
            let (row, col) = (r0 + dr, c0 + dc);
            let v = grid.value(row, col);
            if grid.is_nodata(v) {
                return Err(TerrainError::NoDataCell { x, y, row, col });
            }
            acc += w * v;
        }
    }
    Ok(acc)
}

/// One orchard row as surveyed: RTK bases of its first and last trees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RowSpec {
    pub row: u32,
    pub start_x: f64,
    pub start_y: f64,
    pub end_x: f64,
    pub end_y: f64,
    pub spacing: f64,
}

/// A tree position along a row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RowPosition {
    pub col: u32,
    pub x: f64,
    pub y: f64,
}

// Slack for row lengths that are an exact multiple of the spacing up to rounding.
const COUNT_EPS: f64 = 1e-9;

/// `floor(length / spacing) + 1` evenly spaced positions from `start`; a residual
/// shorter than one spacing is dropped.
pub fn extrapolate_row(spec: &RowSpec) -> Vec<RowPosition> {
    let dx = spec.end_x - spec.start_x;
    let dy = spec.end_y - spec.start_y;
    let len = dx.hypot(dy);
    if len == 0.0 || !(spec.spacing > 0.0) {
        return vec![RowPosition {
            col: 0,
            x: spec.start_x,
            y: spec.start_y,
        }];
    }
    let n = (len / spec.spacing + COUNT_EPS).floor() as u32 + 1;
    let (ux, uy) = (dx / len, dy / len);
    (0..n)
        .map(|i| {
            let d = i as f64 * spec.spacing;
            RowPosition {
                col: i,
                x: spec.start_x + ux * d,
                y: spec.start_y + uy * d,
            }
        })
        .collect()
}

/// Renders tree identifiers as `R{row}C{col}`, zero padded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IdFormat {
    pub min_width: usize,
}

impl Default for IdFormat {
    fn default() -> Self {
        Self { min_width: 2 }
    }
}

impl IdFormat {
    pub fn render(&self, row: u32, col: u32, width: usize) -> String {
        let w = width.max(self.min_width);
        format!("R{row:0w$}C{col:0w$}")
    }

    /// Width wide enough for the largest index, never below `min_width`.
    pub fn width_for(&self, max_index: u32) -> usize {
        max_index.to_string().len().max(self.min_width)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeRecord {
    pub tree_id: String,
    pub row: u32,
    pub col: u32,
    pub base: WorldPoint,
    pub top: WorldPoint,
    /// In-row spacing of the tree's row, meters.
    pub spacing: f64,
}

impl TreeRecord {
    pub fn height(&self) -> f64 {
        self.top.z - self.base.z
    }

    /// Same tree with both points shifted by `-offset`.
    pub fn shifted(&self, dx: f64, dy: f64, dz: f64) -> TreeRecord {
        let mv = |p: WorldPoint| WorldPoint::new(p.x - dx, p.y - dy, p.z - dz);
        TreeRecord {
            base: mv(self.base),
            top: mv(self.top),
            ..self.clone()
        }
    }
}

/// Tree base altitude from the DTM, top altitude from the DSM at the same `(x, y)`.
pub fn build_tree_records(
    rows: &[RowSpec],
    dtm: &TerrainGrid,
    dsm: &TerrainGrid,
    id_format: IdFormat,
) -> Result<Vec<TreeRecord>, OrchardError> {
    let mut seen = std::collections::BTreeSet::new();
    let mut layout = Vec::with_capacity(rows.len());
    for spec in rows {
        if !(spec.spacing > 0.0) {
            return Err(OrchardError::BadSpacing {
                row: spec.row,
                spacing: spec.spacing,
            });
        }
        if !seen.insert(spec.row) {
            return Err(OrchardError::DuplicateRow { row: spec.row });
        }
        layout.push((spec, extrapolate_row(spec)));
    }

    let max_index = layout
        .iter()
        .flat_map(|(spec, pos)| [spec.row, pos.last().map_or(0, |p| p.col)])
        .max()
        .unwrap_or(0);
    let width = id_format.width_for(max_index);

    let mut out = Vec::new();
    for (spec, positions) in layout {
        for p in positions {
            let tree_id = id_format.render(spec.row, p.col, width);
            let sample = |grid: &TerrainGrid, surface: &'static str| {
                sample_terrain(grid, p.x, p.y).map_err(|source| OrchardError::Sampling {
                    tree_id: tree_id.clone(),
                    x: p.x,
                    y: p.y,
                    surface,
                    source,
                })
            };
            let base = sample(dtm, "DTM")?;
            let top = sample(dsm, "DSM")?;
            if top < base {
                return Err(OrchardError::TopBelowBase {
                    tree_id,
                    x: p.x,
                    y: p.y,
                    base,
                    top,
                });
            }
            out.push(TreeRecord {
                tree_id,
                row: spec.row,
                col: p.col,
                base: WorldPoint::new(p.x, p.y, base),
                top: WorldPoint::new(p.x, p.y, top),
                spacing: spec.spacing,
            });
        }
    }
    Ok(out)
}
