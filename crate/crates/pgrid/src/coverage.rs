//! Grid-cell occupancy: rasterizes a layout onto a coarse lattice (250 m
//! cells by default) and compares it against an external dataset gridded the
//! same way.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{PgridError, Result};
use crate::geo::geom::{bbox_of, bbox_union, point_in_polygon};
use crate::geo::GridLayout;

pub const DEFAULT_CELL_SIZE_M: f64 = 250.0;

/// Sparse occupancy lattice. Cell (i, j) covers the half-open square
/// `[origin + i*cell, origin + (i+1)*cell)` on each axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellGrid {
    pub cell_size: f64,
    pub origin: [f64; 2],
    pub occupied: BTreeSet<(i64, i64)>,
    pub source: String,
}

impl CellGrid {
    pub fn new(cell_size: f64, origin: [f64; 2], source: impl Into<String>) -> Self {
        CellGrid {
            cell_size,
            origin,
            occupied: BTreeSet::new(),
            source: source.into(),
        }
    }

    #[inline]
    pub fn cell_of(&self, x: f64, y: f64) -> (i64, i64) {
        (
            ((x - self.origin[0]) / self.cell_size).floor() as i64,
            ((y - self.origin[1]) / self.cell_size).floor() as i64,
        )
    }

    pub fn insert_point(&mut self, x: f64, y: f64) {
        let c = self.cell_of(x, y);
        self.occupied.insert(c);
    }

    /// Marks every cell whose half-open box the segment passes through
    /// (Amanatides-Woo lattice traversal; a segment running exactly on a
    /// boundary belongs to the upper cell, consistent with `floor`).
    pub fn insert_segment(&mut self, a: [f64; 2], b: [f64; 2]) {
        let start = self.cell_of(a[0], a[1]);
        let end = self.cell_of(b[0], b[1]);
        self.occupied.insert(start);
        if start == end {
            return;
        }
        let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
        let step_x: i64 = if dx > 0.0 { 1 } else { -1 };
        let step_y: i64 = if dy > 0.0 { 1 } else { -1 };
        // parameter t at which the ray crosses the next x/y boundary
        let next_boundary = |cell: i64, step: i64, origin: f64| -> f64 {
            let edge = if step > 0 { cell + 1 } else { cell };
            origin + edge as f64 * self.cell_size
        };
        let mut t_max_x = if dx == 0.0 {
            f64::INFINITY
        } else {
            (next_boundary(start.0, step_x, self.origin[0]) - a[0]) / dx
        };
        let mut t_max_y = if dy == 0.0 {
            f64::INFINITY
        } else {
            (next_boundary(start.1, step_y, self.origin[1]) - a[1]) / dy
        };
        let t_delta_x = if dx == 0.0 {
            f64::INFINITY
        } else {
            self.cell_size / dx.abs()
        };
        let t_delta_y = if dy == 0.0 {
            f64::INFINITY
        } else {
            self.cell_size / dy.abs()
        };

        let mut cell = start;
        let max_steps =
            ((end.0 - start.0).abs() + (end.1 - start.1).abs()) as usize + 4;
        for _ in 0..max_steps {
            if t_max_x <= t_max_y {
                if t_max_x > 1.0 {
                    break;
                }
                cell.0 += step_x;
                t_max_x += t_delta_x;
            } else {
                if t_max_y > 1.0 {
                    break;
                }
                cell.1 += step_y;
                t_max_y += t_delta_y;
            }
            self.occupied.insert(cell);
            if cell == end {
                break;
            }
        }
        self.occupied.insert(end);
    }

    /// Marks cells intersecting the polygon: cells crossed by its edges plus
    /// cells whose center lies inside (covering cells fully interior to the
    /// polygon).
    pub fn insert_polygon(&mut self, ring: &[[f64; 2]]) {
        let n = ring.len();
        if n == 0 {
            return;
        }
        for i in 0..n {
            self.insert_segment(ring[i], ring[(i + 1) % n]);
        }
        if let Some(bbox) = bbox_of(ring) {
            let lo = self.cell_of(bbox[0], bbox[1]);
            let hi = self.cell_of(bbox[2], bbox[3]);
            for i in lo.0..=hi.0 {
                for j in lo.1..=hi.1 {
                    if self.occupied.contains(&(i, j)) {
                        continue;
                    }
                    let cx = self.origin[0] + (i as f64 + 0.5) * self.cell_size;
                    let cy = self.origin[1] + (j as f64 + 0.5) * self.cell_size;
                    if point_in_polygon([cx, cy], ring) {
                        self.occupied.insert((i, j));
                    }
                }
            }
        }
    }

    pub fn len(&self) -> usize {
        self.occupied.len()
    }

    pub fn is_empty(&self) -> bool {
        self.occupied.is_empty()
    }
}

/// World bbox of every feature in the layout, or None when empty.
fn layout_bbox(layout: &GridLayout) -> Option<[f64; 4]> {
    let mut bbox: Option<[f64; 4]> = None;
    let mut take = |b: Option<[f64; 4]>| {
        if let Some(b) = b {
            bbox = Some(match bbox {
                None => b,
                Some(cur) => bbox_union(cur, b),
            });
        }
    };
    let pole_coords: Vec<[f64; 2]> = layout.poles.points.iter().map(|p| p.xy()).collect();
    take(bbox_of(&pole_coords));
    for line in &layout.line_skeletons.lines {
        take(bbox_of(&line.vertices));
    }
    for poly in &layout.line_polygons {
        take(bbox_of(&poly.exterior));
    }
    bbox
}

/// Default lattice registration: the layout bbox minimum snapped down to a
/// cell-size multiple.
pub fn default_origin(layout: &GridLayout, cell_size: f64) -> [f64; 2] {
    match layout_bbox(layout) {
        Some(b) => [
            (b[0] / cell_size).floor() * cell_size,
            (b[1] / cell_size).floor() * cell_size,
        ],
        None => [0.0, 0.0],
    }
}

/// A cell is occupied iff a pole lies in it or a skeleton segment or corridor
/// polygon intersects it.
pub fn gridify(
    layout: &GridLayout,
    cell_size: f64,
    origin: Option<[f64; 2]>,
    source: impl Into<String>,
) -> Result<CellGrid> {
    if !(cell_size > 0.0) {
        return Err(PgridError::InvalidConfig {
            reason: format!("cell size must be positive, got {cell_size}"),
        });
    }
    let origin = origin.unwrap_or_else(|| default_origin(layout, cell_size));
    let mut grid = CellGrid::new(cell_size, origin, source);
    for p in &layout.poles.points {
        grid.insert_point(p.x, p.y);
    }
    for line in &layout.line_skeletons.lines {
        for seg in line.vertices.windows(2) {
            grid.insert_segment(seg[0], seg[1]);
        }
    }
    for poly in &layout.line_polygons {
        grid.insert_polygon(&poly.exterior);
    }
    Ok(grid)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageComparison {
    pub both: BTreeSet<(i64, i64)>,
    pub only_ours: BTreeSet<(i64, i64)>,
    pub only_external: BTreeSet<(i64, i64)>,
}

/// Exact set algebra over two grids on the same lattice. `only_ours` is the
/// newly mapped area.
pub fn compare(ours: &CellGrid, external: &CellGrid) -> Result<CoverageComparison> {
    if ours.cell_size != external.cell_size {
        return Err(PgridError::LatticeMismatch {
            reason: format!("cell sizes {} vs {}", ours.cell_size, external.cell_size),
        });
    }
    if ours.origin != external.origin {
        return Err(PgridError::LatticeMismatch {
            reason: format!("origins {:?} vs {:?}", ours.origin, external.origin),
        });
    }
    Ok(CoverageComparison {
        both: ours.occupied.intersection(&external.occupied).copied().collect(),
        only_ours: ours.occupied.difference(&external.occupied).copied().collect(),
        only_external: external.occupied.difference(&ours.occupied).copied().collect(),
    })
}

/// Serializable summary of a comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub cell_size: f64,
    pub origin: [f64; 2],
    pub n_ours: usize,
    pub n_external: usize,
    pub n_both: usize,
    pub n_newly_mapped: usize,
    pub newly_mapped_cells: Vec<[i64; 2]>,
}

pub fn coverage_report(
    ours: &CellGrid,
    external: &CellGrid,
    cmp: &CoverageComparison,
) -> CoverageReport {
    CoverageReport {
        cell_size: ours.cell_size,
        origin: ours.origin,
        n_ours: ours.len(),
        n_external: external.len(),
        n_both: cmp.both.len(),
        n_newly_mapped: cmp.only_ours.len(),
        newly_mapped_cells: cmp.only_ours.iter().map(|&(i, j)| [i, j]).collect(),
    }
}
